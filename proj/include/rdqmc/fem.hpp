#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "deformation.hpp"
#include "errors.hpp"

namespace rdqmc {

struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<bool> boundary;                 // per node
  double h = 0.0;
  std::size_t rings = 0;

  double signed_area(std::size_t t) const {
    const auto& [i, j, k] = triangles[t];
    const Vec2 &p = nodes[i], &q = nodes[j], &r = nodes[k];
    return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
  }
  Vec2 centroid(std::size_t t) const {
    const auto& [i, j, k] = triangles[t];
    return {(nodes[i][0] + nodes[j][0] + nodes[k][0]) / 3.0,
            (nodes[i][1] + nodes[j][1] + nodes[k][1]) / 3.0};
  }
  double area() const {
    double a = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) a += signed_area(t);
    return a;
  }
};

/// Concentric-ring triangulation of the unit disk: K = ceil(1/h) rings,
/// ring k at radius k/K with 6k equally spaced nodes, plus the centre node.
/// Neighbouring rings are stitched by merging their angular orders.
inline Mesh build_disk_mesh(double h) {
  if (!(h > 0.0 && h < 1.0)) throw ParameterError("mesh width h must lie in (0,1)");
  const std::size_t K = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(1.0 / h - 1e-9)));
  Mesh mesh;
  mesh.h = h;
  mesh.rings = K;
  mesh.nodes.push_back({0.0, 0.0});
  std::vector<std::size_t> start(K + 1, 0);
  for (std::size_t k = 1; k <= K; ++k) {
    start[k] = mesh.nodes.size();
    const std::size_t N = 6 * k;
    const double r = static_cast<double>(k) / static_cast<double>(K);
    for (std::size_t i = 0; i < N; ++i) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(N);
      if (k == K) mesh.nodes.push_back({std::cos(ang), std::sin(ang)});
      else mesh.nodes.push_back({r * std::cos(ang), r * std::sin(ang)});
    }
  }
  mesh.boundary.assign(mesh.nodes.size(), false);
  for (std::size_t i = start[K]; i < mesh.nodes.size(); ++i) mesh.boundary[i] = true;

  auto add = [&](int a, int b, int c) {
    const Vec2 &p = mesh.nodes[a], &q = mesh.nodes[b], &r = mesh.nodes[c];
    const double cr = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
    if (cr > 0.0) mesh.triangles.push_back({a, b, c});
    else mesh.triangles.push_back({a, c, b});
  };

  for (std::size_t i = 0; i < 6; ++i)
    add(0, static_cast<int>(start[1] + i), static_cast<int>(start[1] + (i + 1) % 6));

  for (std::size_t k = 2; k <= K; ++k) {
    const std::size_t M = 6 * (k - 1), N = 6 * k;
    auto in = [&](std::size_t i) { return static_cast<int>(start[k - 1] + i % M); };
    auto out = [&](std::size_t o) { return static_cast<int>(start[k] + o % N); };
    std::size_t i = 0, o = 0;
    while (i < M || o < N) {
      // Advance along whichever ring has the smaller next angle; exact in integers.
      if (o < N && (i == M || (o + 1) * M <= (i + 1) * N)) {
        add(in(i), out(o), out(o + 1));
        ++o;
      } else {
        add(in(i), out(o), in(i + 1));
        ++i;
      }
    }
  }

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vec2 c = mesh.centroid(t);
    if (c[0] == 0.0 && c[1] == 0.0) throw Error("mesh construction placed a centroid at the origin");
  }
  return mesh;
}

inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "# nodes " << mesh.nodes.size() << "\n";
  for (const auto& p : mesh.nodes) buf << p[0] << " " << p[1] << "\n";
  buf << "# triangles " << mesh.triangles.size() << "\n";
  for (const auto& t : mesh.triangles) buf << t[0] << " " << t[1] << " " << t[2] << "\n";
  os << buf.str();
}

/// Node vector block: "# vector <label> <N>" then N values.
inline void write_node_vector(std::ostream& os, std::span<const double> v, const std::string& label) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "# vector " << label << " " << v.size() << "\n";
  for (double x : v) buf << x << "\n";
  os << buf.str();
}

/// Compressed sparse row matrix with sorted column indices.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<int> col;
  std::vector<double> val;

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc += val[p] * x[col[p]];
      y[i] = acc;
    }
  }

  double at(std::size_t i, std::size_t j) const {
    auto b = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    auto e = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    auto it = std::lower_bound(b, e, static_cast<int>(j));
    return (it != e && *it == static_cast<int>(j)) ? val[static_cast<std::size_t>(it - col.begin())] : 0.0;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = at(i, i);
    return d;
  }

  double quadratic_form(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) row += val[p] * x[col[p]];
      acc += x[i] * row;
    }
    return acc;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients; x holds the initial guess.
inline CgResult conjugate_gradient(const CsrMatrix& A, std::span<const double> b, std::span<double> x,
                                   double rtol = 1e-10, std::size_t max_iter = 0) {
  const std::size_t n = A.n;
  if (b.size() != n || x.size() != n) throw ParameterError("cg: dimension mismatch");
  if (max_iter == 0) max_iter = 10 * std::max<std::size_t>(n, 1);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {};
  }
  std::vector<double> inv_diag = A.diagonal();
  for (auto& d : inv_diag) {
    if (!(d > 0.0)) throw SolverError("cg: nonpositive diagonal entry");
    d = 1.0 / d;
  }
  std::vector<double> r(n), z(n), p(n), Ap(n);
  A.multiply(x, Ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  double rnorm = std::sqrt(dot(r, r));
  if (rnorm <= rtol * bnorm) return {0, rnorm / bnorm};
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    A.multiply(p, Ap);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) throw SolverError("cg: matrix not positive definite");
    const double alpha = rz / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    rnorm = std::sqrt(dot(r, r));
    if (rnorm <= rtol * bnorm) return {it, rnorm / bnorm};
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  std::ostringstream os;
  os << "cg did not converge in " << max_iter << " iterations, relative residual " << rnorm / bnorm;
  throw SolverError(os.str());
}

enum class NormKind { L2, H10 };

/// Per-triangle coefficients frozen at centroids: stiffness uses A, mass
/// uses w, load uses g, and g0 is an optional second load (initial data).
struct CentroidCoefficients {
  std::vector<Mat2> A;
  std::vector<double> w;
  std::vector<double> g;
  std::vector<double> g0;
};

struct FemSystem {
  CsrMatrix stiffness;
  CsrMatrix mass;
  std::vector<double> load;
  std::vector<double> load0;
};

struct FemSolution {
  std::vector<double> coefficients;  // all nodes, boundary entries zero
};

/// Mesh plus dof numbering, sparsity patterns, per-triangle geometry and the
/// norm matrices (w = 1 mass and A = I stiffness over all nodes).
class FemSpace {
 public:
  explicit FemSpace(Mesh mesh) : mesh_(std::move(mesh)) {
    const std::size_t nn = mesh_.nodes.size();
    dof_.assign(nn, -1);
    for (std::size_t i = 0; i < nn; ++i)
      if (!mesh_.boundary[i]) {
        dof_[i] = static_cast<int>(nodes_of_dof_.size());
        nodes_of_dof_.push_back(static_cast<int>(i));
      }
    if (nodes_of_dof_.empty()) throw ParameterError("mesh has no interior nodes");

    const std::size_t nt = mesh_.triangles.size();
    area_.resize(nt);
    centroid_.resize(nt);
    grad_.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      const double T = mesh_.signed_area(t);
      if (!(T > 0.0)) throw Error("mesh triangle with nonpositive area");
      area_[t] = T;
      centroid_[t] = mesh_.centroid(t);
      const auto& tri = mesh_.triangles[t];
      const Vec2 &p0 = mesh_.nodes[tri[0]], &p1 = mesh_.nodes[tri[1]], &p2 = mesh_.nodes[tri[2]];
      const double s = 1.0 / (2.0 * T);
      grad_[t] = {Vec2{(p1[1] - p2[1]) * s, (p2[0] - p1[0]) * s},
                  Vec2{(p2[1] - p0[1]) * s, (p0[0] - p2[0]) * s},
                  Vec2{(p0[1] - p1[1]) * s, (p1[0] - p0[0]) * s}};
    }

    std::vector<int> identity(nn);
    for (std::size_t i = 0; i < nn; ++i) identity[i] = static_cast<int>(i);
    build_pattern(dof_, nodes_of_dof_.size(), interior_, slot_interior_);
    build_pattern(identity, nn, full_, slot_full_);

    CentroidCoefficients unit;
    unit.A.assign(nt, Mat2{});
    unit.w.assign(nt, 1.0);
    norm_mass_ = full_;
    norm_stiff_ = full_;
    accumulate(unit, slot_full_, norm_stiff_, norm_mass_);
  }

  const Mesh& mesh() const { return mesh_; }
  std::size_t num_nodes() const { return mesh_.nodes.size(); }
  std::size_t num_dofs() const { return nodes_of_dof_.size(); }
  std::size_t num_triangles() const { return mesh_.triangles.size(); }
  const std::vector<Vec2>& centroids() const { return centroid_; }
  double triangle_area(std::size_t t) const { return area_[t]; }
  int dof_of_node(std::size_t i) const { return dof_[i]; }
  int node_of_dof(std::size_t d) const { return nodes_of_dof_[d]; }
  const CsrMatrix& norm_mass() const { return norm_mass_; }
  const CsrMatrix& norm_stiffness() const { return norm_stiff_; }

  /// Interior-dof system with Dirichlet nodes eliminated.
  FemSystem assemble(const CentroidCoefficients& c) const {
    check(c);
    FemSystem sys;
    sys.stiffness = interior_;
    sys.mass = interior_;
    accumulate(c, slot_interior_, sys.stiffness, sys.mass);
    sys.load = assemble_load(c.g);
    if (!c.g0.empty()) sys.load0 = assemble_load(c.g0);
    return sys;
  }

  /// Unconstrained all-node stiffness and mass.
  FemSystem assemble_full(const CentroidCoefficients& c) const {
    check(c);
    FemSystem sys;
    sys.stiffness = full_;
    sys.mass = full_;
    accumulate(c, slot_full_, sys.stiffness, sys.mass);
    return sys;
  }

  /// Load over interior dofs, centroid rule: g(c_t) |T| / 3 per vertex.
  std::vector<double> assemble_load(std::span<const double> g) const {
    std::vector<double> b(num_dofs(), 0.0);
    if (g.empty()) return b;
    for (std::size_t t = 0; t < num_triangles(); ++t) {
      const double v = g[t] * area_[t] / 3.0;
      for (int node : mesh_.triangles[t])
        if (dof_[node] >= 0) b[dof_[node]] += v;
    }
    return b;
  }

  std::vector<double> to_full(std::span<const double> interior) const {
    std::vector<double> out(num_nodes(), 0.0);
    for (std::size_t d = 0; d < num_dofs(); ++d) out[nodes_of_dof_[d]] = interior[d];
    return out;
  }

  std::vector<double> to_interior(std::span<const double> full) const {
    std::vector<double> out(num_dofs());
    for (std::size_t d = 0; d < num_dofs(); ++d) out[d] = full[nodes_of_dof_[d]];
    return out;
  }

  double norm(std::span<const double> v, NormKind kind) const {
    if (v.size() != num_nodes()) throw ParameterError("norm: vector does not match mesh");
    const CsrMatrix& M = kind == NormKind::L2 ? norm_mass_ : norm_stiff_;
    return std::sqrt(std::max(0.0, M.quadratic_form(v)));
  }

 private:
  using Slots = std::array<std::ptrdiff_t, 9>;

  void check(const CentroidCoefficients& c) const {
    const std::size_t nt = num_triangles();
    if (c.A.size() != nt || c.w.size() != nt || (!c.g.empty() && c.g.size() != nt) ||
        (!c.g0.empty() && c.g0.size() != nt))
      throw ParameterError("coefficient arrays do not match triangle count");
  }

  void build_pattern(const std::vector<int>& map, std::size_t n, CsrMatrix& P,
                     std::vector<Slots>& slots) const {
    std::vector<std::vector<int>> rows(n);
    for (const auto& tri : mesh_.triangles)
      for (int a : tri)
        for (int b : tri)
          if (map[a] >= 0 && map[b] >= 0) rows[map[a]].push_back(map[b]);
    P.n = n;
    P.row_ptr.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = rows[i];
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      P.row_ptr[i + 1] = P.row_ptr[i] + r.size();
      P.col.insert(P.col.end(), r.begin(), r.end());
    }
    P.val.assign(P.col.size(), 0.0);
    slots.resize(mesh_.triangles.size());
    for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
      const auto& tri = mesh_.triangles[t];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const int i = map[tri[a]], j = map[tri[b]];
          std::ptrdiff_t slot = -1;
          if (i >= 0 && j >= 0) {
            auto first = P.col.begin() + static_cast<std::ptrdiff_t>(P.row_ptr[i]);
            auto last = P.col.begin() + static_cast<std::ptrdiff_t>(P.row_ptr[i + 1]);
            slot = std::lower_bound(first, last, j) - P.col.begin();
          }
          slots[t][3 * a + b] = slot;
        }
    }
  }

  // Triangle-order accumulation; the upper local triangle is computed once and
  // mirrored so the result is exactly symmetric.
  void accumulate(const CentroidCoefficients& c, const std::vector<Slots>& slots, CsrMatrix& K,
                  CsrMatrix& M) const {
    for (std::size_t t = 0; t < num_triangles(); ++t) {
      const auto& g = grad_[t];
      const Mat2& A = c.A[t];
      const double T = area_[t];
      const double m = c.w[t] * T / 12.0;
      for (int a = 0; a < 3; ++a) {
        const Vec2 Ag = A * g[a];
        for (int b = a; b < 3; ++b) {
          const double k = T * (Ag[0] * g[b][0] + Ag[1] * g[b][1]);
          const double mm = a == b ? 2.0 * m : m;
          const std::ptrdiff_t s1 = slots[t][3 * a + b];
          if (s1 < 0) continue;
          K.val[s1] += k;
          M.val[s1] += mm;
          if (a != b) {
            const std::ptrdiff_t s2 = slots[t][3 * b + a];
            K.val[s2] += k;
            M.val[s2] += mm;
          }
        }
      }
    }
  }

  Mesh mesh_;
  std::vector<int> dof_, nodes_of_dof_;
  std::vector<double> area_;
  std::vector<Vec2> centroid_;
  std::vector<std::array<Vec2, 3>> grad_;
  CsrMatrix interior_, full_, norm_mass_, norm_stiff_;
  std::vector<Slots> slot_interior_, slot_full_;
};

/// Pullback data of one PDE sampled at the triangle centroids of a space.
class PdeProblem {
 public:
  PdeProblem(const FemSpace& space, const PerturbationField& field, ScalarFn f, ScalarFn u0)
      : space_(&space), field_(field), at_(field, space.centroids()), f_(std::move(f)), u0_(std::move(u0)) {}

  const FemSpace& space() const { return *space_; }
  const PerturbationField& field() const { return field_; }

  /// A, det J, f_ref and u0_hat * det J at every centroid. active < s
  /// evaluates terms beyond `active` at y_j = 0.
  CentroidCoefficients coefficients(std::span<const double> y, std::size_t active = 0) const {
    const PerturbationField fld = active == 0 ? field_ : truncate(field_, active);
    const auto xis = fld.xi_values(y);
    const std::size_t nt = at_.size();
    CentroidCoefficients c;
    c.A.resize(nt);
    c.w.resize(nt);
    c.g.resize(nt);
    if (u0_) c.g0.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto ps = pullback_from(at_.value(t, xis), at_.point(t), f_, u0_);
      c.A[t] = ps.A;
      c.w[t] = ps.detJ;
      c.g[t] = ps.f_ref;
      if (u0_) c.g0[t] = ps.u0_hat * ps.detJ;
    }
    return c;
  }

 private:
  const FemSpace* space_;
  PerturbationField field_;
  FieldAtPoints at_;
  ScalarFn f_, u0_;
};

inline FemSolution solve_poisson(const FemSpace& space, const CentroidCoefficients& c) {
  const FemSystem sys = space.assemble(c);
  std::vector<double> x(space.num_dofs(), 0.0);
  conjugate_gradient(sys.stiffness, sys.load, x);
  return {space.to_full(x)};
}

inline FemSolution solve_poisson(const PdeProblem& problem, std::span<const double> y,
                                 std::size_t active = 0) {
  return solve_poisson(problem.space(), problem.coefficients(y, active));
}

}  // namespace rdqmc
