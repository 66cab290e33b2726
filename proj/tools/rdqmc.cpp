// Command-line driver: cbc, run-poisson, run-heat, truncation, verify.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "rdqmc/commands.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonFlags& f, bool need_config) {
  auto* opt = sub->add_option("--config", f.config, "JSON experiment config");
  if (need_config) opt->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory (overrides output.dir)");
  sub->add_option("--threads", f.threads, "worker threads")->check(CLI::Range(1u, 1024u));
  sub->add_option("--seed", f.seed, "shift seed (overrides seed)");
}

rdqmc::ExperimentConfig resolve(const CommonFlags& f) {
  rdqmc::ExperimentConfig c = rdqmc::load_config(f.config);
  if (!f.out.empty()) c.output.dir = f.out;
  if (f.seed) c.seed = *f.seed;
  rdqmc::validate(c);
  return c;
}

void print_slopes(const rdqmc::ErrorReport& rep) {
  for (const auto& [name, v] : rep.slopes) std::cout << "slope " << name << " = " << v << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomly shifted lattice QMC for PDEs on random domains"};
  app.require_subcommand(1);

  CommonFlags f;
  auto* cbc = app.add_subcommand("cbc", "construct generating vectors for every m in m_list");
  auto* poisson = app.add_subcommand("run-poisson", "QMC convergence study, Poisson problem");
  auto* heat = app.add_subcommand("run-heat", "QMC convergence study, heat problem");
  auto* trunc = app.add_subcommand("truncation", "dimension truncation study");
  auto* verify = app.add_subcommand("verify", "recurrence bounds and discretization checks");
  for (auto* sub : {cbc, poisson, heat, trunc}) add_common(sub, f, true);
  add_common(verify, f, false);
  std::string fault;
  verify->add_option("--inject-fault", fault, "")->group("")->check(CLI::IsMember({"tau"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (cbc->parsed()) {
      const auto c = resolve(f);
      const auto res = rdqmc::cmd_cbc(c, f.threads);
      for (const auto& gv : res.vectors)
        std::cout << "wrote " << (std::filesystem::path(c.output.dir) / rdqmc::vector_file_name(
                                      static_cast<int>(std::countr_zero(gv.n())))).string()
                  << "\n";
      std::cout << "wrote " << (std::filesystem::path(c.output.dir) / "cbc_report.csv").string() << "\n";
      return 0;
    }
    if (poisson->parsed() || heat->parsed()) {
      const auto c = resolve(f);
      const auto problem = poisson->parsed() ? rdqmc::Problem::Poisson : rdqmc::Problem::Heat;
      const auto rep = rdqmc::cmd_run(c, problem, f.threads);
      std::cout << "wrote " << (std::filesystem::path(c.output.dir) / rdqmc::run_file_name(c, problem)).string()
                << "\n";
      print_slopes(rep);
      return 0;
    }
    if (trunc->parsed()) {
      const auto c = resolve(f);
      const auto rep = rdqmc::cmd_truncation(c, f.threads);
      std::cout << "wrote " << (std::filesystem::path(c.output.dir) / rdqmc::truncation_file_name(c)).string()
                << "\n";
      print_slopes(rep);
      return 0;
    }
    rdqmc::VerifyOptions opt;
    opt.threads = f.threads;
    if (fault == "tau") opt.tau_fault = 1;
    const auto rep = rdqmc::cmd_verify(opt);
    if (!f.out.empty()) {
      rdqmc::write_text(std::filesystem::path(f.out) / "verify_report.txt", rep.table());
      std::cout << "wrote " << (std::filesystem::path(f.out) / "verify_report.txt").string() << "\n";
    }
    std::cout << rep.summary();
    if (!rep.passed()) {
      for (const auto& s : rep.suites)
        if (const auto* r = s.report.first_failure()) {
          std::cerr << "verify failed: " << s.name << " at " << r->tuple << "\n";
          break;
        }
      return 1;
    }
    std::cout << "verify passed\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
