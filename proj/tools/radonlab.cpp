// Command-line front end: run experiments from config files, re-check
// emitted certificates, list available experiments.
#include <CLI11.hpp>
#include <cstdio>

#include "radonlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sparse-domination numerical laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, cert_path, inputs_path;
  int64_t seed = -1;
  int threads = -1;

  auto* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("--config", config_path, "config file (key = value lines)")
      ->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--seed", seed, "RNG seed (overrides config)");
  run->add_option("--threads", threads, "worker threads, 0 = auto (overrides config)");

  auto* rev = app.add_subcommand("reverify", "re-derive a certificate from inputs");
  rev->add_option("certificate", cert_path, "certificate.json")->required();
  rev->add_option("inputs", inputs_path, "inputs.json")->required();

  auto* lst = app.add_subcommand("list-experiments", "print known experiment names");

  CLI11_PARSE(app, argc, argv);

  if (lst->parsed()) {
    std::printf("decay\nimproving\nsparse-certify\nscalespace\nllogl\n");
    return 0;
  }
  if (run->parsed()) {
    radonlab::RunOutcome r = radonlab::run_config(config_path, out_dir, seed, threads);
    std::printf("%s\n", r.message.c_str());
    return r.exit_code;
  }
  radonlab::RunOutcome r = radonlab::run_reverify(cert_path, inputs_path);
  std::printf("%s\n", r.message.c_str());
  return r.exit_code;
}
