#include "commands.hpp"

#include <CLI/CLI.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

using laadmm::cli::RunConfig;

namespace {

struct Flags {
  std::optional<std::string> config, case_path, map, mode, model, data, out;
  std::optional<int> parts, k, iters, max_iter, target_max_iter, count, tests, workers;
  std::optional<int> epochs, patience, batch, hidden;
  std::optional<double> rho, tol, target_tol, chi, lr;
  std::optional<std::uint64_t> seed;
  bool csv = false;
};

template <class T>
void set_if(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

template <class T>
void set_if(const std::optional<T>& flag, std::optional<T>& field) {
  if (flag) field = *flag;
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (f.config) cfg.load_json_file(*f.config);
  set_if(f.case_path, cfg.case_path);
  set_if(f.map, cfg.map_path);
  set_if(f.mode, cfg.mode);
  set_if(f.model, cfg.model_path);
  set_if(f.data, cfg.data_path);
  set_if(f.out, cfg.out);
  set_if(f.parts, cfg.parts);
  set_if(f.rho, cfg.rho);
  set_if(f.k, cfg.k);
  set_if(f.iters, cfg.iterations);
  set_if(f.tol, cfg.tol);
  set_if(f.max_iter, cfg.max_iter);
  set_if(f.target_tol, cfg.target_tol);
  set_if(f.target_max_iter, cfg.target_max_iter);
  set_if(f.count, cfg.count);
  set_if(f.tests, cfg.tests);
  set_if(f.chi, cfg.chi);
  set_if(f.workers, cfg.workers);
  set_if(f.seed, cfg.seed);
  set_if(f.epochs, cfg.train.max_epochs);
  set_if(f.patience, cfg.train.patience);
  set_if(f.batch, cfg.train.batch_size);
  set_if(f.hidden, cfg.train.hidden);
  set_if(f.lr, cfg.train.learning_rate);
  return cfg;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration; flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Global seed");
  cmd->add_option("--out", f.out, "Output directory (default: out)");
  cmd->add_option("--workers", f.workers, "Worker threads for sample-level parallelism");
}

void add_case(CLI::App* cmd, Flags& f) { cmd->add_option("case", f.case_path, "MATPOWER case file"); }

void add_partition(CLI::App* cmd, Flags& f) {
  cmd->add_option("--parts", f.parts, "Number of spectral partitions (default per system)");
  cmd->add_option("--map", f.map, "Partition map file (overrides --parts)");
  cmd->add_option("--rho", f.rho, "ADMM penalty (default per system)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-accelerated consensus ADMM for distributed DC optimal power flow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LAADMM_VERSION);
  Flags f;

  auto* inspect = app.add_subcommand("inspect", "Summarize a case file");
  add_case(inspect, f);
  add_common(inspect, f);

  auto* partition = app.add_subcommand("partition", "Partition a case and validate the result");
  add_case(partition, f);
  add_common(partition, f);
  add_partition(partition, f);

  auto* solve = app.add_subcommand("solve", "Solve one load case centrally or by (LA-)ADMM");
  add_case(solve, f);
  add_common(solve, f);
  add_partition(solve, f);
  solve->add_option("--mode", f.mode, "centralized | admm | la-admm")->check(CLI::IsMember({"centralized", "admm", "la-admm"}));
  solve->add_option("--model", f.model, "Trained model (la-admm)");
  solve->add_option("--chi", f.chi, "Uniform scale applied to the base load");
  solve->add_option("--tol", f.tol, "Primal residual tolerance");
  solve->add_option("--max-iter", f.max_iter, "Iteration cap");

  auto* gen = app.add_subcommand("gen-data", "Generate a training dataset of ADMM prefixes and converged targets");
  add_case(gen, f);
  add_common(gen, f);
  add_partition(gen, f);
  gen->add_option("--count", f.count, "Number of samples");
  gen->add_option("--k", f.k, "Input window length");
  gen->add_option("--target-tol", f.target_tol, "Primal tolerance of the converged targets");
  gen->add_option("--target-max-iter", f.target_max_iter, "Iteration cap of the target runs");
  gen->add_flag("--csv", f.csv, "Also write dataset.csv");

  auto* tr = app.add_subcommand("train", "Train the GRU predictor on a dataset");
  add_common(tr, f);
  tr->add_option("--data", f.data, "Dataset file (default: <out>/dataset.bin)");
  tr->add_option("--epochs", f.epochs, "Maximum epochs");
  tr->add_option("--patience", f.patience, "Early-stopping patience");
  tr->add_option("--batch", f.batch, "Mini-batch size");
  tr->add_option("--hidden", f.hidden, "GRU hidden units");
  tr->add_option("--lr", f.lr, "Adam learning rate");

  auto* ev = app.add_subcommand("evaluate", "Compare ADMM and LA-ADMM on fresh load scenarios");
  add_case(ev, f);
  add_common(ev, f);
  add_partition(ev, f);
  ev->add_option("--model", f.model, "Trained model (default: <out>/model.bin)");
  ev->add_option("--tests", f.tests, "Number of fresh scenarios");
  ev->add_option("--iters", f.iters, "Iteration horizon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code();
  }

  try {
    RunConfig cfg = resolve(f);
    if (inspect->parsed())
      laadmm::cli::cmd_inspect(cfg, std::cout);
    else if (partition->parsed())
      laadmm::cli::cmd_partition(cfg, std::cout);
    else if (solve->parsed())
      laadmm::cli::cmd_solve(cfg, std::cout);
    else if (gen->parsed())
      laadmm::cli::cmd_gen_data(cfg, std::cout, f.csv);
    else if (tr->parsed())
      laadmm::cli::cmd_train(cfg, std::cout);
    else if (ev->parsed())
      laadmm::cli::cmd_evaluate(cfg, std::cout);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 0;
}
