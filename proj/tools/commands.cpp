#include "commands.hpp"

#include "laadmm/accel.hpp"
#include "laadmm/binio.hpp"
#include "laadmm/consensus.hpp"
#include "laadmm/scenario.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace laadmm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string out_path(const RunConfig& cfg, const std::string& file) { return (fs::path(cfg.out) / file).string(); }

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.out + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  return f;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is required");
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

}  // namespace

Network load_case(const RunConfig& cfg) {
  require_file(cfg.case_path, "case");
  return load_matpower_case(cfg.case_path);
}

Setup load_setup(RunConfig& cfg) {
  Setup s;
  s.net = load_case(cfg);
  cfg.apply_system_defaults(s.net);
  cfg.validate();
  if (!cfg.map_path.empty()) {
    require_file(cfg.map_path, "partition map");
    s.map = load_partition_map(cfg.map_path, s.net);
  } else {
    s.map = spectral_partition(s.net, *cfg.parts, stage_seed(cfg.seed, Stage::partition));
  }
  s.parts = build_partition_problems(s.net, s.map);
  return s;
}

void write_manifest(const RunConfig& cfg, const std::string& command, const json& outputs) {
  ensure_out_dir(cfg);
  const std::string path = out_path(cfg, "manifest.json");
  json m = json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      m = json::parse(in);
    } catch (const json::exception&) {
      m = json::object();
    }
  }
  m["version"] = LAADMM_VERSION;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
#if defined(__VERSION__)
  m["compiler"] = __VERSION__;
#endif
  m["commands"][command] = {{"config", cfg.to_json()}, {"outputs", outputs}};
  auto f = open_out(path);
  f << m.dump(2) << '\n';
}

void cmd_inspect(const RunConfig& cfg, std::ostream& log) {
  const Network net = load_case(cfg);
  log << net.num_buses() << " buses, " << net.num_branches() << " branches, " << net.num_generators() << " generators\n";
  log << summarize(net);
}

void cmd_partition(RunConfig cfg, std::ostream& log) {
  const Setup s = load_setup(cfg);
  ensure_out_dir(cfg);
  const std::string map_file = out_path(cfg, "partition.map");
  if (!cfg.map_path.empty()) {
    write_bytes(map_file, read_bytes(cfg.map_path));
  } else {
    auto f = open_out(map_file);
    f << format_partition_map(s.map, s.net);
  }
  const std::string report = validate_partition(s.net, s.map).to_string();
  {
    auto f = open_out(out_path(cfg, "partition_report.txt"));
    f << report;
  }
  log << report;
  write_manifest(cfg, "partition", {map_file, out_path(cfg, "partition_report.txt")});
}

void cmd_solve(RunConfig cfg, std::ostream& log) {
  json result;
  json outputs = json::array();
  if (cfg.mode == "centralized") {
    const Network net = load_case(cfg);
    cfg.apply_system_defaults(net);
    cfg.validate();
    const Eigen::VectorXd load = cfg.chi * net.base_load();
    const DispatchSolution sol = solve_centralized(net, load);
    result = {{"mode", cfg.mode},
              {"status", to_string(sol.status)},
              {"objective", sol.objective},
              {"generation_pu", to_json(sol.generation)},
              {"angles_rad", to_json(sol.angles)},
              {"balance_duals", to_json(sol.balance_duals)}};
    log << "status: " << to_string(sol.status) << "\nobjective: " << std::setprecision(12) << sol.objective << "\n";
  } else {
    Setup s = load_setup(cfg);
    const Eigen::VectorXd load = cfg.chi * s.net.base_load();
    AdmmConfig ac;
    ac.rho = *cfg.rho;
    ac.max_iter = cfg.max_iter;
    ac.primal_tol = cfg.tol;
    AdmmEngine engine(s.parts, ac);
    engine.set_load(load);
    AdmmRun run;
    json injection;
    if (cfg.mode == "la-admm") {
      require_file(cfg.model_path, "model");
      const GruModel model = load_model(cfg.model_path, s.parts.layout.fingerprint());
      LaAdmmRun la = la_admm_solve(engine, model);
      run = std::move(la.run);
      injection = {{"iteration", la.injection.iteration},
                   {"fired", la.injection.fired},
                   {"residual_before", la.injection.residual_before},
                   {"residual_after", std::isnan(la.injection.residual_after) ? json(nullptr) : json(la.injection.residual_after)}};
    } else {
      run = engine.run();
    }
    const DispatchSolution central = solve_centralized(s.net, load);
    ensure_out_dir(cfg);
    const std::string traj = out_path(cfg, "trajectory.csv");
    {
      auto f = open_out(traj);
      run.trajectory.write_csv(f, s.parts.layout.width(), s.parts.layout.n_pub());
    }
    outputs.push_back(traj);
    result = {{"mode", cfg.mode},
              {"converged", run.result.converged},
              {"iterations", run.result.iterations},
              {"objective", run.result.final_cost},
              {"primal_residual", run.result.final_residual},
              {"centralized_objective", central.objective},
              {"relative_error", relative_cost_error(run.result.final_cost, central.objective)},
              {"duals", to_json(run.result.state.duals)},
              {"consensus", to_json(run.result.state.consensus)}};
    if (!injection.is_null()) result["injection"] = injection;
    log << "converged: " << (run.result.converged ? "yes" : "no") << "\niterations: " << run.result.iterations
        << "\nobjective: " << std::setprecision(12) << run.result.final_cost << "\ncentralized_objective: " << central.objective
        << "\nprimal_residual: " << run.result.final_residual << "\n";
  }
  ensure_out_dir(cfg);
  const std::string sol_file = out_path(cfg, "solution.json");
  {
    auto f = open_out(sol_file);
    f << std::setprecision(17) << result.dump(2) << '\n';
  }
  outputs.push_back(sol_file);
  write_manifest(cfg, "solve", outputs);
}

void cmd_gen_data(RunConfig cfg, std::ostream& log, bool write_csv) {
  const Setup s = load_setup(cfg);
  DatasetConfig dc;
  dc.count = cfg.count;
  dc.seed = stage_seed(cfg.seed, Stage::data);
  dc.workers = cfg.workers;
  dc.sample.k = cfg.k;
  dc.sample.rho = *cfg.rho;
  dc.sample.primal_tol = cfg.target_tol;
  dc.sample.max_iter = cfg.target_max_iter;
  int last_report = 0;
  const DatasetResult r = generate_dataset(s.net, s.parts, dc, [&](const DatasetProgress& p) {
    if (!p.message.empty()) std::cerr << "excluded: " << p.message << "\n";
    if (p.accepted >= last_report + std::max(1, cfg.count / 20) || p.accepted == cfg.count) {
      last_report = p.accepted;
      std::cerr << "samples " << p.accepted << "/" << cfg.count << " (attempts " << p.attempted << ")\n";
    }
  });
  ensure_out_dir(cfg);
  json outputs = json::array();
  const std::string data_file = out_path(cfg, "dataset.bin");
  write_dataset(r.dataset, data_file);
  outputs.push_back(data_file);
  if (write_csv) {
    const std::string csv = out_path(cfg, "dataset.csv");
    auto f = open_out(csv);
    write_dataset_csv(f, r.dataset);
    outputs.push_back(csv);
  }
  log << "samples: " << r.dataset.size() << "\nexcluded: " << r.excluded << "\nfeatures: " << r.dataset.features()
      << "\nk: " << r.dataset.k << "\n";
  if (!r.complete) log << "warning: retry budget exhausted, dataset is partial\n";
  write_manifest(cfg, "gen-data", outputs);
}

void cmd_train(RunConfig cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.data_path.empty()) cfg.data_path = out_path(cfg, "dataset.bin");
  require_file(cfg.data_path, "dataset");
  const Dataset ds = read_dataset(cfg.data_path);
  TrainConfig tc = cfg.train;
  tc.seed = stage_seed(cfg.seed, Stage::train);
  const TrainResult r = train(ds.inputs(), ds.targets(), ds.dual_width, ds.consensus_width, ds.fingerprint, tc,
                              [](const EpochRecord& e) {
                                std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss
                                          << "\n";
                              });
  ensure_out_dir(cfg);
  const std::string model_file = out_path(cfg, "model.bin");
  save_model(r.model, model_file);
  const std::string hist = out_path(cfg, "history.csv");
  {
    auto f = open_out(hist);
    write_history_csv(f, r.history);
  }
  log << "epochs: " << r.history.size() << "\nbest_epoch: " << r.best_epoch << "\nval_mse: " << r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_mse
      << "\nval_r2: " << r.validation_r2() << "\n";
  write_manifest(cfg, "train", {model_file, hist});
}

void cmd_evaluate(RunConfig cfg, std::ostream& log) {
  const Setup s = load_setup(cfg);
  if (cfg.model_path.empty()) cfg.model_path = out_path(cfg, "model.bin");
  require_file(cfg.model_path, "model");
  const GruModel model = load_model(cfg.model_path, s.parts.layout.fingerprint());
  EvalConfig ec;
  ec.n_tests = cfg.tests;
  ec.seed = stage_seed(cfg.seed, Stage::evaluate);
  ec.iterations = cfg.iterations;
  ec.rho = *cfg.rho;
  ec.workers = cfg.workers;
  const EvalSummary sum = evaluate(s.net, s.parts, model, ec, [](int done, int total) {
    if (done % 10 == 0 || done == total) std::cerr << "evaluated " << done << "/" << total << "\n";
  });
  for (const auto& d : sum.diagnostics) std::cerr << "excluded: " << d << "\n";
  ensure_out_dir(cfg);
  const std::string samples = out_path(cfg, "eval_samples.csv");
  const std::string summary = out_path(cfg, "eval_summary.csv");
  const std::string stats = out_path(cfg, "eval.json");
  {
    auto f = open_out(samples);
    write_eval_samples_csv(f, sum);
  }
  {
    auto f = open_out(summary);
    write_eval_summary_csv(f, sum);
  }
  const json j = {{"samples", sum.records.size()},
                  {"failures", sum.failures},
                  {"iterations", cfg.iterations},
                  {"k", model.k},
                  {"baseline_median_rel_err", sum.baseline_median},
                  {"la_admm_median_rel_err", sum.accelerated_median},
                  {"improvement", sum.accelerated_median > 0 ? json(sum.baseline_median / sum.accelerated_median) : json(nullptr)},
                  {"wins", sum.wins},
                  {"ties", sum.ties},
                  {"sign_test_p", sum.sign_test_p}};
  {
    auto f = open_out(stats);
    f << std::setprecision(17) << j.dump(2) << '\n';
  }
  log << "samples: " << sum.records.size() << "\nfailures: " << sum.failures << "\nbaseline_median_rel_err: "
      << sum.baseline_median << "\nla_admm_median_rel_err: " << sum.accelerated_median << "\nwins: " << sum.wins
      << "\nsign_test_p: " << sum.sign_test_p << "\n";
  write_manifest(cfg, "evaluate", {samples, summary, stats});
}

}  // namespace laadmm::cli
