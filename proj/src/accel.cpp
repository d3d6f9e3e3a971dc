#include "laadmm/accel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

namespace laadmm {

AdmmHook injection_hook(int k, const ConsensusLayout& layout, Predictor predictor, InjectionRecord& record) {
  if (k < 1) throw AdmmError("injection iteration must be at least 1");
  return [k, &layout, predictor = std::move(predictor), &record](int done, AdmmState& state, const Trajectory& traj) {
    if (done != k || record.fired) return;
    if (traj.size() < k || static_cast<int>(traj.features.size()) < k)
      throw AdmmError("injection needs the recorded trajectory of the first K iterations");
    const Eigen::VectorXd pred = predictor(traj.prefix(k));
    if (pred.size() != layout.feature_width()) throw AdmmError("prediction width does not match the consensus layout");
    record.fired = true;
    record.iteration = k;
    record.duals = pred.head(layout.width());
    record.consensus = pred.tail(layout.n_pub());
    record.residual_before = traj.primal_residual[static_cast<std::size_t>(k - 1)];
    inject(layout, state, record.duals, record.consensus);
  };
}

LaAdmmRun run_with_injection(AdmmEngine& engine, int k, const Predictor& predictor) {
  if (k > engine.config().max_iter) throw AdmmError("injection iteration exceeds max_iter");
  if (!engine.config().record_trajectory) throw AdmmError("injection needs a recorded trajectory");
  LaAdmmRun out;
  out.run = engine.run(injection_hook(k, engine.layout(), predictor, out.injection));
  out.injection.residual_after = out.run.trajectory.size() > k ? out.run.trajectory.primal_residual[static_cast<std::size_t>(k)]
                                                                : std::numeric_limits<double>::quiet_NaN();
  return out;
}

LaAdmmRun la_admm_solve(AdmmEngine& engine, const GruModel& model) {
  model.check_layout(engine.layout().fingerprint());
  if (model.dual_width != engine.layout().width() || model.consensus_width != engine.layout().n_pub())
    throw ModelError("model output widths do not match the consensus layout");
  return run_with_injection(engine, model.k, [&model](const Eigen::MatrixXd& window) { return model.predict(window); });
}

double relative_cost_error(double cost, double reference) { return std::abs(cost - reference) / std::abs(reference); }

std::vector<double> default_bin_edges() {
  std::vector<double> edges;
  for (int e = -8; e <= 0; ++e) edges.push_back(e);
  return edges;
}

std::vector<int> histogram_log10(const std::vector<double>& values, const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("histogram needs at least two edges");
  if (!std::is_sorted(edges.begin(), edges.end()) || std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw std::invalid_argument("histogram edges must increase strictly");
  const std::size_t bins = edges.size() - 1;
  std::vector<int> counts(bins, 0);
  for (double v : values) {
    if (std::isnan(v)) throw std::invalid_argument("histogram value is NaN");
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    counts[std::min(bin, bins - 1)] += 1;
  }
  return counts;
}

double sign_test_p_value(int wins, int trials) {
  if (trials < 0 || wins < 0 || wins > trials) throw std::invalid_argument("sign test needs 0 <= wins <= trials");
  if (trials == 0) return 1.0;
  // Sum of binomial(trials, j) / 2^trials for j >= wins, in log space.
  const double log_half = std::log(0.5) * trials;
  const double log_n = std::lgamma(trials + 1.0);
  double p = 0.0;
  for (int j = wins; j <= trials; ++j) p += std::exp(log_n - std::lgamma(j + 1.0) - std::lgamma(trials - j + 1.0) + log_half);
  return std::min(1.0, p);
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double safe_log10(double v) { return std::log10(std::max(v, std::numeric_limits<double>::min())); }

CurveStats curve_stats(const std::vector<const std::vector<double>*>& curves) {
  CurveStats s;
  if (curves.empty()) return s;
  const std::size_t len = curves.front()->size();
  s.mean.assign(len, 0.0);
  s.stddev.assign(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double sum = 0.0;
    for (const auto* c : curves) sum += safe_log10((*c)[t]);
    const double mean = sum / static_cast<double>(curves.size());
    double var = 0.0;
    for (const auto* c : curves) var += std::pow(safe_log10((*c)[t]) - mean, 2);
    s.mean[t] = mean;
    s.stddev[t] = std::sqrt(var / static_cast<double>(curves.size()));
  }
  return s;
}

struct Outcome {
  bool ok = false;
  EvalRecord record;
  std::string error;
};

std::vector<double> errors_of(const std::vector<double>& cost, double ref) {
  std::vector<double> e;
  e.reserve(cost.size());
  for (double c : cost) e.push_back(relative_cost_error(c, ref));
  return e;
}

Outcome evaluate_one(AdmmEngine& engine, const Network& net, const GruModel& model, const EvalConfig& config, int index) {
  Outcome o;
  try {
    std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(index)));
    EvalRecord& rec = o.record;
    rec.sample = index;
    rec.scenario = sample_load(net, rng, config.margin);
    const DispatchSolution central = solve_centralized(net, rec.scenario.load);
    if (central.status != DispatchStatus::optimal)
      throw SampleError("centralized reference solve failed: " + to_string(central.status));
    rec.ref_objective = central.objective;
    engine.set_load(rec.scenario.load);

    const AdmmRun base = engine.run();
    const LaAdmmRun accel = la_admm_solve(engine, model);
    rec.baseline_cost = base.trajectory.cost;
    rec.accelerated_cost = accel.run.trajectory.cost;
    rec.baseline_residual = base.trajectory.primal_residual;
    rec.accelerated_residual = accel.run.trajectory.primal_residual;
    rec.baseline_error = errors_of(rec.baseline_cost, rec.ref_objective);
    rec.accelerated_error = errors_of(rec.accelerated_cost, rec.ref_objective);
    rec.injection = accel.injection;
    if (rec.baseline_error.size() != rec.accelerated_error.size() || rec.baseline_error.empty())
      throw SampleError("baseline and accelerated curves differ in length");
    o.ok = true;
  } catch (const SampleError& e) {
    o.error = "sample " + std::to_string(index) + ": " + e.what();
  } catch (const AdmmError& e) {
    o.error = "sample " + std::to_string(index) + ": " + e.what();
  }
  return o;
}

}  // namespace

void summarize(EvalSummary& s, const std::vector<double>& bin_edges) {
  s.bin_edges = bin_edges;
  s.baseline_log10.clear();
  s.accelerated_log10.clear();
  std::vector<double> base_final, accel_final;
  std::vector<const std::vector<double>*> base_res, accel_res;
  s.wins = 0;
  s.ties = 0;
  for (const auto& r : s.records) {
    base_final.push_back(r.baseline_final());
    accel_final.push_back(r.accelerated_final());
    s.baseline_log10.push_back(safe_log10(r.baseline_final()));
    s.accelerated_log10.push_back(safe_log10(r.accelerated_final()));
    base_res.push_back(&r.baseline_residual);
    accel_res.push_back(&r.accelerated_residual);
    if (r.accelerated_final() < r.baseline_final())
      ++s.wins;
    else if (r.accelerated_final() == r.baseline_final())
      ++s.ties;
  }
  s.baseline_hist = histogram_log10(s.baseline_log10, bin_edges);
  s.accelerated_hist = histogram_log10(s.accelerated_log10, bin_edges);
  s.baseline_residual = curve_stats(base_res);
  s.accelerated_residual = curve_stats(accel_res);
  s.baseline_median = median(base_final);
  s.accelerated_median = median(accel_final);
  s.sign_test_p = sign_test_p_value(s.wins, static_cast<int>(s.records.size()) - s.ties);
}

EvalSummary evaluate(const Network& net, const PartitionedNetwork& parts, const GruModel& model, const EvalConfig& config,
                     const std::function<void(int, int)>& progress) {
  if (config.n_tests < 0) throw std::invalid_argument("n_tests must be nonnegative");
  if (config.iterations < model.k + 1) throw AdmmError("evaluation horizon must exceed the injection iteration");
  model.check_layout(parts.layout.fingerprint());

  AdmmConfig admm;
  admm.rho = config.rho;
  admm.max_iter = config.iterations;
  admm.primal_tol = 0.0;  // fixed horizon
  admm.record_trajectory = true;
  admm.qp = config.qp;

  EvalSummary summary;
  const int workers = std::max(1, std::min(config.workers, config.n_tests));
  std::vector<AdmmEngine> engines;
  for (int w = 0; w < workers; ++w) engines.emplace_back(parts, admm);

  std::vector<Outcome> outcomes(static_cast<std::size_t>(config.n_tests));
  for (int start = 0; start < config.n_tests; start += workers) {
    const int batch = std::min(workers, config.n_tests - start);
    if (batch == 1) {
      outcomes[static_cast<std::size_t>(start)] = evaluate_one(engines[0], net, model, config, start);
    } else {
      std::vector<std::thread> threads;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(batch));
      for (int w = 0; w < batch; ++w)
        threads.emplace_back([&, w] {
          try {
            outcomes[static_cast<std::size_t>(start + w)] =
                evaluate_one(engines[static_cast<std::size_t>(w)], net, model, config, start + w);
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      for (auto& t : threads) t.join();
      for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    if (progress) progress(start + batch, config.n_tests);
  }
  for (auto& o : outcomes) {
    if (o.ok) {
      summary.records.push_back(std::move(o.record));
    } else {
      ++summary.failures;
      summary.diagnostics.push_back(o.error);
    }
  }
  summarize(summary, config.bin_edges);
  return summary;
}

void write_eval_samples_csv(std::ostream& out, const EvalSummary& s) {
  out << "sample,iter,method,cost,rel_err,primal_residual\n";
  out.precision(17);
  for (const auto& r : s.records) {
    for (std::size_t t = 0; t < r.baseline_cost.size(); ++t)
      out << r.sample << ',' << t + 1 << ",admm," << r.baseline_cost[t] << ',' << r.baseline_error[t] << ','
          << r.baseline_residual[t] << '\n';
    for (std::size_t t = 0; t < r.accelerated_cost.size(); ++t)
      out << r.sample << ',' << t + 1 << ",la-admm," << r.accelerated_cost[t] << ',' << r.accelerated_error[t] << ','
          << r.accelerated_residual[t] << '\n';
  }
}

void write_eval_summary_csv(std::ostream& out, const EvalSummary& s) {
  out.precision(17);
  out << "bin_lo,bin_hi,admm_count,la_admm_count\n";
  for (std::size_t b = 0; b + 1 < s.bin_edges.size(); ++b)
    out << s.bin_edges[b] << ',' << s.bin_edges[b + 1] << ',' << s.baseline_hist[b] << ',' << s.accelerated_hist[b] << '\n';
  out << '\n';
  out << "iter,admm_log10_residual_mean,admm_log10_residual_std,la_admm_log10_residual_mean,la_admm_log10_residual_std\n";
  for (std::size_t t = 0; t < s.baseline_residual.mean.size(); ++t)
    out << t + 1 << ',' << s.baseline_residual.mean[t] << ',' << s.baseline_residual.stddev[t] << ','
        << s.accelerated_residual.mean[t] << ',' << s.accelerated_residual.stddev[t] << '\n';
}

}  // namespace laadmm
