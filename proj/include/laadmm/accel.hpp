#pragma once

#include "laadmm/consensus.hpp"
#include "laadmm/gru.hpp"
#include "laadmm/netcase.hpp"
#include "laadmm/partition.hpp"
#include "laadmm/scenario.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace laadmm {

struct InjectionRecord {
  bool fired = false;
  int iteration = 0;  // completed iterations at the moment of injection
  Eigen::VectorXd duals;
  Eigen::VectorXd consensus;
  double residual_before = 0.0;  // primal residual of iterate K
  double residual_after = 0.0;   // primal residual of iterate K + 1 (NaN if the run stopped)
};

/// Produces (duals, consensus) from the first K recorded iterates (K x F).
using Predictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd& window)>;

/// Hook that fires once when K iterations have completed, overwriting the
/// duals (and their owner-side mirrors) and consensus values with the
/// predictor output.
AdmmHook injection_hook(int k, const ConsensusLayout& layout, Predictor predictor, InjectionRecord& record);

struct LaAdmmRun {
  AdmmRun run;
  InjectionRecord injection;
};

/// Runs the engine with one injection at iteration K from `predictor`.
LaAdmmRun run_with_injection(AdmmEngine& engine, int k, const Predictor& predictor);

/// Learning-accelerated ADMM: inject the model's prediction at the model's K.
LaAdmmRun la_admm_solve(AdmmEngine& engine, const GruModel& model);

double relative_cost_error(double cost, double reference);

/// Unit-width bins over [-8, 0].
std::vector<double> default_bin_edges();

/// Histogram of log10 values over consecutive edges; values below the first
/// edge count in the first bin, values at or above the last edge in the last.
std::vector<int> histogram_log10(const std::vector<double>& log10_values, const std::vector<double>& edges);

/// One-sided exact binomial sign test: probability of at least `wins`
/// successes in `trials` fair coin flips.
double sign_test_p_value(int wins, int trials);

struct EvalConfig {
  int n_tests = 100;
  std::uint64_t seed = 0;
  int iterations = 100;
  double rho = 1.0;
  QpSettings qp;
  int workers = 1;
  double margin = kCapacityMargin;
  std::vector<double> bin_edges = default_bin_edges();
};

struct EvalRecord {
  int sample = 0;
  LoadScenario scenario;
  double ref_objective = 0.0;
  std::vector<double> baseline_cost;
  std::vector<double> accelerated_cost;
  std::vector<double> baseline_error;
  std::vector<double> accelerated_error;
  std::vector<double> baseline_residual;
  std::vector<double> accelerated_residual;
  InjectionRecord injection;

  double baseline_final() const { return baseline_error.back(); }
  double accelerated_final() const { return accelerated_error.back(); }
};

struct CurveStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct EvalSummary {
  std::vector<EvalRecord> records;
  int failures = 0;
  std::vector<std::string> diagnostics;

  std::vector<double> baseline_log10;  // final log10 relative error per sample
  std::vector<double> accelerated_log10;
  std::vector<double> bin_edges;
  std::vector<int> baseline_hist;
  std::vector<int> accelerated_hist;
  CurveStats baseline_residual;  // of log10 primal residual, per iteration
  CurveStats accelerated_residual;

  double baseline_median = 0.0;  // median final relative error
  double accelerated_median = 0.0;
  int wins = 0;  // samples where the accelerated error is strictly lower
  int ties = 0;
  double sign_test_p = 1.0;
};

/// Fresh scenarios from derive_seed(seed, i); baseline and accelerated runs
/// per scenario over the same horizon, then aggregate statistics.
EvalSummary evaluate(const Network& net, const PartitionedNetwork& parts, const GruModel& model, const EvalConfig& config,
                     const std::function<void(int done, int total)>& progress = {});

/// Recomputes histograms, curves and tests from `records`.
void summarize(EvalSummary& summary, const std::vector<double>& bin_edges);

/// `sample,iter,method,cost,rel_err,primal_residual`
void write_eval_samples_csv(std::ostream& out, const EvalSummary& summary);
/// Histogram section then residual-curve section.
void write_eval_summary_csv(std::ostream& out, const EvalSummary& summary);

}  // namespace laadmm
