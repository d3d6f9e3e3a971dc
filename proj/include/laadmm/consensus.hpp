#pragma once

#include "laadmm/partition.hpp"
#include "laadmm/qp.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

namespace laadmm {

struct AdmmConfig {
  double rho = 1.0;
  int max_iter = 1000;
  /// Stop once every copy and owner angle is within this of its consensus value (radians).
  double primal_tol = 1e-4;
  /// Optional second stopping test on rho * |theta_bar^{k+1} - theta_bar^k|_inf; <= 0 disables it.
  double dual_tol = 0.0;
  bool record_trajectory = true;
  QpSettings qp;
};

/// Iterate of the consensus ADMM. Vectors follow the layout's canonical order:
/// `copies`/`duals` per entry, `owner_values`/`consensus`/`owner_duals` per slot.
struct AdmmState {
  int k = 0;
  double rho = 1.0;
  std::vector<Eigen::VectorXd> primal;  // per partition: [g; theta_s; copies]
  Eigen::VectorXd copies;
  Eigen::VectorXd owner_values;
  Eigen::VectorXd consensus;
  Eigen::VectorXd duals;
  Eigen::VectorXd owner_duals;
};

/// Per-iteration record. Row k-1 holds the iterate after k iterations; its
/// features are the duals block followed by the consensus block.
struct Trajectory {
  std::vector<Eigen::VectorXd> features;
  std::vector<double> primal_residual;
  std::vector<double> dual_residual;
  std::vector<double> cost;

  int size() const { return static_cast<int>(primal_residual.size()); }
  /// First `rows` feature rows as a rows x F matrix.
  Eigen::MatrixXd prefix(int rows) const;
  void write_csv(std::ostream& out, int width, int n_pub) const;
};

struct AdmmResult {
  AdmmState state;
  bool converged = false;
  int iterations = 0;
  double final_cost = 0.0;
  double final_residual = 0.0;
};

struct AdmmRun {
  AdmmResult result;
  Trajectory trajectory;
};

class AdmmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Called at the top of every iteration with the number of completed
/// iterations; may overwrite the duals and consensus values in place.
using AdmmHook = std::function<void(int k, AdmmState& state, const Trajectory& trajectory)>;

/// Feature vector (duals then consensus) of a state.
Eigen::VectorXd state_features(const AdmmState& state);

/// Exchange-step arithmetic, shared by the engine and usable on bare states.
void consensus_update(const ConsensusLayout& layout, AdmmState& state);
void dual_update(const ConsensusLayout& layout, AdmmState& state);
double primal_residual(const ConsensusLayout& layout, const AdmmState& state);

/// Overwrites duals and consensus values and resets owner-side duals to the
/// negated sum of the holder duals of each slot.
void inject(const ConsensusLayout& layout, AdmmState& state, const Eigen::VectorXd& duals, const Eigen::VectorXd& consensus);

/// Consensus ADMM over a partitioned network with one cached QP solver per
/// partition. Each iteration solves every partition subproblem, averages the
/// boundary angles and takes a dual ascent step.
class AdmmEngine {
 public:
  AdmmEngine(const PartitionedNetwork& network, AdmmConfig config);
  ~AdmmEngine();
  AdmmEngine(AdmmEngine&&) noexcept;
  AdmmEngine& operator=(AdmmEngine&&) noexcept;

  const PartitionedNetwork& network() const { return network_; }
  const ConsensusLayout& layout() const { return network_.layout; }
  const AdmmConfig& config() const { return config_; }
  void set_config(const AdmmConfig& config);

  /// Replaces the bus load vector (global order); subproblem bounds are updated in place.
  void set_load(const Eigen::VectorXd& load);

  AdmmState initial_state() const;

  /// Subproblem of partition `s` given the current duals and consensus values.
  QpProblem build_subproblem(int s, const AdmmState& state) const;

  /// Solves every partition subproblem and extracts copies and owner values.
  void partition_update(AdmmState& state);

  double cost(const AdmmState& state) const;

  /// One full iteration: partition updates, consensus update, dual update.
  void step(AdmmState& state);

  /// Runs from the zero state until the stopping rule or max_iter. Solvers are
  /// cold-started so repeated runs are reproducible.
  AdmmRun run(const AdmmHook& hook = {});

 private:
  PartitionedNetwork network_;
  AdmmConfig config_;
  std::vector<std::unique_ptr<QpSolver>> solvers_;
};

/// Convenience wrapper building an engine and running it once.
AdmmRun run_admm(const PartitionedNetwork& network, const AdmmConfig& config, const AdmmHook& hook = {});

}  // namespace laadmm
