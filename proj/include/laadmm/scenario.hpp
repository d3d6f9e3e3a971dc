#pragma once

#include "laadmm/consensus.hpp"
#include "laadmm/netcase.hpp"
#include "laadmm/partition.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace laadmm {

/// Total scenario load is kept below this fraction of installed capacity.
inline constexpr double kCapacityMargin = 0.9;

/// d_i = chi (1 + xi_i) base_i, per unit.
struct LoadScenario {
  Eigen::VectorXd load;
  double chi = 0.0;
  Eigen::VectorXd xi;
};

LoadScenario make_scenario(const Network& net, double chi, const Eigen::VectorXd& xi);

/// Largest chi keeping the total load within margin * capacity, capped at 1.
double max_chi(const Network& net, const Eigen::VectorXd& xi, double margin = kCapacityMargin);

/// Draws xi ~ U(0,1) per bus, then chi ~ U(0, max_chi).
LoadScenario sample_load(const Network& net, std::mt19937_64& rng, double margin = kCapacityMargin);

/// Independent per-index stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct SampleConfig {
  int k = 4;
  double rho = 1.0;
  int max_iter = 40000;
  double primal_tol = 1e-6;
  /// Stopping test on rho * |change of consensus|; negative means rho * primal_tol,
  /// i.e. the consensus values must also have stopped moving.
  double dual_tol = -1.0;
  QpSettings qp;

  AdmmConfig admm() const;
};

struct Sample {
  Eigen::MatrixXd inputs;  // K x F, rows are iterations 1..K
  Eigen::VectorXd target;  // converged duals then consensus values
  LoadScenario scenario;
  double ref_objective = 0.0;
  int iterations = 0;  // iterations needed to reach the target tolerance
};

class SampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs ADMM on the scenario, keeps the first K iterates as inputs and the
/// converged duals/consensus as target. Throws SampleError if the run does
/// not converge or the centralized reference is not optimal.
Sample generate_sample(AdmmEngine& engine, const Network& net, const LoadScenario& scenario, const SampleConfig& config);
Sample generate_sample(const Network& net, const PartitionedNetwork& parts, const LoadScenario& scenario,
                       const SampleConfig& config);

struct Dataset {
  std::string system;
  std::uint64_t fingerprint = 0;
  int k = 0;
  int dual_width = 0;
  int consensus_width = 0;
  int num_buses = 0;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  int features() const { return dual_width + consensus_width; }
  int out() const { return dual_width + consensus_width; }
  int size() const { return static_cast<int>(samples.size()); }

  std::vector<Eigen::MatrixXd> inputs() const;
  std::vector<Eigen::VectorXd> targets() const;
};

struct DatasetProgress {
  int accepted = 0;
  int attempted = 0;
  int excluded = 0;
  std::string message;  // diagnostic of the latest exclusion, if any
};

struct DatasetConfig {
  int count = 0;
  std::uint64_t seed = 0;
  SampleConfig sample;
  /// Extra attempts allowed for excluded samples.
  int retry_budget = -1;  // < 0: max(10, count / 5)
  int workers = 1;
  double margin = kCapacityMargin;
};

struct DatasetResult {
  Dataset dataset;
  int excluded = 0;
  std::vector<std::string> diagnostics;
  bool complete = true;  // false if the retry budget ran out
};

/// Attempt `a` uses a generator seeded with derive_seed(seed, a); accepted
/// samples are kept in attempt order, so the result does not depend on the
/// worker count.
DatasetResult generate_dataset(const Network& net, const PartitionedNetwork& parts, const DatasetConfig& config,
                               const std::function<void(const DatasetProgress&)>& progress = {});

std::string serialize_dataset(const Dataset& dataset);
Dataset deserialize_dataset(std::string bytes);
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);
/// Reads and checks the layout fingerprint.
Dataset read_dataset(const std::string& path, std::uint64_t layout_fingerprint);

/// One row per sample: index, chi, ref_objective, iterations, inputs (row-major), targets.
void write_dataset_csv(std::ostream& out, const Dataset& dataset);

}  // namespace laadmm
