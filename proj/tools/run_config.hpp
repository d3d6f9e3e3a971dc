#pragma once

#include "laadmm/gru.hpp"
#include "laadmm/netcase.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace laadmm::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a command needs. Unset optionals fall back to per-system
/// defaults once the case is loaded.
struct RunConfig {
  std::string case_path;
  std::string map_path;          // empty: spectral partition
  std::optional<int> parts;
  std::optional<double> rho;
  int k = 4;
  int iterations = 100;          // evaluation horizon
  double tol = 1e-4;             // solve: primal residual tolerance
  int max_iter = 20000;          // solve: iteration cap
  double target_tol = 1e-6;      // gen-data: tolerance of the converged targets
  int target_max_iter = 40000;
  int count = 1000;
  int tests = 100;
  double chi = 1.0;              // solve: uniform load scale
  std::string mode = "centralized";
  std::string model_path;
  std::string data_path;
  TrainConfig train;
  std::string out = "out";
  std::uint64_t seed = 0;
  int workers = 1;

  /// Fills `parts` and `rho` from the network when unset.
  void apply_system_defaults(const Network& net);
  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// Overwrites fields present in `j`; unknown keys are an error.
  void merge_json(const nlohmann::json& j);
  void load_json_file(const std::string& path);
  nlohmann::json to_json() const;
};

struct SystemDefaults {
  int parts = 2;
  double rho = 100.0;
};

/// IEEE-14 (14 buses / 20 branches): S=2, rho=1. IEEE-118 (118 / 186): S=4,
/// rho=100. Anything else: S=2, rho=100.
SystemDefaults system_defaults(const Network& net);

/// Seed of each pipeline stage derived from the global seed.
enum class Stage : std::uint64_t { partition = 0, data = 1, train = 2, evaluate = 3 };
std::uint64_t stage_seed(std::uint64_t seed, Stage stage);

}  // namespace laadmm::cli
