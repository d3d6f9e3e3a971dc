#pragma once

#include "laadmm/qp.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace laadmm {

struct Bus {
  int id = 0;              // external (case file) bus number
  double base_load = 0.0;  // per-unit active load
  bool is_reference = false;
};

struct Generator {
  int bus = 0;        // internal bus index
  double cost = 0.0;  // linear cost per per-unit of generation
  double g_min = 0.0;
  double g_max = 0.0;
};

struct Branch {
  int from_bus = 0;  // internal bus indices
  int to_bus = 0;
  double susceptance = 0.0;           // per-unit, 1/x
  std::optional<double> flow_limit;  // per-unit; empty means unlimited
};

/// A DC network in per-unit. Bus indices used by generators and branches are
/// internal 0-based positions into `buses`.
struct Network {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_branches() const { return static_cast<int>(branches.size()); }
  int num_generators() const { return static_cast<int>(generators.size()); }
  int reference_bus() const;
  /// Internal index of an external bus number, or -1.
  int bus_index(int external_id) const;
  Eigen::VectorXd base_load() const;
  double total_capacity() const;
  /// Number of connected components of the bus graph.
  int num_components() const;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the `baseMVA`, `bus`, `gen`, `branch` and `gencost` tables of a
/// MATPOWER case. Out-of-service rows are dropped, quantities converted to
/// per-unit and generator cost taken as the linear gencost coefficient.
Network parse_matpower_case(std::string_view text, std::string name = "case");
Network load_matpower_case(const std::string& path);

/// Writes the network back as a MATPOWER case (per-unit values re-expanded).
std::string format_matpower_case(const Network& net);

/// One-line-per-field structured summary.
std::string summarize(const Network& net);

/// Sign convention: A has +1 at the from-bus and -1 at the to-bus, K = BA and
/// H = A'BA. Nodal balance follows H theta + g - d = 0, so angles are the
/// negation of the textbook power-flow angles; flows K theta therefore run
/// positive from the to-bus toward the from-bus. Limits are symmetric so this
/// is immaterial to dispatch.
struct SystemMatrices {
  Eigen::MatrixXd incidence;         // A, m x n
  Eigen::VectorXd susceptance_diag;  // diag(B), m
  Eigen::MatrixXd flow_map;          // K, m x n
  Eigen::MatrixXd laplacian;         // H, n x n
};

SystemMatrices build_system_matrices(const Network& net);

enum class DispatchStatus { optimal, infeasible, max_iter };

std::string to_string(DispatchStatus status);

struct DispatchSolution {
  Eigen::VectorXd generation;     // per generator
  Eigen::VectorXd angles;         // per bus, radians
  double objective = 0.0;
  Eigen::VectorXd balance_duals;  // per bus, marginal cost of serving load
  DispatchStatus status = DispatchStatus::max_iter;
  double certificate_residual = 0.0;  // primal residual reported by the solver
};

/// Centralized DC-OPF as an LP with the reference angle fixed to zero.
DispatchSolution solve_centralized(const Network& net, const Eigen::VectorXd& load, const QpSettings& settings = {});

/// The standard-form LP behind solve_centralized. Variables are
/// [generation; angles]; rows are nodal balance, generator bounds, limited
/// branch flows and the reference angle.
QpProblem centralized_problem(const Network& net, const Eigen::VectorXd& load);

}  // namespace laadmm
