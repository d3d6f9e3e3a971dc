#pragma once

#include "laadmm/netcase.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace laadmm {

class PartitionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Assignment of every bus to one of `num_parts` disjoint regions.
struct PartitionMap {
  std::vector<int> assignment;  // per internal bus index
  int num_parts = 0;

  /// Throws PartitionError unless every partition is nonempty and all ids are in range.
  void validate(int num_buses) const;
  std::vector<int> members(int part) const;
};

/// A copy of the angle at `bus` (owned by partition `owner`) held by the
/// neighbouring partition `holder`.
struct ConsensusEntry {
  int holder = 0;
  int owner = 0;
  int bus = 0;

  friend bool operator==(const ConsensusEntry&, const ConsensusEntry&) = default;
};

/// One boundary bus: its consensus value averages the owner's angle and
/// every holder's copy.
struct ConsensusSlot {
  int owner = 0;
  int bus = 0;
  std::vector<int> entries;  // indices into ConsensusLayout::entries
};

/// Canonical ordering of copies (and their duals) and of consensus slots.
/// Entries are sorted by (owner, bus, holder); slots by (owner, bus).
struct ConsensusLayout {
  std::vector<ConsensusEntry> entries;
  std::vector<ConsensusSlot> slots;
  std::vector<int> slot_of_entry;

  int width() const { return static_cast<int>(entries.size()); }
  int n_pub() const { return static_cast<int>(slots.size()); }
  /// Feature width of one iterate: duals (width) followed by consensus values (n_pub).
  int feature_width() const { return width() + n_pub(); }

  std::string serialize() const;
  std::uint64_t fingerprint() const;
};

/// Coupling of partition s to neighbour u: the copies of J_su held by s.
struct Coupling {
  int neighbor = 0;
  std::vector<int> buses;        // J_su, global bus indices (ascending)
  std::vector<int> copy_index;   // position of each copy among the partition's copy variables
  std::vector<int> owner_local;  // selector E_su: position of each bus within the owner's internal buses
  Eigen::MatrixXd h_block;       // H_su: rows I_s, columns J_su
};

/// Per-partition data of the distributed formulation. Local variables are
/// laid out as [generation; internal angles; copies], with copies ordered as
/// the layout entries held by this partition.
struct PartitionProblem {
  int id = 0;
  std::vector<int> internal_buses;  // I_s (ascending)
  std::vector<int> generators;      // global generator indices
  Eigen::VectorXd cost;
  Eigen::VectorXd g_min;
  Eigen::VectorXd g_max;
  Eigen::MatrixXd gen_incidence;  // |I_s| x |generators|

  std::vector<int> copy_entries;  // layout entry index per copy variable
  std::vector<Coupling> couplings;
  Eigen::MatrixXd h_local;     // H_s
  Eigen::MatrixXd h_coupling;  // all copy columns, |I_s| x copies

  std::vector<int> owned_slots;       // layout slots whose owner is this partition
  std::vector<int> owned_slot_local;  // local internal position of each owned slot's bus

  std::vector<int> flow_branches;  // limited branches touching the partition
  Eigen::MatrixXd k_local;
  Eigen::MatrixXd k_coupling;
  Eigen::VectorXd flow_limit;

  bool contains_reference = false;
  int reference_local = -1;

  Eigen::VectorXd load;  // d_s over internal buses

  int num_generators() const { return static_cast<int>(generators.size()); }
  int num_internal() const { return static_cast<int>(internal_buses.size()); }
  int num_copies() const { return static_cast<int>(copy_entries.size()); }
  int num_variables() const { return num_generators() + num_internal() + num_copies(); }
  int angle_offset() const { return num_generators(); }
  int copy_offset() const { return num_generators() + num_internal(); }
};

struct PartitionedNetwork {
  std::vector<PartitionProblem> parts;
  ConsensusLayout layout;
  int num_buses = 0;
};

/// Spectral bisection-style partitioning: embeds buses with the ceil(log2 S)
/// smallest nontrivial eigenvectors of the unweighted graph Laplacian
/// (deflated inverse iteration) and clusters with seeded k-means.
PartitionMap spectral_partition(const Network& net, int num_parts, std::uint64_t seed);

/// Smallest nontrivial Laplacian eigenvectors (orthogonal to the constant vector), n x count.
Eigen::MatrixXd laplacian_eigenvectors(const Eigen::MatrixXd& laplacian, int count, std::uint64_t seed);

/// Unweighted graph Laplacian (parallel branches collapse to one edge).
Eigen::MatrixXd graph_laplacian(const Network& net);

/// Parses `<bus_id> <partition_id>` lines; bus ids are case-file bus numbers
/// and partition ids must cover 0..S-1.
PartitionMap parse_partition_map(std::string_view text, const Network& net);
PartitionMap load_partition_map(const std::string& path, const Network& net);
std::string format_partition_map(const PartitionMap& map, const Network& net);

PartitionedNetwork build_partition_problems(const Network& net, const PartitionMap& map);

/// Replaces every partition's load with the matching entries of `load`.
void set_load(PartitionedNetwork& pn, const Eigen::VectorXd& load);

struct PartitionStats {
  int id = 0;
  int buses = 0;
  int generators = 0;
  bool connected = true;
  int boundary_buses = 0;
  double capacity = 0.0;
  double base_load = 0.0;
};

struct PartitionReport {
  std::vector<PartitionStats> parts;
  int tie_lines = 0;
  int n_pub = 0;
  int width = 0;
  std::vector<std::string> warnings;

  std::string to_string() const;
};

PartitionReport validate_partition(const Network& net, const PartitionMap& map);

}  // namespace laadmm
