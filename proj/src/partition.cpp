#include "laadmm/partition.hpp"

#include "laadmm/binio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace laadmm {

namespace {

bool is_connected(const Network& net, const std::vector<int>& assignment, int part) {
  std::vector<int> members;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == part) members.push_back(static_cast<int>(i));
  if (members.size() <= 1) return true;
  std::vector<std::vector<int>> adj(assignment.size());
  for (const auto& br : net.branches) {
    if (assignment[static_cast<std::size_t>(br.from_bus)] == part && assignment[static_cast<std::size_t>(br.to_bus)] == part) {
      adj[static_cast<std::size_t>(br.from_bus)].push_back(br.to_bus);
      adj[static_cast<std::size_t>(br.to_bus)].push_back(br.from_bus);
    }
  }
  std::vector<char> seen(assignment.size(), 0);
  std::vector<int> stack{members.front()};
  seen[static_cast<std::size_t>(members.front())] = 1;
  std::size_t count = 0;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    ++count;
    for (int w : adj[static_cast<std::size_t>(v)])
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        stack.push_back(w);
      }
  }
  return count == members.size();
}

// Lloyd's algorithm with k-means++ seeding; returns inertia.
double kmeans_once(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng, std::vector<int>& labels) {
  const auto n = points.rows();
  const auto dim = points.cols();
  Eigen::MatrixXd centers(k, dim);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  Eigen::VectorXd dist2(n);
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int j = 0; j < c; ++j) best = std::min(best, (points.row(i) - centers.row(j)).squaredNorm());
      dist2[i] = best;
    }
    const double total = dist2.sum();
    Eigen::Index chosen = 0;
    if (total <= 0) {
      chosen = pick(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        r -= dist2[chosen];
        if (r <= 0) break;
      }
    }
    centers.row(c) = points.row(chosen);
  }

  labels.assign(static_cast<std::size_t>(n), 0);
  double inertia = 0.0;
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) changed = true;
      labels[static_cast<std::size_t>(i)] = best;
      inertia += best_d;
    }

    // Repair empty clusters with the nearest point from a cluster of size > 1.
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index nearest = -1;
      double nearest_d = std::numeric_limits<double>::max();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] <= 1) continue;
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < nearest_d) {
          nearest_d = d;
          nearest = i;
        }
      }
      if (nearest < 0) continue;
      --sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(nearest)])];
      labels[static_cast<std::size_t>(nearest)] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
      changed = true;
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
    for (Eigen::Index i = 0; i < n; ++i) sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < k; ++c) centers.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
    if (!changed && iter > 0) break;
  }
  return inertia;
}

}  // namespace

void PartitionMap::validate(int num_buses) const {
  if (num_parts < 1) throw PartitionError("partition map must have at least one partition");
  if (static_cast<int>(assignment.size()) != num_buses)
    throw PartitionError("partition map covers " + std::to_string(assignment.size()) + " buses, network has " +
                         std::to_string(num_buses));
  std::vector<int> count(static_cast<std::size_t>(num_parts), 0);
  for (int a : assignment) {
    if (a < 0 || a >= num_parts) throw PartitionError("partition id " + std::to_string(a) + " out of range");
    ++count[static_cast<std::size_t>(a)];
  }
  for (int p = 0; p < num_parts; ++p)
    if (count[static_cast<std::size_t>(p)] == 0) throw PartitionError("partition " + std::to_string(p) + " is empty");
}

std::vector<int> PartitionMap::members(int part) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == part) out.push_back(static_cast<int>(i));
  return out;
}

std::string ConsensusLayout::serialize() const {
  std::ostringstream out;
  out << "entries " << entries.size() << "\n";
  for (const auto& e : entries) out << e.holder << " " << e.owner << " " << e.bus << "\n";
  return out.str();
}

std::uint64_t ConsensusLayout::fingerprint() const { return fnv1a(serialize()); }

Eigen::MatrixXd graph_laplacian(const Network& net) {
  const int n = net.num_buses();
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (const auto& br : net.branches) {
    adj(br.from_bus, br.to_bus) = 1.0;
    adj(br.to_bus, br.from_bus) = 1.0;
  }
  Eigen::MatrixXd lap = -adj;
  lap.diagonal() = adj.rowwise().sum();
  return lap;
}

Eigen::MatrixXd laplacian_eigenvectors(const Eigen::MatrixXd& laplacian, int count, std::uint64_t seed) {
  const auto n = laplacian.rows();
  if (count < 0 || count >= n) throw PartitionError("requested " + std::to_string(count) + " nontrivial eigenvectors of a " + std::to_string(n) + "-node graph");
  const double max_degree = laplacian.diagonal().maxCoeff();
  const double shift = 1e-8 * std::max(1.0, max_degree);
  Eigen::MatrixXd shifted = laplacian;
  shifted.diagonal().array() += shift;
  const Eigen::LLT<Eigen::MatrixXd> llt(shifted);

  Eigen::MatrixXd basis(n, count + 1);
  basis.col(0) = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  auto deflate = [&](Eigen::VectorXd& v, int found) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j <= found; ++j) v -= basis.col(j).dot(v) * basis.col(j);
  };

  for (int j = 1; j <= count; ++j) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    deflate(v, j - 1);
    v.normalize();
    for (int iter = 0; iter < 5000; ++iter) {
      Eigen::VectorXd w = llt.solve(v);
      deflate(w, j - 1);
      w.normalize();
      if (w.dot(v) < 0) w = -w;
      const double change = (w - v).lpNorm<Eigen::Infinity>();
      v = w;
      if (change < 1e-12) break;
    }
    // Fix the sign so the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    basis.col(j) = v;
  }
  return basis.rightCols(count);
}

PartitionMap spectral_partition(const Network& net, int num_parts, std::uint64_t seed) {
  const int n = net.num_buses();
  if (num_parts < 1) throw PartitionError("number of partitions must be at least 1");
  if (num_parts > n)
    throw PartitionError("cannot split " + std::to_string(n) + " buses into " + std::to_string(num_parts) + " partitions");
  PartitionMap map;
  map.num_parts = num_parts;
  map.assignment.assign(static_cast<std::size_t>(n), 0);
  if (num_parts == 1) return map;

  int dims = 0;
  while ((1 << dims) < num_parts) ++dims;
  dims = std::min(dims, n - 1);
  const Eigen::MatrixXd embedding = laplacian_eigenvectors(graph_laplacian(net), dims, seed);

  std::mt19937_64 rng(seed);
  std::vector<int> best;
  double best_inertia = std::numeric_limits<double>::max();
  for (int restart = 0; restart < 20; ++restart) {
    std::vector<int> labels;
    const double inertia = kmeans_once(embedding, num_parts, rng, labels);
    if (inertia < best_inertia - 1e-12) {
      best_inertia = inertia;
      best = labels;
    }
  }

  // Canonical labels: partitions numbered by their lowest bus index.
  std::map<int, int> relabel;
  for (int label : best)
    if (!relabel.count(label)) relabel.emplace(label, static_cast<int>(relabel.size()));
  for (int i = 0; i < n; ++i) map.assignment[static_cast<std::size_t>(i)] = relabel.at(best[static_cast<std::size_t>(i)]);
  map.validate(n);
  return map;
}

PartitionMap parse_partition_map(std::string_view text, const Network& net) {
  const int n = net.num_buses();
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  int max_id = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long long bus_id = 0;
    long long part_id = 0;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string extra;
    if (!(ls >> bus_id) || !(ls >> part_id) || (ls >> extra))
      throw PartitionError("partition map line " + std::to_string(line_no) + ": expected '<bus_id> <partition_id>'");
    const int idx = net.bus_index(static_cast<int>(bus_id));
    if (idx < 0) throw PartitionError("partition map line " + std::to_string(line_no) + ": unknown bus " + std::to_string(bus_id));
    if (part_id < 0) throw PartitionError("partition map line " + std::to_string(line_no) + ": negative partition id");
    if (assignment[static_cast<std::size_t>(idx)] >= 0)
      throw PartitionError("partition map line " + std::to_string(line_no) + ": duplicate bus " + std::to_string(bus_id));
    assignment[static_cast<std::size_t>(idx)] = static_cast<int>(part_id);
    max_id = std::max(max_id, static_cast<int>(part_id));
  }
  for (int i = 0; i < n; ++i)
    if (assignment[static_cast<std::size_t>(i)] < 0)
      throw PartitionError("partition map: missing bus " + std::to_string(net.buses[static_cast<std::size_t>(i)].id));
  PartitionMap map{std::move(assignment), max_id + 1};
  map.validate(n);
  return map;
}

PartitionMap load_partition_map(const std::string& path, const Network& net) {
  std::ifstream in(path);
  if (!in) throw PartitionError("cannot open partition map " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_partition_map(ss.str(), net);
}

std::string format_partition_map(const PartitionMap& map, const Network& net) {
  std::ostringstream out;
  for (int i = 0; i < net.num_buses(); ++i)
    out << net.buses[static_cast<std::size_t>(i)].id << " " << map.assignment[static_cast<std::size_t>(i)] << "\n";
  return out.str();
}

PartitionedNetwork build_partition_problems(const Network& net, const PartitionMap& map) {
  const int n = net.num_buses();
  map.validate(n);
  const auto& part = map.assignment;
  const SystemMatrices sys = build_system_matrices(net);

  PartitionedNetwork pn;
  pn.num_buses = n;

  // Layout: one entry per (holder, owner, bus) with bus in the owner adjacent to the holder.
  std::set<std::tuple<int, int, int>> keyed;  // (owner, bus, holder)
  for (const auto& br : net.branches) {
    const int pa = part[static_cast<std::size_t>(br.from_bus)];
    const int pb = part[static_cast<std::size_t>(br.to_bus)];
    if (pa == pb) continue;
    keyed.emplace(pb, br.to_bus, pa);
    keyed.emplace(pa, br.from_bus, pb);
  }
  ConsensusLayout& layout = pn.layout;
  for (const auto& [owner, bus, holder] : keyed) {
    const int e = static_cast<int>(layout.entries.size());
    layout.entries.push_back({holder, owner, bus});
    if (layout.slots.empty() || layout.slots.back().owner != owner || layout.slots.back().bus != bus)
      layout.slots.push_back({owner, bus, {}});
    layout.slots.back().entries.push_back(e);
    layout.slot_of_entry.push_back(static_cast<int>(layout.slots.size()) - 1);
  }

  std::vector<int> local_pos(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(map.num_parts));
  for (int i = 0; i < n; ++i) {
    auto& m = members[static_cast<std::size_t>(part[static_cast<std::size_t>(i)])];
    local_pos[static_cast<std::size_t>(i)] = static_cast<int>(m.size());
    m.push_back(i);
  }
  const int ref = net.reference_bus();
  const Eigen::VectorXd base_load = net.base_load();

  for (int s = 0; s < map.num_parts; ++s) {
    PartitionProblem pp;
    pp.id = s;
    pp.internal_buses = members[static_cast<std::size_t>(s)];
    const int ns = pp.num_internal();

    for (std::size_t k = 0; k < net.generators.size(); ++k)
      if (part[static_cast<std::size_t>(net.generators[k].bus)] == s) pp.generators.push_back(static_cast<int>(k));
    const int ng = pp.num_generators();
    pp.cost.resize(ng);
    pp.g_min.resize(ng);
    pp.g_max.resize(ng);
    pp.gen_incidence = Eigen::MatrixXd::Zero(ns, ng);
    for (int k = 0; k < ng; ++k) {
      const auto& g = net.generators[static_cast<std::size_t>(pp.generators[static_cast<std::size_t>(k)])];
      pp.cost[k] = g.cost;
      pp.g_min[k] = g.g_min;
      pp.g_max[k] = g.g_max;
      pp.gen_incidence(local_pos[static_cast<std::size_t>(g.bus)], k) = 1.0;
    }

    std::map<int, int> copy_of_bus;  // global bus -> copy variable
    for (int e = 0; e < layout.width(); ++e) {
      const auto& entry = layout.entries[static_cast<std::size_t>(e)];
      if (entry.holder != s) continue;
      copy_of_bus[entry.bus] = pp.num_copies();
      pp.copy_entries.push_back(e);
    }
    const int nc = pp.num_copies();

    pp.h_local.resize(ns, ns);
    for (int a = 0; a < ns; ++a)
      for (int b = 0; b < ns; ++b)
        pp.h_local(a, b) = sys.laplacian(pp.internal_buses[static_cast<std::size_t>(a)], pp.internal_buses[static_cast<std::size_t>(b)]);
    pp.h_coupling.resize(ns, nc);
    for (int c = 0; c < nc; ++c) {
      const int bus = layout.entries[static_cast<std::size_t>(pp.copy_entries[static_cast<std::size_t>(c)])].bus;
      for (int a = 0; a < ns; ++a) pp.h_coupling(a, c) = sys.laplacian(pp.internal_buses[static_cast<std::size_t>(a)], bus);
    }

    for (int c = 0; c < nc; ++c) {
      const auto& entry = layout.entries[static_cast<std::size_t>(pp.copy_entries[static_cast<std::size_t>(c)])];
      if (pp.couplings.empty() || pp.couplings.back().neighbor != entry.owner) pp.couplings.push_back(Coupling{entry.owner, {}, {}, {}, {}});
      Coupling& cp = pp.couplings.back();
      cp.buses.push_back(entry.bus);
      cp.copy_index.push_back(c);
      cp.owner_local.push_back(local_pos[static_cast<std::size_t>(entry.bus)]);
    }
    for (auto& cp : pp.couplings) {
      cp.h_block.resize(ns, static_cast<Eigen::Index>(cp.buses.size()));
      for (std::size_t j = 0; j < cp.copy_index.size(); ++j) cp.h_block.col(static_cast<Eigen::Index>(j)) = pp.h_coupling.col(cp.copy_index[j]);
    }

    for (int sl = 0; sl < layout.n_pub(); ++sl) {
      const auto& slot = layout.slots[static_cast<std::size_t>(sl)];
      if (slot.owner != s) continue;
      pp.owned_slots.push_back(sl);
      pp.owned_slot_local.push_back(local_pos[static_cast<std::size_t>(slot.bus)]);
    }

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
      const auto& br = net.branches[k];
      if (!br.flow_limit) continue;
      if (part[static_cast<std::size_t>(br.from_bus)] != s && part[static_cast<std::size_t>(br.to_bus)] != s) continue;
      pp.flow_branches.push_back(static_cast<int>(k));
    }
    const auto nf = static_cast<Eigen::Index>(pp.flow_branches.size());
    pp.k_local = Eigen::MatrixXd::Zero(nf, ns);
    pp.k_coupling = Eigen::MatrixXd::Zero(nf, nc);
    pp.flow_limit.resize(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
      const auto& br = net.branches[static_cast<std::size_t>(pp.flow_branches[static_cast<std::size_t>(r)])];
      pp.flow_limit[r] = *br.flow_limit;
      auto place = [&](int bus, double value) {
        if (part[static_cast<std::size_t>(bus)] == s)
          pp.k_local(r, local_pos[static_cast<std::size_t>(bus)]) += value;
        else
          pp.k_coupling(r, copy_of_bus.at(bus)) += value;
      };
      place(br.from_bus, br.susceptance);
      place(br.to_bus, -br.susceptance);
    }

    if (ref >= 0 && part[static_cast<std::size_t>(ref)] == s) {
      pp.contains_reference = true;
      pp.reference_local = local_pos[static_cast<std::size_t>(ref)];
    }
    pp.load.resize(ns);
    for (int a = 0; a < ns; ++a) pp.load[a] = base_load[pp.internal_buses[static_cast<std::size_t>(a)]];
    pn.parts.push_back(std::move(pp));
  }
  return pn;
}

void set_load(PartitionedNetwork& pn, const Eigen::VectorXd& load) {
  if (load.size() != pn.num_buses)
    throw std::invalid_argument("load vector has " + std::to_string(load.size()) + " entries, expected " + std::to_string(pn.num_buses));
  for (auto& pp : pn.parts)
    for (int a = 0; a < pp.num_internal(); ++a) pp.load[a] = load[pp.internal_buses[static_cast<std::size_t>(a)]];
}

PartitionReport validate_partition(const Network& net, const PartitionMap& map) {
  map.validate(net.num_buses());
  PartitionReport report;
  const auto& part = map.assignment;
  std::set<int> boundary;
  for (const auto& br : net.branches) {
    if (part[static_cast<std::size_t>(br.from_bus)] == part[static_cast<std::size_t>(br.to_bus)]) continue;
    ++report.tie_lines;
    boundary.insert(br.from_bus);
    boundary.insert(br.to_bus);
  }
  for (int s = 0; s < map.num_parts; ++s) {
    PartitionStats st;
    st.id = s;
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (part[i] != s) continue;
      ++st.buses;
      st.base_load += net.buses[i].base_load;
      if (boundary.count(static_cast<int>(i))) ++st.boundary_buses;
    }
    for (const auto& g : net.generators)
      if (part[static_cast<std::size_t>(g.bus)] == s) {
        ++st.generators;
        st.capacity += g.g_max;
      }
    st.connected = is_connected(net, part, s);
    if (!st.connected) report.warnings.push_back("partition " + std::to_string(s) + " is not connected");
    report.parts.push_back(st);
  }
  const PartitionedNetwork pn = build_partition_problems(net, map);
  report.n_pub = pn.layout.n_pub();
  report.width = pn.layout.width();
  return report;
}

std::string PartitionReport::to_string() const {
  std::ostringstream out;
  out << "partitions: " << parts.size() << "\n";
  out << "tie_lines: " << tie_lines << "\n";
  out << "n_pub: " << n_pub << "\n";
  out << "consensus_entries: " << width << "\n";
  out << "consensus_variables: " << 2 * width + 2 * n_pub << "\n";
  out << "partition,buses,generators,boundary_buses,connected,capacity_pu,base_load_pu\n";
  for (const auto& p : parts)
    out << p.id << "," << p.buses << "," << p.generators << "," << p.boundary_buses << "," << (p.connected ? "yes" : "no")
        << "," << p.capacity << "," << p.base_load << "\n";
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  return out.str();
}

}  // namespace laadmm
