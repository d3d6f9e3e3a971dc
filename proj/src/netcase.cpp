#include "laadmm/netcase.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace laadmm {

namespace {

struct Row {
  std::vector<double> values;
  int line = 0;
};

struct Table {
  std::vector<Row> rows;
  int line = 0;
};

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char c : text) {
    if (c == '\n') in_comment = false;
    else if (c == '%') in_comment = true;
    if (!in_comment) out.push_back(c);
  }
  return out;
}

int line_of(const std::string& text, std::size_t pos) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

std::optional<Table> find_table(const std::string& text, const std::string& name) {
  const std::string key = "mpc." + name;
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    std::size_t p = pos + key.size();
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    if (p < text.size() && text[p] == '=') break;
    pos = p;
  }
  if (pos == std::string::npos) return std::nullopt;

  const std::size_t open = text.find('[', pos);
  const std::size_t close = text.find(']', open == std::string::npos ? pos : open);
  if (open == std::string::npos || close == std::string::npos)
    throw ParseError("mpc." + name + " (line " + std::to_string(line_of(text, pos)) + "): missing '[' or ']'");

  Table table;
  table.line = line_of(text, pos);
  int line = line_of(text, open);
  Row current;
  current.line = line;
  std::string token;
  auto flush_token = [&] {
    if (token.empty()) return;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == nullptr || *end != '\0')
      throw ParseError("mpc." + name + " line " + std::to_string(line) + ": malformed value '" + token + "'");
    current.values.push_back(v);
    token.clear();
  };
  auto flush_row = [&] {
    flush_token();
    if (!current.values.empty()) table.rows.push_back(std::move(current));
    current = Row{};
    current.line = line;
  };
  for (std::size_t i = open + 1; i < close; ++i) {
    const char c = text[i];
    if (c == '\n') {
      flush_row();
      ++line;
      current.line = line;
    } else if (c == ';') {
      flush_row();
    } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      flush_token();
    } else {
      token.push_back(c);
    }
  }
  flush_row();
  return table;
}

Table require_table(const std::string& text, const std::string& name) {
  auto t = find_table(text, name);
  if (!t) throw ParseError("missing table mpc." + name);
  return *t;
}

void require_columns(const Row& row, std::size_t count, const std::string& table) {
  if (row.values.size() < count)
    throw ParseError("mpc." + table + " line " + std::to_string(row.line) + ": expected at least " +
                     std::to_string(count) + " columns, found " + std::to_string(row.values.size()));
}

double parse_base_mva(const std::string& text) {
  const std::string key = "mpc.baseMVA";
  const std::size_t pos = text.find(key);
  if (pos == std::string::npos) throw ParseError("missing mpc.baseMVA");
  const std::size_t eq = text.find('=', pos);
  if (eq == std::string::npos) throw ParseError("mpc.baseMVA: missing '='");
  char* end = nullptr;
  const double v = std::strtod(text.c_str() + eq + 1, &end);
  if (end == text.c_str() + eq + 1 || !(v > 0))
    throw ParseError("mpc.baseMVA (line " + std::to_string(line_of(text, pos)) + "): expected a positive number");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int Network::reference_bus() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].is_reference) return static_cast<int>(i);
  return -1;
}

int Network::bus_index(int external_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == external_id) return static_cast<int>(i);
  return -1;
}

Eigen::VectorXd Network::base_load() const {
  Eigen::VectorXd d(num_buses());
  for (int i = 0; i < num_buses(); ++i) d[i] = buses[static_cast<std::size_t>(i)].base_load;
  return d;
}

double Network::total_capacity() const {
  double total = 0.0;
  for (const auto& g : generators) total += g.g_max;
  return total;
}

int Network::num_components() const {
  std::vector<int> parent(buses.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  int components = num_buses();
  for (const auto& br : branches) {
    const int a = find(br.from_bus);
    const int b = find(br.to_bus);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  return components;
}

Network parse_matpower_case(std::string_view raw, std::string name) {
  const std::string text = strip_comments(raw);
  Network net;
  net.name = std::move(name);

  const Table bus_t = require_table(text, "bus");
  const Table gen_t = require_table(text, "gen");
  const Table branch_t = require_table(text, "branch");
  const Table cost_t = require_table(text, "gencost");
  net.base_mva = parse_base_mva(text);
  const double base = net.base_mva;

  std::map<int, int> index_of;
  for (const auto& row : bus_t.rows) {
    require_columns(row, 3, "bus");
    const int id = static_cast<int>(row.values[0]);
    const int type = static_cast<int>(row.values[1]);
    if (id != row.values[0] || id <= 0)
      throw ParseError("mpc.bus line " + std::to_string(row.line) + ": bus number must be a positive integer");
    if (index_of.count(id)) throw ParseError("mpc.bus line " + std::to_string(row.line) + ": duplicate bus " + std::to_string(id));
    if (type == 4) continue;  // isolated
    if (type < 1 || type > 4)
      throw ParseError("mpc.bus line " + std::to_string(row.line) + ": unknown bus type " + std::to_string(type));
    Bus b;
    b.id = id;
    b.base_load = row.values[2] / base;
    b.is_reference = type == 3;
    index_of[id] = static_cast<int>(net.buses.size());
    net.buses.push_back(b);
  }
  if (net.buses.empty()) throw ParseError("mpc.bus: no in-service buses");
  const auto refs = std::count_if(net.buses.begin(), net.buses.end(), [](const Bus& b) { return b.is_reference; });
  if (refs == 0) throw ParseError("mpc.bus: no reference bus (type 3)");
  if (refs > 1) throw ParseError("mpc.bus: more than one reference bus (type 3)");

  if (cost_t.rows.size() < gen_t.rows.size())
    throw ParseError("mpc.gencost: " + std::to_string(cost_t.rows.size()) + " rows for " +
                     std::to_string(gen_t.rows.size()) + " generators");
  for (std::size_t k = 0; k < gen_t.rows.size(); ++k) {
    const Row& row = gen_t.rows[k];
    require_columns(row, 10, "gen");
    const int id = static_cast<int>(row.values[0]);
    const auto it = index_of.find(id);
    if (it == index_of.end()) {
      if (row.values[7] > 0)
        throw ParseError("mpc.gen line " + std::to_string(row.line) + ": unknown or isolated bus " + std::to_string(id));
      continue;
    }
    const Row& cost = cost_t.rows[k];
    require_columns(cost, 4, "gencost");
    const int model = static_cast<int>(cost.values[0]);
    const int ncoef = static_cast<int>(cost.values[3]);
    if (model != 2)
      throw ParseError("mpc.gencost line " + std::to_string(cost.line) + ": only polynomial (model 2) costs are supported");
    require_columns(cost, static_cast<std::size_t>(4 + ncoef), "gencost");
    if (row.values[7] <= 0) continue;  // out of service

    Generator g;
    g.bus = it->second;
    g.g_max = row.values[8] / base;
    g.g_min = row.values[9] / base;
    // Coefficients run from highest order down to the constant term; cost is
    // linear in per-unit generation with the MATPOWER $/MWh coefficient.
    g.cost = ncoef >= 2 ? cost.values[static_cast<std::size_t>(4 + ncoef - 2)] : 0.0;
    if (g.g_min > g.g_max)
      throw ParseError("mpc.gen line " + std::to_string(row.line) + ": Pmin exceeds Pmax");
    if (g.cost < 0)
      throw ParseError("mpc.gencost line " + std::to_string(cost.line) + ": negative linear cost");
    net.generators.push_back(g);
  }

  for (const auto& row : branch_t.rows) {
    require_columns(row, 11, "branch");
    if (row.values[10] <= 0) continue;
    const int f = static_cast<int>(row.values[0]);
    const int t = static_cast<int>(row.values[1]);
    const auto fi = index_of.find(f);
    const auto ti = index_of.find(t);
    if (fi == index_of.end() || ti == index_of.end()) {
      const bool known = bus_t.rows.end() != std::find_if(bus_t.rows.begin(), bus_t.rows.end(), [&](const Row& r) {
                           return static_cast<int>(r.values[0]) == (fi == index_of.end() ? f : t);
                         });
      if (known) continue;  // touches an isolated bus
      throw ParseError("mpc.branch line " + std::to_string(row.line) + ": unknown bus " +
                       std::to_string(fi == index_of.end() ? f : t));
    }
    if (f == t) throw ParseError("mpc.branch line " + std::to_string(row.line) + ": branch connects bus to itself");
    const double x = row.values[3];
    if (x == 0.0) throw ParseError("mpc.branch line " + std::to_string(row.line) + ": zero reactance");
    if (x < 0.0) throw ParseError("mpc.branch line " + std::to_string(row.line) + ": negative reactance");
    Branch br;
    br.from_bus = fi->second;
    br.to_bus = ti->second;
    br.susceptance = 1.0 / x;
    if (row.values[5] > 0) br.flow_limit = row.values[5] / base;
    net.branches.push_back(br);
  }
  return net;
}

Network load_matpower_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (const auto dot = name.rfind(".m"); dot != std::string::npos && dot + 2 == name.size()) name = name.substr(0, dot);
  return parse_matpower_case(ss.str(), name);
}

std::string format_matpower_case(const Network& net) {
  std::ostringstream out;
  const double base = net.base_mva;
  out << "function mpc = " << net.name << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << fmt(base) << ";\n\n";
  out << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  out << "mpc.bus = [\n";
  for (const auto& b : net.buses)
    out << "\t" << b.id << "\t" << (b.is_reference ? 3 : 1) << "\t" << fmt(b.base_load * base)
        << "\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;\n";
  out << "];\n\n";
  out << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  out << "mpc.gen = [\n";
  for (const auto& g : net.generators)
    out << "\t" << net.buses[static_cast<std::size_t>(g.bus)].id << "\t0\t0\t0\t0\t1\t" << fmt(base) << "\t1\t"
        << fmt(g.g_max * base) << "\t" << fmt(g.g_min * base) << ";\n";
  out << "];\n\n";
  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\n";
  out << "mpc.branch = [\n";
  for (const auto& br : net.branches)
    out << "\t" << net.buses[static_cast<std::size_t>(br.from_bus)].id << "\t"
        << net.buses[static_cast<std::size_t>(br.to_bus)].id << "\t0\t" << fmt(1.0 / br.susceptance) << "\t0\t"
        << fmt(br.flow_limit ? *br.flow_limit * base : 0.0) << "\t0\t0\t0\t0\t1;\n";
  out << "];\n\n";
  out << "mpc.gencost = [\n";
  for (const auto& g : net.generators) out << "\t2\t0\t0\t2\t" << fmt(g.cost) << "\t0;\n";
  out << "];\n";
  return out.str();
}

std::string summarize(const Network& net) {
  std::ostringstream out;
  const int ref = net.reference_bus();
  double load = 0.0;
  for (const auto& b : net.buses) load += b.base_load;
  const auto limited = std::count_if(net.branches.begin(), net.branches.end(), [](const Branch& b) { return b.flow_limit.has_value(); });
  out << "name: " << net.name << "\n";
  out << "buses: " << net.num_buses() << "\n";
  out << "branches: " << net.branches.size() << "\n";
  out << "generators: " << net.generators.size() << "\n";
  out << "reference_bus: " << (ref >= 0 ? net.buses[static_cast<std::size_t>(ref)].id : -1) << "\n";
  out << "base_mva: " << net.base_mva << "\n";
  out << "total_load_pu: " << load << "\n";
  out << "total_capacity_pu: " << net.total_capacity() << "\n";
  out << "limited_branches: " << limited << "\n";
  out << "components: " << net.num_components() << "\n";
  return out.str();
}

SystemMatrices build_system_matrices(const Network& net) {
  const auto n = net.num_buses();
  const auto m = static_cast<Eigen::Index>(net.branches.size());
  SystemMatrices s;
  s.incidence = Eigen::MatrixXd::Zero(m, n);
  s.susceptance_diag.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Branch& br = net.branches[static_cast<std::size_t>(k)];
    s.incidence(k, br.from_bus) = 1.0;
    s.incidence(k, br.to_bus) = -1.0;
    s.susceptance_diag[k] = br.susceptance;
  }
  s.flow_map = s.susceptance_diag.asDiagonal() * s.incidence;
  s.laplacian = s.incidence.transpose() * s.flow_map;
  return s;
}

std::string to_string(DispatchStatus status) {
  switch (status) {
    case DispatchStatus::optimal: return "optimal";
    case DispatchStatus::infeasible: return "infeasible";
    case DispatchStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

QpProblem centralized_problem(const Network& net, const Eigen::VectorXd& load) {
  const Eigen::Index n = net.num_buses();
  const auto ng = static_cast<Eigen::Index>(net.generators.size());
  if (load.size() != n) throw std::invalid_argument("load vector has " + std::to_string(load.size()) + " entries, expected " + std::to_string(n));
  const SystemMatrices sys = build_system_matrices(net);

  std::vector<Eigen::Index> limited;
  for (std::size_t k = 0; k < net.branches.size(); ++k)
    if (net.branches[k].flow_limit) limited.push_back(static_cast<Eigen::Index>(k));
  const auto nl = static_cast<Eigen::Index>(limited.size());

  const Eigen::Index nv = ng + n;
  const Eigen::Index m = n + ng + nl + 1;
  QpProblem p;
  p.quadratic = Eigen::MatrixXd::Zero(nv, nv);
  p.linear = Eigen::VectorXd::Zero(nv);
  p.constraint_matrix = Eigen::MatrixXd::Zero(m, nv);
  p.lower.resize(m);
  p.upper.resize(m);

  for (Eigen::Index k = 0; k < ng; ++k) p.linear[k] = net.generators[static_cast<std::size_t>(k)].cost;

  // Balance: H theta + C g = d.
  p.constraint_matrix.block(0, ng, n, n) = sys.laplacian;
  for (Eigen::Index k = 0; k < ng; ++k) p.constraint_matrix(net.generators[static_cast<std::size_t>(k)].bus, k) += 1.0;
  p.lower.head(n) = load;
  p.upper.head(n) = load;

  for (Eigen::Index k = 0; k < ng; ++k) {
    const auto& g = net.generators[static_cast<std::size_t>(k)];
    p.constraint_matrix(n + k, k) = 1.0;
    p.lower[n + k] = g.g_min;
    p.upper[n + k] = g.g_max;
  }
  for (Eigen::Index r = 0; r < nl; ++r) {
    const Eigen::Index k = limited[static_cast<std::size_t>(r)];
    p.constraint_matrix.block(n + ng + r, ng, 1, n) = sys.flow_map.row(k);
    const double lim = *net.branches[static_cast<std::size_t>(k)].flow_limit;
    p.lower[n + ng + r] = -lim;
    p.upper[n + ng + r] = lim;
  }
  const int ref = net.reference_bus();
  if (ref < 0) throw std::invalid_argument("network has no reference bus");
  p.constraint_matrix(m - 1, ng + ref) = 1.0;
  p.lower[m - 1] = 0.0;
  p.upper[m - 1] = 0.0;
  return p;
}

DispatchSolution solve_centralized(const Network& net, const Eigen::VectorXd& load, const QpSettings& settings) {
  const QpProblem p = centralized_problem(net, load);
  const QpSolution s = solve_qp(p, settings);
  const auto ng = static_cast<Eigen::Index>(net.generators.size());
  const Eigen::Index n = net.num_buses();
  DispatchSolution out;
  out.certificate_residual = s.primal_residual;
  switch (s.status) {
    case QpStatus::optimal: out.status = DispatchStatus::optimal; break;
    case QpStatus::primal_infeasible: out.status = DispatchStatus::infeasible; break;
    default: out.status = DispatchStatus::max_iter; break;
  }
  out.generation = s.primal.head(ng);
  out.angles = s.primal.segment(ng, n);
  out.objective = p.linear.dot(s.primal);
  out.balance_duals = -s.dual.head(n);
  return out;
}

}  // namespace laadmm
