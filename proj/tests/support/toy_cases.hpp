#pragma once

#include <optional>
#include <string>
#include <vector>

namespace toy {

struct BusSpec {
  int id;
  int type;  // 3 = reference
  double pd_mw;
};

struct GenSpec {
  int bus;
  double pmax_mw;
  double pmin_mw;
  double cost;  // per MWh
};

struct BranchSpec {
  int from;
  int to;
  double x;
  double rate_mva;  // 0 = unlimited
};

struct CaseSpec {
  std::string name;
  double base_mva = 100.0;
  std::vector<BusSpec> buses;
  std::vector<GenSpec> gens;
  std::vector<BranchSpec> branches;
};

/// MATPOWER text for the spec.
std::string to_matpower(const CaseSpec& spec);

/// Optimal dispatch cost by enumerating every basic solution of the DC-OPF
/// polytope, built here directly from the spec. nullopt if infeasible.
std::optional<double> vertex_enumeration_objective(const CaseSpec& spec);

/// Hand-built systems of at most five buses.
std::vector<CaseSpec> acceptance_cases();

CaseSpec triangle();

}  // namespace toy
