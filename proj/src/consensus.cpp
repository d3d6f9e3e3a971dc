#include "laadmm/consensus.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace laadmm {

Eigen::MatrixXd Trajectory::prefix(int rows) const {
  if (rows > size()) throw AdmmError("trajectory has " + std::to_string(size()) + " rows, requested " + std::to_string(rows));
  const Eigen::Index f = features.empty() ? 0 : features.front().size();
  Eigen::MatrixXd out(rows, f);
  for (int r = 0; r < rows; ++r) out.row(r) = features[static_cast<std::size_t>(r)].transpose();
  return out;
}

void Trajectory::write_csv(std::ostream& out, int width, int n_pub) const {
  out << "iter,primal_residual,cost";
  for (int i = 0; i < width; ++i) out << ",lambda_" << i;
  for (int i = 0; i < n_pub; ++i) out << ",thetabar_" << i;
  out << "\n" << std::setprecision(17);
  for (int r = 0; r < size(); ++r) {
    out << r + 1 << "," << primal_residual[static_cast<std::size_t>(r)] << "," << cost[static_cast<std::size_t>(r)];
    if (!features.empty())
      for (Eigen::Index j = 0; j < features[static_cast<std::size_t>(r)].size(); ++j) out << "," << features[static_cast<std::size_t>(r)][j];
    out << "\n";
  }
}

Eigen::VectorXd state_features(const AdmmState& state) {
  Eigen::VectorXd f(state.duals.size() + state.consensus.size());
  f << state.duals, state.consensus;
  return f;
}

void consensus_update(const ConsensusLayout& layout, AdmmState& state) {
  for (int sl = 0; sl < layout.n_pub(); ++sl) {
    const auto& slot = layout.slots[static_cast<std::size_t>(sl)];
    double sum = state.owner_values[sl];
    for (int e : slot.entries) sum += state.copies[e];
    state.consensus[sl] = sum / static_cast<double>(slot.entries.size() + 1);
  }
}

void dual_update(const ConsensusLayout& layout, AdmmState& state) {
  for (int e = 0; e < layout.width(); ++e)
    state.duals[e] += state.rho * (state.copies[e] - state.consensus[layout.slot_of_entry[static_cast<std::size_t>(e)]]);
  for (int sl = 0; sl < layout.n_pub(); ++sl)
    state.owner_duals[sl] += state.rho * (state.owner_values[sl] - state.consensus[sl]);
}

double primal_residual(const ConsensusLayout& layout, const AdmmState& state) {
  double r = 0.0;
  for (int e = 0; e < layout.width(); ++e)
    r = std::max(r, std::abs(state.copies[e] - state.consensus[layout.slot_of_entry[static_cast<std::size_t>(e)]]));
  for (int sl = 0; sl < layout.n_pub(); ++sl) r = std::max(r, std::abs(state.owner_values[sl] - state.consensus[sl]));
  return r;
}

void inject(const ConsensusLayout& layout, AdmmState& state, const Eigen::VectorXd& duals, const Eigen::VectorXd& consensus) {
  if (duals.size() != layout.width() || consensus.size() != layout.n_pub())
    throw AdmmError("injected values do not match the consensus layout");
  if (!duals.allFinite() || !consensus.allFinite()) throw AdmmError("injected values must be finite");
  state.duals = duals;
  state.consensus = consensus;
  for (int sl = 0; sl < layout.n_pub(); ++sl) {
    double sum = 0.0;
    for (int e : layout.slots[static_cast<std::size_t>(sl)].entries) sum += duals[e];
    state.owner_duals[sl] = -sum;
  }
}

AdmmEngine::AdmmEngine(const PartitionedNetwork& network, AdmmConfig config)
    : network_(network), config_(config) {
  if (!(config_.rho > 0)) throw AdmmError("rho must be positive");
  const AdmmState zero = initial_state();
  for (int s = 0; s < static_cast<int>(network_.parts.size()); ++s)
    solvers_.push_back(std::make_unique<QpSolver>(build_subproblem(s, zero), config_.qp));
}

AdmmEngine::~AdmmEngine() = default;
AdmmEngine::AdmmEngine(AdmmEngine&&) noexcept = default;
AdmmEngine& AdmmEngine::operator=(AdmmEngine&&) noexcept = default;

void AdmmEngine::set_config(const AdmmConfig& config) {
  if (!(config.rho > 0)) throw AdmmError("rho must be positive");
  const bool rebuild = config.rho != config_.rho;
  config_ = config;
  if (rebuild) {
    const AdmmState zero = initial_state();
    for (std::size_t s = 0; s < solvers_.size(); ++s)
      solvers_[s] = std::make_unique<QpSolver>(build_subproblem(static_cast<int>(s), zero), config_.qp);
  }
}

void AdmmEngine::set_load(const Eigen::VectorXd& load) {
  laadmm::set_load(network_, load);
  for (std::size_t s = 0; s < solvers_.size(); ++s) {
    const auto& pp = network_.parts[s];
    Eigen::VectorXd lower = solvers_[s]->problem().lower;
    Eigen::VectorXd upper = solvers_[s]->problem().upper;
    lower.head(pp.num_internal()) = pp.load;
    upper.head(pp.num_internal()) = pp.load;
    solvers_[s]->update_bounds(lower, upper);
  }
}

AdmmState AdmmEngine::initial_state() const {
  const auto& layout = network_.layout;
  AdmmState st;
  st.k = 0;
  st.rho = config_.rho;
  for (const auto& pp : network_.parts) st.primal.push_back(Eigen::VectorXd::Zero(pp.num_variables()));
  st.copies = Eigen::VectorXd::Zero(layout.width());
  st.duals = Eigen::VectorXd::Zero(layout.width());
  st.owner_values = Eigen::VectorXd::Zero(layout.n_pub());
  st.consensus = Eigen::VectorXd::Zero(layout.n_pub());
  st.owner_duals = Eigen::VectorXd::Zero(layout.n_pub());
  return st;
}

QpProblem AdmmEngine::build_subproblem(int s, const AdmmState& state) const {
  const PartitionProblem& pp = network_.parts[static_cast<std::size_t>(s)];
  const auto& layout = network_.layout;
  const int ng = pp.num_generators();
  const int ns = pp.num_internal();
  const int nc = pp.num_copies();
  const int nv = pp.num_variables();
  const auto nf = static_cast<int>(pp.flow_branches.size());
  const double rho = state.rho;

  QpProblem p;
  p.quadratic = Eigen::MatrixXd::Zero(nv, nv);
  p.linear = Eigen::VectorXd::Zero(nv);
  p.linear.head(ng) = pp.cost;

  // Held copies: lambda'(x - theta_bar) + rho/2 |x - theta_bar|^2.
  for (int c = 0; c < nc; ++c) {
    const int e = pp.copy_entries[static_cast<std::size_t>(c)];
    const int v = pp.copy_offset() + c;
    p.quadratic(v, v) = rho;
    p.linear[v] = state.duals[e] - rho * state.consensus[layout.slot_of_entry[static_cast<std::size_t>(e)]];
  }
  // Owned boundary angles carry the mirrored terms.
  for (std::size_t j = 0; j < pp.owned_slots.size(); ++j) {
    const int sl = pp.owned_slots[j];
    const int v = pp.angle_offset() + pp.owned_slot_local[j];
    p.quadratic(v, v) = rho;
    p.linear[v] = state.owner_duals[sl] - rho * state.consensus[sl];
  }

  const int m = ns + ng + nf + (pp.contains_reference ? 1 : 0);
  p.constraint_matrix = Eigen::MatrixXd::Zero(m, nv);
  p.lower.resize(m);
  p.upper.resize(m);
  p.constraint_matrix.block(0, 0, ns, ng) = pp.gen_incidence;
  p.constraint_matrix.block(0, pp.angle_offset(), ns, ns) = pp.h_local;
  p.constraint_matrix.block(0, pp.copy_offset(), ns, nc) = pp.h_coupling;
  p.lower.head(ns) = pp.load;
  p.upper.head(ns) = pp.load;
  for (int k = 0; k < ng; ++k) {
    p.constraint_matrix(ns + k, k) = 1.0;
    p.lower[ns + k] = pp.g_min[k];
    p.upper[ns + k] = pp.g_max[k];
  }
  if (nf > 0) {
    p.constraint_matrix.block(ns + ng, pp.angle_offset(), nf, ns) = pp.k_local;
    p.constraint_matrix.block(ns + ng, pp.copy_offset(), nf, nc) = pp.k_coupling;
    p.lower.segment(ns + ng, nf) = -pp.flow_limit;
    p.upper.segment(ns + ng, nf) = pp.flow_limit;
  }
  if (pp.contains_reference) {
    p.constraint_matrix(m - 1, pp.angle_offset() + pp.reference_local) = 1.0;
    p.lower[m - 1] = 0.0;
    p.upper[m - 1] = 0.0;
  }
  return p;
}

void AdmmEngine::partition_update(AdmmState& state) {
  const auto& layout = network_.layout;
  for (std::size_t s = 0; s < solvers_.size(); ++s) {
    const PartitionProblem& pp = network_.parts[s];
    Eigen::VectorXd q = solvers_[s]->problem().linear;
    for (int c = 0; c < pp.num_copies(); ++c) {
      const int e = pp.copy_entries[static_cast<std::size_t>(c)];
      q[pp.copy_offset() + c] = state.duals[e] - state.rho * state.consensus[layout.slot_of_entry[static_cast<std::size_t>(e)]];
    }
    for (std::size_t j = 0; j < pp.owned_slots.size(); ++j) {
      const int sl = pp.owned_slots[j];
      q[pp.angle_offset() + pp.owned_slot_local[j]] = state.owner_duals[sl] - state.rho * state.consensus[sl];
    }
    solvers_[s]->update_linear(q);
    const QpSolution sol = solvers_[s]->solve();
    if (sol.status != QpStatus::optimal)
      throw AdmmError("partition " + std::to_string(pp.id) + " subproblem failed at iteration " + std::to_string(state.k + 1) +
                      ": " + to_string(sol.status) + " (primal residual " + std::to_string(sol.primal_residual) +
                      ", dual residual " + std::to_string(sol.dual_residual) + ", iterations " + std::to_string(sol.iterations) + ")");
    state.primal[s] = sol.primal;
    for (int c = 0; c < pp.num_copies(); ++c) state.copies[pp.copy_entries[static_cast<std::size_t>(c)]] = sol.primal[pp.copy_offset() + c];
    for (std::size_t j = 0; j < pp.owned_slots.size(); ++j)
      state.owner_values[pp.owned_slots[j]] = sol.primal[pp.angle_offset() + pp.owned_slot_local[j]];
  }
}

double AdmmEngine::cost(const AdmmState& state) const {
  double total = 0.0;
  for (std::size_t s = 0; s < network_.parts.size(); ++s) {
    const auto& pp = network_.parts[s];
    total += pp.cost.dot(state.primal[s].head(pp.num_generators()));
  }
  return total;
}

void AdmmEngine::step(AdmmState& state) {
  partition_update(state);
  consensus_update(network_.layout, state);
  dual_update(network_.layout, state);
  ++state.k;
}

AdmmRun AdmmEngine::run(const AdmmHook& hook) {
  if (config_.max_iter < 0) throw AdmmError("max_iter must be nonnegative");
  for (auto& solver : solvers_) solver->reset();
  AdmmRun out;
  AdmmState state = initial_state();
  const auto& layout = network_.layout;
  for (int it = 0; it < config_.max_iter; ++it) {
    if (hook) hook(state.k, state, out.trajectory);
    const Eigen::VectorXd previous = state.consensus;
    step(state);
    const double residual = primal_residual(layout, state);
    const double dual_res = layout.n_pub() == 0 ? 0.0 : state.rho * (state.consensus - previous).lpNorm<Eigen::Infinity>();
    const double c = cost(state);
    out.trajectory.primal_residual.push_back(residual);
    out.trajectory.dual_residual.push_back(dual_res);
    out.trajectory.cost.push_back(c);
    if (config_.record_trajectory) out.trajectory.features.push_back(state_features(state));
    out.result.final_cost = c;
    out.result.final_residual = residual;
    out.result.iterations = state.k;
    if (residual <= config_.primal_tol && (config_.dual_tol <= 0 || dual_res <= config_.dual_tol)) {
      out.result.converged = true;
      break;
    }
  }
  out.result.state = std::move(state);
  return out;
}

AdmmRun run_admm(const PartitionedNetwork& network, const AdmmConfig& config, const AdmmHook& hook) {
  AdmmEngine engine(network, config);
  return engine.run(hook);
}

}  // namespace laadmm
