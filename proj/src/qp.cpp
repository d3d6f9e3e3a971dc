#include "laadmm/qp.hpp"

#include <algorithm>
#include <cmath>

namespace laadmm {

namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;

bool is_upper_infinite(double u) { return u >= kQpInfinity * kMinScaling; }
bool is_lower_infinite(double l) { return l <= -kQpInfinity * kMinScaling; }

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

double clamp_scaling(double v) {
  if (v < kMinScaling) return 1.0;  // zero column / row: leave unscaled
  return std::clamp(v, kMinScaling, kMaxScaling);
}

}  // namespace

double QpProblem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(quadratic * x) + linear.dot(x);
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::primal_infeasible: return "primal_infeasible";
    case QpStatus::dual_infeasible: return "dual_infeasible";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

void validate(const QpProblem& p) {
  const auto n = p.linear.size();
  const auto m = p.constraint_matrix.rows();
  if (p.quadratic.rows() != n || p.quadratic.cols() != n)
    throw QpError("qp: quadratic term must be " + std::to_string(n) + "x" + std::to_string(n));
  if (p.constraint_matrix.cols() != n && m > 0)
    throw QpError("qp: constraint matrix has " + std::to_string(p.constraint_matrix.cols()) +
                  " columns, expected " + std::to_string(n));
  if (p.lower.size() != m || p.upper.size() != m)
    throw QpError("qp: bound vectors must have " + std::to_string(m) + " entries");
  const double asym = n == 0 ? 0.0 : (p.quadratic - p.quadratic.transpose()).cwiseAbs().maxCoeff();
  const double scale = n == 0 ? 0.0 : std::max(1.0, p.quadratic.cwiseAbs().maxCoeff());
  if (asym > 1e-12 * scale) throw QpError("qp: quadratic term is not symmetric");
  for (Eigen::Index i = 0; i < m; ++i)
    if (p.lower[i] > p.upper[i]) throw QpError("qp: lower bound exceeds upper bound in row " + std::to_string(i));
}

KktResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  KktResiduals r;
  if (p.num_constraints() > 0) {
    const Eigen::VectorXd ax = p.constraint_matrix * x;
    for (Eigen::Index i = 0; i < ax.size(); ++i) {
      double v = 0.0;
      if (!is_lower_infinite(p.lower[i])) v = std::max(v, p.lower[i] - ax[i]);
      if (!is_upper_infinite(p.upper[i])) v = std::max(v, ax[i] - p.upper[i]);
      r.primal = std::max(r.primal, v);
    }
  }
  Eigen::VectorXd grad = p.quadratic * x + p.linear;
  if (p.num_constraints() > 0) grad += p.constraint_matrix.transpose() * y;
  r.dual = inf_norm(grad);
  return r;
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  return kkt_residuals(p, s.primal, s.dual);
}

QpSolver::QpSolver(QpProblem problem, QpSettings settings)
    : problem_(std::move(problem)), settings_(settings) {
  validate(problem_);
  if (settings_.eps_abs <= 0 || settings_.eps_rel < 0) throw QpError("qp: tolerances must be positive");
  // Clamp to the sentinel so infinite bounds stay representable after scaling.
  problem_.lower = problem_.lower.cwiseMax(-kQpInfinity);
  problem_.upper = problem_.upper.cwiseMin(kQpInfinity);
  equilibrate();
  scale_vectors();
  set_rho_vector(settings_.rho);
  factor();
  cold_start();
}

void QpSolver::equilibrate() {
  const auto n = problem_.num_variables();
  const auto m = problem_.num_constraints();
  d_ = Eigen::VectorXd::Ones(n);
  e_ = Eigen::VectorXd::Ones(m);
  cost_scale_ = 1.0;
  p_s_ = problem_.quadratic;
  a_s_ = problem_.constraint_matrix;
  if (m == 0) a_s_.resize(0, n);
  Eigen::VectorXd q = problem_.linear;

  for (int it = 0; it < settings_.scaling_iterations; ++it) {
    Eigen::VectorXd d_tmp(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double norm = p_s_.col(j).cwiseAbs().maxCoeff();
      if (m > 0) norm = std::max(norm, a_s_.col(j).cwiseAbs().maxCoeff());
      d_tmp[j] = 1.0 / std::sqrt(clamp_scaling(norm));
    }
    Eigen::VectorXd e_tmp(m);
    for (Eigen::Index i = 0; i < m; ++i)
      e_tmp[i] = 1.0 / std::sqrt(clamp_scaling(n == 0 ? 0.0 : a_s_.row(i).cwiseAbs().maxCoeff()));

    p_s_ = d_tmp.asDiagonal() * p_s_ * d_tmp.asDiagonal();
    a_s_ = e_tmp.asDiagonal() * a_s_ * d_tmp.asDiagonal();
    q = d_tmp.cwiseProduct(q);
    d_ = d_.cwiseProduct(d_tmp);
    e_ = e_.cwiseProduct(e_tmp);

    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) mean_col += p_s_.col(j).cwiseAbs().maxCoeff();
    if (n > 0) mean_col /= static_cast<double>(n);
    const double c_tmp = 1.0 / clamp_scaling(std::max(mean_col, inf_norm(q)));
    p_s_ *= c_tmp;
    q *= c_tmp;
    cost_scale_ *= c_tmp;
  }
}

void QpSolver::scale_vectors() {
  q_s_ = cost_scale_ * d_.cwiseProduct(problem_.linear);
  const auto m = problem_.num_constraints();
  l_s_.resize(m);
  u_s_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    l_s_[i] = is_lower_infinite(problem_.lower[i]) ? -kQpInfinity : e_[i] * problem_.lower[i];
    u_s_[i] = is_upper_infinite(problem_.upper[i]) ? kQpInfinity : e_[i] * problem_.upper[i];
  }
}

void QpSolver::set_rho_vector(double rho) {
  rho_ = std::clamp(rho, kRhoMin, kRhoMax);
  const auto m = problem_.num_constraints();
  rho_vec_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool free_row = is_lower_infinite(problem_.lower[i]) && is_upper_infinite(problem_.upper[i]);
    if (free_row)
      rho_vec_[i] = kRhoMin;
    else if (problem_.upper[i] - problem_.lower[i] < 1e-4 * kMinScaling)
      rho_vec_[i] = kRhoEqualityFactor * rho_;
    else
      rho_vec_[i] = rho_;
  }
}

void QpSolver::factor() {
  const auto n = problem_.num_variables();
  Eigen::MatrixXd kkt = p_s_;
  kkt.diagonal().array() += settings_.sigma;
  if (problem_.num_constraints() > 0) kkt.noalias() += a_s_.transpose() * rho_vec_.asDiagonal() * a_s_;
  llt_.compute(kkt);
  if (llt_.info() != Eigen::Success && n > 0) throw QpError("qp: KKT factorization failed");
  ++factorizations_;
}

void QpSolver::update_linear(const Eigen::VectorXd& q) {
  if (q.size() != problem_.num_variables()) throw QpError("qp: linear term has wrong length");
  problem_.linear = q;
  q_s_ = cost_scale_ * d_.cwiseProduct(q);
}

void QpSolver::update_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  const auto m = problem_.num_constraints();
  if (lower.size() != m || upper.size() != m) throw QpError("qp: bounds have wrong length");
  for (Eigen::Index i = 0; i < m; ++i)
    if (lower[i] > upper[i]) throw QpError("qp: lower bound exceeds upper bound in row " + std::to_string(i));
  const Eigen::VectorXd old_l = problem_.lower;
  const Eigen::VectorXd old_u = problem_.upper;
  problem_.lower = lower.cwiseMax(-kQpInfinity);
  problem_.upper = upper.cwiseMin(kQpInfinity);
  scale_vectors();
  // Equality pattern changes alter the rho vector.
  bool pattern_changed = false;
  for (Eigen::Index i = 0; i < m && !pattern_changed; ++i) {
    const bool was_eq = old_u[i] - old_l[i] < 1e-4 * kMinScaling;
    const bool is_eq = problem_.upper[i] - problem_.lower[i] < 1e-4 * kMinScaling;
    pattern_changed = was_eq != is_eq;
  }
  if (pattern_changed) {
    set_rho_vector(rho_);
    factor();
  }
}

void QpSolver::warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != problem_.num_variables() || y.size() != problem_.num_constraints())
    throw QpError("qp: warm start has wrong dimensions");
  x_ = x.cwiseQuotient(d_);
  y_ = cost_scale_ * y.cwiseQuotient(e_);
  z_ = a_s_ * x_;
}

void QpSolver::cold_start() {
  x_ = Eigen::VectorXd::Zero(problem_.num_variables());
  z_ = Eigen::VectorXd::Zero(problem_.num_constraints());
  y_ = Eigen::VectorXd::Zero(problem_.num_constraints());
}

void QpSolver::reset() {
  cold_start();
  if (rho_ != std::clamp(settings_.rho, kRhoMin, kRhoMax)) {
    set_rho_vector(settings_.rho);
    factor();
  }
}

void QpSolver::unscaled_iterate(Eigen::VectorXd& x, Eigen::VectorXd& y, Eigen::VectorXd& z) const {
  x = d_.cwiseProduct(x_);
  y = e_.cwiseProduct(y_) / cost_scale_;
  z = z_.cwiseQuotient(e_);
}

double QpSolver::adapted_rho() const {
  const Eigen::VectorXd ax = a_s_ * x_;
  const Eigen::VectorXd px = p_s_ * x_;
  const Eigen::VectorXd aty = a_s_.transpose() * y_;
  const double prim = inf_norm(ax - z_) / std::max({inf_norm(ax), inf_norm(z_), 1e-30});
  const double dual = inf_norm(px + q_s_ + aty) / std::max({inf_norm(px), inf_norm(aty), inf_norm(q_s_), 1e-30});
  return std::clamp(rho_ * std::sqrt(prim / std::max(dual, 1e-30)), kRhoMin, kRhoMax);
}

bool QpSolver::primal_infeasible(const Eigen::VectorXd& delta_y_s) const {
  const auto m = problem_.num_constraints();
  if (m == 0) return false;
  Eigen::VectorXd dy = e_.cwiseProduct(delta_y_s);
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool lo_inf = is_lower_infinite(problem_.lower[i]);
    const bool up_inf = is_upper_infinite(problem_.upper[i]);
    if (up_inf && lo_inf)
      dy[i] = 0.0;
    else if (up_inf)
      dy[i] = std::min(dy[i], 0.0);
    else if (lo_inf)
      dy[i] = std::max(dy[i], 0.0);
  }
  const double norm = inf_norm(dy);
  if (norm <= settings_.eps_primal_infeasible) return false;
  double support = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (dy[i] > 0) support += problem_.upper[i] * dy[i];
    if (dy[i] < 0) support += problem_.lower[i] * dy[i];
  }
  if (support >= -settings_.eps_primal_infeasible * norm) return false;
  const Eigen::VectorXd aty = problem_.constraint_matrix.transpose() * dy;
  return inf_norm(aty) < settings_.eps_primal_infeasible * norm;
}

bool QpSolver::dual_infeasible(const Eigen::VectorXd& delta_x_s) const {
  const Eigen::VectorXd dx = d_.cwiseProduct(delta_x_s);
  const double norm = inf_norm(dx);
  if (norm <= settings_.eps_dual_infeasible) return false;
  const double tol = settings_.eps_dual_infeasible * norm;
  if (problem_.linear.dot(dx) >= -tol) return false;
  if (inf_norm(problem_.quadratic * dx) > tol) return false;
  if (problem_.num_constraints() == 0) return true;
  const Eigen::VectorXd adx = problem_.constraint_matrix * dx;
  for (Eigen::Index i = 0; i < adx.size(); ++i) {
    if (!is_upper_infinite(problem_.upper[i]) && adx[i] > tol) return false;
    if (!is_lower_infinite(problem_.lower[i]) && adx[i] < -tol) return false;
  }
  return true;
}

bool QpSolver::try_polish(QpSolution& out) {
  const auto n = problem_.num_variables();
  const auto m = problem_.num_constraints();
  Eigen::VectorXd x, y, z;
  unscaled_iterate(x, y, z);

  // Active set: equality rows always, inequality rows by the sign of y. The
  // guess is then corrected a few times by adding violated rows and dropping
  // rows whose multiplier has the wrong sign.
  std::vector<int> side(static_cast<std::size_t>(m), 2);  // 2 inactive, -1 lower, +1 upper, 0 equality
  for (Eigen::Index i = 0; i < m; ++i) {
    const double l = problem_.lower[i];
    const double u = problem_.upper[i];
    if (u - l < 1e-4 * kMinScaling) {
      side[i] = 0;
    } else if (!is_lower_infinite(l) && z[i] - l < -y[i]) {
      side[i] = -1;
    } else if (!is_upper_infinite(u) && u - z[i] < y[i]) {
      side[i] = 1;
    }
  }

  Eigen::VectorXd xp, yp;
  bool consistent = false;
  for (int pass = 0; pass <= settings_.polish_active_set_passes && !consistent; ++pass) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m; ++i)
      if (side[i] != 2) rows.push_back(i);
    const auto k = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = problem_.quadratic;
    for (Eigen::Index r = 0; r < k; ++r) {
      kkt.block(n + r, 0, 1, n) = problem_.constraint_matrix.row(rows[r]);
      kkt.block(0, n + r, n, 1) = problem_.constraint_matrix.row(rows[r]).transpose();
    }
    Eigen::MatrixXd reg = kkt;
    reg.diagonal().head(n).array() += settings_.polish_delta;
    reg.diagonal().tail(k).array() -= settings_.polish_delta;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(reg);

    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -problem_.linear;
    for (Eigen::Index r = 0; r < k; ++r)
      rhs[n + r] = side[rows[r]] > 0 ? problem_.upper[rows[r]] : problem_.lower[rows[r]];
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int it = 0; it < settings_.polish_refine_iter; ++it) sol += lu.solve(rhs - kkt * sol);
    if (!sol.allFinite()) return false;

    xp = sol.head(n);
    yp = Eigen::VectorXd::Zero(m);
    for (Eigen::Index r = 0; r < k; ++r) yp[rows[r]] = sol[n + r];

    const Eigen::VectorXd ax = problem_.constraint_matrix * xp;
    const double y_tol = settings_.eps_abs + settings_.eps_rel * inf_norm(yp);
    const double x_tol = settings_.eps_abs + settings_.eps_rel * inf_norm(ax);
    // One change per pass: add the most violated row, otherwise release the
    // row with the worst multiplier sign. Changing several rows at once can cycle.
    Eigen::Index add = -1, drop = -1;
    double worst_add = x_tol, worst_drop = y_tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (side[i] == 2) {
        const double v = std::max(problem_.lower[i] - ax[i], ax[i] - problem_.upper[i]);
        if (v > worst_add) {
          worst_add = v;
          add = i;
        }
      } else if (side[i] != 0) {
        const double v = side[i] < 0 ? yp[i] : -yp[i];
        if (v > worst_drop) {
          worst_drop = v;
          drop = i;
        }
      }
    }
    consistent = add < 0 && drop < 0;
    if (add >= 0)
      side[add] = ax[add] < problem_.lower[add] ? -1 : 1;
    else if (drop >= 0)
      side[drop] = 2;
  }
  if (!consistent) return false;

  const KktResiduals res = kkt_residuals(problem_, xp, yp);
  const Eigen::VectorXd ax = m > 0 ? Eigen::VectorXd(problem_.constraint_matrix * xp) : Eigen::VectorXd();
  const Eigen::VectorXd px = problem_.quadratic * xp;
  const Eigen::VectorXd aty = m > 0 ? Eigen::VectorXd(problem_.constraint_matrix.transpose() * yp)
                                    : Eigen::VectorXd::Zero(n);
  const double eps_prim = settings_.eps_abs + settings_.eps_rel * inf_norm(ax);
  const double eps_dual =
      settings_.eps_abs + settings_.eps_rel * std::max({inf_norm(px), inf_norm(aty), inf_norm(problem_.linear)});
  if (res.primal > eps_prim || res.dual > eps_dual) return false;

  out.primal = xp;
  out.dual = yp;
  out.primal_residual = res.primal;
  out.dual_residual = res.dual;
  out.polished = true;
  out.status = QpStatus::optimal;

  // Keep the polished point as the warm start for the next solve.
  x_ = xp.cwiseQuotient(d_);
  y_ = cost_scale_ * yp.cwiseQuotient(e_);
  z_ = (a_s_ * x_).cwiseMax(l_s_).cwiseMin(u_s_);
  return true;
}

QpSolution QpSolver::solve() {
  const auto n = problem_.num_variables();
  const auto m = problem_.num_constraints();
  QpSolution out;
  const double alpha = settings_.alpha;
  const double sigma = settings_.sigma;

  Eigen::VectorXd rhs(n), x_tilde(n), z_tilde(m), x_prev(n), y_prev(m), z_relax(m);
  for (int iter = 1; iter <= settings_.max_iter; ++iter) {
    x_prev = x_;
    y_prev = y_;
    rhs = sigma * x_ - q_s_;
    if (m > 0) rhs.noalias() += a_s_.transpose() * (rho_vec_.cwiseProduct(z_) - y_);
    x_tilde = n > 0 ? Eigen::VectorXd(llt_.solve(rhs)) : rhs;
    if (m > 0) z_tilde.noalias() = a_s_ * x_tilde;
    x_ = alpha * x_tilde + (1.0 - alpha) * x_prev;
    z_relax = alpha * z_tilde + (1.0 - alpha) * z_;
    z_ = (z_relax + y_.cwiseQuotient(rho_vec_)).cwiseMax(l_s_).cwiseMin(u_s_);
    y_ += rho_vec_.cwiseProduct(z_relax - z_);
    out.iterations = iter;

    const bool check = iter % settings_.check_interval == 0 || iter == settings_.max_iter;
    if (check) {
      const Eigen::VectorXd ax = a_s_ * x_;
      const Eigen::VectorXd px = p_s_ * x_;
      const Eigen::VectorXd aty = a_s_.transpose() * y_;
      const double r_prim = inf_norm((ax - z_).cwiseQuotient(e_));
      const double r_dual = inf_norm((px + q_s_ + aty).cwiseQuotient(d_)) / cost_scale_;
      const double eps_prim =
          settings_.eps_abs + settings_.eps_rel * std::max(inf_norm(ax.cwiseQuotient(e_)), inf_norm(z_.cwiseQuotient(e_)));
      const double eps_dual =
          settings_.eps_abs + settings_.eps_rel *
                                  std::max({inf_norm(px.cwiseQuotient(d_)), inf_norm(aty.cwiseQuotient(d_)),
                                            inf_norm(q_s_.cwiseQuotient(d_))}) /
                                  cost_scale_;
      out.primal_residual = r_prim;
      out.dual_residual = r_dual;
      if (r_prim <= eps_prim && r_dual <= eps_dual) {
        out.status = QpStatus::optimal;
        if (settings_.polish && try_polish(out)) return out;
        unscaled_iterate(out.primal, out.dual, z_relax);
        out.polished = false;
        return out;
      }
      if (primal_infeasible(y_ - y_prev)) {
        out.status = QpStatus::primal_infeasible;
        out.primal = d_.cwiseProduct(x_);
        out.dual = e_.cwiseProduct(y_ - y_prev) / cost_scale_;
        cold_start();
        return out;
      }
      if (dual_infeasible(x_ - x_prev)) {
        out.status = QpStatus::dual_infeasible;
        out.primal = d_.cwiseProduct(x_ - x_prev);
        out.dual = Eigen::VectorXd::Zero(m);
        cold_start();
        return out;
      }
      if (settings_.polish && iter % settings_.polish_interval == 0 && try_polish(out)) {
        out.iterations = iter;
        return out;
      }
    }
    if (settings_.adaptive_rho && iter % settings_.adaptive_rho_interval == 0 && m > 0) {
      const double candidate = adapted_rho();
      if (candidate > settings_.adaptive_rho_tolerance * rho_ || candidate < rho_ / settings_.adaptive_rho_tolerance) {
        set_rho_vector(candidate);
        factor();
      }
    }
  }
  if (settings_.polish && try_polish(out)) return out;
  out.status = QpStatus::max_iter;
  unscaled_iterate(out.primal, out.dual, z_relax);
  const KktResiduals res = kkt_residuals(problem_, out.primal, out.dual);
  out.primal_residual = res.primal;
  out.dual_residual = res.dual;
  return out;
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  QpSolver solver(problem, settings);
  return solver.solve();
}

}  // namespace laadmm
