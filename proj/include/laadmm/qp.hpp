#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace laadmm {

/// Bounds at or beyond this magnitude are treated as infinite.
inline constexpr double kQpInfinity = 1e30;

/// Convex QP in standard form:
///
///     minimize    0.5 x'Px + q'x
///     subject to  l <= A x <= u
///
/// Equalities use l == u; one-sided rows use +/- kQpInfinity.
struct QpProblem {
  Eigen::MatrixXd quadratic;          // P, n x n, symmetric PSD
  Eigen::VectorXd linear;             // q
  Eigen::MatrixXd constraint_matrix;  // A, m x n
  Eigen::VectorXd lower;              // l
  Eigen::VectorXd upper;              // u

  Eigen::Index num_variables() const { return linear.size(); }
  Eigen::Index num_constraints() const { return constraint_matrix.rows(); }
  double objective(const Eigen::VectorXd& x) const;
};

enum class QpStatus { optimal, primal_infeasible, dual_infeasible, max_iter };

std::string to_string(QpStatus status);

/// Settings for the operator-splitting iteration.
struct QpSettings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double eps_primal_infeasible = 1e-9;
  double eps_dual_infeasible = 1e-9;
  int max_iter = 20000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  bool adaptive_rho = true;
  int adaptive_rho_interval = 25;
  double adaptive_rho_tolerance = 5.0;
  int scaling_iterations = 10;
  int check_interval = 5;
  bool polish = true;
  int polish_interval = 25;  // attempt polishing every this many iterations
  double polish_delta = 1e-9;
  int polish_refine_iter = 5;
  int polish_active_set_passes = 25;
};

/// Dual convention: stationarity reads P x + q + A' y = 0, so a row binding at
/// its lower bound carries y <= 0 and a row binding at its upper bound y >= 0.
struct QpSolution {
  Eigen::VectorXd primal;
  Eigen::VectorXd dual;
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
};

struct KktResiduals {
  double primal = 0.0;  // max violation of l <= A x <= u
  double dual = 0.0;    // |P x + q + A' y|_inf
};

KktResiduals kkt_residuals(const QpProblem& problem, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y);
KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution);

class QpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operator-splitting QP solver with a cached factorization.
///
/// The matrices P and A are fixed at construction; q, l and u may be updated
/// between solves, and each solve warm-starts from the previous iterate. The
/// linear system solved each iteration is the Schur complement of the
/// quasi-definite KKT matrix [P + sigma I, A'; A, -diag(1/rho)], i.e.
/// P + sigma I + A' diag(rho) A, which is factored by Cholesky once per rho.
///
/// Instances are not thread-safe; use one solver per thread.
class QpSolver {
 public:
  QpSolver(QpProblem problem, QpSettings settings = {});

  void update_linear(const Eigen::VectorXd& q);
  void update_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
  void warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
  void cold_start();
  /// Cold start and restore the initial penalty parameter.
  void reset();

  QpSolution solve();

  const QpProblem& problem() const { return problem_; }
  const QpSettings& settings() const { return settings_; }
  int factorizations() const { return factorizations_; }

 private:
  void equilibrate();
  void scale_vectors();
  void set_rho_vector(double rho);
  void factor();
  bool try_polish(QpSolution& out);
  void unscaled_iterate(Eigen::VectorXd& x, Eigen::VectorXd& y, Eigen::VectorXd& z) const;
  double adapted_rho() const;
  bool primal_infeasible(const Eigen::VectorXd& delta_y) const;
  bool dual_infeasible(const Eigen::VectorXd& delta_x) const;

  QpProblem problem_;
  QpSettings settings_;

  // Scaled data: P_s = c D P D, q_s = c D q, A_s = E A D, l_s = E l, u_s = E u.
  Eigen::VectorXd d_;
  Eigen::VectorXd e_;
  double cost_scale_ = 1.0;
  Eigen::MatrixXd p_s_;
  Eigen::VectorXd q_s_;
  Eigen::MatrixXd a_s_;
  Eigen::VectorXd l_s_;
  Eigen::VectorXd u_s_;

  double rho_ = 0.1;
  Eigen::VectorXd rho_vec_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  int factorizations_ = 0;

  // Scaled iterates.
  Eigen::VectorXd x_;
  Eigen::VectorXd z_;
  Eigen::VectorXd y_;
};

/// One-shot solve.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/// Throws QpError if shapes disagree, P is not symmetric or some l > u.
void validate(const QpProblem& problem);

}  // namespace laadmm
