#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace laadmm {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gated recurrent unit weights. Input matrices are hidden x features,
/// recurrent matrices hidden x hidden.
struct GruParams {
  Eigen::MatrixXd w_z, w_r, w_h;
  Eigen::MatrixXd u_z, u_r, u_h;
  Eigen::VectorXd b_z, b_r, b_h;

  int hidden() const { return static_cast<int>(b_z.size()); }
  int features() const { return static_cast<int>(w_z.cols()); }
};

/// GRU -> dense (ReLU) -> linear head.
struct ModelParams {
  GruParams gru;
  Eigen::MatrixXd dense_w;  // dense x hidden
  Eigen::VectorXd dense_b;
  Eigen::MatrixXd head_w;   // out x dense
  Eigen::VectorXd head_b;

  static ModelParams zeros(int features, int hidden, int dense, int out);
  /// Uniform Glorot weights, zero biases.
  static ModelParams glorot(int features, int hidden, int dense, int out, std::uint64_t seed);

  int features() const { return gru.features(); }
  int hidden() const { return gru.hidden(); }
  int dense() const { return static_cast<int>(dense_b.size()); }
  int out() const { return static_cast<int>(head_b.size()); }

  /// Visits every parameter block in a fixed order; `is_weight` is false for biases.
  void for_each(const std::function<void(Eigen::Ref<Eigen::MatrixXd>, bool is_weight)>& fn);
  void for_each(const std::function<void(const Eigen::MatrixXd&, bool is_weight)>& fn) const;

  Eigen::Index size() const;
  Eigen::VectorXd flatten() const;
  /// Mask with 1 at weight entries and 0 at bias entries, in flatten() order.
  Eigen::VectorXd weight_mask() const;
  void assign(const Eigen::VectorXd& flat);

  /// Throws ModelError if block shapes are inconsistent.
  void check_shapes() const;
};

/// One step: z = sigm(W_z x + U_z h + b_z), r = sigm(W_r x + U_r h + b_r),
/// c = tanh(W_h x + U_h (r . h) + b_h), h' = (1 - z) . h + z . c.
Eigen::VectorXd gru_cell(const GruParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev);

/// Forward pass on one sequence (rows are time steps, K x F).
Eigen::VectorXd forward(const ModelParams& m, const Eigen::MatrixXd& seq);

/// Normalized training examples.
struct Batch {
  std::vector<Eigen::MatrixXd> inputs;   // K x F each
  std::vector<Eigen::VectorXd> targets;  // out each

  int size() const { return static_cast<int>(inputs.size()); }
};

/// Mean squared error over all outputs of the batch.
double mse(const ModelParams& m, const Batch& batch);
/// mse + l2 * sum of squared weights (biases excluded).
double loss(const ModelParams& m, const Batch& batch, double l2);

struct LossGradient {
  double loss = 0.0;
  ModelParams grad;
};

/// Exact gradient of loss() by backpropagation through time.
LossGradient backward(const ModelParams& m, const Batch& batch, double l2);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(Eigen::Index size = 0)
      : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}
};

/// Bias-corrected Adam update of a flat parameter vector.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state);

/// Relative spread below which a feature counts as constant.
inline constexpr double kConstantFeatureTolerance = 1e-6;

/// Per-feature standardization of inputs and targets.
struct Normalizer {
  Eigen::VectorXd input_mean, input_std;
  Eigen::VectorXd target_mean, target_std;

  /// Statistics over every row of every input and over all targets.
  /// Features whose std is at most kConstantFeatureTolerance * max(1, |mean|) get std 1.
  static Normalizer fit(const std::vector<Eigen::MatrixXd>& inputs, const std::vector<Eigen::VectorXd>& targets);

  Eigen::MatrixXd normalize_input(const Eigen::MatrixXd& seq) const;
  Eigen::VectorXd normalize_target(const Eigen::VectorXd& t) const;
  Eigen::VectorXd denormalize_target(const Eigen::VectorXd& t) const;
};

struct TrainConfig {
  int hidden = 128;
  int dense = 64;
  double learning_rate = 1e-3;
  double l2_coeff = 1e-4;
  int patience = 5;
  int max_epochs = 50;
  int batch_size = 32;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mse = 0.0;
};

/// A trained predictor together with everything needed to apply it.
struct GruModel {
  ModelParams params;
  Normalizer normalizer;
  int k = 0;  // input sequence length
  std::uint64_t fingerprint = 0;
  int dual_width = 0;
  int consensus_width = 0;

  /// Raw iterates in (K x F), denormalized prediction out.
  Eigen::VectorXd predict(const Eigen::MatrixXd& seq) const;

  /// Throws ModelError unless `fingerprint` matches.
  void check_layout(std::uint64_t layout_fingerprint) const;
};

struct TrainResult {
  GruModel model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double target_variance = 0.0;  // mean per-feature variance of normalized validation targets

  /// 1 - val_mse / target_variance at the best epoch.
  double validation_r2() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam with early stopping on validation loss; returns the
/// best-validation parameters. `inputs` are raw K x F iterate windows.
TrainResult train(const std::vector<Eigen::MatrixXd>& inputs, const std::vector<Eigen::VectorXd>& targets, int dual_width,
                  int consensus_width, std::uint64_t fingerprint, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

void save_model(const GruModel& model, const std::string& path);
std::string serialize_model(const GruModel& model);
GruModel deserialize_model(std::string bytes);
GruModel load_model(const std::string& path);
/// Loads and checks the layout fingerprint.
GruModel load_model(const std::string& path, std::uint64_t layout_fingerprint);

}  // namespace laadmm
