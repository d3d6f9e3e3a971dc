#include "laadmm/gru.hpp"

#include "laadmm/binio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace laadmm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

MatrixXd glorot_matrix(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

// Time-major batch: step t is a F x B matrix.
std::vector<MatrixXd> stack_inputs(const Batch& batch) {
  if (batch.inputs.empty()) return {};
  const auto steps = batch.inputs.front().rows();
  const auto features = batch.inputs.front().cols();
  std::vector<MatrixXd> xs(static_cast<std::size_t>(steps), MatrixXd(features, batch.size()));
  for (int b = 0; b < batch.size(); ++b) {
    const MatrixXd& seq = batch.inputs[static_cast<std::size_t>(b)];
    if (seq.rows() != steps || seq.cols() != features) throw ModelError("batch sequences differ in shape");
    for (Eigen::Index t = 0; t < steps; ++t) xs[static_cast<std::size_t>(t)].col(b) = seq.row(t).transpose();
  }
  return xs;
}

MatrixXd stack_targets(const Batch& batch, int out) {
  MatrixXd y(out, batch.size());
  for (int b = 0; b < batch.size(); ++b) {
    const VectorXd& t = batch.targets[static_cast<std::size_t>(b)];
    if (t.size() != out) throw ModelError("target width does not match model output");
    y.col(b) = t;
  }
  return y;
}

struct StepCache {
  MatrixXd h_prev, z, r, c;
};

struct ForwardCache {
  std::vector<StepCache> steps;
  MatrixXd h;
  MatrixXd dense_pre;
  MatrixXd dense_out;
  MatrixXd out;
};

ForwardCache forward_batch(const ModelParams& m, const std::vector<MatrixXd>& xs, int batch) {
  const GruParams& g = m.gru;
  ForwardCache fc;
  MatrixXd h = MatrixXd::Zero(g.hidden(), batch);
  for (const MatrixXd& x : xs) {
    if (x.rows() != g.features()) throw ModelError("input feature width does not match model");
    StepCache sc;
    sc.h_prev = h;
    sc.z = sigmoid((g.w_z * x + g.u_z * h).colwise() + g.b_z);
    sc.r = sigmoid((g.w_r * x + g.u_r * h).colwise() + g.b_r);
    sc.c = ((g.w_h * x + g.u_h * sc.r.cwiseProduct(h)).colwise() + g.b_h).array().tanh().matrix();
    h = (1.0 - sc.z.array()).matrix().cwiseProduct(h) + sc.z.cwiseProduct(sc.c);
    fc.steps.push_back(std::move(sc));
  }
  fc.h = h;
  fc.dense_pre = (m.dense_w * h).colwise() + m.dense_b;
  fc.dense_out = fc.dense_pre.cwiseMax(0.0);
  fc.out = (m.head_w * fc.dense_out).colwise() + m.head_b;
  return fc;
}

double weight_penalty(const ModelParams& m) {
  double s = 0.0;
  m.for_each([&](const MatrixXd& block, bool is_weight) {
    if (is_weight) s += block.squaredNorm();
  });
  return s;
}

}  // namespace

ModelParams ModelParams::zeros(int features, int hidden, int dense, int out) {
  if (features <= 0 || hidden <= 0 || dense <= 0 || out <= 0) throw ModelError("model dimensions must be positive");
  ModelParams m;
  m.gru.w_z = m.gru.w_r = m.gru.w_h = MatrixXd::Zero(hidden, features);
  m.gru.u_z = m.gru.u_r = m.gru.u_h = MatrixXd::Zero(hidden, hidden);
  m.gru.b_z = m.gru.b_r = m.gru.b_h = VectorXd::Zero(hidden);
  m.dense_w = MatrixXd::Zero(dense, hidden);
  m.dense_b = VectorXd::Zero(dense);
  m.head_w = MatrixXd::Zero(out, dense);
  m.head_b = VectorXd::Zero(out);
  return m;
}

ModelParams ModelParams::glorot(int features, int hidden, int dense, int out, std::uint64_t seed) {
  ModelParams m = zeros(features, hidden, dense, out);
  std::mt19937_64 rng(seed);
  m.for_each([&](Eigen::Ref<MatrixXd> block, bool is_weight) {
    if (is_weight) block = glorot_matrix(static_cast<int>(block.rows()), static_cast<int>(block.cols()), rng);
  });
  return m;
}

void ModelParams::for_each(const std::function<void(Eigen::Ref<MatrixXd>, bool)>& fn) {
  fn(gru.w_z, true);
  fn(gru.w_r, true);
  fn(gru.w_h, true);
  fn(gru.u_z, true);
  fn(gru.u_r, true);
  fn(gru.u_h, true);
  fn(gru.b_z, false);
  fn(gru.b_r, false);
  fn(gru.b_h, false);
  fn(dense_w, true);
  fn(dense_b, false);
  fn(head_w, true);
  fn(head_b, false);
}

void ModelParams::for_each(const std::function<void(const MatrixXd&, bool)>& fn) const {
  fn(gru.w_z, true);
  fn(gru.w_r, true);
  fn(gru.w_h, true);
  fn(gru.u_z, true);
  fn(gru.u_r, true);
  fn(gru.u_h, true);
  fn(gru.b_z, false);
  fn(gru.b_r, false);
  fn(gru.b_h, false);
  fn(dense_w, true);
  fn(dense_b, false);
  fn(head_w, true);
  fn(head_b, false);
}

Eigen::Index ModelParams::size() const {
  Eigen::Index n = 0;
  for_each([&](const MatrixXd& block, bool) { n += block.size(); });
  return n;
}

VectorXd ModelParams::flatten() const {
  VectorXd flat(size());
  Eigen::Index pos = 0;
  for_each([&](const MatrixXd& block, bool) {
    flat.segment(pos, block.size()) = block.reshaped();
    pos += block.size();
  });
  return flat;
}

VectorXd ModelParams::weight_mask() const {
  VectorXd mask(size());
  Eigen::Index pos = 0;
  for_each([&](const MatrixXd& block, bool is_weight) {
    mask.segment(pos, block.size()).setConstant(is_weight ? 1.0 : 0.0);
    pos += block.size();
  });
  return mask;
}

void ModelParams::assign(const VectorXd& flat) {
  if (flat.size() != size()) throw ModelError("flat parameter vector has wrong length");
  Eigen::Index pos = 0;
  for_each([&](Eigen::Ref<MatrixXd> block, bool) {
    block.reshaped() = flat.segment(pos, block.size());
    pos += block.size();
  });
}

void ModelParams::check_shapes() const {
  const auto h = gru.b_z.size();
  const auto f = gru.w_z.cols();
  auto same = [](const MatrixXd& a, Eigen::Index r, Eigen::Index c) { return a.rows() == r && a.cols() == c; };
  const bool ok = h > 0 && f > 0 && same(gru.w_z, h, f) && same(gru.w_r, h, f) && same(gru.w_h, h, f) &&
                  same(gru.u_z, h, h) && same(gru.u_r, h, h) && same(gru.u_h, h, h) && gru.b_r.size() == h &&
                  gru.b_h.size() == h && dense_w.cols() == h && dense_w.rows() == dense_b.size() &&
                  head_w.cols() == dense_b.size() && head_w.rows() == head_b.size() && head_b.size() > 0;
  if (!ok) throw ModelError("inconsistent model parameter shapes");
}

VectorXd gru_cell(const GruParams& p, const VectorXd& x, const VectorXd& h_prev) {
  if (x.size() != p.features() || h_prev.size() != p.hidden() || p.w_r.cols() != x.size() ||
      p.w_h.cols() != x.size() || p.u_z.cols() != h_prev.size())
    throw ModelError("gru_cell shape mismatch");
  const VectorXd z = sigmoid(p.w_z * x + p.u_z * h_prev + p.b_z);
  const VectorXd r = sigmoid(p.w_r * x + p.u_r * h_prev + p.b_r);
  const VectorXd c = (p.w_h * x + p.u_h * r.cwiseProduct(h_prev) + p.b_h).array().tanh().matrix();
  return (1.0 - z.array()).matrix().cwiseProduct(h_prev) + z.cwiseProduct(c);
}

VectorXd forward(const ModelParams& m, const MatrixXd& seq) {
  if (seq.cols() != m.features()) throw ModelError("sequence feature width does not match model");
  VectorXd h = VectorXd::Zero(m.hidden());
  for (Eigen::Index t = 0; t < seq.rows(); ++t) h = gru_cell(m.gru, seq.row(t).transpose(), h);
  const VectorXd d = (m.dense_w * h + m.dense_b).cwiseMax(0.0);
  return m.head_w * d + m.head_b;
}

double mse(const ModelParams& m, const Batch& batch) {
  if (batch.size() == 0) return 0.0;
  const ForwardCache fc = forward_batch(m, stack_inputs(batch), batch.size());
  const MatrixXd y = stack_targets(batch, m.out());
  return (fc.out - y).squaredNorm() / static_cast<double>(y.size());
}

double loss(const ModelParams& m, const Batch& batch, double l2) { return mse(m, batch) + l2 * weight_penalty(m); }

LossGradient backward(const ModelParams& m, const Batch& batch, double l2) {
  if (batch.size() == 0) throw ModelError("empty batch");
  const std::vector<MatrixXd> xs = stack_inputs(batch);
  const ForwardCache fc = forward_batch(m, xs, batch.size());
  const MatrixXd y = stack_targets(batch, m.out());
  const double scale = 1.0 / static_cast<double>(y.size());

  LossGradient out;
  out.loss = (fc.out - y).squaredNorm() * scale + l2 * weight_penalty(m);
  ModelParams& g = out.grad;
  g = ModelParams::zeros(m.features(), m.hidden(), m.dense(), m.out());

  const MatrixXd d_out = 2.0 * scale * (fc.out - y);
  g.head_w = d_out * fc.dense_out.transpose();
  g.head_b = d_out.rowwise().sum();
  const MatrixXd d_dense_out = m.head_w.transpose() * d_out;
  const MatrixXd d_dense_pre = (fc.dense_pre.array() > 0.0).select(d_dense_out, 0.0);
  g.dense_w = d_dense_pre * fc.h.transpose();
  g.dense_b = d_dense_pre.rowwise().sum();
  MatrixXd d_h = m.dense_w.transpose() * d_dense_pre;

  const GruParams& p = m.gru;
  for (std::size_t t = xs.size(); t-- > 0;) {
    const StepCache& sc = fc.steps[t];
    const MatrixXd& x = xs[t];
    const MatrixXd d_z = d_h.cwiseProduct(sc.c - sc.h_prev);
    const MatrixXd d_c = d_h.cwiseProduct(sc.z);
    MatrixXd d_prev = d_h.cwiseProduct((1.0 - sc.z.array()).matrix());

    const MatrixXd a_c = d_c.cwiseProduct((1.0 - sc.c.array().square()).matrix());
    const MatrixXd rh = sc.r.cwiseProduct(sc.h_prev);
    g.gru.w_h += a_c * x.transpose();
    g.gru.u_h += a_c * rh.transpose();
    g.gru.b_h += a_c.rowwise().sum();
    const MatrixXd d_rh = p.u_h.transpose() * a_c;
    d_prev += d_rh.cwiseProduct(sc.r);
    const MatrixXd d_r = d_rh.cwiseProduct(sc.h_prev);

    const MatrixXd a_r = d_r.cwiseProduct(sc.r.cwiseProduct((1.0 - sc.r.array()).matrix()));
    g.gru.w_r += a_r * x.transpose();
    g.gru.u_r += a_r * sc.h_prev.transpose();
    g.gru.b_r += a_r.rowwise().sum();
    d_prev += p.u_r.transpose() * a_r;

    const MatrixXd a_z = d_z.cwiseProduct(sc.z.cwiseProduct((1.0 - sc.z.array()).matrix()));
    g.gru.w_z += a_z * x.transpose();
    g.gru.u_z += a_z * sc.h_prev.transpose();
    g.gru.b_z += a_z.rowwise().sum();
    d_prev += p.u_z.transpose() * a_z;

    d_h = std::move(d_prev);
  }

  if (l2 != 0.0) {
    auto add_penalty = [&](MatrixXd& grad_block, const MatrixXd& block) { grad_block += 2.0 * l2 * block; };
    add_penalty(g.gru.w_z, p.w_z);
    add_penalty(g.gru.w_r, p.w_r);
    add_penalty(g.gru.w_h, p.w_h);
    add_penalty(g.gru.u_z, p.u_z);
    add_penalty(g.gru.u_r, p.u_r);
    add_penalty(g.gru.u_h, p.u_h);
    add_penalty(g.dense_w, m.dense_w);
    add_penalty(g.head_w, m.head_w);
  }
  return out;
}

void adam_step(VectorXd& params, const VectorXd& grads, AdamState& s) {
  if (grads.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw ModelError("adam state does not match parameter count");
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  params.array() -= s.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

Normalizer Normalizer::fit(const std::vector<MatrixXd>& inputs, const std::vector<VectorXd>& targets) {
  if (inputs.empty() || targets.size() != inputs.size()) throw ModelError("normalizer needs matching nonempty inputs and targets");
  const auto f = inputs.front().cols();
  const auto o = targets.front().size();
  Normalizer n;
  n.input_mean = VectorXd::Zero(f);
  n.input_std = VectorXd::Zero(f);
  n.target_mean = VectorXd::Zero(o);
  n.target_std = VectorXd::Zero(o);
  double rows = 0.0;
  for (const auto& seq : inputs) {
    if (seq.cols() != f) throw ModelError("inputs differ in feature width");
    n.input_mean += seq.colwise().sum().transpose();
    rows += static_cast<double>(seq.rows());
  }
  n.input_mean /= rows;
  for (const auto& seq : inputs) n.input_std += (seq.rowwise() - n.input_mean.transpose()).colwise().squaredNorm().transpose();
  n.input_std = (n.input_std / rows).cwiseSqrt();
  for (const auto& t : targets) {
    if (t.size() != o) throw ModelError("targets differ in width");
    n.target_mean += t;
  }
  n.target_mean /= static_cast<double>(targets.size());
  for (const auto& t : targets) n.target_std += (t - n.target_mean).cwiseAbs2();
  n.target_std = (n.target_std / static_cast<double>(targets.size())).cwiseSqrt();

  // Spreads below this relative size are numerical noise of the generating
  // solver rather than signal; such features are left unscaled.
  auto fix = [](VectorXd& s, const VectorXd& mean) {
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (!(s[i] > kConstantFeatureTolerance * std::max(1.0, std::abs(mean[i])))) s[i] = 1.0;
  };
  fix(n.input_std, n.input_mean);
  fix(n.target_std, n.target_mean);
  return n;
}

MatrixXd Normalizer::normalize_input(const MatrixXd& seq) const {
  if (seq.cols() != input_mean.size()) throw ModelError("input width does not match normalizer");
  return ((seq.rowwise() - input_mean.transpose()).array().rowwise() / input_std.transpose().array()).matrix();
}

VectorXd Normalizer::normalize_target(const VectorXd& t) const {
  if (t.size() != target_mean.size()) throw ModelError("target width does not match normalizer");
  return (t - target_mean).cwiseQuotient(target_std);
}

VectorXd Normalizer::denormalize_target(const VectorXd& t) const {
  if (t.size() != target_mean.size()) throw ModelError("target width does not match normalizer");
  return t.cwiseProduct(target_std) + target_mean;
}

void TrainConfig::validate() const {
  if (hidden <= 0 || dense <= 0) throw ModelError("layer sizes must be positive");
  if (!(learning_rate > 0.0)) throw ModelError("learning rate must be positive");
  if (!(l2_coeff >= 0.0)) throw ModelError("l2 coefficient must be nonnegative");
  if (patience < 0 || max_epochs <= 0 || batch_size <= 0) throw ModelError("patience, max_epochs and batch_size must be valid");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) throw ModelError("validation_fraction must lie in (0, 1)");
}

VectorXd GruModel::predict(const MatrixXd& seq) const {
  if (seq.rows() != k) throw ModelError("expected " + std::to_string(k) + " input rows, got " + std::to_string(seq.rows()));
  return normalizer.denormalize_target(forward(params, normalizer.normalize_input(seq)));
}

void GruModel::check_layout(std::uint64_t layout_fingerprint) const {
  if (layout_fingerprint != fingerprint) throw ModelError("model was trained for a different consensus layout");
}

double TrainResult::validation_r2() const {
  if (history.empty() || target_variance <= 0.0) return 0.0;
  const auto& best = history[static_cast<std::size_t>(best_epoch - 1)];
  return 1.0 - best.val_mse / target_variance;
}

TrainResult train(const std::vector<MatrixXd>& inputs, const std::vector<VectorXd>& targets, int dual_width,
                  int consensus_width, std::uint64_t fingerprint, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const int n = static_cast<int>(inputs.size());
  if (targets.size() != inputs.size()) throw ModelError("inputs and targets differ in count");
  if (n < config.batch_size) throw ModelError("dataset smaller than one batch");
  const int features = static_cast<int>(inputs.front().cols());
  const int out = static_cast<int>(targets.front().size());
  if (out != dual_width + consensus_width) throw ModelError("target width does not match layout widths");

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_val = std::clamp(static_cast<int>(std::lround(config.validation_fraction * n)), 1, n - 1);
  const std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());

  std::vector<MatrixXd> train_in;
  std::vector<VectorXd> train_t;
  for (int i : train_idx) {
    train_in.push_back(inputs[static_cast<std::size_t>(i)]);
    train_t.push_back(targets[static_cast<std::size_t>(i)]);
  }

  TrainResult result;
  GruModel& model = result.model;
  model.normalizer = Normalizer::fit(train_in, train_t);
  model.k = static_cast<int>(inputs.front().rows());
  model.fingerprint = fingerprint;
  model.dual_width = dual_width;
  model.consensus_width = consensus_width;

  auto make_batch = [&](const std::vector<int>& idx) {
    Batch b;
    for (int i : idx) {
      b.inputs.push_back(model.normalizer.normalize_input(inputs[static_cast<std::size_t>(i)]));
      b.targets.push_back(model.normalizer.normalize_target(targets[static_cast<std::size_t>(i)]));
    }
    return b;
  };
  const Batch train_all = make_batch(train_idx);
  const Batch val = make_batch(val_idx);
  {
    double var = 0.0;
    VectorXd mean = VectorXd::Zero(out);
    for (const auto& t : val.targets) mean += t;
    mean /= val.size();
    for (const auto& t : val.targets) var += (t - mean).squaredNorm();
    result.target_variance = var / (static_cast<double>(val.size()) * out);
  }

  ModelParams params = ModelParams::glorot(features, config.hidden, config.dense, out, rng());
  VectorXd flat = params.flatten();
  AdamState adam(flat.size());
  adam.learning_rate = config.learning_rate;

  VectorXd best = flat;
  double best_val = std::numeric_limits<double>::infinity();
  int wait = 0;
  std::vector<int> perm(train_idx.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double train_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(config.batch_size));
      Batch b;
      for (std::size_t j = start; j < stop; ++j) {
        b.inputs.push_back(train_all.inputs[static_cast<std::size_t>(perm[j])]);
        b.targets.push_back(train_all.targets[static_cast<std::size_t>(perm[j])]);
      }
      params.assign(flat);
      const LossGradient lg = backward(params, b, config.l2_coeff);
      adam_step(flat, lg.grad.flatten(), adam);
      train_sum += lg.loss;
      ++batches;
    }
    params.assign(flat);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / batches;
    rec.val_mse = mse(params, val);
    rec.val_loss = rec.val_mse + config.l2_coeff * weight_penalty(params);
    if (!std::isfinite(rec.val_loss)) throw ModelError("training diverged at epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = flat;
      result.best_epoch = epoch;
      wait = 0;
    } else if (++wait >= std::max(config.patience, 1)) {
      break;
    }
  }
  params.assign(best);
  model.params = std::move(params);
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss\n";
  out.precision(17);
  for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
}

namespace {
constexpr std::string_view kModelMagic = "LAGRUMDL";
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

std::string serialize_model(const GruModel& model) {
  model.params.check_shapes();
  ByteWriter w(kModelMagic, kModelVersion);
  w.u64(model.fingerprint);
  w.i32(model.k);
  w.i32(model.dual_width);
  w.i32(model.consensus_width);
  w.i32(model.params.features());
  w.i32(model.params.hidden());
  w.i32(model.params.dense());
  w.i32(model.params.out());
  model.params.for_each([&](const MatrixXd& block, bool) { w.mat(block); });
  w.vec(model.normalizer.input_mean);
  w.vec(model.normalizer.input_std);
  w.vec(model.normalizer.target_mean);
  w.vec(model.normalizer.target_std);
  return w.finish();
}

GruModel deserialize_model(std::string bytes) {
  ByteReader r(std::move(bytes), kModelMagic, kModelVersion);
  GruModel m;
  m.fingerprint = r.u64();
  m.k = r.i32();
  m.dual_width = r.i32();
  m.consensus_width = r.i32();
  const int f = r.i32(), h = r.i32(), d = r.i32(), o = r.i32();
  if (m.k <= 0 || f <= 0 || h <= 0 || d <= 0 || o <= 0 || m.dual_width < 0 || m.consensus_width < 0 ||
      o != m.dual_width + m.consensus_width)
    throw FormatError("invalid model header");
  m.params = ModelParams::zeros(f, h, d, o);
  m.params.for_each([&](Eigen::Ref<MatrixXd> block, bool) {
    MatrixXd v = r.mat();
    if (v.rows() != block.rows() || v.cols() != block.cols()) throw FormatError("parameter block has wrong shape");
    block = v;
  });
  m.normalizer.input_mean = r.vec();
  m.normalizer.input_std = r.vec();
  m.normalizer.target_mean = r.vec();
  m.normalizer.target_std = r.vec();
  r.expect_end();
  if (m.normalizer.input_mean.size() != f || m.normalizer.input_std.size() != f || m.normalizer.target_mean.size() != o ||
      m.normalizer.target_std.size() != o)
    throw FormatError("normalizer shape does not match model");
  return m;
}

void save_model(const GruModel& model, const std::string& path) { write_bytes(path, serialize_model(model)); }

GruModel load_model(const std::string& path) { return deserialize_model(read_bytes(path)); }

GruModel load_model(const std::string& path, std::uint64_t layout_fingerprint) {
  GruModel m = load_model(path);
  m.check_layout(layout_fingerprint);
  return m;
}

}  // namespace laadmm
