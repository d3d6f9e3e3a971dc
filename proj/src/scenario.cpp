#include "laadmm/scenario.hpp"

#include "laadmm/binio.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

namespace laadmm {

LoadScenario make_scenario(const Network& net, double chi, const Eigen::VectorXd& xi) {
  const Eigen::VectorXd base = net.base_load();
  if (xi.size() != base.size()) throw SampleError("xi must have one entry per bus");
  LoadScenario s;
  s.chi = chi;
  s.xi = xi;
  s.load = chi * (1.0 + xi.array()).matrix().cwiseProduct(base);
  return s;
}

double max_chi(const Network& net, const Eigen::VectorXd& xi, double margin) {
  const Eigen::VectorXd base = net.base_load();
  const double scaled = (1.0 + xi.array()).matrix().dot(base);
  if (!(scaled > 0.0)) throw SampleError("network has no positive base load");
  return std::min(1.0, margin * net.total_capacity() / scaled);
}

LoadScenario sample_load(const Network& net, std::mt19937_64& rng, double margin) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd xi(net.num_buses());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = unit(rng);
  const double chi = unit(rng) * max_chi(net, xi, margin);
  return make_scenario(net, chi, xi);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

AdmmConfig SampleConfig::admm() const {
  AdmmConfig c;
  c.rho = rho;
  c.max_iter = max_iter;
  c.primal_tol = primal_tol;
  c.dual_tol = dual_tol < 0 ? rho * primal_tol : dual_tol;
  c.record_trajectory = true;
  c.qp = qp;
  return c;
}

Sample generate_sample(AdmmEngine& engine, const Network& net, const LoadScenario& scenario, const SampleConfig& config) {
  const auto& layout = engine.layout();
  if (layout.width() == 0) throw SampleError("layout has no shared variables");
  if (config.k < 1 || config.k > 10) throw SampleError("K must lie in 1..10");
  if (config.max_iter < config.k) throw SampleError("max_iter must be at least K");

  engine.set_config(config.admm());
  engine.set_load(scenario.load);
  const AdmmRun run = engine.run();
  if (!run.result.converged)
    throw SampleError("ADMM did not reach primal residual " + std::to_string(config.primal_tol) + " within " +
                      std::to_string(config.max_iter) + " iterations (chi=" + std::to_string(scenario.chi) +
                      ", residual " + std::to_string(run.result.final_residual) + ")");
  if (run.trajectory.size() < config.k)
    throw SampleError("ADMM converged before iteration K; no input window");

  const DispatchSolution central = solve_centralized(net, scenario.load);
  if (central.status != DispatchStatus::optimal)
    throw SampleError("centralized reference solve failed: " + to_string(central.status));

  Sample s;
  s.inputs = run.trajectory.prefix(config.k);
  s.target.resize(layout.feature_width());
  s.target << run.result.state.duals, run.result.state.consensus;
  s.scenario = scenario;
  s.ref_objective = central.objective;
  s.iterations = run.result.iterations;
  return s;
}

Sample generate_sample(const Network& net, const PartitionedNetwork& parts, const LoadScenario& scenario,
                       const SampleConfig& config) {
  AdmmEngine engine(parts, config.admm());
  return generate_sample(engine, net, scenario, config);
}

std::vector<Eigen::MatrixXd> Dataset::inputs() const {
  std::vector<Eigen::MatrixXd> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.inputs);
  return v;
}

std::vector<Eigen::VectorXd> Dataset::targets() const {
  std::vector<Eigen::VectorXd> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.target);
  return v;
}

namespace {

struct Attempt {
  bool ok = false;
  Sample sample;
  std::string error;
};

Attempt run_attempt(AdmmEngine& engine, const Network& net, const DatasetConfig& config, std::uint64_t index) {
  Attempt a;
  try {
    std::mt19937_64 rng(derive_seed(config.seed, index));
    const LoadScenario scenario = sample_load(net, rng, config.margin);
    a.sample = generate_sample(engine, net, scenario, config.sample);
    a.ok = true;
  } catch (const SampleError& e) {
    a.error = "attempt " + std::to_string(index) + ": " + e.what();
  } catch (const AdmmError& e) {
    a.error = "attempt " + std::to_string(index) + ": " + e.what();
  }
  return a;
}

}  // namespace

DatasetResult generate_dataset(const Network& net, const PartitionedNetwork& parts, const DatasetConfig& config,
                               const std::function<void(const DatasetProgress&)>& progress) {
  if (config.count < 0) throw SampleError("count must be nonnegative");
  if (parts.layout.width() == 0) throw SampleError("layout has no shared variables");
  if (config.sample.k < 1 || config.sample.k > 10) throw SampleError("K must lie in 1..10");

  DatasetResult result;
  Dataset& ds = result.dataset;
  ds.system = net.name;
  ds.fingerprint = parts.layout.fingerprint();
  ds.k = config.sample.k;
  ds.dual_width = parts.layout.width();
  ds.consensus_width = parts.layout.n_pub();
  ds.num_buses = parts.num_buses;
  ds.seed = config.seed;
  if (config.count == 0) return result;

  const int budget = config.retry_budget >= 0 ? config.retry_budget : std::max(10, config.count / 5);
  const int workers = std::max(1, config.workers);
  std::vector<AdmmEngine> engines;
  for (int w = 0; w < workers; ++w) engines.emplace_back(parts, config.sample.admm());

  DatasetProgress prog;
  std::uint64_t next = 0;
  while (ds.size() < config.count) {
    const int needed = config.count - ds.size();
    const int remaining_budget = config.count + budget - static_cast<int>(next);
    const int batch = std::min({workers, needed, remaining_budget});
    if (batch <= 0) {
      result.complete = false;
      break;
    }
    std::vector<Attempt> attempts(static_cast<std::size_t>(batch));
    if (batch == 1) {
      attempts[0] = run_attempt(engines[0], net, config, next);
    } else {
      std::vector<std::thread> threads;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(batch));
      for (int w = 0; w < batch; ++w) {
        threads.emplace_back([&, w] {
          try {
            attempts[static_cast<std::size_t>(w)] = run_attempt(engines[static_cast<std::size_t>(w)], net, config, next + w);
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
      for (auto& t : threads) t.join();
      for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    next += static_cast<std::uint64_t>(batch);
    for (auto& a : attempts) {
      ++prog.attempted;
      if (a.ok) {
        if (ds.size() < config.count) ds.samples.push_back(std::move(a.sample));
        prog.message.clear();
      } else {
        ++result.excluded;
        ++prog.excluded;
        prog.message = a.error;
        result.diagnostics.push_back(a.error);
      }
      prog.accepted = ds.size();
      if (progress) progress(prog);
    }
  }
  return result;
}

namespace {
constexpr std::string_view kDatasetMagic = "LADATSET";
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

std::string serialize_dataset(const Dataset& ds) {
  ByteWriter w(kDatasetMagic, kDatasetVersion);
  w.str(ds.system);
  w.u64(ds.fingerprint);
  w.i32(ds.k);
  w.i32(ds.dual_width);
  w.i32(ds.consensus_width);
  w.i32(ds.num_buses);
  w.u64(ds.seed);
  w.u64(ds.samples.size());
  for (const auto& s : ds.samples) {
    if (s.inputs.rows() != ds.k || s.inputs.cols() != ds.features() || s.target.size() != ds.out() ||
        s.scenario.load.size() != ds.num_buses || s.scenario.xi.size() != ds.num_buses)
      throw FormatError("dataset samples are not homogeneous");
    w.mat(s.inputs);
    w.vec(s.target);
    w.f64(s.scenario.chi);
    w.vec(s.scenario.xi);
    w.vec(s.scenario.load);
    w.f64(s.ref_objective);
    w.i32(s.iterations);
  }
  return w.finish();
}

Dataset deserialize_dataset(std::string bytes) {
  ByteReader r(std::move(bytes), kDatasetMagic, kDatasetVersion);
  Dataset ds;
  ds.system = r.str();
  ds.fingerprint = r.u64();
  ds.k = r.i32();
  ds.dual_width = r.i32();
  ds.consensus_width = r.i32();
  ds.num_buses = r.i32();
  ds.seed = r.u64();
  if (ds.k <= 0 || ds.dual_width < 0 || ds.consensus_width < 0 || ds.num_buses < 0) throw FormatError("invalid dataset header");
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    Sample s;
    s.inputs = r.mat();
    s.target = r.vec();
    s.scenario.chi = r.f64();
    s.scenario.xi = r.vec();
    s.scenario.load = r.vec();
    s.ref_objective = r.f64();
    s.iterations = r.i32();
    if (s.inputs.rows() != ds.k || s.inputs.cols() != ds.features() || s.target.size() != ds.out() ||
        s.scenario.load.size() != ds.num_buses || s.scenario.xi.size() != ds.num_buses)
      throw FormatError("dataset sample " + std::to_string(i) + " has the wrong shape");
    ds.samples.push_back(std::move(s));
  }
  r.expect_end();
  return ds;
}

void write_dataset(const Dataset& dataset, const std::string& path) { write_bytes(path, serialize_dataset(dataset)); }

Dataset read_dataset(const std::string& path) { return deserialize_dataset(read_bytes(path)); }

Dataset read_dataset(const std::string& path, std::uint64_t layout_fingerprint) {
  Dataset ds = read_dataset(path);
  if (ds.fingerprint != layout_fingerprint) throw FormatError("dataset was generated for a different consensus layout");
  return ds;
}

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  out << "sample,chi,ref_objective,iterations";
  for (int t = 0; t < ds.k; ++t)
    for (int j = 0; j < ds.features(); ++j) out << ",x" << t << '_' << j;
  for (int j = 0; j < ds.out(); ++j) out << ",y" << j;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    out << i << ',' << s.scenario.chi << ',' << s.ref_objective << ',' << s.iterations;
    for (Eigen::Index t = 0; t < s.inputs.rows(); ++t)
      for (Eigen::Index j = 0; j < s.inputs.cols(); ++j) out << ',' << s.inputs(t, j);
    for (Eigen::Index j = 0; j < s.target.size(); ++j) out << ',' << s.target[j];
    out << '\n';
  }
}

}  // namespace laadmm
