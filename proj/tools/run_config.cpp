#include "run_config.hpp"

#include "laadmm/scenario.hpp"

#include <fstream>

namespace laadmm::cli {

using nlohmann::json;

SystemDefaults system_defaults(const Network& net) {
  if (net.num_buses() == 14 && net.num_branches() == 20) return {2, 1.0};
  if (net.num_buses() == 118 && net.num_branches() == 186) return {4, 100.0};
  return {};
}

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  if (stage == Stage::partition) return seed;
  return derive_seed(seed, 0xC0FFEE00ULL + static_cast<std::uint64_t>(stage));
}

void RunConfig::apply_system_defaults(const Network& net) {
  const SystemDefaults d = system_defaults(net);
  if (!parts) parts = d.parts;
  if (!rho) rho = d.rho;
}

void RunConfig::validate() const {
  if (parts && *parts < 1) throw ConfigError("parts must be at least 1");
  if (rho && !(*rho > 0.0)) throw ConfigError("rho must be positive");
  if (k < 1 || k > 10) throw ConfigError("k must lie in 1..10");
  if (iterations <= k) throw ConfigError("iters must exceed k");
  if (!(tol >= 0.0) || !(target_tol > 0.0)) throw ConfigError("tolerances must be nonnegative (target_tol positive)");
  if (max_iter < 1 || target_max_iter < k) throw ConfigError("iteration caps out of range");
  if (count < 0 || tests < 0) throw ConfigError("count and tests must be nonnegative");
  if (!(chi >= 0.0)) throw ConfigError("chi must be nonnegative");
  if (mode != "centralized" && mode != "admm" && mode != "la-admm")
    throw ConfigError("mode must be centralized, admm or la-admm");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  try {
    train.validate();
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
}

namespace {

template <class T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

template <class T>
void take(const json& j, const char* key, std::optional<T>& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown config key '" + it.key() + "'" + where);
  }
}

}  // namespace

void RunConfig::merge_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j,
             {"case", "map", "parts", "rho", "k", "iters", "tol", "max_iter", "target_tol", "target_max_iter", "count",
              "tests", "chi", "mode", "model", "data", "train", "out", "seed", "workers"},
             "");
  try {
    take(j, "case", case_path);
    take(j, "map", map_path);
    take(j, "parts", parts);
    take(j, "rho", rho);
    take(j, "k", k);
    take(j, "iters", iterations);
    take(j, "tol", tol);
    take(j, "max_iter", max_iter);
    take(j, "target_tol", target_tol);
    take(j, "target_max_iter", target_max_iter);
    take(j, "count", count);
    take(j, "tests", tests);
    take(j, "chi", chi);
    take(j, "mode", mode);
    take(j, "model", model_path);
    take(j, "data", data_path);
    take(j, "out", out);
    take(j, "seed", seed);
    take(j, "workers", workers);
    if (j.contains("train")) {
      const json& t = j.at("train");
      if (!t.is_object()) throw ConfigError("train must be a JSON object");
      check_keys(t, {"hidden", "dense", "lr", "l2", "patience", "max_epochs", "batch_size", "validation_fraction"}, " in train");
      take(t, "hidden", train.hidden);
      take(t, "dense", train.dense);
      take(t, "lr", train.learning_rate);
      take(t, "l2", train.l2_coeff);
      take(t, "patience", train.patience);
      take(t, "max_epochs", train.max_epochs);
      take(t, "batch_size", train.batch_size);
      take(t, "validation_fraction", train.validation_fraction);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

void RunConfig::load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
  merge_json(j);
}

json RunConfig::to_json() const {
  json j;
  j["case"] = case_path;
  j["map"] = map_path;
  if (parts) j["parts"] = *parts;
  if (rho) j["rho"] = *rho;
  j["k"] = k;
  j["iters"] = iterations;
  j["tol"] = tol;
  j["max_iter"] = max_iter;
  j["target_tol"] = target_tol;
  j["target_max_iter"] = target_max_iter;
  j["count"] = count;
  j["tests"] = tests;
  j["chi"] = chi;
  j["mode"] = mode;
  j["model"] = model_path;
  j["data"] = data_path;
  j["train"] = {{"hidden", train.hidden},         {"dense", train.dense},
                {"lr", train.learning_rate},      {"l2", train.l2_coeff},
                {"patience", train.patience},     {"max_epochs", train.max_epochs},
                {"batch_size", train.batch_size}, {"validation_fraction", train.validation_fraction}};
  j["out"] = out;
  j["seed"] = seed;
  j["workers"] = workers;
  return j;
}

}  // namespace laadmm::cli
