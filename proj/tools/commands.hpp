#pragma once

#include "run_config.hpp"

#include "laadmm/partition.hpp"

#include <iosfwd>
#include <string>

namespace laadmm::cli {

/// Loaded case plus the partition selected by the config (map file or spectral).
struct Setup {
  Network net;
  PartitionMap map;
  PartitionedNetwork parts;
};

Network load_case(const RunConfig& cfg);
/// Applies system defaults to `cfg` and builds the partitioned network.
Setup load_setup(RunConfig& cfg);

// Each command writes its files under cfg.out, records itself in
// cfg.out/manifest.json and prints a short report to `log`.
void cmd_inspect(const RunConfig& cfg, std::ostream& log);
void cmd_partition(RunConfig cfg, std::ostream& log);
void cmd_solve(RunConfig cfg, std::ostream& log);
void cmd_gen_data(RunConfig cfg, std::ostream& log, bool write_csv);
void cmd_train(RunConfig cfg, std::ostream& log);
void cmd_evaluate(RunConfig cfg, std::ostream& log);

/// Adds or replaces the entry for `command` in out/manifest.json.
void write_manifest(const RunConfig& cfg, const std::string& command, const nlohmann::json& outputs);

}  // namespace laadmm::cli
