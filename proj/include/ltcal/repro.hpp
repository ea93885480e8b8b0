#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ltcal/runconfig.hpp"

namespace ltcal {

/// Names of the canned experiments: table3, table4, table7, fig4a, fig4b,
/// fig4c, table8, table9, fig1c.
std::vector<std::string> repro_experiment_names();
bool is_repro_experiment(const std::string& name);

/// Fixed default root seed for an experiment (overridable via --seed).
std::uint64_t repro_default_seed(const std::string& name);

struct ReproResult {
  std::string experiment;
  std::uint64_t seed = 0;
  bool all_pass = false;
  nlohmann::json verdicts();
  std::vector<std::pair<std::string, bool>> verdict_list;
  std::filesystem::path dir;
};

/// Runs one named experiment end to end under `out_dir/<name>/`: datasets,
/// heads, logs, reports, a results CSV, a verdict file and a manifest of
/// artifact hashes. Deterministic for a fixed seed; no timestamps or absolute
/// paths enter the outputs.
ReproResult run_repro(const std::string& experiment, RunConfig cfg,
                      const std::filesystem::path& out_dir,
                      std::optional<std::uint64_t> seed_override = std::nullopt);

/// FNV-1a 64 hash of a file's bytes, as 16 hex digits.
std::string hash_file(const std::filesystem::path& path);

/// Writes manifest.json listing every regular file in `dir` with its hash.
void write_manifest(const std::filesystem::path& dir);

}  // namespace ltcal
