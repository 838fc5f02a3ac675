// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bootdiag/diagnostics.hpp"
#include "bootdiag/experiments.hpp"
#include "bootdiag/models.hpp"

namespace bootdiag::cli {

// Process exit codes.  Everything unexpected maps to 1.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitIo = 4;

enum class Command {
  simulate,
  diagnose,
  size_power,
  fan_chart,
  posttest,
  external,
  build_tables,
};

std::string command_name(Command c);

enum class PostChoice { automatic, iv_t, ar1_t, mean_t };

// Fully resolved run description.  parse_config() fills it from a config
// file and/or command-line flags; flags win and the shadowed keys are listed
// in `overridden`.
struct RunConfig {
  Command command = Command::diagnose;
  ScenarioSpec scenario = Ar1Spec{};
  DiagnosticConfig diagnostic{};
  std::size_t datasets = 500;         // R (size-power, posttest) / M (fan chart)
  std::size_t tests_per_dataset = 1;  // K (size-power profiling, external tests)
  std::size_t draws = 2000;           // B (fan chart draws per dataset)
  double xmin = -3.0;
  double xmax = 3.0;
  std::size_t xpoints = 61;
  std::optional<double> threshold;    // posttest; default 95% null quantile
  PostChoice post = PostChoice::automatic;
  std::string pool_path;              // external
  bool with_replacement = false;
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
  std::string out_dir = ".";
  std::vector<double> alphas;         // empty: per-command default
  std::size_t m_ref = 10000;          // build-tables
  std::size_t reps = 200000;          // build-tables
  // Effective key/value view of the whole configuration, echoed into the
  // manifest in parse order.
  std::vector<std::pair<std::string, std::string>> effective;
  std::vector<std::string> overridden;
};

// Parses "key = value" config files and --key=value flags.  The command is
// the first positional argument or the `command` key.  Unknown keys are
// errors.  Throws ConfigError.
RunConfig parse_config(const std::vector<std::string>& args);

// ---- external draw pools ----------------------------------------------------

struct ExternalPool {
  std::vector<double> draws;
};

// One numeric value per line; an optional single header line is skipped.
// Blank lines are ignored.  Malformed or non-finite entries are rejected
// with their line number.
ExternalPool load_pool_csv(const std::filesystem::path& path);

struct ExternalResult {
  RejectionProfile profile;
  std::vector<DiagnosticOutcome> outcomes;  // one per test, in block order
};

// Splits a user-supplied pool of draws into K tests of m draws each and runs
// the diagnostic on every block.  The pool is standardized once (location and
// scale over all B draws), then a seeded permutation deals disjoint blocks;
// K*m must fit inside B unless with_replacement is set, in which case blocks
// are drawn independently with replacement.
ExternalResult run_external(const ExternalPool& pool, const DiagnosticConfig& diagnostic,
                            std::size_t tests, const SeedSpec& seed, bool with_replacement,
                            std::span<const double> alphas,
                            const ReferenceLibrary* refs = nullptr);

// ---- driver -----------------------------------------------------------------

// Executes the configured command, writing CSV outputs plus manifest.json
// into out_dir.  Returns an exit code; errors have already been mapped.
int run(const RunConfig& config);

// argv-level wrapper: parse, run, map exceptions to exit codes on stderr.
int main_entry(int argc, const char* const* argv);

}  // namespace bootdiag::cli
