#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reprl/drivers.hpp"
#include "reprl/environments.hpp"

namespace reprl {

enum class EnvironmentKind { GridWorld, SparseLine };

struct RunConfig {
  TrainingConfig training;
  EnvironmentKind environment = EnvironmentKind::GridWorld;
  GridWorldConfig gridworld;
  SparseLineConfig sparseline;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "runs";

  /// Cross-field checks; throws ConfigError naming the offending key.
  void validate() const;
};

/// Returns the value of an environment variable, if set.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_environment();

/// Parses an INI document ([section] key = value). Keys not listed in the
/// schema are rejected. Scalar keys can be overridden by REPRL_<SECTION>_<KEY>
/// variables (dots in key names become underscores).
RunConfig parse_config(const std::string& text, const EnvLookup& env = {});
RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env = {});

/// Canonical INI text with every key, in schema order.
std::string serialize_config(const RunConfig& config);

/// 16 hex digits of FNV-1a over the canonical text without seeds and output
/// directory, so that sweep headers differ only in the seed.
std::string config_hash(const RunConfig& config);

/// "1,2,5" or "1-30" or a mix of both.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

std::unique_ptr<Environment> make_environment(const RunConfig& config);

std::filesystem::path metrics_path(const RunConfig& config, std::uint64_t seed);
std::filesystem::path timing_path(const RunConfig& config, std::uint64_t seed);

/// Trains one seed and writes its metrics file and timing sidecar.
TrainingResult run_seed(const RunConfig& config, std::uint64_t seed);

/// Tabular identity suite and ridge oracle. Prints one line per check and
/// returns true when all pass.
bool oracle_check(std::ostream& out, std::uint64_t seed = 7);

/// Keeps freed large blocks in the heap instead of returning them to the OS,
/// which removes most page-fault overhead of the per-round temporaries.
void configure_allocator();

/// Command-line entry point; returns the process exit code.
int cli_main(int argc, char** argv);

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 1;
inline constexpr int kOracle = 2;
inline constexpr int kRuntime = 3;
}  // namespace exit_code

}  // namespace reprl
