#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace reprl {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct MetricsRecord {
  long round = 0;
  double mean_return = 0.0;
  double best_return = 0.0;
  double success_rate = 0.0;
  double w_norm = 0.0;
  double log_det_v = 0.0;
  double representation_loss = 0.0;
  double elapsed_seconds = 0.0;  // kept out of the metrics file; see write_timing

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// Append-only per-round log with a run header.
class MetricsLog {
 public:
  std::string driver;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string version = kArtifactVersion;

  const std::vector<MetricsRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Rounds must be strictly increasing.
  void append(const MetricsRecord& record);

  friend bool operator==(const MetricsLog&, const MetricsLog&) = default;

 private:
  std::vector<MetricsRecord> records_;
};

/// Header line "# reprl-metrics version=... driver=... seed=... config_hash=...
/// columns=..." followed by one tab-separated row per round, floats printed
/// with 17 significant digits. Wall-clock time is not part of this file so
/// that reruns are byte-identical.
void write_metrics(std::ostream& out, const MetricsLog& log);
void write_metrics(const MetricsLog& log, const std::filesystem::path& path);
MetricsLog read_metrics(std::istream& in);
MetricsLog read_metrics(const std::filesystem::path& path);

/// "round<TAB>elapsed_seconds" sidecar.
void write_timing(const MetricsLog& log, const std::filesystem::path& path);

}  // namespace reprl
