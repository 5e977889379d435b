#include "reprl/metrics.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "reprl/error.hpp"

namespace reprl {

namespace {

constexpr const char* kColumns = "round,mean_return,best_return,success_rate,w_norm,log_det_v,representation_loss";

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::IoError, "bad number in metrics file: '" + s + "'");
  return x;
}

}  // namespace

void MetricsLog::append(const MetricsRecord& record) {
  require(records_.empty() || record.round > records_.back().round, ErrorKind::InvalidArgument,
          "metrics rounds must be strictly increasing");
  records_.push_back(record);
}

void write_metrics(std::ostream& out, const MetricsLog& log) {
  out << "# reprl-metrics version=" << log.version << " driver=" << log.driver << " seed=" << log.seed
      << " config_hash=" << log.config_hash << " columns=" << kColumns << '\n';
  for (const MetricsRecord& r : log.records()) {
    out << r.round << '\t' << format_double(r.mean_return) << '\t' << format_double(r.best_return) << '\t'
        << format_double(r.success_rate) << '\t' << format_double(r.w_norm) << '\t' << format_double(r.log_det_v)
        << '\t' << format_double(r.representation_loss) << '\n';
  }
}

void write_metrics(const MetricsLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  write_metrics(out, log);
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

MetricsLog read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# reprl-metrics ", 0) != 0)
    throw Error(ErrorKind::IoError, "missing metrics header line");
  std::map<std::string, std::string> fields;
  std::istringstream header(line.substr(16));
  std::string token;
  while (header >> token) {
    const auto eq = token.find('=');
    if (eq != std::string::npos) fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  if (fields["columns"] != kColumns) throw Error(ErrorKind::IoError, "unexpected metrics columns");
  MetricsLog log;
  log.version = fields["version"];
  log.driver = fields["driver"];
  log.seed = std::stoull(fields["seed"]);
  log.config_hash = fields["config_hash"];
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, '\t')) cells.push_back(cell);
    if (cells.size() != 7) throw Error(ErrorKind::IoError, "metrics row has " + std::to_string(cells.size()) + " cells");
    MetricsRecord r;
    r.round = std::stol(cells[0]);
    r.mean_return = parse_double(cells[1]);
    r.best_return = parse_double(cells[2]);
    r.success_rate = parse_double(cells[3]);
    r.w_norm = parse_double(cells[4]);
    r.log_det_v = parse_double(cells[5]);
    r.representation_loss = parse_double(cells[6]);
    log.append(r);
  }
  return log;
}

MetricsLog read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_metrics(in);
}

void write_timing(const MetricsLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << "round\telapsed_seconds\n";
  for (const MetricsRecord& r : log.records()) out << r.round << '\t' << format_double(r.elapsed_seconds) << '\n';
}

}  // namespace reprl
