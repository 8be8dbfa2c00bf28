#include "gradleak/io/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "gradleak/error.hpp"
#include "gradleak/metrics/metrics.hpp"

namespace gradleak {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

double parse_double(const std::string& s, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kData, "column " + column + ": not a number: '" + s + "'");
}

std::uint64_t parse_uint(const std::string& s, const std::string& column) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used == s.size() && s.front() != '-') return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kData, "column " + column + ": not an unsigned integer: '" + s + "'");
}

}  // namespace

const std::string& metrics_csv_header() {
  static const std::string h =
      "run_id,method,dataset,model,batch_size,T,aggregator,dp_sigma,sparsify_p,seed,mse,psnr_db,ssim,wall_time_s";
  return h;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows, bool header) {
  if (header) out << metrics_csv_header() << '\n';
  for (const auto& r : rows) {
    const double psnr = std::isinf(r.psnr_db) && r.psnr_db > 0 ? kPsnrCapDb : r.psnr_db;
    out << field(r.run_id) << ',' << field(r.method) << ',' << field(r.dataset) << ',' << field(r.model) << ','
        << r.batch_size << ',' << r.T << ',' << field(r.aggregator) << ',' << num(r.dp_sigma) << ','
        << num(r.sparsify_p) << ',' << r.seed << ',' << num(r.mse) << ',' << num(psnr) << ',' << num(r.ssim) << ','
        << num(r.wall_time_s) << '\n';
  }
}

void append_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  write_metrics_csv(out, rows, fresh);
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  require(!quoted, ErrorKind::kData, "unterminated quote in CSV line");
  out.push_back(std::move(cur));
  return out;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == metrics_csv_header(), ErrorKind::kData,
          path.string() + ": missing or unexpected header");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    require(f.size() == 14, ErrorKind::kData,
            path.string() + ":" + std::to_string(lineno) + ": expected 14 fields, got " + std::to_string(f.size()));
    MetricsRow r;
    r.run_id = f[0];
    r.method = f[1];
    r.dataset = f[2];
    r.model = f[3];
    r.batch_size = parse_uint(f[4], "batch_size");
    r.T = parse_uint(f[5], "T");
    r.aggregator = f[6];
    r.dp_sigma = parse_double(f[7], "dp_sigma");
    r.sparsify_p = parse_double(f[8], "sparsify_p");
    r.seed = parse_uint(f[9], "seed");
    r.mse = parse_double(f[10], "mse");
    r.psnr_db = parse_double(f[11], "psnr_db");
    r.ssim = parse_double(f[12], "ssim");
    r.wall_time_s = parse_double(f[13], "wall_time_s");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace gradleak
