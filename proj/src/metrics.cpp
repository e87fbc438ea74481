#include "ddg/metrics.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "ddg/error.hpp"

namespace ddg {

const char* const kMetricsHeader =
    "t,epoch,train_loss,grad_sq_norm,min_grad_sq_so_far,test_loss,test_top1,wall_ms_forward,wall_ms_backward,"
    "module_ms";

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const char* column, std::size_t at) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError(std::string("metrics: bad value '") + s + "' in column " + column, at);
  }
  return v;
}

std::int64_t parse_int(const std::string& s, const char* column, std::size_t at) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError(std::string("metrics: bad integer '") + s + "' in column " + column, at);
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

bool MetricsRow::has_evaluation() const { return !std::isnan(test_loss); }

bool operator==(const MetricsRow& a, const MetricsRow& b) {
  if (a.t != b.t || a.epoch != b.epoch || a.modules.size() != b.modules.size()) return false;
  for (std::size_t i = 0; i < a.modules.size(); ++i)
    if (!same(a.modules[i].forward_ms, b.modules[i].forward_ms) ||
        !same(a.modules[i].backward_ms, b.modules[i].backward_ms))
      return false;
  return same(a.train_loss, b.train_loss) && same(a.grad_sq_norm, b.grad_sq_norm) &&
         same(a.min_grad_sq_so_far, b.min_grad_sq_so_far) && same(a.test_loss, b.test_loss) &&
         same(a.test_top1, b.test_top1) && same(a.wall_ms_forward, b.wall_ms_forward) &&
         same(a.wall_ms_backward, b.wall_ms_backward);
}

std::string format_metrics_row(const MetricsRow& r) {
  std::string s = std::to_string(r.t) + "," + std::to_string(r.epoch) + "," + num(r.train_loss) + "," +
                  num(r.grad_sq_norm) + "," + num(r.min_grad_sq_so_far) + "," + num(r.test_loss) + "," +
                  num(r.test_top1) + "," + num(r.wall_ms_forward) + "," + num(r.wall_ms_backward) + ",";
  for (std::size_t i = 0; i < r.modules.size(); ++i) {
    if (i) s += ';';
    s += num(r.modules[i].forward_ms) + "/" + num(r.modules[i].backward_ms);
  }
  return s;
}

MetricsRow parse_metrics_row(const std::string& line, std::size_t at) {
  const auto cells = split(line, ',');
  if (cells.size() != 10) {
    throw ParseError("metrics: expected 10 columns, got " + std::to_string(cells.size()), at);
  }
  MetricsRow r;
  r.t = parse_int(cells[0], "t", at);
  r.epoch = parse_int(cells[1], "epoch", at);
  r.train_loss = parse_double(cells[2], "train_loss", at);
  r.grad_sq_norm = parse_double(cells[3], "grad_sq_norm", at);
  r.min_grad_sq_so_far = parse_double(cells[4], "min_grad_sq_so_far", at);
  r.test_loss = parse_double(cells[5], "test_loss", at);
  r.test_top1 = parse_double(cells[6], "test_top1", at);
  r.wall_ms_forward = parse_double(cells[7], "wall_ms_forward", at);
  r.wall_ms_backward = parse_double(cells[8], "wall_ms_backward", at);
  if (!cells[9].empty()) {
    for (const auto& m : split(cells[9], ';')) {
      const auto fb = split(m, '/');
      if (fb.size() != 2) throw ParseError("metrics: bad module timing '" + m + "'", at);
      r.modules.push_back({parse_double(fb[0], "module_ms", at), parse_double(fb[1], "module_ms", at)});
    }
  }
  return r;
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ParseError("metrics: missing or unexpected header in " + path.string(), 0);
  }
  std::vector<MetricsRow> rows;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      rows.push_back(parse_metrics_row(line, offset));
    }
    offset += line.size() + 1;
  }
  return rows;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path), path_(path) {
  if (!out_) throw IoError("cannot write metrics file " + path.string());
  out_ << kMetricsHeader << '\n';
  out_.flush();
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_metrics_row(row) << '\n';
  out_.flush();
  if (!out_) throw IoError("write failed for " + path_.string());
}

}  // namespace ddg
