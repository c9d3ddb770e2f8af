#include "io.hpp"

#include "iterfilt/errors.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace iterfilt::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return ss.str();
}

ObservationSeries read_series_csv(const fs::path& path, double t0) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigurationError("data file '" + path.string() + "' is empty");
  const auto header = split(trim(line));
  if (header.size() < 2 || trim(header[0]) != "time")
    throw ConfigurationError("data file '" + path.string() + "' must start with a 'time,y1,...' header");
  const std::size_t dy = header.size() - 1;

  std::vector<double> times;
  std::vector<double> values;
  std::vector<bool> present;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split(line);
    const std::string where = path.string() + ":" + std::to_string(row);
    if (fields.size() != header.size())
      throw ConfigurationError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                               std::to_string(fields.size()));
    double t;
    if (!parse_double(trim(fields[0]), t)) throw ConfigurationError(where + ": time is not a number");
    times.push_back(t);
    bool all = true;
    for (std::size_t k = 1; k <= dy; ++k) {
      const std::string f = trim(fields[k]);
      double v = std::nan("");
      if (f.empty() || f == "NA")
        all = false;
      else if (!parse_double(f, v))
        throw ConfigurationError(where + ": field " + std::to_string(k + 1) + " is not a number");
      values.push_back(v);
    }
    // A row is observed only if all of its components are.
    present.push_back(all);
  }
  if (times.empty()) throw ConfigurationError("data file '" + path.string() + "' has no rows");
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd y = Eigen::Map<Eigen::MatrixXd>(values.data(), static_cast<Eigen::Index>(dy), n);
  return ObservationSeries(TimeGrid(t0, std::move(times)), std::move(y), std::move(present));
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) body_ += ',';
    body_ += format_number(values[i]);
  }
  body_ += '\n';
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += header_[i];
  }
  out += '\n';
  return out + body_;
}

void write_atomic(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("error while writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace iterfilt::cli
