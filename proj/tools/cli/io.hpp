#pragma once

#include "iterfilt/model.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace iterfilt::cli {

/// Unreadable input or unwritable output.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Reads a `time,y1,...,yd` CSV. Empty or "NA" fields are missing values.
ObservationSeries read_series_csv(const std::filesystem::path& path, double t0);

/// Rows of a CSV table with a header line.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::string body_;
};

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_text(const std::filesystem::path& path);

}  // namespace iterfilt::cli
