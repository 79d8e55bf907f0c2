#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluekit/tensor.hpp"

namespace cluekit {

namespace fs = std::filesystem;

/// Writes to a sibling temporary file, then renames over the target.
void write_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

/// Shortest decimal form that round-trips; "inf", "-inf", "nan" otherwise.
std::string format_double(double v);

/// JSON number, or the strings "inf"/"-inf" for infinities.
nlohmann::json json_number(double v);
double json_to_double(const nlohmann::json& j);

/// Two-space indented, keys sorted, trailing newline.
std::string dump_json(const nlohmann::json& j);

/// Comma-separated rows with a header. Fields containing commas or quotes are
/// quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  void end_row();
  std::size_t rows() const { return rows_; }
  const std::string& str() const { return out_; }

 private:
  std::size_t width_;
  std::size_t pending_ = 0;
  std::size_t rows_ = 0;
  std::string out_;
};

/// Raw little-endian float64 blob.
std::string encode_f64(std::span<const double> values);
Vec decode_f64(std::string_view bytes);

}  // namespace cluekit
