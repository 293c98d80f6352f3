#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace heliofarm {

/// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string_view> split(std::string_view text, char delim);

std::string_view trim(std::string_view text);

/// Strict numeric parse of the whole field (surrounding blanks allowed).
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

/// Reads a whole file; throws std::runtime_error naming the path on failure.
std::string read_file(const std::string& path);

/// Iterates lines of a buffer without copying, stripping a trailing '\r'.
class LineReader {
 public:
  explicit LineReader(std::string_view buffer) : rest_(buffer) {}

  bool next(std::string_view& line) {
    if (rest_.empty()) return false;
    const auto nl = rest_.find('\n');
    line = rest_.substr(0, nl);
    rest_ = nl == std::string_view::npos ? std::string_view{} : rest_.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number_;
    return true;
  }

  /// 1-based number of the line last returned by next().
  std::size_t line_number() const { return number_; }

 private:
  std::string_view rest_;
  std::size_t number_ = 0;
};

}  // namespace heliofarm
