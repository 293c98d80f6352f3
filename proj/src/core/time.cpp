#include "heliofarm/core/time.hpp"

#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace heliofarm {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > text.size()) return false;
  const char* first = text.data() + pos;
  const char* last = first + width;
  for (const char* p = first; p != last; ++p) {
    if (*p < '0' || *p > '9') return false;
  }
  return std::from_chars(first, last, out).ec == std::errc{};
}

std::optional<Date> make_date(int y, int m, int d) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

}  // namespace

std::optional<Date> try_parse_date(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) return std::nullopt;
  return make_date(y, m, d);
}

Date parse_date(std::string_view text) {
  if (auto d = try_parse_date(text)) return *d;
  throw std::invalid_argument(fmt::format("invalid date '{}', expected YYYY-MM-DD", text));
}

std::optional<Timestamp> try_parse_datetime(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 19) return std::nullopt;
  if (text[10] != ' ' && text[10] != 'T') return std::nullopt;
  if (text[13] != ':' || text[16] != ':') return std::nullopt;
  auto day = try_parse_date(text.substr(0, 10));
  if (!day) return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!read_int(text, 11, 2, hh) || !read_int(text, 14, 2, mm) || !read_int(text, 17, 2, ss)) return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  return Timestamp{*day} + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss};
}

Timestamp parse_datetime(std::string_view text) {
  if (auto t = try_parse_datetime(text)) return *t;
  throw std::invalid_argument(fmt::format("invalid datetime '{}', expected YYYY-MM-DD HH:MM:SS", text));
}

Date resolve_date(std::string_view text, Timestamp reference) {
  if (auto d = try_parse_date(text)) return *d;
  int m = 0, d = 0;
  if (text.size() == 5 && text[2] == '-' && read_int(text, 0, 2, m) && read_int(text, 3, 2, d)) {
    const std::chrono::year_month_day ref{day_of(reference)};
    if (auto day = make_date(static_cast<int>(ref.year()), m, d)) return *day;
  }
  throw std::invalid_argument(fmt::format("invalid date '{}', expected YYYY-MM-DD or MM-DD", text));
}

std::string format_date(Date day) {
  const std::chrono::year_month_day ymd{day};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

std::string format_datetime(Timestamp at, char separator) {
  const auto secs = seconds_of_day(at);
  return fmt::format("{}{}{:02d}:{:02d}:{:02d}", format_date(day_of(at)), separator, secs / 3600, (secs / 60) % 60,
                     secs % 60);
}

}  // namespace heliofarm
