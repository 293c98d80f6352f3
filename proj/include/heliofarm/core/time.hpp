#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace heliofarm {

/// Calendar instant with one-second resolution, always UTC.
using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DD HH:MM:SS` (a `T` separator and a trailing `Z` are accepted too).
std::optional<Timestamp> try_parse_datetime(std::string_view text);
Timestamp parse_datetime(std::string_view text);

/// Parses `YYYY-MM-DD`.
std::optional<Date> try_parse_date(std::string_view text);
Date parse_date(std::string_view text);

/// Resolves a command-script date argument. Accepts `YYYY-MM-DD` or the short
/// `MM-DD` form, which takes its year from `reference`.
Date resolve_date(std::string_view text, Timestamp reference);

std::string format_datetime(Timestamp at, char separator = ' ');
std::string format_date(Date day);

inline Date day_of(Timestamp at) { return std::chrono::floor<std::chrono::days>(at); }

inline std::int64_t seconds_of_day(Timestamp at) { return (at - day_of(at)).count(); }

inline std::int64_t to_unix(Timestamp at) { return at.time_since_epoch().count(); }
inline Timestamp from_unix(std::int64_t seconds) { return Timestamp{std::chrono::seconds{seconds}}; }

}  // namespace heliofarm
