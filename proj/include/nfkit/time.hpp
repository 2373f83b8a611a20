#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace nfkit {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

// Parses a timestamp as UTC. `format` is one of:
//   "rfc3339"  - 2016-06-16T12:30:00Z, fractional seconds and offsets allowed
//   "unix"     - integer seconds since the epoch
//   otherwise  - a strptime(3) pattern, e.g. "%Y-%m-%d %H:%M:%S"
// Returns nullopt for empty, malformed or calendar-invalid input.
std::optional<Timestamp> parse_timestamp(std::string_view value,
                                         std::string_view format);

// "2016-06-16T12:30:00Z"
std::string format_rfc3339(Timestamp ts);

std::optional<Date> parse_date(std::string_view iso_date);
std::string format_date(Date d);
Date date_of(Timestamp ts);

}  // namespace nfkit
