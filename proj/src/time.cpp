#include "nfkit/time.hpp"

#include <charconv>
#include <cstdio>
#include <ctime>

#include "nfkit/text.hpp"

namespace nfkit {

namespace {

using namespace std::chrono;

std::optional<int> read_int(std::string_view s, std::size_t pos,
                            std::size_t width) {
  if (pos + width > s.size()) return std::nullopt;
  int value = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    value = value * 10 + (s[i] - '0');
  }
  return value;
}

std::optional<Timestamp> make_timestamp(int y, int mo, int d, int h, int mi,
                                        int sec) {
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 ||
      sec > 60) {
    return std::nullopt;
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

std::optional<Timestamp> parse_rfc3339(std::string_view s) {
  // YYYY-MM-DD[T ]HH:MM:SS[.frac](Z|+hh:mm|-hh:mm)?
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' ||
      (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  auto y = read_int(s, 0, 4), mo = read_int(s, 5, 2), d = read_int(s, 8, 2),
       h = read_int(s, 11, 2), mi = read_int(s, 14, 2),
       sec = read_int(s, 17, 2);
  if (!y || !mo || !d || !h || !mi || !sec) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
  }
  auto ts = make_timestamp(*y, *mo, *d, *h, *mi, *sec);
  if (!ts) return std::nullopt;
  if (pos == s.size()) return ts;
  if ((s[pos] == 'Z' || s[pos] == 'z') && pos + 1 == s.size()) return ts;
  if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() &&
      s[pos + 3] == ':') {
    auto oh = read_int(s, pos + 1, 2), om = read_int(s, pos + 4, 2);
    if (!oh || !om || *oh > 23 || *om > 59) return std::nullopt;
    const auto offset = hours{*oh} + minutes{*om};
    return s[pos] == '+' ? *ts - offset : *ts + offset;
  }
  return std::nullopt;
}

std::optional<Timestamp> parse_unix(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return Timestamp{seconds{v}};
}

std::optional<Timestamp> parse_strptime(std::string_view s,
                                        std::string_view format) {
  const std::string value(s);
  const std::string fmt(format);
  std::tm tm{};
  tm.tm_mday = 1;
  const char* end = ::strptime(value.c_str(), fmt.c_str(), &tm);
  if (end == nullptr) return std::nullopt;
  while (*end != '\0' && text::is_space(*end)) ++end;
  if (*end != '\0') return std::nullopt;
  return make_timestamp(tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                        tm.tm_hour, tm.tm_min, tm.tm_sec);
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view value,
                                         std::string_view format) {
  const auto v = text::trim(value);
  if (v.empty() || text::iequals(v, "null") || text::iequals(v, "nan")) {
    return std::nullopt;
  }
  if (format == "rfc3339") return parse_rfc3339(v);
  if (format == "unix") return parse_unix(v);
  return parse_strptime(v, format);
}

std::string format_rfc3339(Timestamp ts) {
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{ts - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::optional<Date> parse_date(std::string_view iso_date) {
  const auto s = text::trim(iso_date);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto y = read_int(s, 0, 4), mo = read_int(s, 5, 2), d = read_int(s, 8, 2);
  if (!y || !mo || !d) return std::nullopt;
  const Date ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                 day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

Date date_of(Timestamp ts) { return Date{floor<days>(ts)}; }

}  // namespace nfkit
