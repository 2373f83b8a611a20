#include "nfkit/clean.hpp"

#include <algorithm>
#include <array>

#include "nfkit/error.hpp"
#include "nfkit/text.hpp"

namespace nfkit {

namespace {

constexpr std::string_view kAnonymized = "Another user said:";

constexpr std::array<std::string_view, 7> kDurationUnits = {
    "second", "minute", "hour", "day", "week", "month", "year"};

// Skips [ \t]+ starting at pos; returns npos if there is none.
std::size_t skip_blanks(std::string_view s, std::size_t pos) {
  const std::size_t start = pos;
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  return pos == start ? std::string_view::npos : pos;
}

std::size_t match_word(std::string_view s, std::size_t pos,
                       std::string_view word) {
  if (pos == std::string_view::npos || !text::istarts_with(s.substr(pos), word)) {
    return std::string_view::npos;
  }
  return pos + word.size();
}

// Matches "<n> <unit>[s]" at pos, returns the end or npos.
std::size_t match_duration(std::string_view s, std::size_t pos) {
  if (pos == std::string_view::npos || pos >= s.size()) return std::string_view::npos;
  std::size_t p = pos;
  if (s[p] >= '0' && s[p] <= '9') {
    while (p < s.size() && s[p] >= '0' && s[p] <= '9') ++p;
  } else if (auto e = match_word(s, p, "an"); e != std::string_view::npos &&
                                               (e < s.size() && !text::is_ascii_alnum(s[e]))) {
    p = e;
  } else if (auto e1 = match_word(s, p, "a"); e1 != std::string_view::npos &&
                                               (e1 < s.size() && !text::is_ascii_alnum(s[e1]))) {
    p = e1;
  } else if (auto e2 = match_word(s, p, "one"); e2 != std::string_view::npos &&
                                                 (e2 < s.size() && !text::is_ascii_alnum(s[e2]))) {
    p = e2;
  } else {
    return std::string_view::npos;
  }
  p = skip_blanks(s, p);
  if (p == std::string_view::npos) return p;
  for (auto unit : kDurationUnits) {
    auto e = match_word(s, p, unit);
    if (e == std::string_view::npos) continue;
    if (e < s.size() && (s[e] == 's' || s[e] == 'S')) ++e;
    if (e < s.size() && text::is_ascii_alnum(s[e])) continue;
    return e;
  }
  return std::string_view::npos;
}

struct Span {
  std::size_t begin;
  std::size_t end;
  std::size_t name_end = 0;
};

// Finds the next citation directive whose "said" keyword starts at or after
// `from`. The span covers the username token through "ago:".
std::optional<Span> find_citation(std::string_view s, std::size_t from) {
  for (std::size_t i = from; i + 4 <= s.size(); ++i) {
    if (!text::istarts_with(s.substr(i), "said")) continue;
    // Preceded by blanks and a non-empty username token.
    if (i == 0 || (s[i - 1] != ' ' && s[i - 1] != '\t')) continue;
    std::size_t name_end = i;
    while (name_end > 0 && (s[name_end - 1] == ' ' || s[name_end - 1] == '\t')) {
      --name_end;
    }
    if (name_end == 0 || text::is_space(s[name_end - 1]) || s[name_end - 1] == ']') continue;
    // The token stops at a closing bracket so "[quote]name" keeps its tag.
    std::size_t name_begin = name_end;
    while (name_begin > 0 && !text::is_space(s[name_begin - 1]) && s[name_begin - 1] != ']') {
      --name_begin;
    }

    std::size_t p = i + 4;
    p = match_duration(s, skip_blanks(s, p));
    p = match_word(s, p == std::string_view::npos ? p : skip_blanks(s, p), "ago:");
    if (p == std::string_view::npos) continue;
    return Span{name_begin, p, name_end};
  }
  return std::nullopt;
}

std::optional<Span> find_url(std::string_view s, std::size_t from) {
  static constexpr std::array<std::string_view, 4> kSchemes = {
      "http://", "https://", "ftp://", "ftps://"};
  for (std::size_t i = from; i < s.size(); ++i) {
    if (i > 0 && text::is_ascii_alnum(s[i - 1])) continue;
    std::size_t body = std::string_view::npos;
    for (auto scheme : kSchemes) {
      if (text::istarts_with(s.substr(i), scheme)) {
        body = i + scheme.size();
        break;
      }
    }
    if (body != std::string_view::npos) {
      if (body >= s.size() || text::is_space(s[body])) continue;
    } else if (text::istarts_with(s.substr(i), "www.") && i + 4 < s.size() &&
               text::is_ascii_alnum(s[i + 4])) {
      body = i + 4;
    } else {
      continue;
    }
    std::size_t end = body;
    while (end < s.size() && !text::is_space(s[end])) ++end;
    return Span{i, end};
  }
  return std::nullopt;
}

// Position of the next open tag at or after `from`, and the index just past
// its closing ']'.
std::optional<Span> find_open_tag(std::string_view s, std::size_t from,
                                  const QuoteDelimiters& d) {
  for (std::size_t i = from; i + d.open_prefix.size() <= s.size(); ++i) {
    if (!text::istarts_with(s.substr(i), d.open_prefix)) continue;
    const std::size_t after = i + d.open_prefix.size();
    if (after >= s.size()) continue;
    const char end = d.close.empty() ? ']' : d.close.back();
    if (s[after] == end) return Span{i, after + 1};
    if (s[after] == '=' || s[after] == ' ') {
      const auto close = s.find(end, after);
      if (close != std::string_view::npos) return Span{i, close + 1};
    }
  }
  return std::nullopt;
}

std::optional<Span> find_close_tag(std::string_view s, std::size_t from,
                                   const QuoteDelimiters& d) {
  for (std::size_t i = from; i + d.close.size() <= s.size(); ++i) {
    if (text::istarts_with(s.substr(i), d.close)) {
      return Span{i, i + d.close.size()};
    }
  }
  return std::nullopt;
}

QuoteResult strip_quotes_once(std::string_view s, const QuoteDelimiters& d) {
  QuoteResult r;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto open = find_open_tag(s, pos, d);
    const auto stray = find_close_tag(s, pos, d);
    if (stray && (!open || stray->begin < open->begin)) {
      r.text.append(s.substr(pos, stray->begin - pos));
      r.unbalanced = true;
      pos = stray->end;
      continue;
    }
    if (!open) {
      r.text.append(s.substr(pos));
      break;
    }
    r.text.append(s.substr(pos, open->begin - pos));
    ++r.count;
    std::size_t depth = 1;
    std::size_t cursor = open->end;
    while (depth > 0) {
      const auto inner_open = find_open_tag(s, cursor, d);
      const auto inner_close = find_close_tag(s, cursor, d);
      if (!inner_close) {
        r.unbalanced = true;
        cursor = s.size();
        break;
      }
      if (inner_open && inner_open->begin < inner_close->begin) {
        ++depth;
        cursor = inner_open->end;
      } else {
        --depth;
        cursor = inner_close->end;
      }
    }
    pos = cursor;
  }
  return r;
}

}  // namespace

RewriteResult anonymize_citations(std::string_view body) {
  RewriteResult r;
  std::size_t pos = 0;
  std::size_t search_from = 0;
  while (auto span = find_citation(body, search_from)) {
    if (span->begin < pos) {
      // Username token starts inside the previous replacement: keep only the
      // part after it, or skip if nothing of the name is left.
      if (span->name_end <= pos) {
        search_from = span->end;
        continue;
      }
      span->begin = pos;
    }
    r.text.append(body.substr(pos, span->begin - pos));
    r.text.append(kAnonymized);
    ++r.count;
    pos = search_from = span->end;
  }
  r.text.append(body.substr(pos));
  return r;
}

bool contains_citation(std::string_view text) {
  return find_citation(text, 0).has_value();
}

RewriteResult strip_links(std::string_view body) {
  RewriteResult r;
  std::string out;
  std::size_t pos = 0;
  while (auto span = find_url(body, pos)) {
    out.append(body.substr(pos, span->begin - pos));
    ++r.count;
    pos = span->end;
  }
  out.append(body.substr(pos));
  r.text = r.count > 0 ? text::normalize_whitespace(out) : std::move(out);
  return r;
}

bool contains_url(std::string_view text) {
  return find_url(text, 0).has_value();
}

QuoteResult strip_quotes(std::string_view body, Source source,
                         const QuoteDelimiters& delimiters) {
  if (source != Source::stormfront) return QuoteResult{std::string(body), 0, false};
  // Removing a region can splice a new tag together ("[QUO" + "TE]"), so
  // repeat until nothing is removed.
  QuoteResult total{std::string(body), 0, false};
  while (true) {
    auto step = strip_quotes_once(total.text, delimiters);
    const bool changed = step.text.size() != total.text.size();
    total.count += step.count;
    total.unbalanced = total.unbalanced || step.unbalanced;
    total.text = std::move(step.text);
    if (!changed) break;
  }
  if (total.count > 0 || total.unbalanced) {
    total.text = text::normalize_whitespace(total.text);
  }
  return total;
}

RuleCounts& RuleCounts::operator+=(const RuleCounts& o) {
  citations_rewritten += o.citations_rewritten;
  quotes_removed += o.quotes_removed;
  links_removed += o.links_removed;
  return *this;
}

void CleaningConfig::validate() const {
  if (min_len > max_len) {
    throw ConfigError("cleaning: min_len must not exceed max_len");
  }
  for (const auto& [source, d] : quote_delimiters) {
    if (d.open_prefix.empty() || d.close.empty()) {
      throw ConfigError("cleaning: empty quote delimiter for " +
                        std::string(to_string(source)));
    }
  }
}

CleaningConfig CleaningConfig::from_config(const KeyValueConfig& cfg,
                                           std::string_view prefix) {
  const std::string p = prefix.empty() ? "" : std::string(prefix) + ".";
  CleaningConfig c;
  if (auto v = cfg.get_int(p + "min_len")) c.min_len = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int(p + "max_len")) c.max_len = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_list(p + "length_filter_sources")) {
    c.length_filtered.clear();
    for (const auto& name : *v) {
      auto s = parse_source(name);
      if (!s) throw ConfigError(cfg.origin() + ": unknown source '" + name + "'");
      c.length_filtered.push_back(*s);
    }
  }
  for (Source s : {Source::iron_march, Source::stormfront}) {
    const std::string base = p + "quote." + std::string(to_string(s));
    auto open = cfg.get(base + ".open");
    auto close = cfg.get(base + ".close");
    if (open || close) {
      if (!open || !close) {
        throw ConfigError(cfg.origin() + ": " + base + " needs both open and close");
      }
      c.quote_delimiters[s] = QuoteDelimiters{*open, *close};
    }
  }
  c.validate();
  return c;
}

CleanedText clean_text(std::string_view body, Source source,
                       const CleaningConfig& config) {
  static const QuoteDelimiters kDefaultDelimiters;
  auto it = config.quote_delimiters.find(source);
  const QuoteDelimiters& delimiters =
      it == config.quote_delimiters.end() ? kDefaultDelimiters : it->second;

  CleanedText out{std::string(body), {}, false};
  constexpr int kMaxPasses = 16;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    auto cited = anonymize_citations(out.text);
    auto quoted = strip_quotes(cited.text, source, delimiters);
    auto linked = strip_links(quoted.text);
    out.text = text::normalize_whitespace(linked.text);
    const RuleCounts step{cited.count, quoted.count, linked.count};
    out.counts += step;
    out.unbalanced_quotes = out.unbalanced_quotes || quoted.unbalanced;
    if (!step.any() && !quoted.unbalanced) break;
  }
  return out;
}

std::string post_key(Source source, std::string_view id) {
  return std::string(to_string(source)) + ":" + std::string(id);
}

std::string CleanPost::key() const { return post_key(source, id); }

CleanStats& CleanStats::operator+=(const CleanStats& o) {
  input += o.input;
  kept += o.kept;
  too_short += o.too_short;
  too_long += o.too_long;
  language_rejected += o.language_rejected;
  unbalanced_quotes += o.unbalanced_quotes;
  removed += o.removed;
  return *this;
}

nlohmann::ordered_json CleanStats::to_json() const {
  return {{"input", input},
          {"kept", kept},
          {"too_short", too_short},
          {"too_long", too_long},
          {"language_rejected", language_rejected},
          {"unbalanced_quotes", unbalanced_quotes},
          {"citations_rewritten", removed.citations_rewritten},
          {"quotes_removed", removed.quotes_removed},
          {"links_removed", removed.links_removed}};
}

CleanOutcome clean_post(const RawPost& raw, const CleaningConfig& config) {
  auto cleaned = clean_text(raw.body, raw.source, config);
  CleanOutcome outcome;
  CleanPost& post = outcome.post;
  post.id = raw.id;
  post.source = raw.source;
  post.timestamp = raw.timestamp;
  post.thread_ref = raw.thread_ref;
  post.text = std::move(cleaned.text);
  post.char_len = text::codepoint_count(post.text);
  post.artifacts_removed = cleaned.counts;
  outcome.unbalanced_quotes = cleaned.unbalanced_quotes;

  const bool filtered =
      std::find(config.length_filtered.begin(), config.length_filtered.end(),
                raw.source) != config.length_filtered.end();
  if (filtered && post.char_len < config.min_len) {
    outcome.verdict = CleanVerdict::too_short;
  } else if (filtered && post.char_len > config.max_len) {
    outcome.verdict = CleanVerdict::too_long;
  } else if (config.language_filter && !config.language_filter(post.text)) {
    outcome.verdict = CleanVerdict::language_rejected;
  }
  return outcome;
}

std::vector<CleanPost> clean_posts(std::span<const RawPost> raw,
                                   const CleaningConfig& config,
                                   CleanStats& stats) {
  config.validate();
  std::vector<CleanPost> kept;
  for (const auto& r : raw) {
    ++stats.input;
    auto outcome = clean_post(r, config);
    stats.removed += outcome.post.artifacts_removed;
    if (outcome.unbalanced_quotes) ++stats.unbalanced_quotes;
    switch (outcome.verdict) {
      case CleanVerdict::kept:
        ++stats.kept;
        kept.push_back(std::move(outcome.post));
        break;
      case CleanVerdict::too_short: ++stats.too_short; break;
      case CleanVerdict::too_long: ++stats.too_long; break;
      case CleanVerdict::language_rejected: ++stats.language_rejected; break;
    }
  }
  return kept;
}

std::string DateWindow::to_string() const {
  return format_date(start) + ".." + (end ? format_date(*end) : "");
}

DateWindow DateWindow::parse(std::string_view spec) {
  const auto dots = spec.find("..");
  if (dots == std::string_view::npos) {
    throw ConfigError("date window must look like START..END or START..: " +
                      std::string(spec));
  }
  auto start = parse_date(spec.substr(0, dots));
  if (!start) throw ConfigError("bad window start date: " + std::string(spec));
  DateWindow w{*start, std::nullopt};
  const auto tail = text::trim(spec.substr(dots + 2));
  if (!tail.empty()) {
    auto end = parse_date(tail);
    if (!end) throw ConfigError("bad window end date: " + std::string(spec));
    w.end = *end;
  }
  return w;
}

void MergePolicy::validate() const {
  for (const auto* w : {&iron_march_window, &stormfront_window}) {
    if (w->end && *w->end < w->start) {
      throw ConfigError("merge window is not well-ordered: " + w->to_string());
    }
  }
}

MergePolicy MergePolicy::from_config(const KeyValueConfig& cfg,
                                     std::string_view prefix) {
  const std::string p = prefix.empty() ? "" : std::string(prefix) + ".";
  MergePolicy m;
  if (auto v = cfg.get(p + "iron_march_window")) m.iron_march_window = DateWindow::parse(*v);
  if (auto v = cfg.get(p + "stormfront_window")) m.stormfront_window = DateWindow::parse(*v);
  auto iron = cfg.get_int(p + "expected.iron_march");
  auto storm = cfg.get_int(p + "expected.stormfront");
  auto total = cfg.get_int(p + "expected.total");
  if (iron || storm || total) {
    if (!iron || !storm || !total) {
      throw ConfigError(cfg.origin() + ": expected.* needs iron_march, stormfront and total");
    }
    m.expected_counts = ExpectedCounts{static_cast<std::size_t>(*iron),
                                       static_cast<std::size_t>(*storm),
                                       static_cast<std::size_t>(*total)};
  }
  m.validate();
  return m;
}

std::map<std::string, std::size_t> MergedCorpus::counts_by_source() const {
  return {{std::string(to_string(Source::iron_march)), iron_march_count},
          {std::string(to_string(Source::stormfront)), stormfront_count}};
}

MergedCorpus window_and_merge(std::vector<CleanPost> iron,
                              std::vector<CleanPost> storm,
                              const MergePolicy& policy) {
  policy.validate();
  if (iron.empty() && storm.empty()) {
    throw DataError("merge: both source streams are empty");
  }
  MergedCorpus corpus;
  corpus.posts.reserve(iron.size() + storm.size());
  for (auto& p : iron) {
    if (policy.iron_march_window.contains(date_of(p.timestamp))) {
      corpus.posts.push_back(std::move(p));
      ++corpus.iron_march_count;
    }
  }
  for (auto& p : storm) {
    if (policy.stormfront_window.contains(date_of(p.timestamp))) {
      corpus.posts.push_back(std::move(p));
      ++corpus.stormfront_count;
    }
  }
  if (const auto& e = policy.expected_counts) {
    auto check = [&](const char* what, std::size_t expected, std::size_t got) {
      if (expected != got) {
        corpus.warnings.push_back(std::string("expected ") + what + " count " +
                                  std::to_string(expected) + ", got " +
                                  std::to_string(got));
      }
    };
    check("iron_march", e->iron_march, corpus.iron_march_count);
    check("stormfront", e->stormfront, corpus.stormfront_count);
    check("total", e->total, corpus.size());
  }
  return corpus;
}

nlohmann::ordered_json to_json(const CleanPost& post) {
  nlohmann::ordered_json j;
  j["id"] = post.id;
  j["source"] = to_string(post.source);
  j["timestamp"] = format_rfc3339(post.timestamp);
  j["thread_ref"] = post.thread_ref ? nlohmann::ordered_json(*post.thread_ref)
                                    : nlohmann::ordered_json(nullptr);
  j["text"] = post.text;
  j["char_len"] = post.char_len;
  j["artifacts_removed"] = {
      {"citations_rewritten", post.artifacts_removed.citations_rewritten},
      {"quotes_removed", post.artifacts_removed.quotes_removed},
      {"links_removed", post.artifacts_removed.links_removed}};
  return j;
}

CleanPost clean_post_from_json(const nlohmann::json& j) {
  CleanPost p;
  p.id = j.at("id").get<std::string>();
  auto src = parse_source(j.at("source").get<std::string>());
  if (!src) throw DataError("unknown source in post " + p.id);
  p.source = *src;
  auto ts = parse_timestamp(j.at("timestamp").get<std::string>(), "rfc3339");
  if (!ts) throw DataError("bad timestamp in post " + p.id);
  p.timestamp = *ts;
  if (j.contains("thread_ref") && !j.at("thread_ref").is_null()) {
    p.thread_ref = j.at("thread_ref").get<std::string>();
  }
  p.text = j.at("text").get<std::string>();
  p.char_len = j.at("char_len").get<std::size_t>();
  const auto& a = j.at("artifacts_removed");
  p.artifacts_removed.citations_rewritten = a.at("citations_rewritten").get<std::size_t>();
  p.artifacts_removed.quotes_removed = a.at("quotes_removed").get<std::size_t>();
  p.artifacts_removed.links_removed = a.at("links_removed").get<std::size_t>();
  return p;
}

void write_clean_posts(std::ostream& out, std::span<const CleanPost> posts) {
  for (const auto& p : posts) out << to_json(p).dump() << '\n';
}

std::vector<CleanPost> read_clean_posts(std::istream& in) {
  std::vector<CleanPost> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      posts.push_back(clean_post_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("clean posts line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return posts;
}

}  // namespace nfkit
