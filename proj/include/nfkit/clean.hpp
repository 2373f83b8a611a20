#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nfkit/config.hpp"
#include "nfkit/ingest.hpp"
#include "nfkit/time.hpp"

namespace nfkit {

struct RewriteResult {
  std::string text;
  std::size_t count = 0;
};

// Replaces every forum citation directive "<username> said <n> <unit> ago:"
// with "Another user said:". Everything else is left byte-identical.
RewriteResult anonymize_citations(std::string_view body);
bool contains_citation(std::string_view text);

// Removes every scheme-prefixed (http, https, ftp, ftps) or www-prefixed URL
// token up to the next whitespace, then normalizes whitespace.
RewriteResult strip_links(std::string_view body);
bool contains_url(std::string_view text);

// Open tag is `open_prefix` followed by the last character of `close`, or by
// '='/' ' and attributes up to that character. Both tags match case-insensitively; quotes may nest.
struct QuoteDelimiters {
  std::string open_prefix = "[quote";
  std::string close = "[/quote]";
};

struct QuoteResult {
  std::string text;
  std::size_t count = 0;
  bool unbalanced = false;  // open tag without close, or stray close tag
};

// Deletes quoted regions from stormfront posts. An unclosed region runs to
// the end of the post. Iron March posts are returned unchanged.
QuoteResult strip_quotes(std::string_view body, Source source,
                         const QuoteDelimiters& delimiters = {});

struct RuleCounts {
  std::size_t citations_rewritten = 0;
  std::size_t quotes_removed = 0;
  std::size_t links_removed = 0;

  bool any() const {
    return citations_rewritten + quotes_removed + links_removed > 0;
  }
  RuleCounts& operator+=(const RuleCounts& o);
  bool operator==(const RuleCounts&) const = default;
};

using LanguageFilter = std::function<bool(std::string_view text)>;

struct CleaningConfig {
  std::map<Source, QuoteDelimiters> quote_delimiters{
      {Source::stormfront, QuoteDelimiters{}}};
  std::size_t min_len = 120;
  std::size_t max_len = 5000;
  // Sources the length filter applies to; both by default.
  std::vector<Source> length_filtered{Source::iron_march, Source::stormfront};
  // Optional hook, off when empty. Return false to drop a post.
  LanguageFilter language_filter;

  void validate() const;
  // Keys: min_len, max_len, length_filter_sources,
  //       quote.<source>.open, quote.<source>.close
  static CleaningConfig from_config(const KeyValueConfig& cfg,
                                    std::string_view prefix = "");
};

struct CleanedText {
  std::string text;
  RuleCounts counts;
  bool unbalanced_quotes = false;
};

// Applies citations -> quotes -> links -> whitespace normalization, and
// repeats that pass until it removes nothing (a removal can expose a new
// directive, e.g. a link sitting between "said" and "2 hours ago:").
CleanedText clean_text(std::string_view body, Source source,
                       const CleaningConfig& config);

struct CleanPost {
  std::string id;
  Source source = Source::iron_march;
  Timestamp timestamp{};
  std::optional<std::string> thread_ref;
  std::string text;
  std::size_t char_len = 0;  // code points
  RuleCounts artifacts_removed;

  // Corpus-wide identifier; raw ids are only unique within a source.
  std::string key() const;
  bool operator==(const CleanPost&) const = default;
};

std::string post_key(Source source, std::string_view id);

struct CleanStats {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t too_short = 0;
  std::size_t too_long = 0;
  std::size_t language_rejected = 0;
  std::size_t unbalanced_quotes = 0;
  RuleCounts removed;

  CleanStats& operator+=(const CleanStats& o);
  nlohmann::ordered_json to_json() const;
};

enum class CleanVerdict { kept, too_short, too_long, language_rejected };

struct CleanOutcome {
  CleanVerdict verdict = CleanVerdict::kept;
  CleanPost post;
  bool unbalanced_quotes = false;
};

CleanOutcome clean_post(const RawPost& raw, const CleaningConfig& config);
std::vector<CleanPost> clean_posts(std::span<const RawPost> raw,
                                   const CleaningConfig& config,
                                   CleanStats& stats);

// Inclusive calendar-date window; an absent end is open-ended.
struct DateWindow {
  Date start;
  std::optional<Date> end;

  bool contains(Date d) const { return d >= start && (!end || d <= *end); }
  std::string to_string() const;
  // "2016-06-16..2017-11-21" or "2017-11-22.."
  static DateWindow parse(std::string_view spec);
};

struct ExpectedCounts {
  std::size_t iron_march = 0;
  std::size_t stormfront = 0;
  std::size_t total = 0;
};

struct MergePolicy {
  DateWindow iron_march_window = DateWindow::parse("2016-06-16..2017-11-21");
  DateWindow stormfront_window = DateWindow::parse("2017-11-22..");
  std::optional<ExpectedCounts> expected_counts;

  void validate() const;
  // Keys: iron_march_window, stormfront_window, expected.iron_march,
  //       expected.stormfront, expected.total
  static MergePolicy from_config(const KeyValueConfig& cfg,
                                 std::string_view prefix = "");
};

struct MergedCorpus {
  std::vector<CleanPost> posts;  // Iron March first, each in input order
  std::size_t iron_march_count = 0;
  std::size_t stormfront_count = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return posts.size(); }
  std::map<std::string, std::size_t> counts_by_source() const;
};

// Throws DataError if both inputs are empty. A mismatch against
// policy.expected_counts is recorded in `warnings`, not thrown.
MergedCorpus window_and_merge(std::vector<CleanPost> iron,
                              std::vector<CleanPost> storm,
                              const MergePolicy& policy);

nlohmann::ordered_json to_json(const CleanPost& post);
CleanPost clean_post_from_json(const nlohmann::json& j);
void write_clean_posts(std::ostream& out, std::span<const CleanPost> posts);
std::vector<CleanPost> read_clean_posts(std::istream& in);

}  // namespace nfkit
