#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace nfkit {

struct TalkingPoint {
  std::string id;
  std::string title;
  std::string description;
};

struct LexiconEntry {
  std::string term;
  std::string definition;
  std::vector<std::string> aliases;
};

// Coding scheme handed to annotators and used to build few-shot prompts.
struct Lexicon {
  int version = 1;
  std::string instructions;
  std::string definition;
  std::string guidance;
  std::vector<std::string> glossaries;
  std::vector<TalkingPoint> talking_points;
  std::vector<LexiconEntry> terms;

  // Case-insensitive over terms and aliases.
  const LexiconEntry* lookup(std::string_view term_or_alias) const;
  const TalkingPoint* talking_point(std::string_view id) const;

  nlohmann::ordered_json to_json() const;
  static Lexicon from_json(const nlohmann::json& j);
};

struct Exemplar {
  std::string text;
  bool label = false;
  std::string rationale;
};

struct ExemplarBank {
  int version = 1;
  std::vector<Exemplar> exemplars;

  std::size_t positives() const;
  std::size_t negatives() const;

  nlohmann::ordered_json to_json() const;
  static ExemplarBank from_json(const nlohmann::json& j);
};

Lexicon load_lexicon(const std::string& path);
ExemplarBank load_exemplars(const std::string& path);

// Pretty-printed JSON with a trailing newline; the bundled data files are
// stored in exactly this form.
std::string dump_pretty(const nlohmann::ordered_json& j);

struct TermMatch {
  std::size_t begin = 0;  // byte offsets into the text
  std::size_t end = 0;
  std::string term;       // canonical term
  std::string matched;    // text as written
};

// Whole-word, case-insensitive occurrences of terms and aliases. Longer
// patterns win over shorter ones starting at the same place; matches never
// overlap. A space in a pattern matches any run of whitespace.
std::vector<TermMatch> tag_terms(std::string_view text, const Lexicon& lexicon);

}  // namespace nfkit
