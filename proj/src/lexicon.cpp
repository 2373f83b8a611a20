#include "nfkit/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "nfkit/error.hpp"
#include "nfkit/text.hpp"

namespace nfkit {

namespace {

nlohmann::ordered_json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

bool word_char(unsigned char c) { return text::is_ascii_alnum(c) || c == '_' || c >= 0x80; }

// Length of the match of `pattern` at `pos`, or 0.
std::size_t match_at(std::string_view text, std::size_t pos, std::string_view pattern) {
  std::size_t i = pos;
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    if (pattern[k] == ' ') {
      if (i >= text.size() || !text::is_space(text[i])) return 0;
      while (i < text.size() && text::is_space(text[i])) ++i;
      continue;
    }
    if (i >= text.size() || text::ascii_lower(text[i]) != text::ascii_lower(pattern[k])) return 0;
    ++i;
  }
  return i - pos;
}

}  // namespace

const LexiconEntry* Lexicon::lookup(std::string_view term_or_alias) const {
  for (const auto& e : terms) {
    if (text::iequals(e.term, term_or_alias)) return &e;
    for (const auto& a : e.aliases) {
      if (text::iequals(a, term_or_alias)) return &e;
    }
  }
  return nullptr;
}

const TalkingPoint* Lexicon::talking_point(std::string_view id) const {
  for (const auto& tp : talking_points) {
    if (tp.id == id) return &tp;
  }
  return nullptr;
}

nlohmann::ordered_json Lexicon::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["instructions"] = instructions;
  j["definition"] = definition;
  j["guidance"] = guidance;
  j["glossaries"] = glossaries;
  j["talking_points"] = nlohmann::ordered_json::array();
  for (const auto& tp : talking_points) {
    j["talking_points"].push_back(
        {{"id", tp.id}, {"title", tp.title}, {"description", tp.description}});
  }
  j["terms"] = nlohmann::ordered_json::array();
  for (const auto& e : terms) {
    j["terms"].push_back(
        {{"term", e.term}, {"definition", e.definition}, {"aliases", e.aliases}});
  }
  return j;
}

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  try {
    Lexicon l;
    l.version = j.at("version").get<int>();
    l.instructions = j.at("instructions").get<std::string>();
    l.definition = j.at("definition").get<std::string>();
    l.guidance = j.at("guidance").get<std::string>();
    l.glossaries = j.value("glossaries", std::vector<std::string>{});
    for (const auto& tp : j.at("talking_points")) {
      l.talking_points.push_back({tp.at("id").get<std::string>(),
                                  tp.at("title").get<std::string>(),
                                  tp.at("description").get<std::string>()});
    }
    for (const auto& e : j.at("terms")) {
      l.terms.push_back({e.at("term").get<std::string>(),
                         e.at("definition").get<std::string>(),
                         e.value("aliases", std::vector<std::string>{})});
    }
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("lexicon: ") + e.what());
  }
}

std::size_t ExemplarBank::positives() const {
  return static_cast<std::size_t>(std::count_if(
      exemplars.begin(), exemplars.end(), [](const Exemplar& e) { return e.label; }));
}

std::size_t ExemplarBank::negatives() const { return exemplars.size() - positives(); }

nlohmann::ordered_json ExemplarBank::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["exemplars"] = nlohmann::ordered_json::array();
  for (const auto& e : exemplars) {
    j["exemplars"].push_back(
        {{"text", e.text}, {"label", e.label}, {"rationale", e.rationale}});
  }
  return j;
}

ExemplarBank ExemplarBank::from_json(const nlohmann::json& j) {
  try {
    ExemplarBank b;
    b.version = j.at("version").get<int>();
    for (const auto& e : j.at("exemplars")) {
      b.exemplars.push_back({e.at("text").get<std::string>(), e.at("label").get<bool>(),
                             e.value("rationale", std::string{})});
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("exemplars: ") + e.what());
  }
}

Lexicon load_lexicon(const std::string& path) {
  return Lexicon::from_json(parse_file(path));
}

ExemplarBank load_exemplars(const std::string& path) {
  return ExemplarBank::from_json(parse_file(path));
}

std::string dump_pretty(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::vector<TermMatch> tag_terms(std::string_view text, const Lexicon& lexicon) {
  struct Pattern {
    std::string_view text;
    const LexiconEntry* entry;
  };
  std::vector<Pattern> patterns;
  for (const auto& e : lexicon.terms) {
    patterns.push_back({e.term, &e});
    for (const auto& a : e.aliases) patterns.push_back({a, &e});
  }
  std::stable_sort(patterns.begin(), patterns.end(),
                   [](const Pattern& a, const Pattern& b) {
                     return a.text.size() > b.text.size();
                   });

  std::vector<TermMatch> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const bool boundary =
        pos == 0 || !word_char(static_cast<unsigned char>(text[pos - 1]));
    std::size_t best = 0;
    const LexiconEntry* hit = nullptr;
    if (boundary) {
      for (const auto& p : patterns) {
        const std::size_t len = match_at(text, pos, p.text);
        if (len == 0 || len <= best) continue;
        const std::size_t end = pos + len;
        if (end < text.size() && word_char(static_cast<unsigned char>(text[end]))) continue;
        best = len;
        hit = p.entry;
      }
    }
    if (hit) {
      out.push_back({pos, pos + best, hit->term, std::string(text.substr(pos, best))});
      pos += best;
    } else {
      ++pos;
    }
  }
  return out;
}

}  // namespace nfkit
