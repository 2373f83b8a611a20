#include <doctest.h>

#include <random>
#include <set>

#include "nfkit/error.hpp"
#include "nfkit/lexicon.hpp"
#include "temp_dir.hpp"

using namespace nfkit;
using nfkit::testing::read_text;

namespace {

const std::string kData = NFKIT_TEST_DATA_DIR;

const Lexicon& lexicon() {
  static const Lexicon lex = load_lexicon(kData + "/lexicon.json");
  return lex;
}

}  // namespace

TEST_CASE("coding scheme has nine talking points") {
  const auto& lex = lexicon();
  REQUIRE(lex.talking_points.size() == 9);
  std::set<std::string> ids;
  for (const auto& tp : lex.talking_points) {
    CHECK(ids.insert(tp.id).second);
    CHECK_FALSE(tp.title.empty());
    CHECK_FALSE(tp.description.empty());
  }
  REQUIRE(lex.talking_point("mythic_past"));
  CHECK(lex.talking_point("mythic_past")->title.find("Mythicize the past") != std::string::npos);
  CHECK(lex.talking_point("nope") == nullptr);
  CHECK_FALSE(lex.definition.empty());
  CHECK_FALSE(lex.instructions.empty());
}

TEST_CASE("glossary terms and aliases") {
  const auto& lex = lexicon();
  CHECK(lex.terms.size() == 11);
  for (const char* t : {"kike", "goyim", "QAnon", "New World Order", "remigration",
                        "ethnopluralism", "Great Replacement", "Great Reset", "ZOG",
                        "Holohoax", "Protocols of the Elders of Zion"}) {
    CAPTURE(t);
    REQUIRE(lex.lookup(t));
    CHECK(lex.lookup(t)->term == t);
  }
  REQUIRE(lex.lookup("zog"));
  CHECK(lex.lookup("zog")->term == "ZOG");
  REQUIRE(lex.lookup("zionist occupied government"));
  CHECK(lex.lookup("zionist occupied government")->term == "ZOG");
  REQUIRE(lex.lookup("NWO"));
  CHECK(lex.lookup("NWO")->term == "New World Order");
  CHECK(lex.lookup("GTKRWN")->term == "kike");
  CHECK(lex.lookup("asdf") == nullptr);
  CHECK(lex.lookup("") == nullptr);
}

TEST_CASE("tag_terms examples") {
  const auto& lex = lexicon();
  {
    const std::string text = "the holohoax again";
    const auto m = tag_terms(text, lex);
    REQUIRE(m.size() == 1);
    CHECK(m[0].term == "Holohoax");
    CHECK(m[0].begin == 4);
    CHECK(m[0].end == 12);
    CHECK(text.substr(m[0].begin, m[0].end - m[0].begin) == "holohoax");
  }
  CHECK(tag_terms("blogging about dogs", lex).empty());
  CHECK(tag_terms("zogzog and kikes", lex).empty());
  {
    const auto m = tag_terms("Great Replacement and Great Reset", lex);
    REQUIRE(m.size() == 2);
    CHECK(m[0].term == "Great Replacement");
    CHECK(m[1].term == "Great Reset");
    CHECK(m[1].begin == 22);
  }
  {
    const auto m = tag_terms("the  new\tworld\norder, NWO.", lex);
    REQUIRE(m.size() == 2);
    CHECK(m[0].term == "New World Order");
    CHECK(m[1].term == "New World Order");
  }
  {
    // Longest pattern wins: the alias contains no shorter term, but GTK is a
    // prefix of GTKRWN.
    const auto m = tag_terms("GTKRWN", lex);
    REQUIRE(m.size() == 1);
    CHECK(m[0].end == 6);
  }
}

TEST_CASE("property: tag spans are ordered, disjoint and whole words") {
  static const std::vector<std::string> words{
      "zog", "ZOG", "Great", "Reset", "Replacement", "new", "world", "order", "nwo",
      "holohoax", "the", "a", "dogs", "goyim", "QAnon", "é", "x_y", "remigration,",
      "(ethnopluralism)", "kike", "gtk"};
  static const std::vector<std::string> seps{" ", "  ", "\n", ", ", "-", "_", ""};
  const auto& lex = lexicon();
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 3000; ++iter) {
    std::string text;
    const auto n = rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      text += words[rng() % words.size()];
      text += seps[rng() % seps.size()];
    }
    CAPTURE(text);
    const auto m = tag_terms(text, lex);
    std::size_t last_end = 0;
    for (const auto& t : m) {
      CHECK(t.begin < t.end);
      CHECK(t.end <= text.size());
      CHECK(t.begin >= last_end);
      last_end = t.end;
      CHECK(lex.lookup(t.term) != nullptr);
      auto word = [](unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; };
      if (t.begin > 0) CHECK_FALSE(word(static_cast<unsigned char>(text[t.begin - 1])));
      if (t.end < text.size()) CHECK_FALSE(word(static_cast<unsigned char>(text[t.end])));
    }
  }
}

TEST_CASE("exemplar bank") {
  const auto bank = load_exemplars(kData + "/exemplars.json");
  REQUIRE(bank.exemplars.size() == 10);
  CHECK(bank.positives() == 7);
  CHECK(bank.negatives() == 3);
  for (std::size_t i = 0; i < 7; ++i) CHECK(bank.exemplars[i].label);
  for (std::size_t i = 7; i < 10; ++i) CHECK_FALSE(bank.exemplars[i].label);
  for (const auto& e : bank.exemplars) {
    CHECK_FALSE(e.text.empty());
    CHECK(e.rationale.rfind(e.label ? "Yes, this has" : "No, this does not", 0) == 0);
  }
}

TEST_CASE("data files round trip byte for byte") {
  const auto lex_text = read_text(kData + "/lexicon.json");
  CHECK(dump_pretty(lexicon().to_json()) == lex_text);
  const auto ex_text = read_text(kData + "/exemplars.json");
  CHECK(dump_pretty(load_exemplars(kData + "/exemplars.json").to_json()) == ex_text);
}

TEST_CASE("loader errors") {
  nfkit::testing::TempDir dir;
  CHECK_THROWS_AS(load_lexicon((dir.path() / "missing.json").string()), IoError);
  nfkit::testing::write_text(dir.path() / "bad.json", "{\"version\": 1}");
  CHECK_THROWS_AS(load_lexicon((dir.path() / "bad.json").string()), DataError);
  nfkit::testing::write_text(dir.path() / "junk.json", "not json");
  CHECK_THROWS_AS(load_exemplars((dir.path() / "junk.json").string()), DataError);
}
