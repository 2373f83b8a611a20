#include <doctest.h>

#include <random>
#include <set>

#include <json.hpp>

#include "nfkit/error.hpp"
#include "nfkit/lexicon.hpp"
#include "nfkit/prompt.hpp"
#include "temp_dir.hpp"

using namespace nfkit;
using nfkit::testing::read_text;

namespace {

const std::string kData = NFKIT_TEST_DATA_DIR;
const std::string kGolden = std::string(NFKIT_TEST_DIR) + "/golden/v1/";

const PromptTemplates& templates() {
  static const PromptTemplates t = PromptTemplates::load_version(kData, "v1");
  return t;
}

const std::vector<Exemplar>& exemplars() {
  static const std::vector<Exemplar> e = load_exemplars(kData + "/exemplars.json").exemplars;
  return e;
}

std::string dumped(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::string random_post(std::mt19937_64& rng) {
  static const std::string alphabet = "ab \"\\{}\n\t'é—.:";
  std::string s;
  const auto n = 1 + rng() % 30;
  for (std::size_t i = 0; i < n; ++i) {
    // é and — are multi-byte; pick whole code points.
    const auto k = rng() % 14;
    if (k == 12) {
      s += "é";
    } else if (k == 13) {
      s += "—";
    } else {
      s += alphabet[k];
    }
  }
  return s;
}

}  // namespace

TEST_CASE("zero-shot golden") {
  const auto r = build_zero_shot(templates(), "hello");
  CHECK(dumped(r.messages()) == read_text(kGolden + "zero_shot_hello.json"));
  CHECK(r.flatten() == read_text(kGolden + "zero_shot_hello.flat.txt"));
  CHECK(r.turns.empty());
}

TEST_CASE("few-shot golden with all ten exemplars") {
  const auto r = build_few_shot(templates(), "hello", exemplars());
  REQUIRE(r.turns.size() == 20);
  CHECK(dumped(r.messages()) == read_text(kGolden + "few_shot_hello.json"));
  for (std::size_t i = 0; i < r.turns.size(); i += 2) {
    CHECK(r.turns[i].role == Role::user);
    CHECK(r.turns[i + 1].role == Role::assistant);
  }
  bool found = false;
  for (std::size_t i = 0; i < r.turns.size(); i += 2) {
    if (r.turns[i].content.find("Indiana cold case") != std::string::npos) {
      found = true;
      CHECK(r.turns[i + 1].content == "false");
    }
  }
  CHECK(found);
  CHECK(r.turns[1].content == "true");
}

TEST_CASE("completion goldens") {
  const auto& t = templates();
  const auto open = build_completion(t, "hello", std::nullopt).render();
  CHECK(open == read_text(kGolden + "completion_hello.txt"));
  CHECK(open.ends_with("Output:\n"));
  const auto neg = build_completion(t, "hello", false).render();
  CHECK(neg == read_text(kGolden + "completion_hello_false.txt"));
  CHECK(neg.ends_with("Output: false"));
  CHECK(build_completion(t, "hello", true).render() ==
        read_text(kGolden + "completion_hello_true.txt"));
}

TEST_CASE("quotes and backslashes are escaped") {
  const auto r = build_zero_shot(templates(), "He said \"hi\" \\ bye");
  CHECK(dumped(r.messages()) == read_text(kGolden + "zero_shot_escaped.json"));
  CHECK(escape_post("a\"b\\c") == "a\\\"b\\\\c");
  CHECK(escape_post("plain") == "plain");
}

TEST_CASE("zero-shot and few-shot share the system instruction") {
  const auto z = build_zero_shot(templates(), "x");
  const auto f = build_few_shot(templates(), "x", exemplars());
  CHECK(z.system == f.system);
  CHECK(z.messages()[0] == f.messages()[0]);
  const std::string common = "Do you think this contains neo-fascist talking points?";
  CHECK(z.final_user.starts_with(common));
  CHECK(f.final_user.starts_with(common));
  for (std::size_t i = 0; i < f.turns.size(); i += 2) CHECK(f.turns[i].content.starts_with(common));
}

TEST_CASE("property: only the post slot differs between renders") {
  const auto& t = templates();
  const auto slot = t.zero_shot_user.find("{{post}}");
  REQUIRE(slot != std::string::npos);
  const auto head = t.zero_shot_user.substr(0, slot);
  const auto tail = t.zero_shot_user.substr(slot + 8);
  const auto cslot = t.completion_input.find("{{post}}");
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 500; ++iter) {
    const auto a = random_post(rng);
    const auto b = random_post(rng);
    const auto ra = build_zero_shot(t, a);
    const auto rb = build_zero_shot(t, b);
    CHECK(ra.system == rb.system);
    CHECK(ra.final_user == head + escape_post(a) + tail);
    CHECK(rb.final_user == head + escape_post(b) + tail);

    const auto fa = build_few_shot(t, a, exemplars());
    const auto fb = build_few_shot(t, b, exemplars());
    CHECK(fa.turns == fb.turns);

    const auto ca = build_completion(t, a, std::nullopt);
    CHECK(ca.input == t.completion_input.substr(0, cslot) + escape_post(a) +
                          t.completion_input.substr(cslot + 8));
    CHECK(ca.preamble == t.completion_preamble);
    CHECK(ca.instruction == t.completion_instruction);
  }
}

TEST_CASE("render_template") {
  CHECK(render_template("a {{x}} b {{x}}", {{"x", "1"}}) == "a 1 b 1");
  CHECK(render_template("{{x}}", {{"x", "{{x}}"}}) == "{{x}}");
  CHECK(render_template("no slots", {}) == "no slots");
  CHECK_THROWS_AS(render_template("{{y}}", {{"x", "1"}}), ConfigError);
  CHECK(template_slots("{{a}} and {{b}}") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("prompt builders reject empty input") {
  const auto& t = templates();
  CHECK_THROWS_AS(build_zero_shot(t, ""), DataError);
  CHECK_THROWS_AS(build_few_shot(t, "", exemplars()), DataError);
  CHECK_THROWS_AS(build_few_shot(t, "x", {}), DataError);
  std::vector<Exemplar> bad{{"", true, "r"}};
  CHECK_THROWS_AS(build_few_shot(t, "x", bad), DataError);
  CHECK_THROWS_AS(build_completion(t, "", true), DataError);
}

TEST_CASE("template validation and loading") {
  auto t = templates();
  CHECK(t.version == "v1");
  t.validate();
  auto two = t;
  two.zero_shot_user += " {{post}}";
  CHECK_THROWS_AS(two.validate(), ConfigError);
  auto none = t;
  none.few_shot_final_user = "no slot";
  CHECK_THROWS_AS(none.validate(), ConfigError);
  auto slotted = t;
  slotted.system += " {{post}}";
  CHECK_THROWS_AS(slotted.validate(), ConfigError);
  CHECK_THROWS(PromptTemplates::load_version(kData, "v999"));
}

TEST_CASE("shuffled exemplars are a seeded permutation") {
  const auto a = shuffled_exemplars(exemplars(), 5);
  const auto b = shuffled_exemplars(exemplars(), 5);
  REQUIRE(a.size() == exemplars().size());
  std::multiset<std::string> orig, perm;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    orig.insert(exemplars()[i].text);
    perm.insert(a[i].text);
  }
  CHECK(orig == perm);
}
