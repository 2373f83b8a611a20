#include "nfkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nfkit/error.hpp"
#include "nfkit/rng.hpp"
#include "nfkit/text.hpp"

namespace nfkit {

nlohmann::ordered_json SamplePlan::to_json() const {
  nlohmann::ordered_json j;
  j["n_total"] = n_total;
  j["seed"] = seed;
  j["rounding"] = "largest_remainder";
  j["per_source_quota"] = nlohmann::ordered_json::object();
  for (const auto& [source, quota] : per_source_quota) {
    j["per_source_quota"][source] = quota;
  }
  return j;
}

SamplePlan SamplePlan::from_json(const nlohmann::json& j) {
  SamplePlan p;
  p.n_total = j.at("n_total").get<std::uint64_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("rounding").get<std::string>() != "largest_remainder") {
    throw DataError("unsupported rounding in sample plan");
  }
  for (const auto& [source, quota] : j.at("per_source_quota").items()) {
    p.per_source_quota[source] = quota.get<std::uint64_t>();
  }
  return p;
}

SamplePlan plan_sample(const std::map<std::string, std::uint64_t>& corpus_counts,
                       std::uint64_t n_total, std::uint64_t seed) {
  if (corpus_counts.empty()) throw DataError("plan_sample: no sources");
  unsigned __int128 total = 0;
  for (const auto& [source, count] : corpus_counts) {
    if (count == 0) throw DataError("plan_sample: source '" + source + "' is empty");
    total += count;
  }
  if (n_total > total) {
    throw DataError("plan_sample: n_total " + std::to_string(n_total) +
                    " exceeds corpus size");
  }

  struct Share {
    std::string source;
    std::uint64_t floor;
    unsigned __int128 remainder;  // numerator over `total`
  };
  std::vector<Share> shares;
  std::uint64_t assigned = 0;
  for (const auto& [source, count] : corpus_counts) {
    const unsigned __int128 scaled =
        static_cast<unsigned __int128>(n_total) * count;
    const auto fl = static_cast<std::uint64_t>(scaled / total);
    shares.push_back({source, fl, scaled % total});
    assigned += fl;
  }
  // Stable sort keeps name order among equal remainders.
  std::stable_sort(shares.begin(), shares.end(),
                   [](const Share& a, const Share& b) {
                     return a.remainder > b.remainder;
                   });
  for (std::size_t i = 0; assigned < n_total; ++i, ++assigned) {
    ++shares[i].floor;
  }

  SamplePlan plan;
  plan.n_total = n_total;
  plan.seed = seed;
  for (const auto& s : shares) plan.per_source_quota[s.source] = s.floor;
  return plan;
}

std::vector<std::string> draw_sample(
    const std::map<std::string, std::vector<std::string>>& ids_by_source,
    const SamplePlan& plan) {
  SeededRng rng(plan.seed);
  std::vector<std::string> out;
  out.reserve(plan.n_total);
  // Map iteration is name-ordered, so the draw sequence is deterministic.
  for (const auto& [source, quota] : plan.per_source_quota) {
    auto it = ids_by_source.find(source);
    const std::size_t available = it == ids_by_source.end() ? 0 : it->second.size();
    if (quota > available) {
      throw DataError("draw_sample: quota " + std::to_string(quota) +
                      " exceeds " + std::to_string(available) + " posts of '" +
                      source + "'");
    }
    if (quota == 0) continue;
    std::vector<std::string> pool = it->second;
    rng.select_prefix(std::span<std::string>(pool), quota);
    for (std::size_t i = 0; i < quota; ++i) out.push_back(std::move(pool[i]));
  }
  rng.shuffle(std::span<std::string>(out));
  return out;
}

std::vector<std::string> draw_sample(const MergedCorpus& corpus,
                                     const SamplePlan& plan) {
  std::map<std::string, std::vector<std::string>> by_source;
  for (const auto& p : corpus.posts) {
    by_source[std::string(to_string(p.source))].push_back(p.key());
  }
  return draw_sample(by_source, plan);
}

namespace {

void check_ratios(const SplitRatios& ratios) {
  double sum = 0;
  for (double r : ratios) {
    if (!(r >= 0)) throw DataError("split: ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("split: ratios must sum to 1");
}

void check_unique(std::span<const std::string> ids) {
  std::set<std::string_view> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError("split: duplicate id '" + id + "'");
  }
}

void append_partition(DatasetSplit& into, std::span<const std::string> ids,
                      const SplitRatios& ratios, std::uint64_t seed) {
  std::vector<std::string> shuffled(ids.begin(), ids.end());
  SeededRng rng(seed);
  rng.shuffle(std::span<std::string>(shuffled));
  const auto sizes = split_sizes(shuffled.size(), ratios);
  auto first = shuffled.begin();
  into.train_ids.insert(into.train_ids.end(), first, first + sizes[0]);
  first += sizes[0];
  into.validation_ids.insert(into.validation_ids.end(), first, first + sizes[1]);
  first += sizes[1];
  into.test_ids.insert(into.test_ids.end(), first, first + sizes[2]);
}

}  // namespace

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  check_ratios(ratios);
  std::array<std::size_t, 3> sizes{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    // Tolerance absorbs products like 10 * 0.1 landing just under 1.
    sizes[i] = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * ratios[i] + 1e-9));
    used += sizes[i];
  }
  for (std::size_t i = 2; used > n; i = (i + 2) % 3) {
    if (sizes[i] > 0) {
      --sizes[i];
      --used;
    }
  }
  for (std::size_t i = 0; used < n; i = (i + 1) % 3) {
    if (ratios[i] > 0) {
      ++sizes[i];
      ++used;
    }
  }
  return sizes;
}

DatasetSplit split(std::span<const std::string> ids, const SplitRatios& ratios,
                   std::uint64_t seed) {
  if (ids.empty()) throw DataError("split: empty id list");
  check_ratios(ratios);
  check_unique(ids);
  DatasetSplit s;
  s.ratios = ratios;
  s.seed = seed;
  append_partition(s, ids, ratios, seed);
  return s;
}

DatasetSplit split_stratified(std::span<const std::string> ids,
                              const std::map<std::string, bool>& labels,
                              const SplitRatios& ratios, std::uint64_t seed) {
  if (ids.empty()) throw DataError("split: empty id list");
  check_ratios(ratios);
  check_unique(ids);
  std::vector<std::string> positives, negatives;
  for (const auto& id : ids) {
    auto it = labels.find(id);
    if (it == labels.end()) throw DataError("split: no label for '" + id + "'");
    (it->second ? positives : negatives).push_back(id);
  }
  DatasetSplit s;
  s.ratios = ratios;
  s.seed = seed;
  s.stratified = true;
  append_partition(s, positives, ratios, seed);
  append_partition(s, negatives, ratios, seed + 1);
  return s;
}

nlohmann::ordered_json to_json(const GoldExample& e) {
  return {{"post_id", e.post_id}, {"text", e.text}, {"label", e.label}};
}

GoldExample gold_example_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 3 || !j.contains("post_id") || !j.contains("text") ||
      !j.contains("label")) {
    throw DataError("gold example must have exactly post_id, text and label");
  }
  if (!j["post_id"].is_string() || !j["text"].is_string() || !j["label"].is_boolean()) {
    throw DataError("gold example: wrong field type");
  }
  GoldExample e{j["post_id"].get<std::string>(), j["text"].get<std::string>(),
                j["label"].get<bool>()};
  if (e.post_id.empty() || e.text.empty()) throw DataError("gold example: empty field");
  return e;
}

void write_gold_examples(std::ostream& out, std::span<const GoldExample> examples) {
  for (const auto& e : examples) out << to_json(e).dump() << '\n';
}

std::vector<GoldExample> read_gold_examples(std::istream& in) {
  std::vector<GoldExample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(gold_example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("gold line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace nfkit
