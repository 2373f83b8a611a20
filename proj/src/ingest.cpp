#include "nfkit/ingest.hpp"

#include <fstream>
#include <unordered_set>

#include "nfkit/csv.hpp"
#include "nfkit/error.hpp"
#include "nfkit/text.hpp"

namespace nfkit {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::iron_march: return "iron_march";
    case Source::stormfront: return "stormfront";
  }
  return "unknown";
}

std::optional<Source> parse_source(std::string_view name) {
  if (name == "iron_march") return Source::iron_march;
  if (name == "stormfront") return Source::stormfront;
  return std::nullopt;
}

namespace {

bool is_latin1(std::string_view enc) {
  const auto e = text::ascii_lower(enc);
  return e == "latin-1" || e == "latin1" || e == "iso-8859-1";
}

bool is_utf8(std::string_view enc) {
  const auto e = text::ascii_lower(enc);
  return e == "utf-8" || e == "utf8";
}

char parse_delimiter(const std::string& value, const std::string& origin) {
  if (value == "\\t" || value == "tab") return '\t';
  if (value.size() != 1) {
    throw ConfigError(origin + ": delimiter must be a single character");
  }
  return value[0];
}

}  // namespace

void SourceSchema::validate() const {
  for (const char* required : {"id", "timestamp", "body"}) {
    auto it = column_map.find(required);
    if (it == column_map.end() || it->second.empty()) {
      throw ConfigError(std::string("schema: column_map must map '") +
                        required + "'");
    }
  }
  for (const auto& [field, column] : column_map) {
    if (field != "id" && field != "timestamp" && field != "body" &&
        field != "thread_ref") {
      throw ConfigError("schema: unknown canonical field '" + field + "'");
    }
  }
  if (!is_utf8(text_encoding) && !is_latin1(text_encoding)) {
    throw ConfigError("schema: unsupported encoding '" + text_encoding + "'");
  }
  if (timestamp_format.empty()) {
    throw ConfigError("schema: timestamp_format is empty");
  }
}

SourceSchema SourceSchema::from_config(const KeyValueConfig& cfg) {
  SourceSchema s;
  s.column_map = cfg.section("column");
  s.timestamp_format = cfg.get_or("timestamp_format", s.timestamp_format);
  s.delimiter = parse_delimiter(cfg.get_or("delimiter", ","), cfg.origin());
  s.text_encoding = cfg.get_or("encoding", s.text_encoding);
  s.validate();
  return s;
}

SourceSchema SourceSchema::load(const std::filesystem::path& path) {
  return from_config(KeyValueConfig::load(path));
}

SourceSchema SourceSchema::defaults_for(Source source) {
  SourceSchema s;
  switch (source) {
    case Source::iron_march:
      s.column_map = {{"id", "msg_id"},
                      {"timestamp", "msg_date"},
                      {"body", "msg_post"},
                      {"thread_ref", "msg_topic_id"}};
      s.timestamp_format = "%Y-%m-%d %H:%M:%S";
      break;
    case Source::stormfront:
      s.column_map = {{"id", "id"},
                      {"timestamp", "date"},
                      {"body", "text"},
                      {"thread_ref", "thread"}};
      s.timestamp_format = "%Y-%m-%d";
      break;
  }
  return s;
}

IngestStats& IngestStats::operator+=(const IngestStats& o) {
  total_rows += o.total_rows;
  accepted += o.accepted;
  rejected_malformed += o.rejected_malformed;
  rejected_empty += o.rejected_empty;
  rejected_timestamp += o.rejected_timestamp;
  rejected_duplicate += o.rejected_duplicate;
  encoding_repaired_rows += o.encoding_repaired_rows;
  replacement_chars += o.replacement_chars;
  tag_like_rows += o.tag_like_rows;
  return *this;
}

nlohmann::ordered_json IngestStats::to_json() const {
  return {{"total_rows", total_rows},
          {"accepted", accepted},
          {"rejected_malformed", rejected_malformed},
          {"rejected_empty", rejected_empty},
          {"rejected_timestamp", rejected_timestamp},
          {"rejected_duplicate", rejected_duplicate},
          {"encoding_repaired_rows", encoding_repaired_rows},
          {"replacement_chars", replacement_chars},
          {"tag_like_rows", tag_like_rows}};
}

IngestStats ingest(std::istream& in, const SourceSchema& schema, Source source,
                   const RawPostSink& sink) {
  schema.validate();
  IngestStats stats;
  CsvReader reader(in, schema.delimiter);
  CsvRow row;
  if (!reader.next(row)) return stats;  // no header, no rows

  // Header: strip a UTF-8 BOM from the first column name.
  if (!row.fields.empty() && row.fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    row.fields[0].erase(0, 3);
  }
  std::map<std::string, std::size_t> index;
  for (const auto& [field, column] : schema.column_map) {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < row.fields.size(); ++i) {
      if (text::trim(row.fields[i]) == column) found = i;
    }
    if (!found) {
      throw ConfigError("dump header has no column '" + column + "' for " +
                        field + " (check the schema delimiter)");
    }
    index[field] = *found;
  }
  const std::size_t width = row.fields.size();
  const bool latin1 = is_latin1(schema.text_encoding);
  std::unordered_set<std::string> seen_ids;

  while (reader.next(row)) {
    ++stats.total_rows;
    if (row.malformed || row.fields.size() != width) {
      ++stats.rejected_malformed;
      continue;
    }
    bool repaired = false;
    auto decode = [&](std::size_t col) {
      if (latin1) return text::latin1_to_utf8(row.fields[col]);
      auto r = text::repair_utf8(row.fields[col]);
      if (r.replacements > 0) {
        repaired = true;
        stats.replacement_chars += r.replacements;
      }
      return std::move(r.text);
    };

    RawPost post;
    post.source = source;
    post.id = std::string(text::trim(decode(index.at("id"))));
    if (post.id.empty()) {
      ++stats.rejected_malformed;
      continue;
    }
    const auto ts = parse_timestamp(row.fields[index.at("timestamp")],
                                    schema.timestamp_format);
    if (!ts) {
      ++stats.rejected_timestamp;
      continue;
    }
    post.timestamp = *ts;
    post.body = decode(index.at("body"));
    if (text::trim(post.body).empty()) {
      ++stats.rejected_empty;
      continue;
    }
    if (auto it = index.find("thread_ref"); it != index.end()) {
      auto ref = std::string(text::trim(decode(it->second)));
      if (!ref.empty()) post.thread_ref = std::move(ref);
    }
    if (!seen_ids.insert(post.id).second) {
      ++stats.rejected_duplicate;
      continue;
    }
    if (repaired) ++stats.encoding_repaired_rows;
    if (text::contains_tag_like(post.body)) ++stats.tag_like_rows;
    ++stats.accepted;
    sink(std::move(post));
  }
  return stats;
}

IngestResult ingest_file(const std::filesystem::path& dump,
                         const SourceSchema& schema, Source source) {
  std::ifstream in(dump, std::ios::binary);
  if (!in) throw IoError("cannot read dump " + dump.string());
  IngestResult result;
  result.stats = ingest(in, schema, source, [&](RawPost&& p) {
    result.posts.push_back(std::move(p));
  });
  if (in.bad()) throw IoError("read error in " + dump.string());
  return result;
}

nlohmann::ordered_json to_json(const RawPost& post) {
  nlohmann::ordered_json j;
  j["id"] = post.id;
  j["source"] = to_string(post.source);
  j["timestamp"] = format_rfc3339(post.timestamp);
  j["body"] = post.body;
  j["thread_ref"] = post.thread_ref ? nlohmann::ordered_json(*post.thread_ref)
                                    : nlohmann::ordered_json(nullptr);
  return j;
}

RawPost raw_post_from_json(const nlohmann::json& j) {
  RawPost p;
  p.id = j.at("id").get<std::string>();
  auto src = parse_source(j.at("source").get<std::string>());
  if (!src) throw DataError("unknown source in post " + p.id);
  p.source = *src;
  auto ts = parse_timestamp(j.at("timestamp").get<std::string>(), "rfc3339");
  if (!ts) throw DataError("bad timestamp in post " + p.id);
  p.timestamp = *ts;
  p.body = j.at("body").get<std::string>();
  if (j.contains("thread_ref") && !j.at("thread_ref").is_null()) {
    p.thread_ref = j.at("thread_ref").get<std::string>();
  }
  return p;
}

void write_raw_posts(std::ostream& out, const std::vector<RawPost>& posts) {
  for (const auto& p : posts) out << to_json(p).dump() << '\n';
}

std::vector<RawPost> read_raw_posts(std::istream& in) {
  std::vector<RawPost> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      posts.push_back(raw_post_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("posts line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return posts;
}

}  // namespace nfkit
