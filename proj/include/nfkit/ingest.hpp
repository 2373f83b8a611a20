#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nfkit/config.hpp"
#include "nfkit/time.hpp"

namespace nfkit {

enum class Source { iron_march, stormfront };

std::string_view to_string(Source s);
std::optional<Source> parse_source(std::string_view name);

struct RawPost {
  std::string id;
  Source source = Source::iron_march;
  Timestamp timestamp{};
  std::string body;
  std::optional<std::string> thread_ref;

  bool operator==(const RawPost&) const = default;
};

// Column layout of one dump file. Loaded from a key-value config:
//
//   delimiter = ,
//   encoding = utf-8            # or latin-1
//   timestamp_format = %Y-%m-%d %H:%M:%S
//   column.id = msg_id
//   column.timestamp = msg_date
//   column.body = msg_post
//   column.thread_ref = msg_topic_id
struct SourceSchema {
  std::map<std::string, std::string> column_map;
  std::string timestamp_format = "rfc3339";
  char delimiter = ',';
  std::string text_encoding = "utf-8";

  // Throws ConfigError unless id, timestamp and body are mapped and the
  // encoding is supported.
  void validate() const;

  static SourceSchema from_config(const KeyValueConfig& cfg);
  static SourceSchema load(const std::filesystem::path& path);
  // Built-in guess for each public dump; see configs/ for the editable copy.
  static SourceSchema defaults_for(Source source);
};

struct IngestStats {
  std::size_t total_rows = 0;
  std::size_t accepted = 0;
  std::size_t rejected_malformed = 0;  // bad quoting, wrong arity, empty id
  std::size_t rejected_empty = 0;      // body blank after trimming
  std::size_t rejected_timestamp = 0;  // null or unparseable timestamp
  std::size_t rejected_duplicate = 0;  // id already seen in this file
  std::size_t encoding_repaired_rows = 0;
  std::size_t replacement_chars = 0;
  std::size_t tag_like_rows = 0;  // diagnostic only, rows are kept

  std::size_t rejected() const {
    return rejected_malformed + rejected_empty + rejected_timestamp +
           rejected_duplicate;
  }
  IngestStats& operator+=(const IngestStats& other);
  nlohmann::ordered_json to_json() const;
};

using RawPostSink = std::function<void(RawPost&&)>;

// Streams every well-formed data row of a delimited dump into `sink`, in file
// order. Throws ConfigError if the header lacks a mapped column.
IngestStats ingest(std::istream& in, const SourceSchema& schema, Source source,
                   const RawPostSink& sink);

struct IngestResult {
  std::vector<RawPost> posts;
  IngestStats stats;
};

// Throws IoError when the file cannot be opened.
IngestResult ingest_file(const std::filesystem::path& dump,
                         const SourceSchema& schema, Source source);

// JSON Lines interchange: {id, source, timestamp, body, thread_ref}.
nlohmann::ordered_json to_json(const RawPost& post);
RawPost raw_post_from_json(const nlohmann::json& j);
void write_raw_posts(std::ostream& out, const std::vector<RawPost>& posts);
std::vector<RawPost> read_raw_posts(std::istream& in);

}  // namespace nfkit
