#include "nfkit/csv.hpp"

namespace nfkit {

CsvReader::CsvReader(std::istream& in, char delimiter)
    : in_(in), delim_(delimiter) {}

int CsvReader::get() {
  const int c = in_.get();
  if (c == '\n') ++line_;
  return c;
}

int CsvReader::peek() { return in_.peek(); }

bool CsvReader::next(CsvRow& row) {
  row.fields.clear();
  row.malformed = false;

  // Skip blank lines between records.
  while (true) {
    const int c = peek();
    if (c == EOF) return false;
    if (c == '\r' || c == '\n') {
      get();
      continue;
    }
    break;
  }
  row.line = line_;

  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  while (true) {
    const int c = get();
    if (c == EOF) {
      if (in_quotes) row.malformed = true;
      row.fields.push_back(std::move(field));
      return true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (peek() == '"') {
          get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
      continue;
    }
    if (c == delim_) {
      row.fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && peek() == '\n') get();
      row.fields.push_back(std::move(field));
      return true;
    } else if (c == '"') {
      if (field.empty() && !field_was_quoted) {
        in_quotes = true;
        field_was_quoted = true;
      } else {
        row.malformed = true;
        field.push_back('"');
      }
    } else {
      if (field_was_quoted) row.malformed = true;
      field.push_back(static_cast<char>(c));
    }
  }
}

CsvWriter::CsvWriter(std::ostream& out, char delimiter)
    : out_(out), delim_(delimiter) {}

void CsvWriter::write_row(std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out_.put(delim_);
    const auto& f = fields[i];
    const bool quote = f.find_first_of(std::string{delim_, '"', '\n', '\r'}) !=
                           std::string::npos ||
                       (!f.empty() && (f.front() == ' ' || f.back() == ' '));
    if (!quote) {
      out_ << f;
      continue;
    }
    out_.put('"');
    for (char c : f) {
      if (c == '"') out_.put('"');
      out_.put(c);
    }
    out_.put('"');
  }
  out_.put('\n');
}

void CsvWriter::write_row(std::initializer_list<std::string> fields) {
  write_row(std::span<const std::string>(fields.begin(), fields.size()));
}

}  // namespace nfkit
