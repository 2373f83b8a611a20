#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace nfkit {

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
  bool malformed = false;  // unterminated quote or stray quote mid-field
};

// RFC 4180 reader: quoted fields may contain the delimiter, doubled quotes
// and line breaks. CRLF and LF record terminators are both accepted.
class CsvReader {
 public:
  CsvReader(std::istream& in, char delimiter);

  // False at end of input. Blank lines are skipped.
  bool next(CsvRow& row);

 private:
  int get();
  int peek();

  std::istream& in_;
  char delim_;
  std::size_t line_ = 1;
};

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, char delimiter = ',');
  void write_row(std::span<const std::string> fields);
  void write_row(std::initializer_list<std::string> fields);

 private:
  std::ostream& out_;
  char delim_;
};

}  // namespace nfkit
