#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace autograde::csv {

using Row = std::vector<std::string>;

class CsvError : public std::runtime_error {
 public:
  explicit CsvError(const std::string& what) : std::runtime_error(what) {}
};

/// RFC-4180 reader: quoted fields may hold commas, CRLF and doubled quotes.
/// A trailing line break does not produce an empty row.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it needs it.
std::string escape(std::string_view field);

std::string write_row(const Row& row);

}  // namespace autograde::csv
