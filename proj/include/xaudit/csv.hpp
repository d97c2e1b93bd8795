#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace xaudit::csv {

/// Reads one RFC-4180 record (quoted fields may contain commas, doubled
/// quotes and line breaks). Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields);

/// Quotes a field only when it needs quoting.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Strict parse (surrounding blanks and one trailing '%' allowed; "13.5%"
/// reads as 13.5); false on junk or non-finite.
bool parse_double(std::string_view text, double& value);

}  // namespace xaudit::csv
