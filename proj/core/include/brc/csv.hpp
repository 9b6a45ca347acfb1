#pragma once

#include <istream>
#include <string>
#include <vector>

namespace brc::csv {

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_line(const std::string& line);

/// Quotes a field if it contains a comma, quote or leading/trailing space.
std::string escape(const std::string& field);

std::string join(const std::vector<std::string>& fields);

/// Reads the next non-empty line, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line, std::size_t& line_no);

}  // namespace brc::csv
