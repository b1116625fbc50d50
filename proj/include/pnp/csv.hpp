#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pnp {

/// Shortest decimal form that parses back to the same double; "inf", "-inf", "nan" otherwise.
std::string format_number(double v);
double parse_number(std::string_view s);

using CsvRow = std::vector<std::string>;
/// Splits plain comma-separated text (no quoting) into rows of fields.
std::vector<CsvRow> parse_csv(std::string_view text);

}  // namespace pnp
