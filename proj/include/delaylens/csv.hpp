#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace delaylens {

// Parsed delimited-text table. Fields are located by header name, never by
// position: real releases reorder columns between versions.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    char delimiter = ',';

    // Index of a header column, -1 if absent.
    int column(std::string_view name) const;
    // Same, but throws DataError naming the missing column.
    int require_column(std::string_view name) const;
};

// RFC-4180-style parser: quoted fields, doubled quotes, CR/LF line ends,
// embedded newlines inside quotes.
CsvTable parse_csv(std::string_view text, char delimiter);

// Delimiter auto-detection from the header row (comma or pipe).
CsvTable parse_csv_auto(std::string_view text);

// Shortest round-trip decimal form of a double (deterministic output files).
std::string format_double(double v);

// Quote a field if it contains the delimiter, a quote, or a newline.
std::string csv_field(std::string_view raw, char delimiter = ',');

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields,
                   char delimiter = ',');

}  // namespace delaylens
