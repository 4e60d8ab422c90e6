#include "delaylens/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>

#include "delaylens/errors.hpp"

namespace delaylens {

int CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int CsvTable::require_column(std::string_view name) const {
    int idx = column(name);
    if (idx < 0) throw DataError("missing required column '" + std::string(name) + "'");
    return idx;
}

CsvTable parse_csv(std::string_view text, char delimiter) {
    CsvTable table;
    table.delimiter = delimiter;

    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool saw_any = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        if (table.header.empty())
            table.header = std::move(record);
        else
            table.rows.push_back(std::move(record));
        record.clear();
        saw_any = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
            saw_any = true;
        } else if (c == delimiter) {
            end_field();
            saw_any = true;
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            if (saw_any || !field.empty() || !record.empty()) end_record();
        } else {
            field += c;
            saw_any = true;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field at end of input");
    if (!field.empty() && field.back() == '\r' && text.size() && text.back() != '\n')
        field.pop_back();
    if (saw_any || !field.empty() || !record.empty()) end_record();
    return table;
}

CsvTable parse_csv_auto(std::string_view text) {
    std::string_view first_line = text.substr(0, text.find('\n'));
    auto count = [&](char d) { return std::count(first_line.begin(), first_line.end(), d); };
    char delimiter = count('|') > count(',') ? '|' : ',';
    return parse_csv(text, delimiter);
}

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_field(std::string_view raw, char delimiter) {
    bool needs_quotes = raw.find_first_of("\"\r\n") != std::string_view::npos ||
                        raw.find(delimiter) != std::string_view::npos;
    if (!needs_quotes) return std::string(raw);
    std::string out = "\"";
    for (char c : raw) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields, char delimiter) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << delimiter;
        os << csv_field(fields[i], delimiter);
    }
    os << '\n';
}

}  // namespace delaylens
