#include "texteffect/csv.hpp"

#include <fstream>
#include <sstream>

#include "texteffect/error.hpp"

namespace tfx {

std::size_t CsvTable::col(const std::string& name, const std::string& context) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    fail(errc::missing_column, context + ": required column '" + name + "' not found");
}

CsvTable parse_csv(const std::string& text, const std::string& context) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool record_started = false;

    auto push_field = [&]() {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto push_record = [&]() {
        push_field();
        if (table.header.empty() && table.rows.empty())
            table.header = record;
        else
            table.rows.push_back(record);
        record.clear();
        record_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
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
        switch (c) {
            case '"':
                if (field_started && !field.empty())
                    fail(errc::io_error, context + ": stray quote inside unquoted field");
                in_quotes = true;
                field_started = true;
                record_started = true;
                break;
            case ',':
                push_field();
                record_started = true;
                break;
            case '\r':
                break;  // swallow; LF terminates the record
            case '\n':
                push_record();
                break;
            default:
                field += c;
                field_started = true;
                record_started = true;
                break;
        }
    }
    if (in_quotes) fail(errc::io_error, context + ": unterminated quoted field");
    if (record_started || field_started || !field.empty()) push_record();

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.header.size())
            fail(errc::io_error, context + ": row " + std::to_string(r + 2) + " has " +
                                     std::to_string(table.rows[r].size()) + " fields, expected " +
                                     std::to_string(table.header.size()));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.filename().string());
}

std::string csv_field(const std::string& value) {
    const bool needs_quotes = value.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_field(fields[i]);
    }
    out += '\n';
    return out;
}

}  // namespace tfx
