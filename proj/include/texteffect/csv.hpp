#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tfx {

// Minimal RFC-4180 CSV support: quoted fields, embedded commas/quotes/newlines,
// CRLF tolerant. Header row required by read_csv callers in this project.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; fails with missing_column naming the file context.
    std::size_t col(const std::string& name, const std::string& context) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& context);

std::string csv_field(const std::string& value);
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace tfx
