#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sparsedet::cli {

// ============================================================================
// CSV output with provenance comments and atomic writes. Numbers are printed
// with the shortest representation that round-trips to the same double.
// ============================================================================

std::string format_number(double value);
std::string format_integer(std::int64_t value);
std::string format_unsigned(std::uint64_t value);

class CsvFile {
public:
    explicit CsvFile(std::vector<std::string> header);

    // Leading provenance lines, each emitted as "# <text>".
    void add_comment(std::string text);
    void add_row(std::vector<std::string> cells);

    std::string text() const;

    // Writes to <path>.tmp then renames, so readers never see a torn file.
    // Creates parent directories as needed.
    void write(const std::string& path) const;

private:
    std::vector<std::string> comments_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace sparsedet::cli
