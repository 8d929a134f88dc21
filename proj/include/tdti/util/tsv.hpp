#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tdti {

/// Header-addressed tab-separated table.
struct TsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> find(std::string_view column) const;
    /// Throws MissingColumn when absent.
    std::size_t column(std::string_view column, std::string_view context) const;
};

TsvTable read_tsv(const std::string& path);
std::vector<std::string> split_tabs(std::string_view line);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double v);
double parse_real(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

}  // namespace tdti
