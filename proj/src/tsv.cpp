#include "tdti/util/tsv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "tdti/error.hpp"

namespace tdti {

std::optional<std::size_t> TsvTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t TsvTable::column(std::string_view name, std::string_view context) const {
    auto idx = find(name);
    if (!idx) fail(ErrorKind::MissingColumn, std::string(context) + ": missing column '" + std::string(name) + "'");
    return *idx;
}

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

TsvTable read_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    TsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            fail(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(table.header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) fail(ErrorKind::Format, path + ": empty table (no header)");
    return table;
}

std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_real(std::string_view text, std::string_view context) {
    double v = 0;
    const char* end = text.data() + text.size();
    auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        fail(ErrorKind::Format, std::string(context) + ": not a finite real: '" + std::string(text) + "'");
    }
    return v;
}

long long parse_int(std::string_view text, std::string_view context) {
    long long v = 0;
    const char* end = text.data() + text.size();
    auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        fail(ErrorKind::Format, std::string(context) + ": not an integer: '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace tdti
