#pragma once

// Result tables written as CSV or JSON.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "colltherm/errors.hpp"

namespace colltherm::cli {

// 17 significant digits, scientific, independent of the C locale.
inline std::string format_sci(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
    return std::string(buf, r.ptr);
}

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw InvariantViolation("table row has the wrong number of cells");
        rows.push_back(std::move(row));
    }
};

inline std::string cell_text(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return format_sci(v);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else return v;
        },
        c);
}

// '# title' line, a header row, then data rows; LF line endings.
inline std::string to_csv(const Table& t) {
    std::string out = "# " + t.title + "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell_text(row[i]);
        out += "\n";
    }
    return out;
}

inline nlohmann::ordered_json to_json(const Table& t) {
    nlohmann::ordered_json j;
    j["title"] = t.title;
    j["columns"] = t.columns;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        auto r = nlohmann::ordered_json::array();
        for (const auto& c : row) std::visit([&](const auto& v) { r.push_back(v); }, c);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("output.dir", "cannot write '" + path + "'");
    out << content;
    if (!out) throw ConfigError("output.dir", "failed writing '" + path + "'");
}

}  // namespace colltherm::cli
