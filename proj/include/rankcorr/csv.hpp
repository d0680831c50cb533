#pragma once

// Minimal CSV ingestion: comma separated, header row required, '.' decimal
// separator, no quoting. Cells are kept as text until validate_dataset parses
// them, so errors can name the row and column.

#include "rankcorr/core_model.hpp"

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rankcorr {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        return std::nullopt;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        const std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        out.emplace_back(trim(cell));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (!have_header) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (cells[k].empty()) throw InputError("header column " + std::to_string(k + 1) + " is empty");
                for (std::size_t j = 0; j < k; ++j)
                    if (cells[j] == cells[k]) throw InputError("header repeats column '" + cells[k] + "'");
            }
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size())
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                             " fields, got " + std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw InputError("CSV input is empty (a header row is required)");
    return table;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_csv(in);
}

inline CsvTable read_csv_string(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

/// Column roles for building a dataset. The anchor is appended after the
/// free covariates.
struct ColumnSelection {
    std::string response;
    std::vector<std::string> covariates;
    std::string anchor;
    std::optional<std::string> censor;
};

inline std::vector<RawRow> select_columns(const CsvTable& table, const ColumnSelection& sel) {
    auto require = [&](const std::string& name, const char* role) {
        if (name.empty()) throw InputError(std::string("no ") + role + " column given");
        const auto k = table.column(name);
        if (!k) throw InputError(std::string(role) + " column '" + name + "' not found in header");
        return *k;
    };
    const std::size_t response = require(sel.response, "response");
    if (sel.covariates.empty()) throw InputError("at least one covariate column is required besides the anchor");
    std::vector<std::size_t> cols;
    for (const auto& name : sel.covariates) cols.push_back(require(name, "covariate"));
    cols.push_back(require(sel.anchor, "anchor"));
    const std::optional<std::size_t> censor =
        sel.censor ? std::optional<std::size_t>(require(*sel.censor, "censor")) : std::nullopt;

    std::vector<RawRow> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& cells = table.rows[i];
        RawRow row;
        row.label = "line " + std::to_string(table.line_numbers[i]);
        row.response = cells[response];
        for (const std::size_t k : cols) row.covariates.push_back(cells[k]);
        if (censor) row.event = cells[*censor];
        out.push_back(std::move(row));
    }
    return out;
}

/// Parses the selected columns into a dataset; cell errors name line and column.
inline Dataset load_dataset(const CsvTable& table, const ColumnSelection& sel) {
    const auto rows = select_columns(table, sel);
    try {
        return validate_dataset(rows);
    } catch (const InputError& e) {
        // Translate "covariate k" into the column name.
        std::string msg = e.what();
        for (std::size_t k = 0; k <= sel.covariates.size(); ++k) {
            const std::string key = "covariate " + std::to_string(k + 1) + " ";
            const std::size_t at = msg.find(key);
            if (at == std::string::npos) continue;
            const std::string& name = k < sel.covariates.size() ? sel.covariates[k] : sel.anchor;
            msg.replace(at, key.size(), "column '" + name + "' ");
            break;
        }
        if (const std::size_t at = msg.find("response "); at != std::string::npos)
            msg.replace(at, 9, "column '" + sel.response + "' ");
        if (sel.censor)
            if (const std::size_t at = msg.find("censoring indicator "); at != std::string::npos)
                msg.replace(at, 20, "column '" + *sel.censor + "' ");
        throw InputError(msg);
    }
}

}  // namespace rankcorr
