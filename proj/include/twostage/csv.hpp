#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twostage/dataset.hpp"

namespace twostage {

// Shortest decimal form that parses back to the identical double.
inline std::string format_csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(fields[i]);
        }
        out << '\n';
    };
    line(header);
    for (const auto& row : rows) line(row);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    const auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_field();
            rows.push_back(std::move(row));
            row.clear();
        } else if (c != '\r') {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw std::runtime_error("unterminated quote in " + path);
    if (field_started || !row.empty()) {
        end_field();
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double parse_csv_double(const std::string& field, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
        throw std::runtime_error("not a number in " + what + ": '" + field + "'");
    return v;
}

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
    std::vector<std::string> header{"y"};
    for (Index j = 1; j <= d.p(); ++j) header.push_back("x" + std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(d.n()));
    for (Index i = 0; i < d.n(); ++i) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(d.p()) + 1);
        row.push_back(format_csv_double(d.y(i)));
        for (Index j = 0; j < d.p(); ++j) row.push_back(format_csv_double(d.x(i, j)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

inline Dataset read_dataset_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.size() < 2) throw std::runtime_error("dataset has no data rows: " + path);
    const auto& header = rows.front();
    if (header.empty() || header.front() != "y")
        throw std::runtime_error("dataset header must start with 'y': " + path);
    const Index p = static_cast<Index>(header.size()) - 1;
    const Index n = static_cast<Index>(rows.size()) - 1;
    Dataset d;
    d.x.resize(n, p);
    d.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i) + 1];
        if (static_cast<Index>(row.size()) != p + 1)
            throw std::runtime_error("ragged dataset row in " + path);
        d.y(i) = parse_csv_double(row[0], path);
        for (Index j = 0; j < p; ++j)
            d.x(i, j) = parse_csv_double(row[static_cast<std::size_t>(j) + 1], path);
    }
    check_dataset(d);
    return d;
}

}  // namespace twostage
