/*
   Copyright 2026 The vfpkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

namespace vfp::lab {

/// Shortest text that parses back to the same double; identical input gives
/// identical bytes on every run.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Row-at-a-time CSV writer with a fixed header. Cells are written verbatim,
/// so callers must not pass commas or newlines.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
        : out_(path, std::ios::binary), columns_(header.size()) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        write(header);
    }

    template <class... Cells>
    void row(const Cells&... cells) {
        static_assert(sizeof...(Cells) > 0);
        std::vector<std::string> r{cell(cells)...};
        if (r.size() != columns_) throw std::logic_error("csv row width does not match the header");
        write(r);
    }

private:
    template <class T>
    static std::string cell(const T& v) {
        if constexpr (std::is_floating_point_v<T>) return format_double(static_cast<double>(v));
        else if constexpr (std::is_integral_v<T>) return std::to_string(v);
        else return std::string(v);
    }

    void write(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
        out_ << '\n';
        if (!out_) throw std::runtime_error("csv write failed");
    }

    std::ofstream out_;
    std::size_t columns_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        throw std::out_of_range("no column " + std::string(name));
    }
    double number(std::size_t row, std::size_t col) const {
        const std::string& s = rows.at(row).at(col);
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw std::runtime_error("csv cell '" + s + "' is not a number");
        return v;
    }
};

/// Reads a header-first CSV and checks that every row has the header width.
inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split(line));
        if (t.rows.back().size() != t.header.size())
            throw std::runtime_error(path.string() + ": row " + std::to_string(t.rows.size()) + " has the wrong width");
    }
    return t;
}

} // namespace vfp::lab
