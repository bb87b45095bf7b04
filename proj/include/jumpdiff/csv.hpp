#pragma once

// CSV emission with locale-independent, round-trip double formatting so that
// rerunning an experiment with the same seed yields byte-identical files.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace jumpdiff {

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path);
    }

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    // Empty cell for NaN, matching "empty event fields on grid rows".
    static std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

    void row(const std::vector<double>& vals) {
        std::vector<std::string> cells;
        cells.reserve(vals.size());
        for (double v : vals) cells.push_back(cell(v));
        row_strings(cells);
    }

private:
    std::ofstream out_;
};

}  // namespace jumpdiff
