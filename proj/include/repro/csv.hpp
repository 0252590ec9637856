#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "repro/core.hpp"

namespace repro {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 records: quoted fields may hold delimiters, doubled quotes and
/// line breaks; CRLF and LF both end a record. Blank lines are skipped.
inline std::vector<std::vector<std::string>> parse_csv_records(const std::string& text, char delim = ',') {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, field_started = false;
    auto end_field = [&] {
        rec.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(rec.size() == 1 && rec[0].empty())) out.push_back(std::move(rec));
        rec.clear();
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
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == delim) {
            end_field();
        } else if (c == '\n') {
            end_record();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw validation_error("unterminated quoted field");
    if (!field.empty() || !rec.empty()) end_record();
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw io_error("read failure on " + path);
    return ss.str();
}

inline CsvTable read_csv(const std::string& path, char delim = ',') {
    auto recs = parse_csv_records(read_text_file(path), delim);
    if (recs.empty()) throw validation_error("csv has no header row: " + path);
    CsvTable t;
    t.header = std::move(recs.front());
    for (std::size_t r = 1; r < recs.size(); ++r) {
        if (recs[r].size() != t.header.size())
            throw validation_error("row " + std::to_string(r) + " has " + std::to_string(recs[r].size()) +
                                   " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(recs[r]));
    }
    return t;
}

inline std::string csv_quote(const std::string& s, char delim = ',') {
    if (s.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& raw, std::size_t row, std::size_t col) {
    std::string s = raw;
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw validation_error("unparseable cell at row " + std::to_string(row) + ", column " + std::to_string(col) +
                               ": '" + raw + "'");
    return v;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out << text;
    if (!out) throw io_error("write failure on " + path);
}

/// Dataset as CSV with the given column names and a trailing label column.
inline std::string dataset_to_csv(const Dataset& data, const std::vector<std::string>& names,
                                  const std::string& label = "y") {
    if (static_cast<Index>(names.size()) != data.p()) throw validation_error("column name count differs from p");
    std::string s;
    for (const auto& nm : names) s += csv_quote(nm) + ',';
    s += csv_quote(label) + '\n';
    for (Index i = 0; i < data.n(); ++i) {
        for (Index j = 0; j < data.p(); ++j) s += format_double(data.x()(i, j)) + ',';
        s += std::to_string(data.y()[i]) + '\n';
    }
    return s;
}

inline std::vector<std::string> default_column_names(Index p) {
    std::vector<std::string> v;
    for (Index j = 0; j < p; ++j) v.push_back("x" + std::to_string(j));
    return v;
}

/// Numeric matrix from a headed CSV (every column numeric).
inline Matrix read_matrix_csv(const std::string& path, char delim = ',') {
    const CsvTable t = read_csv(path, delim);
    Matrix m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < t.header.size(); ++c)
            m(static_cast<Index>(r), static_cast<Index>(c)) = parse_double(t.rows[r][c], r + 1, c);
    return m;
}

struct IngestOptions {
    /// Drop columns whose share of exact zeros exceeds this (off when unset).
    std::optional<double> max_zero_fraction;
    /// Keep this share of the remaining columns with the largest variance.
    std::optional<double> top_variance_fraction;
    bool standardize = true;
};

struct IngestResult {
    Dataset data;
    std::vector<std::string> columns;        // names of the kept columns, in order
    std::vector<std::size_t> source_columns; // their positions in the input file
    Standardization standardization;
};

inline double column_variance(const Matrix& x, Index j) {
    const double mu = x.col(j).mean();
    const double n = static_cast<double>(x.rows());
    if (x.rows() < 2) return 0.0;
    return (x.col(j).array() - mu).square().sum() / (n - 1.0);
}

/// Reads a labelled CSV, applies the optional zero-fraction filter and then
/// the variance filter, and standardizes the columns.
inline IngestResult ingest_csv(const std::string& path, const std::string& label_column, char delim = ',',
                               const IngestOptions& opt = {}) {
    if (opt.max_zero_fraction && !(*opt.max_zero_fraction >= 0.0 && *opt.max_zero_fraction <= 1.0))
        throw validation_error("zero fraction threshold must lie in [0,1]");
    if (opt.top_variance_fraction && !(*opt.top_variance_fraction > 0.0 && *opt.top_variance_fraction <= 1.0))
        throw validation_error("variance fraction must lie in (0,1]");
    const CsvTable t = read_csv(path, delim);
    const auto lab = std::find(t.header.begin(), t.header.end(), label_column);
    if (lab == t.header.end()) throw validation_error("missing label column '" + label_column + "'");
    const auto lc = static_cast<std::size_t>(lab - t.header.begin());
    if (t.rows.empty()) throw validation_error("csv has no data rows");
    const Index n = static_cast<Index>(t.rows.size());
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (c != lc) cols.push_back(c);
    if (cols.empty()) throw validation_error("csv has no feature columns");

    Matrix x(n, static_cast<Index>(cols.size()));
    Eigen::VectorXi y(n);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double v = parse_double(t.rows[r][lc], r + 1, lc);
        if (v != 0.0 && v != 1.0) throw validation_error("non-binary label at row " + std::to_string(r + 1));
        y[static_cast<Index>(r)] = static_cast<int>(v);
        for (std::size_t k = 0; k < cols.size(); ++k)
            x(static_cast<Index>(r), static_cast<Index>(k)) = parse_double(t.rows[r][cols[k]], r + 1, cols[k]);
    }

    std::vector<Index> keep(cols.size());
    std::iota(keep.begin(), keep.end(), Index{0});
    if (opt.max_zero_fraction) {
        std::vector<Index> next;
        for (Index j : keep) {
            const double zf = static_cast<double>((x.col(j).array() == 0.0).count()) / static_cast<double>(n);
            if (!(zf > *opt.max_zero_fraction)) next.push_back(j);
        }
        keep = std::move(next);
    }
    if (opt.top_variance_fraction && !keep.empty()) {
        const auto want = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(*opt.top_variance_fraction * static_cast<double>(keep.size()) - 1e-9)));
        std::vector<double> var(keep.size());
        for (std::size_t k = 0; k < keep.size(); ++k) var[k] = column_variance(x, keep[k]);
        std::vector<std::size_t> order(keep.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return var[a] > var[b]; });
        order.resize(std::min(want, order.size()));
        std::sort(order.begin(), order.end());
        std::vector<Index> next;
        for (std::size_t k : order) next.push_back(keep[k]);
        keep = std::move(next);
    }
    if (keep.empty()) throw validation_error("every column was filtered out");

    Matrix xk(n, static_cast<Index>(keep.size()));
    IngestResult res;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        xk.col(static_cast<Index>(k)) = x.col(keep[k]);
        res.source_columns.push_back(cols[static_cast<std::size_t>(keep[k])]);
        res.columns.push_back(t.header[cols[static_cast<std::size_t>(keep[k])]]);
    }
    Dataset raw = validate_dataset(std::move(xk), std::move(y));
    if (opt.standardize) {
        auto [z, st] = standardize_columns(raw);
        res.data = std::move(z);
        res.standardization = std::move(st);
    } else {
        res.data = std::move(raw);
    }
    return res;
}

/// Dataset from a CSV written by dataset_to_csv (or any headed numeric CSV).
inline Dataset read_dataset_csv(const std::string& path, const std::string& label_column = "y", char delim = ',') {
    IngestOptions opt;
    opt.standardize = false;
    return ingest_csv(path, label_column, delim, opt).data;
}

}  // namespace repro
