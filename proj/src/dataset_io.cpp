#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpolab/data.hpp"

namespace cpolab {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding spaces
        std::size_t a = field.find_first_not_of(" \t\r");
        std::size_t b = field.find_last_not_of(" \t\r");
        fields.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

float parse_float(const std::string& s, int row, const std::string& col) {
    try {
        std::size_t pos = 0;
        const float v = std::stof(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::parse, "row " + std::to_string(row) + ": cannot parse '" + s +
                                   "' as a number in column " + col);
    }
}

long parse_int(const std::string& s, int row, const std::string& col) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::parse, "row " + std::to_string(row) + ": cannot parse '" + s +
                                   "' as an integer in column " + col);
    }
}

float parse_binary(const std::string& s, int row, const std::string& col) {
    if (s == "0") return 0.0f;
    if (s == "1") return 1.0f;
    fail(ErrorKind::parse, "row " + std::to_string(row) + ": concept value '" + s + "' in column " +
                               col + " is not binary");
}

int count_prefixed(const std::vector<std::string>& header, std::size_t start, const char* prefix) {
    int count = 0;
    for (std::size_t i = start; i < header.size(); ++i) {
        if (header[i].rfind(prefix, 0) == 0 &&
            header[i] == std::string(prefix) + std::to_string(count))
            ++count;
        else
            break;
    }
    return count;
}

}  // namespace

void save_dataset(const ConceptDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
    const int d = ds.d();
    const int k = ds.k();
    out << "id";
    for (int f = 0; f < d; ++f) out << ",x_" << f;
    for (int j = 0; j < k; ++j) out << ",c_" << j;
    for (int j = 0; j < k; ++j) out << ",cc_" << j;
    if (ds.has_confidence())
        for (int j = 0; j < k; ++j) out << ",conf_" << j;
    out << ",y\n";
    char buf[64];
    for (int i = 0; i < ds.n(); ++i) {
        out << i;
        for (int f = 0; f < d; ++f) {
            // %.9g round-trips float32 exactly
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(ds.X(i, f)));
            out << ',' << buf;
        }
        for (int j = 0; j < k; ++j) out << ',' << (ds.C(i, j) != 0.0f ? 1 : 0);
        for (int j = 0; j < k; ++j) out << ',' << (ds.C_clean(i, j) != 0.0f ? 1 : 0);
        if (ds.has_confidence())
            for (int j = 0; j < k; ++j) out << ',' << ds.confidence(i, j);
        out << ',' << ds.Y[static_cast<std::size_t>(i)] << '\n';
    }
    if (!out) fail(ErrorKind::io, "write to '" + path + "' failed");
}

ConceptDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::parse, "empty dataset file");
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "id")
        fail(ErrorKind::parse, "dataset header must start with 'id'");
    const int d = count_prefixed(header, 1, "x_");
    if (d == 0) fail(ErrorKind::parse, "dataset header has no x_* columns");
    const int k = count_prefixed(header, 1 + static_cast<std::size_t>(d), "c_");
    if (k == 0) fail(ErrorKind::parse, "dataset header has no c_* columns");
    std::size_t at = 1 + static_cast<std::size_t>(d + k);
    const int kc = count_prefixed(header, at, "cc_");
    if (kc != 0 && kc != k) fail(ErrorKind::parse, "cc_* column count must match c_*");
    at += static_cast<std::size_t>(kc);
    const int kf = count_prefixed(header, at, "conf_");
    if (kf != 0 && kf != k) fail(ErrorKind::parse, "conf_* column count must match c_*");
    at += static_cast<std::size_t>(kf);
    if (at + 1 != header.size() || header[at] != "y")
        fail(ErrorKind::parse, "dataset header must end with 'y'");
    const std::size_t expected_cols = header.size();

    std::vector<std::vector<std::string>> rows;
    int row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != expected_cols)
            fail(ErrorKind::parse, "row " + std::to_string(row_no) + ": expected " +
                                       std::to_string(expected_cols) + " fields, got " +
                                       std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) fail(ErrorKind::parse, "dataset file has no data rows");

    ConceptDataset ds;
    const int n = static_cast<int>(rows.size());
    ds.X.resize(n, d);
    ds.C.resize(n, k);
    ds.C_clean.resize(n, k);
    ds.Y.resize(static_cast<std::size_t>(n));
    if (kf) ds.confidence.resize(n, k);
    ds.signal_dim = d;
    ds.clean_shadow_present = kc != 0;

    for (int i = 0; i < n; ++i) {
        const auto& f = rows[static_cast<std::size_t>(i)];
        std::size_t c = 0;
        parse_int(f[c++], i + 1, "id");
        for (int x = 0; x < d; ++x) ds.X(i, x) = parse_float(f[c++], i + 1, "x_" + std::to_string(x));
        for (int j = 0; j < k; ++j) ds.C(i, j) = parse_binary(f[c++], i + 1, "c_" + std::to_string(j));
        if (kc)
            for (int j = 0; j < k; ++j)
                ds.C_clean(i, j) = parse_binary(f[c++], i + 1, "cc_" + std::to_string(j));
        else
            ds.C_clean.row(i) = ds.C.row(i);
        if (kf) {
            for (int j = 0; j < k; ++j) {
                const long v = parse_int(f[c++], i + 1, "conf_" + std::to_string(j));
                if (v < 1 || v > 4)
                    fail(ErrorKind::parse, "row " + std::to_string(i + 1) +
                                               ": confidence rating must lie in {1..4}, got " +
                                               std::to_string(v));
                ds.confidence(i, j) = static_cast<int>(v);
            }
        }
        const long y = parse_int(f[c++], i + 1, "y");
        if (y < 0) fail(ErrorKind::parse, "row " + std::to_string(i + 1) + ": negative task label");
        ds.Y[static_cast<std::size_t>(i)] = static_cast<int>(y);
    }
    return ds;
}

}  // namespace cpolab
