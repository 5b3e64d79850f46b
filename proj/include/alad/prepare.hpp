#pragma once

// Raw-file converters producing the canonical CSV (features + label) for the
// benchmark datasets, with the expected table shapes used for validation.

#include "alad/core.hpp"
#include "alad/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace alad {

struct PreparedDataset {
    Dataset data;
    ExpectedCounts expected;
    std::vector<std::string> mismatches;  // empty when counts are within tolerance
};

inline const std::map<std::string, ExpectedCounts>& expected_shapes() {
    static const std::map<std::string, ExpectedCounts> shapes = {
        {"abalone", {1920, 9, 29}},
        {"thyroid", {3251, 21, 73}},
        {"cardiotocography", {1700, 22, 45}},
        {"email-standin", {672, 42, 418}},
    };
    return shapes;
}

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open raw file '" + path.string() + "'");
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!detail::trim(line).empty()) out.push_back(line);
    }
    return out;
}

inline double field_real(const std::string& s, Index row, const std::string& what) {
    const auto v = parse_real(detail::trim(s));
    if (!v) throw DataError("row " + std::to_string(row) + ": bad " + what + " '" + s + "'");
    return *v;
}

inline Dataset from_rows(std::string name, const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                         std::vector<std::string> feature_names) {
    Dataset ds;
    ds.name = std::move(name);
    ds.feature_names = std::move(feature_names);
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.feature_names.size()));
    for (Index r = 0; r < rows.size(); ++r) {
        for (Index c = 0; c < rows[r].size(); ++c) {
            ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    ds.labels = labels;
    ds.validate();
    return ds;
}

}  // namespace detail

/// UCI abalone.data: sex,length,diameter,height,whole,shucked,viscera,shell,rings.
/// Rings 8-10 are normal, rings 3 and 21 anomalous, everything else dropped.
/// Sex becomes two indicators (M, F; infant is the baseline).
inline Dataset prepare_abalone(const std::filesystem::path& raw) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    Index lineno = 0;
    for (const auto& line : detail::read_lines(raw)) {
        ++lineno;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 9) throw DataError("abalone row " + std::to_string(lineno) + ": expected 9 fields");
        const auto rings = static_cast<int>(detail::field_real(f[8], lineno, "rings"));
        int label;
        if (rings >= 8 && rings <= 10) label = 0;
        else if (rings == 3 || rings == 21) label = 1;
        else continue;
        const std::string sex = detail::trim(f[0]);
        if (sex != "M" && sex != "F" && sex != "I") throw DataError("abalone row " + std::to_string(lineno) + ": bad sex");
        std::vector<double> x{sex == "M" ? 1.0 : 0.0, sex == "F" ? 1.0 : 0.0};
        for (Index c = 1; c < 8; ++c) x.push_back(detail::field_real(f[c], lineno, "measurement"));
        rows.push_back(std::move(x));
        labels.push_back(label);
    }
    return detail::from_rows("abalone", rows, labels,
                             {"sex_m", "sex_f", "length", "diameter", "height", "whole_weight", "shucked_weight",
                              "viscera_weight", "shell_weight"});
}

/// UCI ann-test.data: 21 whitespace-separated features then the class.
/// Class 1 is anomalous, class 3 normal, class 2 dropped.
inline Dataset prepare_thyroid(const std::filesystem::path& raw) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    Index lineno = 0;
    for (const auto& line : detail::read_lines(raw)) {
        ++lineno;
        std::istringstream ss(line);
        std::vector<std::string> f;
        for (std::string tok; ss >> tok;) f.push_back(tok);
        if (f.size() != 22) throw DataError("thyroid row " + std::to_string(lineno) + ": expected 22 fields");
        const auto cls = static_cast<int>(detail::field_real(f[21], lineno, "class"));
        if (cls == 2) continue;
        if (cls != 1 && cls != 3) throw DataError("thyroid row " + std::to_string(lineno) + ": unknown class");
        std::vector<double> x;
        for (Index c = 0; c < 21; ++c) x.push_back(detail::field_real(f[c], lineno, "feature"));
        rows.push_back(std::move(x));
        labels.push_back(cls == 1 ? 1 : 0);
    }
    std::vector<std::string> names;
    for (Index c = 0; c < 21; ++c) names.push_back("f" + std::to_string(c + 1));
    return detail::from_rows("thyroid", rows, labels, std::move(names));
}

inline const std::vector<std::string>& cardiotocography_columns() {
    static const std::vector<std::string> cols = {"LB",    "AC",  "FM",   "UC",   "ASTV",  "MSTV",     "ALTV", "MLTV",
                                                  "DL",    "DS",  "DP",   "DR",   "Width", "Min",      "Max",  "Nmax",
                                                  "Nzeros", "Mode", "Mean", "Median", "Variance", "Tendency"};
    return cols;
}

/// Cardiotocography exported as CSV with a header naming the 22 features and NSP.
/// NSP 1 is normal, NSP 3 anomalous (subsampled to `anomalies` rows with `seed`), NSP 2 dropped.
inline Dataset prepare_cardiotocography(const std::filesystem::path& raw, Index anomalies = 45,
                                        std::uint64_t seed = 20231) {
    const auto lines = detail::read_lines(raw);
    if (lines.empty()) throw DataError("cardiotocography: empty file");
    const auto header = detail::split_csv_line(lines.front());
    auto col = [&](const std::string& name) {
        for (Index c = 0; c < header.size(); ++c) {
            if (detail::trim(header[c]) == name) return c;
        }
        throw DataError("cardiotocography: missing column '" + name + "'");
    };
    std::vector<Index> feat;
    for (const auto& n : cardiotocography_columns()) feat.push_back(col(n));
    const Index nsp = col("NSP");

    std::vector<std::vector<double>> normal, anomalous;
    for (Index r = 1; r < lines.size(); ++r) {
        const auto f = detail::split_csv_line(lines[r]);
        if (f.size() != header.size()) throw DataError("cardiotocography row " + std::to_string(r) + ": ragged");
        const auto cls = static_cast<int>(detail::field_real(f[nsp], r, "NSP"));
        if (cls == 2) continue;
        std::vector<double> x;
        for (Index c : feat) x.push_back(detail::field_real(f[c], r, header[c]));
        (cls == 3 ? anomalous : normal).push_back(std::move(x));
    }
    if (anomalous.size() > anomalies) {
        Rng rng(seed);
        rng.shuffle(anomalous);
        anomalous.resize(anomalies);
    }
    std::vector<std::vector<double>> rows = normal;
    std::vector<int> labels(normal.size(), 0);
    for (auto& a : anomalous) {
        rows.push_back(std::move(a));
        labels.push_back(1);
    }
    return detail::from_rows("cardiotocography", rows, labels, cardiotocography_columns());
}

/// Synthetic stand-in with the email table's shape; `raw` is the generator seed.
inline Dataset prepare_email_standin(const std::string& raw) {
    std::uint64_t seed = 0;
    try {
        seed = std::stoull(raw);
    } catch (const std::exception&) {
        throw ConfigError("email-standin: expected an integer seed in place of the raw path, got '" + raw + "'");
    }
    return make_synthetic(email_standin_spec(), seed, "email-standin");
}

/// Convert a raw file by dataset name and compare against the expected shape.
inline PreparedDataset prepare(const std::string& name, const std::string& raw) {
    const auto& shapes = expected_shapes();
    const auto it = shapes.find(name);
    if (it == shapes.end()) throw ConfigError("unknown dataset '" + name + "'");
    PreparedDataset out;
    out.expected = it->second;
    if (name == "abalone") out.data = prepare_abalone(raw);
    else if (name == "thyroid") out.data = prepare_thyroid(raw);
    else if (name == "cardiotocography") out.data = prepare_cardiotocography(raw);
    else out.data = prepare_email_standin(raw);
    out.mismatches = count_mismatches(out.expected, out.data.n(), out.data.d(), out.data.anomaly_count());
    return out;
}

}  // namespace alad
