#pragma once

// Dataset loading, standardization, stratified splitting, seeding of the
// initial labeled pool, and the synthetic generators used in place of data
// that cannot be redistributed.

#include "alad/core.hpp"
#include "alad/log.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace alad {

struct Dataset {
    std::string name;
    Matrix features;          // n x d
    std::vector<int> labels;  // 0 = normal, 1 = anomaly
    std::vector<std::string> feature_names;

    Index n() const { return static_cast<Index>(features.rows()); }
    Index d() const { return static_cast<Index>(features.cols()); }

    Index anomaly_count() const {
        return static_cast<Index>(std::count(labels.begin(), labels.end(), 1));
    }
    Index normal_count() const { return n() - anomaly_count(); }
    bool has_both_classes() const { return anomaly_count() > 0 && normal_count() > 0; }

    void validate() const {
        if (n() < 2) throw DataError("dataset '" + name + "': need at least 2 rows");
        if (d() < 1) throw DataError("dataset '" + name + "': need at least 1 feature");
        if (labels.size() != n()) throw DataError("dataset '" + name + "': label count mismatch");
        for (int y : labels) {
            if (y != 0 && y != 1) throw DataError("dataset '" + name + "': labels must be 0 or 1");
        }
    }
};

struct SplitResult {
    IndexList train_indices;
    IndexList test_indices;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r' || s[a] == '\n')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r' || s[b - 1] == '\n')) --b;
    return std::string(s.substr(a, b - a));
}

/// Split one CSV record. Handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line, char delim = ',') {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delim) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

/// Load a headered CSV. Rows whose label cell equals `anomaly_value` get label 1.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const std::string& anomaly_value, std::string name = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "': missing header row");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    const auto header = detail::split_csv_line(line);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end()) {
        throw DataError("'" + path.string() + "': no column named '" + label_column + "'");
    }
    const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());

    Dataset ds;
    ds.name = name.empty() ? path.stem().string() : std::move(name);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_col) ds.feature_names.push_back(header[c]);
    }
    const std::size_t d = ds.feature_names.size();

    std::vector<double> values;
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_col) {
                ds.labels.push_back(cells[c] == anomaly_value ? 1 : 0);
                continue;
            }
            const auto v = detail::parse_real(cells[c]);
            if (!v) {
                throw DataError("'" + path.string() + "' row " + std::to_string(row + 1) + " column '" +
                                header[c] + "': cannot parse '" + cells[c] + "' as a real number");
            }
            values.push_back(*v);
        }
        ++row;
    }

    ds.features.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < row; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * d + c];
        }
    }
    ds.validate();
    if (ds.anomaly_count() == 0) log::warn("dataset '" + ds.name + "' has no anomalies");
    if (ds.normal_count() == 0) log::warn("dataset '" + ds.name + "' has no normal rows");
    return ds;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    for (Index c = 0; c < ds.d(); ++c) {
        out << (c < ds.feature_names.size() ? ds.feature_names[c] : "f" + std::to_string(c)) << ',';
    }
    out << "label\n";
    for (Index r = 0; r < ds.n(); ++r) {
        for (Index c = 0; c < ds.d(); ++c) {
            out << format_shortest(ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) << ',';
        }
        out << ds.labels[r] << '\n';
    }
}

/// Column-wise z-score with population standard deviation. Constant columns become zero.
inline Dataset standardize(const Dataset& ds) {
    if (ds.n() < 2) throw DataError("standardize: need at least 2 rows");
    Dataset out = ds;
    const double n = static_cast<double>(ds.n());
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
        auto col = out.features.col(c);
        const double mean = col.sum() / n;
        col.array() -= mean;
        const double sd = std::sqrt(col.squaredNorm() / n);
        if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
            col /= sd;
            // second pass removes the rounding residue of the first centering
            col.array() -= col.sum() / n;
        } else {
            col.setZero();
        }
    }
    return out;
}

/// Per-class allocation of `total` test rows by largest remainder.
inline std::vector<Index> stratified_allocation(const std::vector<Index>& class_sizes, Index total) {
    Index n = 0;
    for (Index s : class_sizes) n += s;
    std::vector<Index> alloc(class_sizes.size(), 0);
    std::vector<std::pair<double, Index>> remainders;
    Index used = 0;
    for (Index k = 0; k < class_sizes.size(); ++k) {
        const double exact = static_cast<double>(class_sizes[k]) * static_cast<double>(total) / static_cast<double>(n);
        alloc[k] = static_cast<Index>(std::floor(exact));
        used += alloc[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (Index i = 0; used < total && i < remainders.size(); ++i) {
        const Index k = remainders[i].second;
        if (alloc[k] < class_sizes[k]) {
            ++alloc[k];
            ++used;
        }
    }
    return alloc;
}

/// Stratified shuffle split into a train side and a test side of round(n * test_fraction) rows.
inline SplitResult stratified_split(const std::vector<int>& labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("stratified_split: test_fraction must lie in (0, 1)");
    }
    std::vector<IndexList> members(2);
    for (Index i = 0; i < labels.size(); ++i) members[static_cast<Index>(labels[i] == 1)].push_back(i);
    for (int k = 0; k < 2; ++k) {
        if (members[k].size() < 2) {
            throw DataError(std::string("stratified_split: class ") + (k == 1 ? "anomaly" : "normal") +
                            " has fewer than 2 members");
        }
    }
    const Index n = labels.size();
    const Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * test_fraction));
    const auto alloc = stratified_allocation({members[0].size(), members[1].size()}, n_test);

    Rng rng(seed);
    SplitResult out;
    for (int k = 0; k < 2; ++k) {
        auto m = members[k];
        rng.shuffle(m);
        out.test_indices.insert(out.test_indices.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(alloc[k]));
        out.train_indices.insert(out.train_indices.end(), m.begin() + static_cast<std::ptrdiff_t>(alloc[k]), m.end());
    }
    std::sort(out.train_indices.begin(), out.train_indices.end());
    std::sort(out.test_indices.begin(), out.test_indices.end());
    return out;
}

inline SplitResult stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    return stratified_split(ds.labels, test_fraction, seed);
}

/// Draw `per_class` members of each class uniformly without replacement from `candidates`.
inline IndexList init_labeled(const std::vector<int>& labels, const IndexList& candidates, Index per_class,
                              std::uint64_t seed) {
    std::vector<IndexList> members(2);
    for (Index i : candidates) {
        if (i >= labels.size()) throw ConfigError("init_labeled: candidate index out of range");
        members[static_cast<Index>(labels[i] == 1)].push_back(i);
    }
    Rng rng(seed);
    IndexList out;
    for (int k = 0; k < 2; ++k) {
        if (members[k].size() < per_class) {
            throw DataError(std::string("init_labeled: class ") + (k == 1 ? "anomaly" : "normal") + " has " +
                            std::to_string(members[k].size()) + " members, need " + std::to_string(per_class));
        }
        auto m = members[k];
        // partial Fisher-Yates: the first per_class slots become the sample
        for (Index i = 0; i < per_class; ++i) {
            const Index j = i + rng.index(m.size() - i);
            std::swap(m[i], m[j]);
        }
        out.insert(out.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline IndexList init_labeled(const Dataset& ds, Index per_class, std::uint64_t seed) {
    return init_labeled(ds.labels, iota_indices(ds.n()), per_class, seed);
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct NormalComponent {
    Vector mean;
    double cov_scale = 1.0;  // covariance = cov_scale * I
};

/// Normals drawn from isotropic Gaussian components, one tight anomaly cluster
/// placed `anomaly_cluster_offset` away from every normal mean, and scattered
/// anomalies in a low-density shell around the normal components.
struct SyntheticSpec {
    Index n_normal = 0;
    std::vector<NormalComponent> normal_components;
    Index n_anomaly_cluster = 0;
    double anomaly_cluster_offset = 10.0;
    Index n_anomaly_scatter = 0;
    Index d = 2;
    double anomaly_cluster_scale = 0.1;
    // scattered anomalies sit at radius sqrt(d) + [inner, outer] component sd
    double scatter_inner = 3.0;
    double scatter_outer = 6.0;

    void validate() const {
        require(d >= 1, "synthetic: d must be >= 1");
        require(n_anomaly_cluster + n_anomaly_scatter >= 1, "synthetic: need at least one anomaly");
        require(n_normal == 0 || !normal_components.empty(), "synthetic: normals need at least one component");
        for (const auto& c : normal_components) {
            require(static_cast<Index>(c.mean.size()) == d, "synthetic: component mean has wrong dimension");
            require(c.cov_scale > 0.0, "synthetic: cov_scale must be positive");
        }
        require(anomaly_cluster_offset >= 0.0, "synthetic: offset must be non-negative");
        require(anomaly_cluster_scale > 0.0, "synthetic: anomaly_cluster_scale must be positive");
        require(0.0 <= scatter_inner && scatter_inner <= scatter_outer, "synthetic: bad scatter shell");
    }

    /// Centre of the anomaly cluster: offset along the first axis past the furthest normal mean.
    Vector anomaly_cluster_center() const {
        Vector center = Vector::Zero(static_cast<Eigen::Index>(d));
        if (normal_components.empty()) {
            center(0) = anomaly_cluster_offset;
            return center;
        }
        double max_first = -std::numeric_limits<double>::infinity();
        for (const auto& c : normal_components) {
            center += c.mean;
            max_first = std::max(max_first, c.mean(0));
        }
        center /= static_cast<double>(normal_components.size());
        center(0) = max_first + anomaly_cluster_offset;
        return center;
    }
};

inline Dataset make_synthetic(const SyntheticSpec& spec, std::uint64_t seed, std::string name = "synthetic") {
    spec.validate();
    Rng rng(seed);
    const auto d = static_cast<Eigen::Index>(spec.d);
    const Index n = spec.n_normal + spec.n_anomaly_cluster + spec.n_anomaly_scatter;

    Matrix X(static_cast<Eigen::Index>(n), d);
    std::vector<int> y;
    y.reserve(n);
    Eigen::Index row = 0;

    auto gaussian = [&](const Vector& mean, double sd) {
        for (Eigen::Index j = 0; j < d; ++j) X(row, j) = mean(j) + sd * rng.normal();
        ++row;
    };

    const Index n_comp = spec.normal_components.size();
    for (Index i = 0; i < spec.n_normal; ++i) {
        const auto& comp = spec.normal_components[i % n_comp];
        gaussian(comp.mean, std::sqrt(comp.cov_scale));
        y.push_back(0);
    }
    const Vector center = spec.anomaly_cluster_center();
    for (Index i = 0; i < spec.n_anomaly_cluster; ++i) {
        gaussian(center, std::sqrt(spec.anomaly_cluster_scale));
        y.push_back(1);
    }
    const double base_radius = std::sqrt(static_cast<double>(spec.d));
    for (Index i = 0; i < spec.n_anomaly_scatter; ++i) {
        Vector dir(d);
        for (Eigen::Index j = 0; j < d; ++j) dir(j) = rng.normal();
        if (dir.norm() == 0.0) dir(0) = 1.0;
        dir.normalize();
        Vector origin = Vector::Zero(d);
        double sd = 1.0;
        if (n_comp > 0) {
            const auto& comp = spec.normal_components[rng.index(n_comp)];
            origin = comp.mean;
            sd = std::sqrt(comp.cov_scale);
        }
        const double r = base_radius + spec.scatter_inner + rng.uniform() * (spec.scatter_outer - spec.scatter_inner);
        X.row(row) = (origin + dir * (r * sd)).transpose();
        ++row;
        y.push_back(1);
    }

    // Shuffle rows so that row order carries no label information.
    IndexList perm = iota_indices(n);
    rng.shuffle(perm);
    Dataset ds;
    ds.name = std::move(name);
    ds.features = gather_rows(X, perm);
    ds.labels.resize(n);
    for (Index i = 0; i < n; ++i) ds.labels[i] = y[perm[i]];
    for (Index j = 0; j < spec.d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
    return ds;
}

/// Two normal components, a tight anomaly cluster and scattered outliers in 2-D.
inline SyntheticSpec cluster_scatter_spec(Index n = 2000, double anomaly_rate = 0.02) {
    SyntheticSpec s;
    s.d = 2;
    const Index n_anom = std::max<Index>(2, static_cast<Index>(std::llround(static_cast<double>(n) * anomaly_rate)));
    s.n_normal = n - n_anom;
    s.n_anomaly_cluster = (n_anom * 5 + 7) / 8;
    s.n_anomaly_scatter = n_anom - s.n_anomaly_cluster;
    s.normal_components = {{Vector::Zero(2), 1.0}, {(Vector(2) << 4.0, 3.0).finished(), 1.5}};
    s.anomaly_cluster_offset = 8.0;
    s.anomaly_cluster_scale = 0.1;
    return s;
}

/// High anomaly-rate, 42-dimensional stand-in for the proprietary email data.
inline SyntheticSpec email_standin_spec() {
    SyntheticSpec s;
    s.d = 42;
    s.n_normal = 254;
    s.n_anomaly_cluster = 380;
    s.n_anomaly_scatter = 38;
    Vector m0 = Vector::Zero(42);
    Vector m1 = Vector::Zero(42);
    m1(1) = 3.0;
    s.normal_components = {{m0, 1.0}, {m1, 1.0}};
    s.anomaly_cluster_offset = 2.5;
    s.anomaly_cluster_scale = 1.0;
    return s;
}

/// Stand-in with the size, dimension and anomaly count of a named benchmark.
inline SyntheticSpec table_shaped_spec(Index n, Index d, Index anomalies, std::uint64_t layout_seed) {
    SyntheticSpec s;
    s.d = d;
    s.n_normal = n - anomalies;
    s.n_anomaly_cluster = (anomalies * 3 + 4) / 5;
    s.n_anomaly_scatter = anomalies - s.n_anomaly_cluster;
    Rng rng(layout_seed);
    for (int k = 0; k < 3; ++k) {
        Vector m(static_cast<Eigen::Index>(d));
        for (Eigen::Index j = 0; j < m.size(); ++j) m(j) = 2.0 * rng.normal();
        s.normal_components.push_back({m, 0.5 + rng.uniform()});
    }
    s.anomaly_cluster_offset = 4.0;
    s.anomaly_cluster_scale = 0.3;
    return s;
}

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : s.normal_components) {
        comps.push_back({{"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                         {"cov_scale", c.cov_scale}});
    }
    j = {{"n_normal", s.n_normal},
         {"normal_components", comps},
         {"n_anomaly_cluster", s.n_anomaly_cluster},
         {"anomaly_cluster_offset", s.anomaly_cluster_offset},
         {"n_anomaly_scatter", s.n_anomaly_scatter},
         {"d", s.d},
         {"anomaly_cluster_scale", s.anomaly_cluster_scale},
         {"scatter_inner", s.scatter_inner},
         {"scatter_outer", s.scatter_outer}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "cluster-scatter") {
            s = cluster_scatter_spec(j.value("n", Index{2000}), j.value("anomaly_rate", 0.02));
        } else if (preset == "email-standin") {
            s = email_standin_spec();
        } else if (preset == "table-shaped") {
            s = table_shaped_spec(j.at("n").get<Index>(), j.at("d").get<Index>(), j.at("anomalies").get<Index>(),
                                  j.value("layout_seed", std::uint64_t{0}));
        } else {
            throw ConfigError("unknown synthetic preset '" + preset + "'");
        }
        return;
    }
    s = SyntheticSpec{};
    s.d = j.at("d").get<Index>();
    s.n_normal = j.value("n_normal", Index{0});
    s.n_anomaly_cluster = j.value("n_anomaly_cluster", Index{0});
    s.n_anomaly_scatter = j.value("n_anomaly_scatter", Index{0});
    s.anomaly_cluster_offset = j.value("anomaly_cluster_offset", 10.0);
    s.anomaly_cluster_scale = j.value("anomaly_cluster_scale", 0.1);
    s.scatter_inner = j.value("scatter_inner", 3.0);
    s.scatter_outer = j.value("scatter_outer", 6.0);
    for (const auto& c : j.value("normal_components", nlohmann::json::array())) {
        const auto mean = c.at("mean").get<std::vector<double>>();
        NormalComponent comp;
        comp.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        comp.cov_scale = c.value("cov_scale", 1.0);
        s.normal_components.push_back(std::move(comp));
    }
}

// ---------------------------------------------------------------------------
// Prepared-dataset manifest

struct ExpectedCounts {
    Index n = 0;
    Index d = 0;
    Index anomalies = 0;
};

/// One dataset entry: either a prepared CSV or a synthetic spec with a seed.
struct ManifestEntry {
    std::string name;
    std::string path;
    std::string label_column = "label";
    std::string anomaly_value = "1";
    std::optional<ExpectedCounts> expected;
    std::optional<SyntheticSpec> synthetic;
    std::uint64_t synthetic_seed = 0;
};

/// Count tolerance used when checking a prepared file against its expected shape:
/// d exact, n within max(2, 1%), anomalies within max(1, 5%).
inline std::vector<std::string> count_mismatches(const ExpectedCounts& want, Index n, Index d, Index anomalies) {
    std::vector<std::string> diffs;
    auto within = [](Index got, Index exp, double rel, Index floor_abs) {
        const double tol = std::max(static_cast<double>(floor_abs), rel * static_cast<double>(exp));
        return std::abs(static_cast<double>(got) - static_cast<double>(exp)) <= tol;
    };
    if (d != want.d) diffs.push_back("d: expected " + std::to_string(want.d) + ", got " + std::to_string(d));
    if (!within(n, want.n, 0.01, 2)) {
        diffs.push_back("n: expected " + std::to_string(want.n) + ", got " + std::to_string(n));
    }
    if (!within(anomalies, want.anomalies, 0.05, 1)) {
        diffs.push_back("anomalies: expected " + std::to_string(want.anomalies) + ", got " + std::to_string(anomalies));
    }
    return diffs;
}

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
    j = {{"name", e.name}};
    if (e.synthetic) {
        j["synthetic"] = *e.synthetic;
        j["seed"] = e.synthetic_seed;
    } else {
        j["path"] = e.path;
        j["label_column"] = e.label_column;
        j["anomaly_value"] = e.anomaly_value;
    }
    if (e.expected) j["expected"] = {{"n", e.expected->n}, {"d", e.expected->d}, {"anomalies", e.expected->anomalies}};
}

inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
    e = ManifestEntry{};
    e.name = j.at("name").get<std::string>();
    if (j.contains("synthetic")) {
        e.synthetic = j.at("synthetic").get<SyntheticSpec>();
        e.synthetic_seed = j.value("seed", std::uint64_t{0});
    } else {
        e.path = j.at("path").get<std::string>();
        e.label_column = j.value("label_column", std::string("label"));
        e.anomaly_value = j.value("anomaly_value", std::string("1"));
    }
    if (j.contains("expected")) {
        const auto& x = j.at("expected");
        e.expected = ExpectedCounts{x.at("n").get<Index>(), x.at("d").get<Index>(), x.at("anomalies").get<Index>()};
    }
}

/// Dataset manifest: `{"datasets": [ManifestEntry...]}`; relative paths resolve against `base_dir`.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    const ManifestEntry* find(const std::string& name) const {
        for (const auto& e : entries) {
            if (e.name == name) return &e;
        }
        return nullptr;
    }

    static DatasetManifest parse(const nlohmann::json& j, std::filesystem::path base_dir) {
        DatasetManifest m;
        m.base_dir = std::move(base_dir);
        if (!j.contains("datasets") || !j.at("datasets").is_array()) {
            throw ConfigError("dataset manifest: missing 'datasets' array");
        }
        for (const auto& e : j.at("datasets")) m.entries.push_back(e.get<ManifestEntry>());
        return m;
    }

    static DatasetManifest from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open manifest '" + path.string() + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError("manifest '" + path.string() + "': " + ex.what());
        }
        return parse(j, path.parent_path());
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : entries) arr.push_back(e);
        return {{"datasets", arr}};
    }

    /// Load (or generate) and validate a dataset, returned unstandardized.
    Dataset load_raw(const std::string& name) const {
        const ManifestEntry* e = find(name);
        if (!e) throw DataError("unknown dataset '" + name + "'");
        Dataset ds;
        if (e->synthetic) {
            ds = make_synthetic(*e->synthetic, e->synthetic_seed, e->name);
        } else {
            std::filesystem::path p = e->path;
            if (p.is_relative()) p = base_dir / p;
            ds = load_csv(p, e->label_column, e->anomaly_value, e->name);
        }
        if (e->expected) {
            const auto diffs = count_mismatches(*e->expected, ds.n(), ds.d(), ds.anomaly_count());
            if (!diffs.empty()) {
                std::string msg = "dataset '" + name + "' does not match its manifest:";
                for (const auto& s : diffs) msg += " " + s + ";";
                throw DataError(msg);
            }
        }
        return ds;
    }

    /// Load and z-score a dataset.
    Dataset load(const std::string& name) const { return standardize(load_raw(name)); }
};

}  // namespace alad
