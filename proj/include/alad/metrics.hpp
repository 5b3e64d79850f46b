#pragma once

// PRAUC (average precision), anomaly-discovery counts and multi-run
// aggregation with Student-t confidence intervals.

#include "alad/core.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace alad {

struct MetricsRecord {
    Index iteration = 0;
    Index labels_used = 0;
    std::optional<double> prauc;  // absent when no ground-truth test partition exists
    Index anomalies_discovered = 0;
    double wall_time_ms = 0.0;

    bool operator==(const MetricsRecord&) const = default;
};

/// JSON form without wall time; timing is kept out of result files.
inline nlohmann::json record_to_json(const MetricsRecord& r, bool with_time = false) {
    nlohmann::json j = {{"iteration", r.iteration},
                        {"labels_used", r.labels_used},
                        {"prauc", r.prauc ? nlohmann::json(*r.prauc) : nlohmann::json(nullptr)},
                        {"anomalies_discovered", r.anomalies_discovered}};
    if (with_time) j["wall_time_ms"] = r.wall_time_ms;
    return j;
}

inline MetricsRecord record_from_json(const nlohmann::json& j) {
    MetricsRecord r;
    r.iteration = j.at("iteration").get<Index>();
    r.labels_used = j.at("labels_used").get<Index>();
    if (j.contains("prauc") && !j.at("prauc").is_null()) r.prauc = j.at("prauc").get<double>();
    r.anomalies_discovered = j.at("anomalies_discovered").get<Index>();
    r.wall_time_ms = j.value("wall_time_ms", 0.0);
    return r;
}

/// Average precision with label 1 as the positive class. Equal scores form a
/// single threshold. Throws if there are no positives.
inline double prauc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ConfigError("prauc: scores and labels differ in length");
    Index positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ConfigError("prauc: labels must be 0 or 1");
        if (!std::isfinite(scores[i])) throw ConfigError("prauc: non-finite score");
        positives += static_cast<Index>(labels[i]);
    }
    if (positives == 0) throw ConfigError("prauc: undefined without positive labels");

    IndexList order = iota_indices(scores.size());
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    Index tp = 0;
    Index seen = 0;
    for (Index i = 0; i < order.size();) {
        Index j = i;
        Index group_tp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            group_tp += static_cast<Index>(labels[order[j]]);
            ++j;
        }
        tp += group_tp;
        seen += j - i;
        if (group_tp > 0) {
            ap += (static_cast<double>(group_tp) / static_cast<double>(positives)) *
                  (static_cast<double>(tp) / static_cast<double>(seen));
        }
        i = j;
    }
    return ap;
}

inline double prauc(const Vector& scores, const std::vector<int>& labels) {
    return prauc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                 std::span<const int>(labels));
}

/// Number of labeled indices whose true label is 1.
inline Index discovery_count(const std::map<Index, int>& L, std::span<const int> truth) {
    Index n = 0;
    for (const auto& [idx, label] : L) {
        (void)label;
        if (idx >= truth.size()) throw ConfigError("discovery_count: index out of range");
        n += truth[idx] == 1 ? 1 : 0;
    }
    return n;
}

struct AggregatePoint {
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct AggregateCurve {
    std::vector<AggregatePoint> points;
    Index n_runs = 0;
    bool padded = false;       // some run was shorter and carried its last value forward
    bool degenerate = false;   // fewer than two runs: interval collapsed to the mean
};

struct AggregateOptions {
    double confidence = 0.95;
    std::optional<std::pair<double, double>> clip;  // e.g. {0, 1} for PRAUC
};

/// Per-iteration mean and two-sided Student-t interval with n-1 degrees of freedom.
inline AggregateCurve aggregate(const std::vector<std::vector<double>>& series, const AggregateOptions& opt = {}) {
    if (series.empty()) throw ConfigError("aggregate: no runs");
    if (!(opt.confidence > 0.0 && opt.confidence < 1.0)) throw ConfigError("aggregate: confidence must be in (0, 1)");
    Index len = 0;
    for (const auto& s : series) {
        if (s.empty()) throw ConfigError("aggregate: empty run");
        len = std::max<Index>(len, s.size());
    }

    AggregateCurve out;
    out.n_runs = series.size();
    out.degenerate = series.size() < 2;
    double tq = 0.0;
    if (!out.degenerate) {
        boost::math::students_t dist(static_cast<double>(series.size() - 1));
        tq = boost::math::quantile(boost::math::complement(dist, (1.0 - opt.confidence) / 2.0));
    }

    const double n = static_cast<double>(series.size());
    for (Index t = 0; t < len; ++t) {
        double sum = 0.0;
        std::vector<double> col(series.size());
        for (Index r = 0; r < series.size(); ++r) {
            const auto& s = series[r];
            if (t >= s.size()) out.padded = true;
            col[r] = t < s.size() ? s[t] : s.back();
            sum += col[r];
        }
        AggregatePoint p;
        p.mean = sum / n;
        double half = 0.0;
        if (!out.degenerate) {
            double ss = 0.0;
            for (double v : col) ss += (v - p.mean) * (v - p.mean);
            half = tq * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        p.ci_low = p.mean - half;
        p.ci_high = p.mean + half;
        if (opt.clip) {
            p.ci_low = std::clamp(p.ci_low, opt.clip->first, opt.clip->second);
            p.ci_high = std::clamp(p.ci_high, opt.clip->first, opt.clip->second);
        }
        out.points.push_back(p);
    }
    return out;
}

}  // namespace alad
