#pragma once

// Query strategies: the representative / informative pair combined by the
// balancing schedule, and the random, max-entropy and k-medoids baselines.

#include "alad/classifier.hpp"
#include "alad/cluster.hpp"
#include "alad/core.hpp"
#include "alad/mixture.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace alad {

/// Parameters of the balancing schedule: batch size, annotator confidence and
/// the iterations at which mixing starts (T1) and pure informative sampling begins (T2).
struct BalancingParams {
    Index b = 20;
    double c = 0.0;
    Index T1 = 0;
    Index T2 = 5;

    void validate() const {
        if (b < 1) throw ConfigError("balancing: b must be >= 1");
        if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("balancing: c must lie in [0, 1]");
        if (!(T1 < T2)) throw ConfigError("balancing: T1 must be < T2");
    }
};

struct BatchAllocation {
    Index n_repr = 0;
    Index n_info = 0;

    Index total() const { return n_repr + n_info; }
    bool operator==(const BatchAllocation&) const = default;
};

/// ceil(b * c), robust to representation error in c (e.g. 20 * 0.15).
inline Index confidence_offset(Index b, double c) {
    const double x = static_cast<double>(b) * c;
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<Index>(r);
    return static_cast<Index>(std::ceil(x));
}

/// Split of a batch between representative and informative picks at iteration t:
///   t < T1        -> (b, 0)
///   T1 <= t < T2  -> (b - B, B), B = (t - T1 + ceil(b c)) mod b
///   t >= T2       -> (0, b)
inline BatchAllocation balance(Index t, const BalancingParams& p) {
    p.validate();
    if (t < p.T1) return {p.b, 0};
    if (t < p.T2) {
        const Index shifted = t - p.T1;
        const Index B = (shifted + confidence_offset(p.b, p.c)) % p.b;
        return {p.b - B, B};
    }
    return {0, p.b};
}

/// Shannon entropy in nats; 0 ln 0 is taken as 0.
inline double entropy(std::span<const double> probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("entropy: probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("entropy: probabilities must sum to 1");
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

/// Binary entropy of P(anomaly) = p1.
inline double binary_entropy(double p1) {
    const double probs[2] = {1.0 - p1, p1};
    return entropy(probs);
}

enum class Provenance { representative, informative, random, max_entropy, kmedoids };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::representative: return "representative";
        case Provenance::informative: return "informative";
        case Provenance::random: return "random";
        case Provenance::max_entropy: return "max_entropy";
        case Provenance::kmedoids: return "kmedoids";
    }
    return "unknown";
}

inline Provenance provenance_from_string(const std::string& s) {
    for (auto p : {Provenance::representative, Provenance::informative, Provenance::random, Provenance::max_entropy,
                   Provenance::kmedoids}) {
        if (to_string(p) == s) return p;
    }
    throw ConfigError("unknown provenance '" + s + "'");
}

/// A batch of dataset row indices with, per index, why it was picked and a
/// diagnostic score (log-density for representative picks, entropy for
/// informative and max-entropy picks, 0 otherwise).
struct QueryBatch {
    IndexList indices;
    std::vector<Provenance> provenance;
    std::vector<double> scores;
    BatchAllocation allocation;

    Index size() const { return indices.size(); }

    Index count(Provenance p) const {
        return static_cast<Index>(std::count(provenance.begin(), provenance.end(), p));
    }

    void append(const QueryBatch& other) {
        indices.insert(indices.end(), other.indices.begin(), other.indices.end());
        provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
        scores.insert(scores.end(), other.scores.begin(), other.scores.end());
    }

    bool operator==(const QueryBatch& o) const {
        return indices == o.indices && provenance == o.provenance && scores == o.scores && allocation == o.allocation;
    }
};

namespace detail {

inline void require_pool(const IndexList& U, const char* who) {
    if (U.empty()) throw StateError(std::string(who) + ": unlabeled pool is empty");
}

/// Per-candidate entropy of the classifier's predictive distribution.
inline std::vector<double> pool_entropies(const IndexList& U, const Matrix& X, const CalibratedClassifier& clf) {
    const Vector p1 = clf.predict_p1(gather_rows(X, U));
    std::vector<double> h(U.size());
    for (Index i = 0; i < U.size(); ++i) h[i] = binary_entropy(p1(static_cast<Eigen::Index>(i)));
    return h;
}

/// Positions 0..n-1 ordered by descending score, ties by ascending position.
inline IndexList order_desc(const std::vector<double>& score) {
    IndexList order = iota_indices(score.size());
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return score[a] > score[b]; });
    return order;
}

}  // namespace detail

// Seed streams shared by the adaptive sampler and the pure representative /
// informative strategies so that their picks coincide when one share is zero.
inline constexpr std::uint64_t kRepresentativeStream = 1;
inline constexpr std::uint64_t kInformativeStream = 2;

inline QueryBatch sample_random(const IndexList& U, Index b, std::uint64_t seed) {
    detail::require_pool(U, "sample_random");
    const Index n = std::min(b, U.size());
    IndexList pool = U;
    Rng rng(seed);
    for (Index i = 0; i < n; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    QueryBatch out;
    out.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    out.provenance.assign(n, Provenance::random);
    out.scores.assign(n, 0.0);
    return out;
}

inline QueryBatch sample_max_entropy(const IndexList& U, const CalibratedClassifier& clf, const Matrix& X, Index b) {
    detail::require_pool(U, "sample_max_entropy");
    const auto h = detail::pool_entropies(U, X, clf);
    const auto order = detail::order_desc(h);
    const Index n = std::min(b, U.size());
    QueryBatch out;
    for (Index r = 0; r < n; ++r) {
        out.indices.push_back(U[order[r]]);
        out.provenance.push_back(Provenance::max_entropy);
        out.scores.push_back(h[order[r]]);
    }
    return out;
}

inline QueryBatch sample_kmedoids(const IndexList& U, const Matrix& X, Index b, std::uint64_t seed,
                                  Index max_iters = 100) {
    detail::require_pool(U, "sample_kmedoids");
    const Index k = std::min(b, U.size());
    const auto res = kmedoids(gather_rows(X, U), k, seed, max_iters);
    QueryBatch out;
    for (Index j = 0; j < k; ++j) {
        out.indices.push_back(U[res.medoids[j]]);
        out.provenance.push_back(Provenance::kmedoids);
        out.scores.push_back(0.0);
    }
    return out;
}

/// Fit a mixture to the pool (BIC over K), then pick the pool members nearest
/// to the n_repr lowest-density component means; when the mixture has fewer
/// than n_repr components, every mean is used and the rest of the batch is
/// filled with the lowest-likelihood pool members.
inline QueryBatch sample_representative(const IndexList& U, const Matrix& X, Index n_repr, const GmmFitConfig& cfg,
                                        std::uint64_t seed, GmmModel* fitted = nullptr) {
    detail::require_pool(U, "sample_representative");
    if (n_repr < 1 || U.size() < n_repr) throw ConfigError("sample_representative: need |U| >= n_repr >= 1");
    const Matrix Xu = gather_rows(X, U);
    const GmmModel model = select_k(Xu, cfg, seed);
    const Vector scores = model.score_samples(Xu);

    const Index K = model.K();
    std::vector<double> center_density(K);
    for (Index k = 0; k < K; ++k) {
        center_density[k] = model.log_density(model.means().row(static_cast<Eigen::Index>(k)).transpose());
    }
    IndexList center_order = iota_indices(K);
    std::stable_sort(center_order.begin(), center_order.end(),
                     [&](Index a, Index b) { return center_density[a] < center_density[b]; });
    const Index n_centers = std::min(K, n_repr);
    center_order.resize(n_centers);

    IndexList local = nearest_to_centers(Xu, gather_rows(model.means(), center_order));
    if (local.size() < n_repr) {
        std::vector<bool> claimed(U.size(), false);
        for (Index i : local) claimed[i] = true;
        IndexList by_score = iota_indices(U.size());
        std::stable_sort(by_score.begin(), by_score.end(), [&](Index a, Index b) {
            return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
        });
        for (Index i : by_score) {
            if (local.size() == n_repr) break;
            if (!claimed[i]) local.push_back(i);
        }
    }

    QueryBatch out;
    for (Index i : local) {
        out.indices.push_back(U[i]);
        out.provenance.push_back(Provenance::representative);
        out.scores.push_back(scores(static_cast<Eigen::Index>(i)));
    }
    if (fitted) *fitted = model;
    return out;
}

/// Number of highest-entropy candidates clustered by the informative sampler:
/// the fraction n_info / b of the pool, at least n_info, at most |U|.
inline Index informative_candidate_count(Index pool, Index n_info, Index b) {
    const Index frac = (pool * n_info + b - 1) / b;
    return std::min(pool, std::max(n_info, frac));
}

/// Take the top-entropy share of the pool, cluster it into n_info groups with
/// k-means (k-means++ seeds) and return the candidate nearest each centroid.
inline QueryBatch sample_informative(const IndexList& U, const Matrix& X, const CalibratedClassifier& clf, Index n_info,
                                     Index b, std::uint64_t seed, Index kmeans_max_iters = 300) {
    detail::require_pool(U, "sample_informative");
    if (n_info < 1 || U.size() < n_info) throw ConfigError("sample_informative: need |U| >= n_info >= 1");
    if (b < n_info) throw ConfigError("sample_informative: n_info exceeds b");
    const auto h = detail::pool_entropies(U, X, clf);
    const auto order = detail::order_desc(h);
    const Index n_cand = informative_candidate_count(U.size(), n_info, b);

    IndexList cand(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_cand));
    IndexList cand_rows(n_cand);
    for (Index i = 0; i < n_cand; ++i) cand_rows[i] = U[cand[i]];
    const Matrix Xc = gather_rows(X, cand_rows);
    const auto clusters = kmeans(Xc, n_info, seed, kmeans_max_iters);
    const IndexList picks = nearest_to_centers(Xc, clusters.centers);

    QueryBatch out;
    for (Index p : picks) {
        out.indices.push_back(cand_rows[p]);
        out.provenance.push_back(Provenance::informative);
        out.scores.push_back(h[cand[p]]);
    }
    return out;
}

/// Scale an allocation down to a pool smaller than the batch, keeping the
/// ratio; the rounding remainder goes to the larger share (representative on ties).
inline BatchAllocation shrink_allocation(const BatchAllocation& a, Index pool) {
    const Index b = a.total();
    if (pool >= b) return a;
    BatchAllocation out{a.n_repr * pool / b, a.n_info * pool / b};
    const Index rest = pool - out.total();
    if (a.n_repr >= a.n_info) out.n_repr += rest;
    else out.n_info += rest;
    return out;
}

/// Representative picks first, removed from the pool, then informative picks from the remainder.
inline QueryBatch sample_adaptive(const IndexList& U, const Matrix& X, const CalibratedClassifier& clf, Index t,
                                  const BalancingParams& p, const GmmFitConfig& cfg, std::uint64_t seed,
                                  Index kmeans_max_iters = 300) {
    detail::require_pool(U, "sample_adaptive");
    const BatchAllocation alloc = shrink_allocation(balance(t, p), U.size());
    const Index b_eff = alloc.total();

    QueryBatch out;
    out.allocation = alloc;
    if (alloc.n_repr > 0) {
        out.append(sample_representative(U, X, alloc.n_repr, cfg, derive_seed(seed, kRepresentativeStream)));
    }
    if (alloc.n_info > 0) {
        std::vector<Index> taken = out.indices;
        std::sort(taken.begin(), taken.end());
        IndexList rest;
        rest.reserve(U.size());
        for (Index u : U) {
            if (!std::binary_search(taken.begin(), taken.end(), u)) rest.push_back(u);
        }
        out.append(sample_informative(rest, X, clf, alloc.n_info, b_eff, derive_seed(seed, kInformativeStream),
                                      kmeans_max_iters));
    }
    return out;
}

inline void to_json(nlohmann::json& j, const BalancingParams& p) {
    j = {{"b", p.b}, {"c", p.c}, {"T1", p.T1}, {"T2", p.T2}};
}

inline void from_json(const nlohmann::json& j, BalancingParams& p) {
    p = BalancingParams{};
    p.b = j.value("b", p.b);
    p.c = j.value("c", p.c);
    p.T1 = j.value("T1", p.T1);
    p.T2 = j.value("T2", p.T2);
}

inline void to_json(nlohmann::json& j, const QueryBatch& q) {
    std::vector<std::string> prov;
    for (auto p : q.provenance) prov.push_back(to_string(p));
    j = {{"indices", q.indices},
         {"provenance", prov},
         {"scores", q.scores},
         {"allocation", {{"n_repr", q.allocation.n_repr}, {"n_info", q.allocation.n_info}}}};
}

inline void from_json(const nlohmann::json& j, QueryBatch& q) {
    q = QueryBatch{};
    q.indices = j.at("indices").get<IndexList>();
    for (const auto& p : j.at("provenance")) q.provenance.push_back(provenance_from_string(p.get<std::string>()));
    q.scores = j.at("scores").get<std::vector<double>>();
    q.allocation.n_repr = j.at("allocation").at("n_repr").get<Index>();
    q.allocation.n_info = j.at("allocation").at("n_info").get<Index>();
    if (q.provenance.size() != q.indices.size() || q.scores.size() != q.indices.size()) {
        throw DataError("query batch JSON: ragged fields");
    }
}

}  // namespace alad
