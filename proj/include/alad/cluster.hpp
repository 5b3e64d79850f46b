#pragma once

// k-means++ seeding, Lloyd k-means and alternating k-medoids over squared
// Euclidean distance.

#include "alad/core.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace alad {

struct ClusteringResult {
    Matrix centers;                 // k x d (for k-medoids: the medoid rows)
    IndexList medoids;              // k-medoids only: row indices of the medoids
    std::vector<Index> assignments; // length m
    double inertia = 0.0;           // sum of squared distances to assigned centre
    std::vector<double> trace;      // objective after every assignment/update step
    Index iterations = 0;
};

namespace detail {

inline std::vector<double> min_sq_dist_to(const Matrix& X, Eigen::Index row) {
    std::vector<double> out(static_cast<Index>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<Index>(i)] = squared_distance(X.row(i), X.row(row));
    return out;
}

/// Squared distances of every row of X to every row of C (m x k), computed directly.
inline Matrix pairwise_sq_dist(const Matrix& X, const Matrix& C) {
    Matrix D(X.rows(), C.rows());
    for (Eigen::Index j = 0; j < C.rows(); ++j) {
        D.col(j) = (X.rowwise() - C.row(j)).rowwise().squaredNorm();
    }
    return D;
}

}  // namespace detail

/// D^2 seeding. Returns distinct row indices: the first uniform, each next drawn
/// proportionally to the squared distance to its nearest chosen centre. When all
/// remaining mass is zero (duplicate rows) the next index is uniform over unchosen rows.
inline IndexList kmeanspp_seed_indices(const Matrix& X, Index k, std::uint64_t seed) {
    const Index m = static_cast<Index>(X.rows());
    if (k < 1 || m < k) throw ConfigError("kmeanspp_seed: need m >= k >= 1");
    Rng rng(seed);
    IndexList chosen;
    chosen.reserve(k);
    std::vector<bool> taken(m, false);

    chosen.push_back(rng.index(m));
    taken[chosen.back()] = true;
    auto dist = detail::min_sq_dist_to(X, static_cast<Eigen::Index>(chosen.back()));

    while (chosen.size() < k) {
        for (Index i = 0; i < m; ++i) {
            if (taken[i]) dist[i] = 0.0;
        }
        Index next = rng.weighted(dist);
        if (next == m) {
            IndexList free;
            for (Index i = 0; i < m; ++i) {
                if (!taken[i]) free.push_back(i);
            }
            next = free[rng.index(free.size())];
        }
        chosen.push_back(next);
        taken[next] = true;
        for (Index i = 0; i < m; ++i) {
            dist[i] = std::min(dist[i], squared_distance(X.row(static_cast<Eigen::Index>(i)),
                                                         X.row(static_cast<Eigen::Index>(next))));
        }
    }
    return chosen;
}

inline Matrix kmeanspp_seed(const Matrix& X, Index k, std::uint64_t seed) {
    return gather_rows(X, kmeanspp_seed_indices(X, k, seed));
}

/// Lloyd's algorithm from k-means++ seeds. Empty clusters take the point that is
/// farthest from its current centre (drawn from a cluster with at least two members).
inline ClusteringResult kmeans(const Matrix& X, Index k, std::uint64_t seed, Index max_iters = 300) {
    const Index m = static_cast<Index>(X.rows());
    if (k < 1 || m < k) throw ConfigError("kmeans: need m >= k >= 1");
    const auto kk = static_cast<Eigen::Index>(k);

    ClusteringResult res;
    res.centers = kmeanspp_seed(X, k, seed);
    res.assignments.assign(m, 0);
    std::vector<Index> previous;

    for (Index iter = 0; iter < std::max<Index>(max_iters, 1); ++iter) {
        // assignment step
        const Matrix D = detail::pairwise_sq_dist(X, res.centers);
        std::vector<double> cost(m);
        std::vector<Index> sizes(k, 0);
        for (Index i = 0; i < m; ++i) {
            Eigen::Index best = 0;
            cost[i] = D.row(static_cast<Eigen::Index>(i)).minCoeff(&best);
            res.assignments[i] = static_cast<Index>(best);
            ++sizes[static_cast<Index>(best)];
        }
        // repair empty clusters
        for (Index j = 0; j < k; ++j) {
            if (sizes[j] > 0) continue;
            Index far = m;
            for (Index i = 0; i < m; ++i) {
                if (sizes[res.assignments[i]] < 2) continue;
                if (far == m || cost[i] > cost[far]) far = i;
            }
            --sizes[res.assignments[far]];
            res.assignments[far] = j;
            ++sizes[j];
            cost[far] = 0.0;
            res.centers.row(static_cast<Eigen::Index>(j)) = X.row(static_cast<Eigen::Index>(far));
        }
        double inertia = 0.0;
        for (double c : cost) inertia += c;
        res.trace.push_back(inertia);
        res.iterations = iter + 1;

        if (res.assignments == previous) break;
        previous = res.assignments;

        // update step
        Matrix sums = Matrix::Zero(kk, X.cols());
        for (Index i = 0; i < m; ++i) {
            sums.row(static_cast<Eigen::Index>(res.assignments[i])) += X.row(static_cast<Eigen::Index>(i));
        }
        for (Index j = 0; j < k; ++j) {
            res.centers.row(static_cast<Eigen::Index>(j)) =
                sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(sizes[j]);
        }
        double updated = 0.0;
        for (Index i = 0; i < m; ++i) {
            updated += squared_distance(X.row(static_cast<Eigen::Index>(i)),
                                        res.centers.row(static_cast<Eigen::Index>(res.assignments[i])));
        }
        res.trace.push_back(updated);
    }
    res.inertia = 0.0;
    for (Index i = 0; i < m; ++i) {
        res.inertia += squared_distance(X.row(static_cast<Eigen::Index>(i)),
                                        res.centers.row(static_cast<Eigen::Index>(res.assignments[i])));
    }
    return res;
}

namespace detail {

/// Best-improvement medoid/non-medoid swaps (FastPAM1 deltas, O(m^2) per pass)
/// until no swap lowers the cost. Appends the cost after each accepted swap. Appends the cost after each accepted swap.
inline void swap_refine(const Matrix& X, IndexList& medoids, Index max_passes, std::vector<double>& trace) {
    const Index m = static_cast<Index>(X.rows());
    const Index k = medoids.size();
    std::vector<Index> near(m);
    std::vector<double> dn(m), ds(m);
    std::vector<bool> is_medoid(m, false);
    for (Index j : medoids) is_medoid[j] = true;

    auto refresh = [&]() {
        double total = 0.0;
        for (Index i = 0; i < m; ++i) {
            dn[i] = ds[i] = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < k; ++j) {
                const double d = squared_distance(X.row(static_cast<Eigen::Index>(i)),
                                                  X.row(static_cast<Eigen::Index>(medoids[j])));
                if (d < dn[i]) {
                    ds[i] = dn[i];
                    dn[i] = d;
                    near[i] = j;
                } else if (d < ds[i]) {
                    ds[i] = d;
                }
            }
            total += dn[i];
        }
        return total;
    };

    // Full distance matrix when it fits (m <= 4096), otherwise one column per candidate.
    const bool cached = m * m <= (Index{1} << 24);
    const Matrix D = cached ? pairwise_sq_dist(X, X) : Matrix();
    Vector dh(static_cast<Eigen::Index>(m));

    double cost = refresh();
    std::vector<double> removal(k), delta(k);
    for (Index pass = 0; pass < max_passes; ++pass) {
        std::fill(removal.begin(), removal.end(), 0.0);
        for (Index i = 0; i < m; ++i) removal[near[i]] += ds[i] - dn[i];

        double best = 0.0;
        Index best_j = k, best_h = m;
        for (Index h = 0; h < m; ++h) {
            if (is_medoid[h]) continue;
            if (cached) {
                dh = D.col(static_cast<Eigen::Index>(h));
            } else {
                dh = (X.rowwise() - X.row(static_cast<Eigen::Index>(h))).rowwise().squaredNorm();
            }
            delta = removal;
            double shared = 0.0;
            for (Index i = 0; i < m; ++i) {
                const double d = dh(static_cast<Eigen::Index>(i));
                if (d < dn[i]) {
                    shared += d - dn[i];
                    delta[near[i]] += dn[i] - ds[i];
                } else if (d < ds[i]) {
                    delta[near[i]] += d - ds[i];
                }
            }
            for (Index j = 0; j < k; ++j) {
                if (delta[j] + shared < best - 1e-12 * std::max(1.0, cost)) {
                    best = delta[j] + shared;
                    best_j = j;
                    best_h = h;
                }
            }
        }
        if (best_j == k) break;
        is_medoid[medoids[best_j]] = false;
        is_medoid[best_h] = true;
        medoids[best_j] = best_h;
        cost = refresh();
        trace.push_back(cost);
    }
}

}  // namespace detail

/// Alternating (Voronoi iteration) k-medoids from k-means++ seeded medoids,
/// followed by swap refinement. Each medoid is replaced by the member of its
/// cluster with the smallest total squared distance to the other members.
inline ClusteringResult kmedoids(const Matrix& X, Index k, std::uint64_t seed, Index max_iters = 100) {
    const Index m = static_cast<Index>(X.rows());
    if (k < 1 || m < k) throw ConfigError("kmedoids: need m >= k >= 1");

    ClusteringResult res;
    res.medoids = kmeanspp_seed_indices(X, k, seed);
    res.assignments.assign(m, 0);

    auto assign = [&]() {
        std::vector<Index> owner(m, k);
        for (Index j = 0; j < k; ++j) owner[res.medoids[j]] = j;
        double total = 0.0;
        for (Index i = 0; i < m; ++i) {
            if (owner[i] < k) {
                res.assignments[i] = owner[i];
                continue;
            }
            Index best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < k; ++j) {
                const double dd = squared_distance(X.row(static_cast<Eigen::Index>(i)),
                                                   X.row(static_cast<Eigen::Index>(res.medoids[j])));
                if (dd < best_d) {
                    best_d = dd;
                    best = j;
                }
            }
            res.assignments[i] = best;
            total += best_d;
        }
        return total;
    };

    double cost = assign();
    res.trace.push_back(cost);
    for (Index iter = 0; iter < max_iters; ++iter) {
        res.iterations = iter + 1;
        std::vector<IndexList> members(k);
        for (Index i = 0; i < m; ++i) members[res.assignments[i]].push_back(i);

        bool changed = false;
        for (Index j = 0; j < k; ++j) {
            const auto& mem = members[j];
            const Matrix sub = gather_rows(X, mem);
            const Matrix D = detail::pairwise_sq_dist(sub, sub);
            const Vector totals = D.rowwise().sum();
            // keep the current medoid unless a member is strictly better
            Index best = std::find(mem.begin(), mem.end(), res.medoids[j]) - mem.begin();
            double best_cost = totals(static_cast<Eigen::Index>(best));
            for (Index a = 0; a < mem.size(); ++a) {
                if (totals(static_cast<Eigen::Index>(a)) < best_cost - 1e-12 * std::max(1.0, best_cost)) {
                    best_cost = totals(static_cast<Eigen::Index>(a));
                    best = a;
                }
            }
            if (mem[best] != res.medoids[j]) {
                res.medoids[j] = mem[best];
                changed = true;
            }
        }
        if (!changed) break;
        const double next = assign();
        res.trace.push_back(next);
        if (next >= cost) {
            cost = next;
            break;
        }
        cost = next;
    }
    if (k < m) {
        detail::swap_refine(X, res.medoids, max_iters, res.trace);
        res.iterations += 1;
        assign();
    }
    res.inertia = 0.0;
    for (Index i = 0; i < m; ++i) {
        res.inertia += squared_distance(X.row(static_cast<Eigen::Index>(i)),
                                        X.row(static_cast<Eigen::Index>(res.medoids[res.assignments[i]])));
    }
    res.centers = gather_rows(X, res.medoids);
    return res;
}

/// For each centre in order, the nearest row of X not claimed by an earlier centre.
inline IndexList nearest_to_centers(const Matrix& X, const Matrix& centers) {
    const Index m = static_cast<Index>(X.rows());
    const Index k = static_cast<Index>(centers.rows());
    if (m < k) throw ConfigError("nearest_to_centers: fewer rows than centres");
    if (k > 0 && X.cols() != centers.cols()) throw ConfigError("nearest_to_centers: dimension mismatch");
    std::vector<bool> claimed(m, false);
    IndexList out;
    out.reserve(k);
    for (Index j = 0; j < k; ++j) {
        Index best = m;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < m; ++i) {
            if (claimed[i]) continue;
            const double dd = squared_distance(X.row(static_cast<Eigen::Index>(i)),
                                               centers.row(static_cast<Eigen::Index>(j)));
            if (dd < best_d) {
                best_d = dd;
                best = i;
            }
        }
        claimed[best] = true;
        out.push_back(best);
    }
    return out;
}

}  // namespace alad
