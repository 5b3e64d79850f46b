#pragma once

// Fixed data sets shared by the unit tests and the acceptance runner.

#include "alad/core.hpp"

#include <cmath>
#include <vector>

namespace fixtures {

using namespace alad;

struct SmallSet {
    Matrix X;
    std::vector<int> y;
    double gamma;
    double C;
};

// Fixed corpus of small training sets with both classes present.
inline std::vector<SmallSet> small_corpus() {
    std::vector<SmallSet> out;
    Rng r(2024);
    const double Cs[] = {0.1, 1.0, 10.0};
    while (out.size() < 50) {
        SmallSet s;
        const Index m = 2 + r.index(5);
        const Index d = 1 + r.index(3);
        s.X.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < s.X.rows(); ++i)
            for (Eigen::Index j = 0; j < s.X.cols(); ++j) s.X(i, j) = r.normal();
        s.y.resize(m);
        for (Index i = 0; i < m; ++i) s.y[i] = static_cast<int>(r.index(2));
        s.y[0] = 0;
        s.y[1] = 1;
        s.gamma = 0.2 + 1.5 * r.uniform();
        s.C = Cs[out.size() % 3];
        out.push_back(std::move(s));
    }
    return out;
}

inline Matrix rbf_gram(const Matrix& X, double gamma) {
    Matrix K(X.rows(), X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.rows(); ++j) K(i, j) = std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm());
    return K;
}

inline std::vector<double> pm1(const std::vector<int>& y) {
    std::vector<double> out;
    for (int v : y) out.push_back(v == 1 ? 1.0 : -1.0);
    return out;
}

/// Isotropic Gaussian blobs, `per_blob` rows around each centre.
inline Matrix blobs(const std::vector<Vector>& centers, Index per_blob, double sd, std::uint64_t seed) {
    Rng r(seed);
    const auto d = centers.front().size();
    Matrix X(static_cast<Eigen::Index>(centers.size() * per_blob), d);
    Eigen::Index row = 0;
    for (const auto& c : centers) {
        for (Index i = 0; i < per_blob; ++i, ++row) {
            for (Eigen::Index j = 0; j < d; ++j) X(row, j) = c(j) + sd * r.normal();
        }
    }
    return X;
}

}  // namespace fixtures
