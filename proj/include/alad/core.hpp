#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace alad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = std::size_t;
using IndexList = std::vector<Index>;

// Error hierarchy. The CLI maps each family to a distinct exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments or configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
};

// A numerical routine could not produce a valid result.
class NumericalError : public Error {
public:
    using Error::Error;
};

// An operation was invoked in the wrong state (e.g. a batch is already pending).
class StateError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ConfigError(what);
}

/// Deterministic pseudo-random source (splitmix64 stream).
///
/// Every variate is derived here rather than through <random> distributions,
/// whose outputs are implementation-defined, so streams are identical across
/// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(splitmix(seed)) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    Index index(Index n) {
        if (n == 0) throw ConfigError("Rng::index: empty range");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    (std::numeric_limits<std::uint64_t>::max() % bound);
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return static_cast<Index>(v % bound);
    }

    /// Standard normal via Box-Muller (one variate cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Draw an index with probability proportional to weights[i].
    /// Returns weights.size() when all weights are zero.
    Index weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) return weights.size();
        const double target = uniform() * total;
        double acc = 0.0;
        Index last_positive = weights.size();
        for (Index i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last_positive = i;
            if (target < acc) return i;
        }
        return last_positive;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (Index i = v.size(); i > 1; --i) {
            const Index j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t seed() const { return seed_; }

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        return mix(x);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Combine a base seed with a stream tag into an independent child seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return Rng::splitmix(Rng::splitmix(base) ^ (tag * 0xD1B54A32D192ED03ull + 0x632BE59BD9B4E019ull));
}

/// Copy the listed rows of X into a new matrix, in order.
inline Matrix gather_rows(const Matrix& X, const IndexList& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (Index i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

template <class A, class B>
double squared_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    return (a - b).squaredNorm();
}

inline IndexList iota_indices(Index n) {
    IndexList v(n);
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

}  // namespace alad
