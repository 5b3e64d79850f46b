#pragma once

// Full-covariance Gaussian mixture: EM fitting from k-means++ seeds, BIC model
// selection over a range of component counts, and log-density scoring.

#include "alad/cluster.hpp"
#include "alad/core.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <vector>

namespace alad {

struct GmmFitConfig {
    Index k_min = 1;
    Index k_max = 25;
    Index max_em_iters = 100;
    double rel_tol = 1e-5;
    double cov_reg = 1e-6;
    Index n_init = 3;
    // caps K at floor(m / min_points_per_component) during selection; 0 disables
    Index min_points_per_component = 10;
    // stop the K sweep after this many consecutive K without a BIC improvement; 0 sweeps the full range
    Index bic_patience = 3;

    void validate() const {
        require(k_min >= 1 && k_min <= k_max, "gmm: need 1 <= k_min <= k_max");
        require(rel_tol > 0.0, "gmm: rel_tol must be positive");
        require(cov_reg > 0.0, "gmm: cov_reg must be positive");
        require(n_init >= 1, "gmm: n_init must be >= 1");
        require(max_em_iters >= 1, "gmm: max_em_iters must be >= 1");
    }
};

inline void to_json(nlohmann::json& j, const GmmFitConfig& c) {
    j = {{"k_min", c.k_min},       {"k_max", c.k_max},     {"max_em_iters", c.max_em_iters},
         {"rel_tol", c.rel_tol},   {"cov_reg", c.cov_reg}, {"n_init", c.n_init},
         {"min_points_per_component", c.min_points_per_component},
         {"bic_patience", c.bic_patience}};
}

inline void from_json(const nlohmann::json& j, GmmFitConfig& c) {
    c = GmmFitConfig{};
    c.k_min = j.value("k_min", c.k_min);
    c.k_max = j.value("k_max", c.k_max);
    c.max_em_iters = j.value("max_em_iters", c.max_em_iters);
    c.rel_tol = j.value("rel_tol", c.rel_tol);
    c.cov_reg = j.value("cov_reg", c.cov_reg);
    c.n_init = j.value("n_init", c.n_init);
    c.min_points_per_component = j.value("min_points_per_component", c.min_points_per_component);
    c.bic_patience = j.value("bic_patience", c.bic_patience);
}

class GmmModel {
public:
    GmmModel() = default;

    /// Builds a model from parameters; throws NumericalError if a covariance is not positive definite.
    GmmModel(Vector weights, Matrix means, std::vector<Matrix> covariances, double final_log_likelihood = 0.0)
        : weights_(std::move(weights)),
          means_(std::move(means)),
          covariances_(std::move(covariances)),
          final_log_likelihood_(final_log_likelihood) {
        if (weights_.size() != means_.rows() || covariances_.size() != static_cast<Index>(means_.rows())) {
            throw ConfigError("GmmModel: inconsistent component counts");
        }
        factorize();
    }

    Index K() const { return static_cast<Index>(weights_.size()); }
    Index d() const { return static_cast<Index>(means_.cols()); }
    const Vector& weights() const { return weights_; }
    const Matrix& means() const { return means_; }
    const std::vector<Matrix>& covariances() const { return covariances_; }
    double final_log_likelihood() const { return final_log_likelihood_; }

    /// Log-likelihood after every E-step of the winning restart (empty for hand-built models).
    const std::vector<double>& log_likelihood_trace() const { return trace_; }

    /// m x K matrix of ln(weight_k) + ln N(x_i; mean_k, cov_k).
    Matrix weighted_log_pdf(const Matrix& X) const {
        check_dim(static_cast<Index>(X.cols()));
        const auto m = X.rows();
        const auto d = X.cols();
        const double log2pi = std::log(2.0 * 3.14159265358979323846);
        Matrix out(m, static_cast<Eigen::Index>(K()));
        for (Index k = 0; k < K(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            const double lw = weights_(kk) > 0.0 ? std::log(weights_(kk)) : -std::numeric_limits<double>::infinity();
            Matrix centered = (X.rowwise() - means_.row(kk)).transpose();  // d x m
            chol_[k].matrixL().solveInPlace(centered);
            const Vector maha = centered.colwise().squaredNorm().transpose();
            out.col(kk) = (lw - 0.5 * (static_cast<double>(d) * log2pi + log_det_[k])) - 0.5 * maha.array();
        }
        return out;
    }

    /// ln p(x) for every row, via log-sum-exp.
    Vector score_samples(const Matrix& X) const {
        const Matrix lp = weighted_log_pdf(X);
        Vector out(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = log_sum_exp(lp.row(i));
        return out;
    }

    double log_density(const Eigen::Ref<const Vector>& x) const {
        check_dim(static_cast<Index>(x.size()));
        Matrix row = x.transpose();
        return score_samples(row)(0);
    }

    double log_likelihood(const Matrix& X) const { return score_samples(X).sum(); }

    /// Number of free parameters: weights, means, full covariances.
    Index parameter_count() const {
        const Index k = K();
        const Index dd = d();
        return (k - 1) + k * dd + k * dd * (dd + 1) / 2;
    }

    template <class Row>
    static double log_sum_exp(const Row& v) {
        const double mx = v.maxCoeff();
        if (!std::isfinite(mx)) return mx;
        return mx + std::log((v.array() - mx).exp().sum());
    }

    nlohmann::json to_json() const {
        nlohmann::json covs = nlohmann::json::array();
        for (const auto& c : covariances_) covs.push_back(matrix_to_json(c));
        return {{"K", K()},
                {"d", d()},
                {"weights", std::vector<double>(weights_.data(), weights_.data() + weights_.size())},
                {"means", matrix_to_json(means_)},
                {"covariances", covs},
                {"final_log_likelihood", final_log_likelihood_}};
    }

    static GmmModel from_json(const nlohmann::json& j) {
        const auto w = j.at("weights").get<std::vector<double>>();
        std::vector<Matrix> covs;
        for (const auto& c : j.at("covariances")) covs.push_back(matrix_from_json(c));
        GmmModel m(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())),
                   matrix_from_json(j.at("means")), std::move(covs), j.value("final_log_likelihood", 0.0));
        if (m.K() != j.at("K").get<Index>()) throw DataError("GmmModel JSON: K does not match weights");
        return m;
    }

    static nlohmann::json matrix_to_json(const Matrix& M) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < M.rows(); ++r) {
            std::vector<double> row(static_cast<Index>(M.cols()));
            for (Eigen::Index c = 0; c < M.cols(); ++c) row[static_cast<Index>(c)] = M(r, c);
            rows.push_back(row);
        }
        return rows;
    }

    static Matrix matrix_from_json(const nlohmann::json& j) {
        const auto rows = j.get<std::vector<std::vector<double>>>();
        const auto cols = rows.empty() ? 0 : rows.front().size();
        Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
        for (Index r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != cols) throw DataError("ragged matrix in JSON");
            for (Index c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        return M;
    }

private:
    friend GmmModel fit_em(const Matrix&, Index, const GmmFitConfig&, std::uint64_t);

    void check_dim(Index dd) const {
        if (dd != d()) throw ConfigError("GmmModel: dimension mismatch (" + std::to_string(dd) + " vs " +
                                         std::to_string(d()) + ")");
    }

    void factorize() {
        chol_.clear();
        log_det_.clear();
        for (const auto& c : covariances_) {
            if (c.rows() != means_.cols() || c.cols() != means_.cols()) {
                throw ConfigError("GmmModel: covariance has wrong shape");
            }
            Eigen::LLT<Matrix> llt(c);
            if (llt.info() != Eigen::Success) throw NumericalError("GmmModel: covariance is not positive definite");
            const Vector diag = llt.matrixLLT().diagonal();
            if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
                throw NumericalError("GmmModel: covariance is not positive definite");
            }
            log_det_.push_back(2.0 * diag.array().log().sum());
            chol_.push_back(std::move(llt));
        }
    }

    Vector weights_;
    Matrix means_;
    std::vector<Matrix> covariances_;
    double final_log_likelihood_ = 0.0;
    std::vector<double> trace_;
    std::vector<Eigen::LLT<Matrix>> chol_;
    std::vector<double> log_det_;
};

namespace detail {

/// Symmetrize and add `reg` to the diagonal; escalate the ridge up to 1e6 x reg
/// before declaring the matrix unrepairable.
inline Matrix regularized_covariance(Matrix cov, double reg) {
    cov = 0.5 * (cov + cov.transpose());
    const auto d = cov.rows();
    double ridge = reg;
    for (int attempt = 0; attempt < 7; ++attempt) {
        Matrix c = cov;
        c.diagonal().array() += ridge;
        Eigen::LLT<Matrix> llt(c);
        if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) return c;
        ridge *= 10.0;
    }
    throw NumericalError("gmm: covariance is singular beyond repair (d=" + std::to_string(d) + ")");
}

inline Matrix population_covariance(const Matrix& X) {
    const RowVector mean = X.colwise().mean();
    const Matrix centered = X.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(X.rows());
}

}  // namespace detail

/// Fit a K-component mixture by EM. Each restart starts from k-means++ seeded
/// means, the data covariance for every component and uniform weights; the
/// restart with the highest final log-likelihood wins (earliest on ties).
inline GmmModel fit_em(const Matrix& X, Index K, const GmmFitConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Index m = static_cast<Index>(X.rows());
    const auto d = X.cols();
    if (d < 1) throw ConfigError("fit_em: need d >= 1");
    if (K < 1 || m < K) throw ConfigError("fit_em: need m >= K >= 1 (m=" + std::to_string(m) + ", K=" + std::to_string(K) + ")");
    const auto kk = static_cast<Eigen::Index>(K);
    const Matrix data_cov = detail::regularized_covariance(detail::population_covariance(X), cfg.cov_reg);

    GmmModel best;
    bool have_best = false;
    std::string last_error;

    for (Index restart = 0; restart < cfg.n_init; ++restart) {
        try {
            Matrix means = kmeanspp_seed(X, K, derive_seed(seed, restart));
            std::vector<Matrix> covs(K, data_cov);
            Vector weights = Vector::Constant(kk, 1.0 / static_cast<double>(K));
            GmmModel model(weights, means, covs);
            std::vector<double> trace;

            for (Index iter = 0; iter < cfg.max_em_iters; ++iter) {
                // E-step
                const Matrix lp = model.weighted_log_pdf(X);
                Vector row_ll(X.rows());
                for (Eigen::Index i = 0; i < X.rows(); ++i) row_ll(i) = GmmModel::log_sum_exp(lp.row(i));
                const double ll = row_ll.sum();
                if (!std::isfinite(ll)) throw NumericalError("fit_em: non-finite log-likelihood");
                model.final_log_likelihood_ = ll;
                trace.push_back(ll);
                if (trace.size() >= 2) {
                    const double prev = trace[trace.size() - 2];
                    if ((ll - prev) <= cfg.rel_tol * std::abs(prev)) break;
                }
                if (iter + 1 == cfg.max_em_iters) break;

                Matrix resp = (lp.colwise() - row_ll).array().exp();
                // M-step
                const Vector nk = resp.colwise().sum().transpose();
                for (Index k = 0; k < K; ++k) {
                    const auto c = static_cast<Eigen::Index>(k);
                    weights(c) = nk(c) / static_cast<double>(m);
                    if (nk(c) <= 1e-10) {
                        covs[k] = data_cov;
                        continue;
                    }
                    means.row(c) = (resp.col(c).transpose() * X) / nk(c);
                    const Matrix centered = X.rowwise() - means.row(c);
                    const Matrix weighted = centered.array().colwise() * resp.col(c).array();
                    covs[k] = detail::regularized_covariance((weighted.transpose() * centered) / nk(c), cfg.cov_reg);
                }
                weights /= weights.sum();
                const double keep_ll = model.final_log_likelihood_;
                model = GmmModel(weights, means, covs, keep_ll);
            }
            model.trace_ = std::move(trace);
            if (!have_best || model.final_log_likelihood_ > best.final_log_likelihood_) {
                best = std::move(model);
                have_best = true;
            }
        } catch (const NumericalError& ex) {
            last_error = ex.what();
        }
    }
    if (!have_best) throw NumericalError("fit_em: every restart failed: " + last_error);
    return best;
}

/// -2 ln L(X) + p ln m.
inline double bic(const GmmModel& model, const Matrix& X) {
    if (static_cast<Index>(X.cols()) != model.d()) throw ConfigError("bic: dimension mismatch");
    const double m = static_cast<double>(X.rows());
    return -2.0 * model.log_likelihood(X) + static_cast<double>(model.parameter_count()) * std::log(m);
}

struct KSelection {
    GmmModel model;
    std::vector<std::pair<Index, double>> bic_by_k;
};

/// Fit K = k_min, k_min+1, ... up to min(k_max, m, m / min_points_per_component)
/// and keep the lowest BIC (smaller K on ties). With bic_patience > 0 the sweep
/// ends once that many consecutive K fail to improve on the best BIC.
inline KSelection select_k_report(const Matrix& X, const GmmFitConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Index m = static_cast<Index>(X.rows());
    if (m < cfg.k_min) throw ConfigError("select_k: fewer rows than k_min");
    Index hi = std::min(cfg.k_max, m);
    if (cfg.min_points_per_component > 0) {
        hi = std::min(hi, std::max(cfg.k_min, m / cfg.min_points_per_component));
    }
    KSelection out;
    double best_bic = std::numeric_limits<double>::infinity();
    bool have = false;
    Index stale = 0;
    for (Index K = cfg.k_min; K <= hi; ++K) {
        GmmModel model = fit_em(X, K, cfg, derive_seed(seed, 1000 + K));
        const double score = bic(model, X);
        out.bic_by_k.emplace_back(K, score);
        if (!have || score < best_bic) {
            best_bic = score;
            out.model = std::move(model);
            have = true;
            stale = 0;
        } else if (cfg.bic_patience > 0 && ++stale >= cfg.bic_patience) {
            break;
        }
    }
    return out;
}

inline GmmModel select_k(const Matrix& X, const GmmFitConfig& cfg, std::uint64_t seed) {
    return select_k_report(X, cfg, seed).model;
}

inline double log_density(const GmmModel& model, const Eigen::Ref<const Vector>& x) { return model.log_density(x); }

inline Vector score_samples(const GmmModel& model, const Matrix& X) { return model.score_samples(X); }

}  // namespace alad
