#pragma once

// RBF-kernel soft-margin SVM solved by SMO (second-order working set
// selection), calibrated to probabilities with Platt's sigmoid.

#include "alad/core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace alad {

struct KernelParams {
    double gamma = 1.0;
    double C = 1.0;

    void validate() const {
        require(gamma > 0.0 && std::isfinite(gamma), "kernel: gamma must be positive");
        require(C > 0.0 && std::isfinite(C), "kernel: C must be positive");
    }
};

/// gamma = 1 / (d * var(X)) over all entries of X (1/d when X has no spread), C = 1.
inline KernelParams default_kernel_params(const Matrix& X) {
    KernelParams p;
    const double d = static_cast<double>(std::max<Eigen::Index>(X.cols(), 1));
    double var = 0.0;
    if (X.size() > 0) {
        const double mean = X.mean();
        var = (X.array() - mean).square().mean();
    }
    p.gamma = var > 1e-12 ? 1.0 / (d * var) : 1.0 / d;
    p.C = 1.0;
    return p;
}

struct SvmModel {
    Matrix support_vectors;  // s x d
    Vector dual_weights;     // alpha_i * y_i
    double bias = 0.0;
    KernelParams params;
    Index iterations = 0;
    double dual_objective = 0.0;  // 0.5 a'Qa - sum(a) at the solution

    /// sum_i w_i exp(-gamma |x - sv_i|^2) + bias, for every row of X.
    Vector decision_values(const Matrix& X) const {
        if (X.cols() != support_vectors.cols()) throw ConfigError("svm: dimension mismatch");
        Vector out = Vector::Constant(X.rows(), bias);
        for (Eigen::Index s = 0; s < support_vectors.rows(); ++s) {
            const Vector k = (-params.gamma * (X.rowwise() - support_vectors.row(s)).rowwise().squaredNorm()).array().exp();
            out += dual_weights(s) * k;
        }
        return out;
    }

    double decision_value(const Eigen::Ref<const Vector>& x) const {
        Matrix row = x.transpose();
        return decision_values(row)(0);
    }
};

struct PlattParams {
    double A = 0.0;
    double B = 0.0;

    /// P(y = 1 | v) = 1 / (1 + exp(A v + B)), evaluated without overflow.
    double p1(double v) const {
        const double f = A * v + B;
        if (f >= 0.0) {
            const double e = std::exp(-f);
            return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(f));
    }
};

struct SmoOptions {
    double tolerance = 1e-3;  // KKT violation bound
    Index max_iterations = 10'000'000;
};

namespace detail {

/// Training rows sorted lexicographically by (features, label), so that the
/// solver's result does not depend on the caller's row order.
inline IndexList canonical_row_order(const Matrix& X, const std::vector<int>& y) {
    IndexList order = iota_indices(static_cast<Index>(X.rows()));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            const double va = X(static_cast<Eigen::Index>(a), c);
            const double vb = X(static_cast<Eigen::Index>(b), c);
            if (va != vb) return va < vb;
        }
        return y[a] < y[b];
    });
    return order;
}

}  // namespace detail

/// Solve min 0.5 a'Qa - e'a  s.t. 0 <= a_i <= C, y'a = 0 with Q_ij = y_i y_j K(x_i, x_j).
/// `y` holds +1/-1. Returns the full alpha vector and rho (decision = sum a_i y_i K - rho).
struct SmoSolution {
    Vector alpha;
    double rho = 0.0;
    Index iterations = 0;
    double objective = 0.0;
};

inline SmoSolution solve_smo(const Matrix& K, const std::vector<double>& y, double C, const SmoOptions& opt = {}) {
    const Index m = y.size();
    constexpr double tau = 1e-12;
    SmoSolution sol;
    sol.alpha = Vector::Zero(static_cast<Eigen::Index>(m));
    Vector& a = sol.alpha;
    Vector G = Vector::Constant(static_cast<Eigen::Index>(m), -1.0);
    auto Q = [&](Index i, Index j) {
        return y[i] * y[j] * K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    auto is_upper = [&](Index t) { return a(static_cast<Eigen::Index>(t)) >= C; };
    auto is_lower = [&](Index t) { return a(static_cast<Eigen::Index>(t)) <= 0.0; };
    auto in_up = [&](Index t) { return (y[t] > 0 && !is_upper(t)) || (y[t] < 0 && !is_lower(t)); };
    auto in_low = [&](Index t) { return (y[t] > 0 && !is_lower(t)) || (y[t] < 0 && !is_upper(t)); };

    Index iter = 0;
    for (; iter < opt.max_iterations; ++iter) {
        // working set selection (second order information)
        double gmax = -std::numeric_limits<double>::infinity();
        Index i = m;
        for (Index t = 0; t < m; ++t) {
            if (!in_up(t)) continue;
            const double v = -y[t] * G(static_cast<Eigen::Index>(t));
            if (v > gmax) {
                gmax = v;
                i = t;
            }
        }
        double gmin = std::numeric_limits<double>::infinity();
        Index j = m;
        double best_obj = std::numeric_limits<double>::infinity();
        for (Index t = 0; t < m; ++t) {
            if (!in_low(t)) continue;
            const double v = -y[t] * G(static_cast<Eigen::Index>(t));
            gmin = std::min(gmin, v);
            if (i == m) continue;
            const double b = gmax - v;
            if (b > 0.0) {
                double quad = Q(i, i) + Q(t, t) - 2.0 * y[i] * y[t] * Q(i, t);
                if (quad <= 0.0) quad = tau;
                const double obj = -(b * b) / quad;
                if (obj <= best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if (i == m || j == m || gmax - gmin < opt.tolerance) break;

        // two-variable analytic update
        const auto ei = static_cast<Eigen::Index>(i);
        const auto ej = static_cast<Eigen::Index>(j);
        const double old_ai = a(ei);
        const double old_aj = a(ej);
        if (y[i] != y[j]) {
            double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
            if (quad <= 0.0) quad = tau;
            const double delta = (-G(ei) - G(ej)) / quad;
            const double diff = a(ei) - a(ej);
            a(ei) += delta;
            a(ej) += delta;
            if (diff > 0.0) {
                if (a(ej) < 0.0) {
                    a(ej) = 0.0;
                    a(ei) = diff;
                }
            } else if (a(ei) < 0.0) {
                a(ei) = 0.0;
                a(ej) = -diff;
            }
            if (diff > 0.0) {
                if (a(ei) > C) {
                    a(ei) = C;
                    a(ej) = C - diff;
                }
            } else if (a(ej) > C) {
                a(ej) = C;
                a(ei) = C + diff;
            }
        } else {
            double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
            if (quad <= 0.0) quad = tau;
            const double delta = (G(ei) - G(ej)) / quad;
            const double sum = a(ei) + a(ej);
            a(ei) -= delta;
            a(ej) += delta;
            if (sum > C) {
                if (a(ei) > C) {
                    a(ei) = C;
                    a(ej) = sum - C;
                }
            } else if (a(ej) < 0.0) {
                a(ej) = 0.0;
                a(ei) = sum;
            }
            if (sum > C) {
                if (a(ej) > C) {
                    a(ej) = C;
                    a(ei) = sum - C;
                }
            } else if (a(ei) < 0.0) {
                a(ei) = 0.0;
                a(ej) = sum;
            }
        }
        const double dai = a(ei) - old_ai;
        const double daj = a(ej) - old_aj;
        for (Index t = 0; t < m; ++t) {
            G(static_cast<Eigen::Index>(t)) += Q(t, i) * dai + Q(t, j) * daj;
        }
    }
    sol.iterations = iter;

    // rho: average over free variables, else midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    Index n_free = 0;
    for (Index t = 0; t < m; ++t) {
        const double yg = y[t] * G(static_cast<Eigen::Index>(t));
        if (is_upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (is_lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    sol.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

    // 0.5 a'Qa - e'a = 0.5 a'(G - e)
    double obj = 0.0;
    for (Index t = 0; t < m; ++t) obj += a(static_cast<Eigen::Index>(t)) * (G(static_cast<Eigen::Index>(t)) - 1.0);
    sol.objective = 0.5 * obj;
    return sol;
}

/// Platt sigmoid fit with smoothed targets (Newton method with backtracking).
/// `labels` are 0/1 with 1 the positive class.
inline PlattParams fit_platt(const Vector& dec, const std::vector<int>& labels) {
    const Index m = labels.size();
    double prior1 = 0.0;
    for (int v : labels) prior1 += (v == 1);
    const double prior0 = static_cast<double>(m) - prior1;

    constexpr Index max_iter = 100;
    constexpr double min_step = 1e-10;
    constexpr double sigma = 1e-12;
    constexpr double eps = 1e-5;
    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(m);
    for (Index i = 0; i < m; ++i) t[i] = labels[i] == 1 ? hi : lo;

    double A = 0.0;
    double B = std::log((prior0 + 1.0) / (prior1 + 1.0));
    auto objective = [&](double a, double b) {
        double f = 0.0;
        for (Index i = 0; i < m; ++i) {
            const double fApB = dec(static_cast<Eigen::Index>(i)) * a + b;
            if (fApB >= 0.0) f += t[i] * fApB + std::log1p(std::exp(-fApB));
            else f += (t[i] - 1.0) * fApB + std::log1p(std::exp(fApB));
        }
        return f;
    };
    double fval = objective(A, B);

    for (Index it = 0; it < max_iter; ++it) {
        double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (Index i = 0; i < m; ++i) {
            const double di = dec(static_cast<Eigen::Index>(i));
            const double fApB = di * A + B;
            double p, q;
            if (fApB >= 0.0) {
                p = std::exp(-fApB) / (1.0 + std::exp(-fApB));
                q = 1.0 / (1.0 + std::exp(-fApB));
            } else {
                p = 1.0 / (1.0 + std::exp(fApB));
                q = std::exp(fApB) / (1.0 + std::exp(fApB));
            }
            const double d2 = p * q;
            h11 += di * di * d2;
            h22 += d2;
            h21 += di * d2;
            const double d1 = t[i] - p;
            g1 += di * d1;
            g2 += d1;
        }
        if (std::abs(g1) < eps && std::abs(g2) < eps) break;

        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;

        double step = 1.0;
        while (step >= min_step) {
            const double newA = A + step * dA;
            const double newB = B + step * dB;
            const double newf = objective(newA, newB);
            if (newf < fval + 0.0001 * step * gd) {
                A = newA;
                B = newB;
                fval = newf;
                break;
            }
            step /= 2.0;
        }
        if (step < min_step) break;
    }
    return {A, B};
}

/// SVM plus sigmoid, or a smoothed class prior when no usable SVM exists.
struct CalibratedClassifier {
    std::optional<SvmModel> svm;
    PlattParams platt;
    double prior_p1 = 0.5;  // used when svm is empty
    std::vector<int> classes_seen;
    std::string diagnostic;
    Eigen::Index dim = 0;

    bool uses_prior() const { return !svm.has_value(); }

    std::array<double, 2> predict_proba(const Eigen::Ref<const Vector>& x) const {
        Matrix row = x.transpose();
        const double p1 = predict_p1(row)(0);
        return {1.0 - p1, p1};
    }

    /// P(anomaly | x) for every row of X.
    Vector predict_p1(const Matrix& X) const {
        if (uses_prior()) {
            if (X.cols() != dim) throw ConfigError("classifier: dimension mismatch");
            return Vector::Constant(X.rows(), prior_p1);
        }
        const Vector v = svm->decision_values(X);
        Vector out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = platt.p1(v(i));
        return out;
    }
};

inline double decision_value(const SvmModel& model, const Eigen::Ref<const Vector>& x) {
    return model.decision_value(x);
}

inline std::array<double, 2> predict_proba(const CalibratedClassifier& clf, const Eigen::Ref<const Vector>& x) {
    return clf.predict_proba(x);
}

/// Train on rows X with labels y in {0, 1}. With a single class present the
/// result is the prior (m+1)/(m+2) for that class; otherwise an SVM is solved
/// on canonically ordered rows and Platt-calibrated on its training decision
/// values. A non-negative Platt slope also falls back to the prior.
inline CalibratedClassifier train(const Matrix& X, const std::vector<int>& y, const KernelParams& params,
                                  const SmoOptions& opt = {}) {
    const Index m = y.size();
    if (m == 0) throw DataError("train: empty training set");
    if (static_cast<Index>(X.rows()) != m) throw ConfigError("train: row/label count mismatch");
    params.validate();
    double n_pos = 0.0;
    for (int v : y) {
        if (v != 0 && v != 1) throw DataError("train: labels must be 0 or 1");
        n_pos += v;
    }
    CalibratedClassifier clf;
    clf.dim = X.cols();
    clf.prior_p1 = (n_pos + 1.0) / (static_cast<double>(m) + 2.0);
    if (n_pos < static_cast<double>(m)) clf.classes_seen.push_back(0);
    if (n_pos > 0.0) clf.classes_seen.push_back(1);
    if (clf.classes_seen.size() < 2) {
        clf.diagnostic = "single class in training set; using smoothed prior";
        return clf;
    }

    const IndexList order = detail::canonical_row_order(X, y);
    const Matrix Xs = gather_rows(X, order);
    std::vector<double> ys(m);
    std::vector<int> ys01(m);
    for (Index i = 0; i < m; ++i) {
        ys01[i] = y[order[i]];
        ys[i] = ys01[i] == 1 ? 1.0 : -1.0;
    }
    const auto mm = static_cast<Eigen::Index>(m);
    Matrix K(mm, mm);
    for (Eigen::Index i = 0; i < mm; ++i) {
        K(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            K(i, j) = K(j, i) = std::exp(-params.gamma * (Xs.row(i) - Xs.row(j)).squaredNorm());
        }
    }
    const SmoSolution sol = solve_smo(K, ys, params.C, opt);

    SvmModel svm;
    svm.params = params;
    svm.bias = -sol.rho;
    svm.iterations = sol.iterations;
    svm.dual_objective = sol.objective;
    IndexList sv;
    for (Index i = 0; i < m; ++i) {
        if (sol.alpha(static_cast<Eigen::Index>(i)) > 0.0) sv.push_back(i);
    }
    if (sv.empty()) {
        clf.diagnostic = "solver returned no support vectors; using smoothed prior";
        return clf;
    }
    svm.support_vectors = gather_rows(Xs, sv);
    svm.dual_weights.resize(static_cast<Eigen::Index>(sv.size()));
    for (Index s = 0; s < sv.size(); ++s) {
        svm.dual_weights(static_cast<Eigen::Index>(s)) = sol.alpha(static_cast<Eigen::Index>(sv[s])) * ys[sv[s]];
    }

    const Vector dec = svm.decision_values(Xs);
    const PlattParams platt = fit_platt(dec, ys01);
    if (!(platt.A < 0.0)) {
        clf.diagnostic = "Platt slope is non-negative; using smoothed prior";
        return clf;
    }
    clf.svm = std::move(svm);
    clf.platt = platt;
    return clf;
}

inline nlohmann::json classifier_to_json(const CalibratedClassifier& clf) {
    nlohmann::json j;
    j["d"] = clf.dim;
    j["prior_p1"] = clf.prior_p1;
    j["classes_seen"] = clf.classes_seen;
    j["diagnostic"] = clf.diagnostic;
    if (clf.svm) {
        const auto& s = *clf.svm;
        nlohmann::json sv = nlohmann::json::array();
        for (Eigen::Index r = 0; r < s.support_vectors.rows(); ++r) {
            std::vector<double> row(static_cast<Index>(s.support_vectors.cols()));
            for (Eigen::Index c = 0; c < s.support_vectors.cols(); ++c) row[static_cast<Index>(c)] = s.support_vectors(r, c);
            sv.push_back(row);
        }
        j["svm"] = {{"support_vectors", sv},
                    {"dual_weights", std::vector<double>(s.dual_weights.data(), s.dual_weights.data() + s.dual_weights.size())},
                    {"bias", s.bias},
                    {"gamma", s.params.gamma},
                    {"C", s.params.C}};
        j["platt"] = {{"A", clf.platt.A}, {"B", clf.platt.B}};
    }
    return j;
}

inline CalibratedClassifier classifier_from_json(const nlohmann::json& j) {
    CalibratedClassifier clf;
    clf.dim = j.at("d").get<Eigen::Index>();
    clf.prior_p1 = j.at("prior_p1").get<double>();
    clf.classes_seen = j.at("classes_seen").get<std::vector<int>>();
    clf.diagnostic = j.value("diagnostic", std::string{});
    if (j.contains("svm")) {
        const auto& s = j.at("svm");
        SvmModel svm;
        const auto rows = s.at("support_vectors").get<std::vector<std::vector<double>>>();
        svm.support_vectors.resize(static_cast<Eigen::Index>(rows.size()), clf.dim);
        for (Index r = 0; r < rows.size(); ++r) {
            if (static_cast<Eigen::Index>(rows[r].size()) != clf.dim) throw DataError("classifier JSON: bad support vector");
            for (Index c = 0; c < rows[r].size(); ++c) {
                svm.support_vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
        }
        const auto w = s.at("dual_weights").get<std::vector<double>>();
        svm.dual_weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
        svm.bias = s.at("bias").get<double>();
        svm.params.gamma = s.at("gamma").get<double>();
        svm.params.C = s.at("C").get<double>();
        clf.svm = std::move(svm);
        clf.platt.A = j.at("platt").at("A").get<double>();
        clf.platt.B = j.at("platt").at("B").get<double>();
    }
    return clf;
}

}  // namespace alad
