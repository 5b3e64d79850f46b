#pragma once

// The active-learning loop: session state, batch proposal, label ingestion
// and retraining, plus the repeated-run experiment harness with a
// ground-truth oracle.

#include "alad/classifier.hpp"
#include "alad/core.hpp"
#include "alad/dataset.hpp"
#include "alad/metrics.hpp"
#include "alad/mixture.hpp"
#include "alad/strategies.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace alad {

/// Raised when submitted answers do not match the pending batch or carry invalid labels.
class AnswerError : public Error {
public:
    using Error::Error;
};

enum class StrategyKind { adaptive, random, max_entropy, kmedoids, representative, informative };

inline std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::adaptive: return "adaptive";
        case StrategyKind::random: return "random";
        case StrategyKind::max_entropy: return "max_entropy";
        case StrategyKind::kmedoids: return "kmedoids";
        case StrategyKind::representative: return "representative";
        case StrategyKind::informative: return "informative";
    }
    return "unknown";
}

inline StrategyKind strategy_from_string(const std::string& s) {
    for (auto k : {StrategyKind::adaptive, StrategyKind::random, StrategyKind::max_entropy, StrategyKind::kmedoids,
                   StrategyKind::representative, StrategyKind::informative}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown strategy '" + s + "'");
}

struct SessionConfig {
    StrategyKind strategy = StrategyKind::adaptive;
    BalancingParams balancing;  // balancing.b is the batch size for every strategy
    Index M = 4;
    Index T = 20;
    double test_fraction = 0.2;  // 0 disables the held-out partition (no PRAUC)
    GmmFitConfig gmm;
    double C = 1.0;
    Index kmeans_max_iters = 300;
    Index kmedoids_max_iters = 100;

    Index b() const { return balancing.b; }

    void validate() const {
        balancing.validate();
        gmm.validate();
        if (M < 2 || M % 2 != 0) throw ConfigError("session: M must be an even count >= 2");
        if (T < 1) throw ConfigError("session: T must be >= 1");
        if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("session: test_fraction must be in [0, 1)");
        if (!(C > 0.0)) throw ConfigError("session: C must be positive");
    }
};

inline void to_json(nlohmann::json& j, const SessionConfig& c) {
    j = {{"strategy", to_string(c.strategy)},
         {"b", c.balancing.b},
         {"c", c.balancing.c},
         {"T1", c.balancing.T1},
         {"T2", c.balancing.T2},
         {"M", c.M},
         {"T", c.T},
         {"test_fraction", c.test_fraction},
         {"gmm", c.gmm},
         {"C", c.C},
         {"kmeans_max_iters", c.kmeans_max_iters},
         {"kmedoids_max_iters", c.kmedoids_max_iters}};
}

inline void from_json(const nlohmann::json& j, SessionConfig& c) {
    c = SessionConfig{};
    if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    c.balancing = j.get<BalancingParams>();
    c.M = j.value("M", c.M);
    c.T = j.value("T", c.T);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (j.contains("gmm")) c.gmm = j.at("gmm").get<GmmFitConfig>();
    c.C = j.value("C", c.C);
    c.kmeans_max_iters = j.value("kmeans_max_iters", c.kmeans_max_iters);
    c.kmedoids_max_iters = j.value("kmedoids_max_iters", c.kmedoids_max_iters);
}

struct ExperimentConfig {
    std::string dataset;
    SessionConfig session;
    Index runs = 50;
    std::uint64_t base_seed = 0;

    void validate() const {
        session.validate();
        if (runs < 1) throw ConfigError("experiment: runs must be >= 1");
    }
};

struct ParamChange {
    Index at_iteration = 0;
    BalancingParams before;
    BalancingParams after;
};

struct ALSession {
    std::string id;
    std::string dataset_ref;
    SessionConfig config;
    std::uint64_t seed = 0;
    Index t = 1;
    std::map<Index, int> L;
    IndexList U;     // sorted
    IndexList test;  // sorted; empty in human mode
    KernelParams kernel;
    CalibratedClassifier model;
    std::optional<QueryBatch> pending;
    std::vector<MetricsRecord> history;
    std::vector<ParamChange> param_log;

    Index completed_iterations() const { return t - 1; }
    bool exhausted() const { return U.empty(); }
    bool budget_spent() const { return completed_iterations() >= config.T; }
};

// Seed streams derived from the session seed.
inline constexpr std::uint64_t kSplitStream = 11;
inline constexpr std::uint64_t kInitStream = 12;
inline constexpr std::uint64_t kBatchStream = 13;

namespace detail {

inline std::vector<int> labels_of(const std::map<Index, int>& L, IndexList& rows) {
    rows.clear();
    std::vector<int> y;
    for (const auto& [i, label] : L) {
        rows.push_back(i);
        y.push_back(label);
    }
    return y;
}

inline void retrain(ALSession& s, const Dataset& ds) {
    IndexList rows;
    const auto y = labels_of(s.L, rows);
    s.model = train(gather_rows(ds.features, rows), y, s.kernel);
}

inline void check_dataset(const ALSession& s, const Dataset& ds) {
    if (!s.dataset_ref.empty() && !ds.name.empty() && s.dataset_ref != ds.name) {
        throw ConfigError("session bound to dataset '" + s.dataset_ref + "', got '" + ds.name + "'");
    }
}

}  // namespace detail

/// Metrics for the session's current state. PRAUC needs a test partition with at least one anomaly.
inline MetricsRecord evaluate(const ALSession& s, const Dataset& ds, double wall_time_ms = 0.0) {
    MetricsRecord r;
    r.iteration = s.completed_iterations();
    r.labels_used = s.L.size();
    r.wall_time_ms = wall_time_ms;
    for (const auto& [i, label] : s.L) r.anomalies_discovered += label == 1 ? 1 : 0;
    if (!s.test.empty()) {
        std::vector<int> y(s.test.size());
        bool any_pos = false;
        for (Index k = 0; k < s.test.size(); ++k) {
            y[k] = ds.labels[s.test[k]];
            any_pos = any_pos || y[k] == 1;
        }
        if (any_pos) r.prauc = prauc(s.model.predict_p1(gather_rows(ds.features, s.test)), y);
    }
    return r;
}

/// Split, seed the labeled set with M/2 instances per class, train the first
/// model and record iteration 0.
inline ALSession init_session(const Dataset& ds, const SessionConfig& cfg, std::uint64_t seed, std::string id = {}) {
    cfg.validate();
    ds.validate();
    if (!ds.has_both_classes()) throw DataError("init_session: dataset '" + ds.name + "' lacks one of the classes");
    const auto start = std::chrono::steady_clock::now();

    ALSession s;
    s.id = std::move(id);
    s.dataset_ref = ds.name;
    s.config = cfg;
    s.seed = seed;

    IndexList train_rows;
    if (cfg.test_fraction > 0.0) {
        auto split = stratified_split(ds, cfg.test_fraction, derive_seed(seed, kSplitStream));
        train_rows = std::move(split.train_indices);
        s.test = std::move(split.test_indices);
    } else {
        train_rows = iota_indices(ds.n());
    }
    const IndexList seeded = init_labeled(ds.labels, train_rows, cfg.M / 2, derive_seed(seed, kInitStream));
    for (Index i : seeded) s.L[i] = ds.labels[i];
    for (Index i : train_rows) {
        if (!s.L.count(i)) s.U.push_back(i);
    }
    std::sort(s.U.begin(), s.U.end());

    KernelParams kp = default_kernel_params(gather_rows(ds.features, train_rows));
    kp.C = cfg.C;
    s.kernel = kp;
    detail::retrain(s, ds);

    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    s.history.push_back(evaluate(s, ds, ms));
    return s;
}

/// Seed used for the batch proposed at iteration t.
inline std::uint64_t batch_seed(const ALSession& s) { return derive_seed(derive_seed(s.seed, kBatchStream), s.t); }

/// Select the next batch with the configured strategy and hold it as pending.
inline const QueryBatch& propose_batch(ALSession& s, const Dataset& ds) {
    detail::check_dataset(s, ds);
    if (s.pending) throw StateError("propose_batch: a batch is already pending");
    if (s.U.empty()) throw StateError("propose_batch: unlabeled pool is exhausted");
    const auto& cfg = s.config;
    const Index n = std::min(cfg.b(), s.U.size());
    const std::uint64_t seed = batch_seed(s);
    const Matrix& X = ds.features;

    QueryBatch q;
    switch (cfg.strategy) {
        case StrategyKind::adaptive:
            q = sample_adaptive(s.U, X, s.model, s.t, cfg.balancing, cfg.gmm, seed, cfg.kmeans_max_iters);
            break;
        case StrategyKind::random:
            q = sample_random(s.U, n, seed);
            break;
        case StrategyKind::max_entropy:
            q = sample_max_entropy(s.U, s.model, X, n);
            break;
        case StrategyKind::kmedoids:
            q = sample_kmedoids(s.U, X, n, seed, cfg.kmedoids_max_iters);
            break;
        case StrategyKind::representative:
            q = sample_representative(s.U, X, n, cfg.gmm, derive_seed(seed, kRepresentativeStream));
            q.allocation = {n, 0};
            break;
        case StrategyKind::informative:
            q = sample_informative(s.U, X, s.model, n, n, derive_seed(seed, kInformativeStream), cfg.kmeans_max_iters);
            q.allocation = {0, n};
            break;
    }
    s.pending = std::move(q);
    return *s.pending;
}

inline void cancel_batch(ALSession& s) {
    if (!s.pending) throw StateError("cancel_batch: no pending batch");
    s.pending.reset();
}

/// Check that answers cover exactly the pending batch with labels in {0, 1}.
inline void validate_answers(const ALSession& s, const std::map<Index, int>& answers) {
    if (!s.pending) throw StateError("submit_labels: no pending batch");
    const auto& idx = s.pending->indices;
    std::vector<std::string> problems;
    for (Index i : idx) {
        if (!answers.count(i)) problems.push_back("missing index " + std::to_string(i));
    }
    for (const auto& [i, label] : answers) {
        if (std::find(idx.begin(), idx.end(), i) == idx.end()) problems.push_back("index " + std::to_string(i) + " not in batch");
        if (label != 0 && label != 1) problems.push_back("invalid label for index " + std::to_string(i));
    }
    if (!problems.empty()) {
        std::string msg = "submit_labels:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw AnswerError(msg);
    }
}

/// Move the answered batch into L, retrain from scratch, advance t and record metrics.
/// Leaves the session untouched if validation fails.
inline const MetricsRecord& submit_labels(ALSession& s, const Dataset& ds, const std::map<Index, int>& answers) {
    detail::check_dataset(s, ds);
    validate_answers(s, answers);
    const auto start = std::chrono::steady_clock::now();

    ALSession next = s;
    for (const auto& [i, label] : answers) next.L[i] = label;
    IndexList taken = next.pending->indices;
    std::sort(taken.begin(), taken.end());
    IndexList rest;
    std::set_difference(next.U.begin(), next.U.end(), taken.begin(), taken.end(), std::back_inserter(rest));
    next.U = std::move(rest);
    next.pending.reset();
    detail::retrain(next, ds);
    ++next.t;
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    next.history.push_back(evaluate(next, ds, ms));
    s = std::move(next);
    return s.history.back();
}

/// Replace the balancing schedule between batches; the batch size stays fixed.
inline void set_balancing(ALSession& s, const BalancingParams& p) {
    if (s.pending) throw StateError("set_balancing: a batch is pending");
    p.validate();
    if (p.b != s.config.balancing.b) throw ConfigError("set_balancing: batch size cannot change mid-session");
    s.param_log.push_back({s.completed_iterations(), s.config.balancing, p});
    s.config.balancing = p;
}

/// Simulated annotator answering from ground truth, restricted to a universe of rows.
class Oracle {
public:
    Oracle(const std::vector<int>& truth, IndexList universe) : truth_(&truth), universe_(std::move(universe)) {
        std::sort(universe_.begin(), universe_.end());
    }

    std::map<Index, int> answer(const QueryBatch& q) const {
        std::map<Index, int> out;
        for (Index i : q.indices) {
            if (!std::binary_search(universe_.begin(), universe_.end(), i)) {
                throw StateError("oracle: index " + std::to_string(i) + " outside the session's pool");
            }
            out[i] = (*truth_)[i];
        }
        return out;
    }

private:
    const std::vector<int>* truth_;
    IndexList universe_;
};

inline Oracle make_oracle(const ALSession& s, const Dataset& ds) {
    IndexList universe = s.U;
    for (const auto& [i, label] : s.L) universe.push_back(i);
    return Oracle(ds.labels, std::move(universe));
}

// Snapshots -----------------------------------------------------------------

inline nlohmann::json session_to_json(const ALSession& s) {
    nlohmann::json L = nlohmann::json::array();
    for (const auto& [i, label] : s.L) L.push_back({i, label});
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& r : s.history) hist.push_back(record_to_json(r, true));
    nlohmann::json log = nlohmann::json::array();
    for (const auto& c : s.param_log) log.push_back({{"at_iteration", c.at_iteration}, {"before", c.before}, {"after", c.after}});
    return {{"id", s.id},
            {"dataset", s.dataset_ref},
            {"config", s.config},
            {"seed", s.seed},
            {"t", s.t},
            {"labeled", L},
            {"unlabeled", s.U},
            {"test", s.test},
            {"kernel", {{"gamma", s.kernel.gamma}, {"C", s.kernel.C}}},
            {"model", classifier_to_json(s.model)},
            {"pending", s.pending ? nlohmann::json(*s.pending) : nlohmann::json(nullptr)},
            {"history", hist},
            {"param_log", log}};
}

inline ALSession session_from_json(const nlohmann::json& j) {
    ALSession s;
    s.id = j.at("id").get<std::string>();
    s.dataset_ref = j.at("dataset").get<std::string>();
    s.config = j.at("config").get<SessionConfig>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.t = j.at("t").get<Index>();
    for (const auto& e : j.at("labeled")) s.L[e.at(0).get<Index>()] = e.at(1).get<int>();
    s.U = j.at("unlabeled").get<IndexList>();
    s.test = j.at("test").get<IndexList>();
    s.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    s.kernel.C = j.at("kernel").at("C").get<double>();
    s.model = classifier_from_json(j.at("model"));
    if (!j.at("pending").is_null()) s.pending = j.at("pending").get<QueryBatch>();
    for (const auto& r : j.at("history")) s.history.push_back(record_from_json(r));
    for (const auto& c : j.at("param_log")) {
        s.param_log.push_back({c.at("at_iteration").get<Index>(), c.at("before").get<BalancingParams>(),
                               c.at("after").get<BalancingParams>()});
    }
    return s;
}

// Experiments ---------------------------------------------------------------

struct RunResult {
    Index run = 0;
    std::uint64_t seed = 0;
    std::vector<MetricsRecord> records;
    bool truncated = false;  // pool exhausted before T iterations
};

/// One oracle-labeled run: T propose/answer/submit cycles or until the pool runs out.
inline RunResult run_single(const Dataset& ds, const SessionConfig& cfg, std::uint64_t seed, Index run = 0) {
    ALSession s = init_session(ds, cfg, seed);
    const Oracle oracle = make_oracle(s, ds);
    while (!s.budget_spent() && !s.exhausted()) {
        const auto& q = propose_batch(s, ds);
        submit_labels(s, ds, oracle.answer(q));
    }
    RunResult r;
    r.run = run;
    r.seed = seed;
    r.records = std::move(s.history);
    r.truncated = r.records.size() < cfg.T + 1;
    return r;
}

/// Run fn(0..n-1) on up to `workers` threads; results land in index order.
/// The first exception (lowest index) is rethrown after all tasks finish.
template <class Result>
std::vector<Result> parallel_map(Index n, Index workers, const std::function<Result(Index)>& fn) {
    std::vector<std::optional<Result>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<Index> next{0};
    auto worker = [&] {
        for (Index i = next++; i < n; i = next++) {
            try {
                slots[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const Index nthreads = std::max<Index>(1, std::min(workers, n));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (Index w = 0; w < nthreads; ++w) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<Result> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Runs r = 0..runs-1 with seed base_seed + r.
inline std::vector<RunResult> run_experiment(const Dataset& ds, const ExperimentConfig& cfg, Index workers = 1) {
    cfg.validate();
    return parallel_map<RunResult>(cfg.runs, workers, [&](Index r) {
        return run_single(ds, cfg.session, cfg.base_seed + r, r);
    });
}

struct SuiteCell {
    std::string dataset;
    StrategyKind strategy = StrategyKind::adaptive;
    RunResult result;
};

/// Every (dataset, strategy, run) cell of a comparison; strategies share per-run seeds.
/// Cells are ordered by dataset, then strategy, then run.
inline std::vector<SuiteCell> run_suite(const std::vector<const Dataset*>& datasets,
                                        const std::vector<StrategyKind>& strategies, const ExperimentConfig& base,
                                        Index workers = 1) {
    base.validate();
    struct Job {
        const Dataset* ds;
        StrategyKind strategy;
        Index run;
    };
    std::vector<Job> jobs;
    for (const Dataset* ds : datasets) {
        for (auto k : strategies) {
            for (Index r = 0; r < base.runs; ++r) jobs.push_back({ds, k, r});
        }
    }
    return parallel_map<SuiteCell>(jobs.size(), workers, [&](Index i) {
        const Job& job = jobs[i];
        SessionConfig cfg = base.session;
        cfg.strategy = job.strategy;
        return SuiteCell{job.ds->name, job.strategy, run_single(*job.ds, cfg, base.base_seed + job.run, job.run)};
    });
}

}  // namespace alad
