#pragma once

// HTTP session API for human-in-the-loop labeling. SessionService holds the
// sessions and implements every endpoint as a plain function returning a
// status and JSON body; mount() attaches it to a cpp-httplib server under /v1.

#include "alad/core.hpp"
#include "alad/dataset.hpp"
#include "alad/engine.hpp"
#include "alad/log.hpp"
#include "alad/results.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace alad {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

enum class SessionMode { human, replay };

inline std::string to_string(SessionMode m) { return m == SessionMode::human ? "human" : "replay"; }

class SessionService {
public:
    /// Sessions found in `state_dir` are restored; an empty path disables persistence.
    SessionService(DatasetManifest datasets, std::filesystem::path state_dir = {})
        : manifest_(std::move(datasets)), state_dir_(std::move(state_dir)) {
        if (!state_dir_.empty()) {
            std::filesystem::create_directories(state_dir_);
            restore();
        }
    }

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    ApiResponse health() const { return {200, {{"status", "ok"}}}; }

    ApiResponse schema() const { return {200, schema_document()}; }

    ApiResponse list_sessions() const {
        std::lock_guard lock(registry_mu_);
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& [id, e] : sessions_) ids.push_back(id);
        return {200, {{"sessions", ids}}};
    }

    ApiResponse create_session(const nlohmann::json& body) {
        if (!body.is_object()) return error(400, "request body must be a JSON object");
        SessionConfig cfg;
        SessionMode mode = SessionMode::human;
        std::uint64_t seed = 0;
        std::string dataset;
        try {
            static const std::set<std::string> allowed = {"dataset", "strategy", "mode", "b",  "M",
                                                          "T",       "c",        "T1",   "T2", "seed"};
            for (const auto& [k, v] : body.items()) {
                (void)v;
                if (!allowed.count(k)) return error(400, "unknown field '" + k + "'");
            }
            dataset = body.at("dataset").get<std::string>();
            if (body.contains("strategy")) cfg.strategy = strategy_from_string(body["strategy"].get<std::string>());
            cfg.balancing.b = body.value("b", cfg.balancing.b);
            cfg.balancing.c = body.value("c", cfg.balancing.c);
            cfg.balancing.T1 = body.value("T1", cfg.balancing.T1);
            cfg.balancing.T2 = body.value("T2", cfg.balancing.T2);
            cfg.M = body.value("M", cfg.M);
            cfg.T = body.value("T", cfg.T);
            seed = body.value("seed", std::uint64_t{0});
            const std::string m = body.value("mode", std::string("human"));
            if (m == "human") mode = SessionMode::human;
            else if (m == "replay") mode = SessionMode::replay;
            else return error(400, "mode must be 'human' or 'replay'");
            cfg.test_fraction = mode == SessionMode::replay ? 0.2 : 0.0;
            cfg.validate();
        } catch (const nlohmann::json::exception& ex) {
            return error(400, std::string("invalid session parameters: ") + ex.what());
        } catch (const ConfigError& ex) {
            return error(400, ex.what());
        }

        std::shared_ptr<const DatasetPair> data;
        try {
            data = dataset_pair(dataset);
        } catch (const DataError& ex) {
            return error(404, ex.what());
        }

        auto entry = std::make_shared<Entry>();
        entry->mode = mode;
        entry->data = data;
        try {
            entry->session = init_session(data->standardized, cfg, seed, next_id());
        } catch (const Error& ex) {
            return error(400, ex.what());
        }
        update_finished(*entry);
        std::lock_guard lock(entry->mu);
        if (auto r = persist(*entry)) return *r;
        {
            std::lock_guard reg(registry_mu_);
            sessions_[entry->session.id] = entry;
        }
        log::info("created session " + entry->session.id + " on " + dataset);
        return {201, resource(*entry)};
    }

    ApiResponse get_session(const std::string& id) const {
        auto e = find(id);
        if (!e) return not_found(id);
        std::lock_guard lock(e->mu);
        return {200, resource(*e)};
    }

    ApiResponse propose(const std::string& id) {
        auto e = find(id);
        if (!e) return not_found(id);
        std::unique_lock lock(e->mu, std::try_to_lock);
        if (!lock.owns_lock()) return error(409, "session is busy with another request");
        if (e->session.pending) return error(409, "a batch is already awaiting labels");
        if (e->finished) return error(410, "session finished: unlabeled pool or iteration budget exhausted");
        State next = e->copy();
        try {
            propose_batch(next.session, next.data->standardized);
        } catch (const Error& ex) {
            return error(500, ex.what());
        }
        if (auto r = persist(next)) return *r;
        e->assign(std::move(next));
        return {200, batch_payload(*e)};
    }

    ApiResponse submit(const std::string& id, const nlohmann::json& body) {
        auto e = find(id);
        if (!e) return not_found(id);
        std::map<Index, int> answers;
        if (!body.is_object() || !body.contains("labels") || !body["labels"].is_object()) {
            return error(400, "body must be {\"labels\": {index: 0|1, ...}}");
        }
        std::vector<std::string> bad;
        for (const auto& [k, v] : body["labels"].items()) {
            const auto idx = detail::parse_real(k);
            if (!idx || *idx < 0 || *idx != std::floor(*idx)) {
                bad.push_back("bad index '" + k + "'");
                continue;
            }
            if (!v.is_number_integer() || (v.get<long long>() != 0 && v.get<long long>() != 1)) {
                bad.push_back("invalid label for index " + k);
                continue;
            }
            answers[static_cast<Index>(*idx)] = v.get<int>();
        }
        std::unique_lock lock(e->mu, std::try_to_lock);
        if (!lock.owns_lock()) return error(409, "session is busy with another request");
        if (!e->session.pending) return error(409, "no batch is awaiting labels");
        if (!bad.empty()) return error(422, "labels rejected", bad);
        State next = e->copy();
        try {
            submit_labels(next.session, next.data->standardized, answers);
        } catch (const AnswerError& ex) {
            return error(422, ex.what());
        } catch (const Error& ex) {
            return error(500, ex.what());
        }
        update_finished(next);
        if (auto r = persist(next)) return *r;
        e->assign(std::move(next));
        nlohmann::json out = record_to_json(e->session.history.back(), true);
        out["status"] = status(*e);
        return {200, out};
    }

    ApiResponse patch_params(const std::string& id, const nlohmann::json& body) {
        auto e = find(id);
        if (!e) return not_found(id);
        if (!body.is_object()) return error(400, "request body must be a JSON object");
        std::unique_lock lock(e->mu, std::try_to_lock);
        if (!lock.owns_lock()) return error(409, "session is busy with another request");
        if (e->session.pending) return error(409, "parameters cannot change while a batch awaits labels");
        BalancingParams p = e->session.config.balancing;
        try {
            for (const auto& [k, v] : body.items()) {
                if (k == "c") p.c = v.get<double>();
                else if (k == "T1") p.T1 = v.get<Index>();
                else if (k == "T2") p.T2 = v.get<Index>();
                else return error(400, "unknown field '" + k + "'");
            }
            p.validate();
        } catch (const nlohmann::json::exception& ex) {
            return error(400, std::string("invalid parameters: ") + ex.what());
        } catch (const ConfigError& ex) {
            return error(400, ex.what());
        }
        State next = e->copy();
        set_balancing(next.session, p);
        if (auto r = persist(next)) return *r;
        e->assign(std::move(next));
        return {200, resource(*e)};
    }

    ApiResponse metrics(const std::string& id) const {
        auto e = find(id);
        if (!e) return not_found(id);
        std::lock_guard lock(e->mu);
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : e->session.history) recs.push_back(record_to_json(r, true));
        nlohmann::json changes = nlohmann::json::array();
        for (const auto& c : e->session.param_log) {
            changes.push_back({{"at_iteration", c.at_iteration}, {"before", c.before}, {"after", c.after}});
        }
        return {200,
                {{"session", id},
                 {"records", recs},
                 {"param_changes", changes},
                 {"pool", pool_json(e->session)},
                 {"metrics_available", !e->session.test.empty()}}};
    }

    /// Engine state of a session, for inspection and tests.
    std::optional<ALSession> engine_state(const std::string& id) const {
        auto e = find(id);
        if (!e) return std::nullopt;
        std::lock_guard lock(e->mu);
        return e->session;
    }

    /// Register the /v1 routes on a server.
    void mount(httplib::Server& svr) {
        auto send = [](httplib::Response& res, const ApiResponse& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        auto parse = [](const httplib::Request& req) -> std::optional<nlohmann::json> {
            if (req.body.empty()) return nlohmann::json::object();
            try {
                return nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                return std::nullopt;
            }
        };
        auto guarded = [send](httplib::Response& res, auto&& fn) {
            try {
                send(res, fn());
            } catch (const std::exception& ex) {
                send(res, error(500, ex.what()));
            }
        };
        svr.Get("/v1/health", [=, this](const httplib::Request&, httplib::Response& res) { send(res, health()); });
        svr.Get("/v1/schema", [=, this](const httplib::Request&, httplib::Response& res) { send(res, schema()); });
        svr.Get("/v1/sessions", [=, this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { return list_sessions(); });
        });
        svr.Post("/v1/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse(req);
            if (!body) return send(res, error(400, "malformed JSON"));
            guarded(res, [&] { return create_session(*body); });
        });
        svr.Get(R"(/v1/sessions/([A-Za-z0-9_-]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return get_session(req.matches[1]); });
        });
        svr.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/batch)", [=, this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return propose(req.matches[1]); });
        });
        svr.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/labels)", [=, this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse(req);
            if (!body) return send(res, error(400, "malformed JSON"));
            guarded(res, [&] { return submit(req.matches[1], *body); });
        });
        svr.Patch(R"(/v1/sessions/([A-Za-z0-9_-]+)/params)", [=, this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse(req);
            if (!body) return send(res, error(400, "malformed JSON"));
            guarded(res, [&] { return patch_params(req.matches[1], *body); });
        });
        svr.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/metrics)", [=, this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return metrics(req.matches[1]); });
        });
    }

private:
    struct DatasetPair {
        Dataset raw;
        Dataset standardized;
    };

    struct State {
        ALSession session;
        SessionMode mode = SessionMode::human;
        bool finished = false;
        std::shared_ptr<const DatasetPair> data;
    };

    struct Entry : State {
        mutable std::mutex mu;

        State copy() const { return static_cast<const State&>(*this); }
        void assign(State&& o) { static_cast<State&>(*this) = std::move(o); }
    };

    static ApiResponse error(int status, const std::string& msg, const std::vector<std::string>& details = {}) {
        nlohmann::json body = {{"error", msg}};
        if (!details.empty()) body["details"] = details;
        return {status, body};
    }

    static ApiResponse not_found(const std::string& id) { return error(404, "unknown session '" + id + "'"); }

    static void update_finished(State& e) {
        e.finished = !e.session.pending && (e.session.exhausted() || e.session.budget_spent());
    }

    static std::string status(const State& e) {
        if (e.session.pending) return "awaiting_labels";
        return e.finished ? "finished" : "awaiting_batch";
    }

    static nlohmann::json pool_json(const ALSession& s) {
        return {{"labeled", s.L.size()}, {"unlabeled", s.U.size()}, {"test", s.test.size()}};
    }

    nlohmann::json batch_payload(const State& e) const {
        const auto& s = e.session;
        const auto& q = *s.pending;
        const Matrix& X = e.data->standardized.features;
        const Matrix& R = e.data->raw.features;
        const Vector p1 = s.model.predict_p1(gather_rows(X, q.indices));
        nlohmann::json entries = nlohmann::json::array();
        for (Index k = 0; k < q.size(); ++k) {
            const auto row = static_cast<Eigen::Index>(q.indices[k]);
            std::vector<double> x(static_cast<Index>(X.cols())), raw(static_cast<Index>(R.cols()));
            for (Eigen::Index c = 0; c < X.cols(); ++c) x[static_cast<Index>(c)] = X(row, c);
            for (Eigen::Index c = 0; c < R.cols(); ++c) raw[static_cast<Index>(c)] = R(row, c);
            entries.push_back({{"index", q.indices[k]},
                               {"features", x},
                               {"raw_features", raw},
                               {"p_anomaly", p1(static_cast<Eigen::Index>(k))},
                               {"provenance", to_string(q.provenance[k])},
                               {"score", q.scores[k]}});
        }
        return {{"session", s.id},
                {"iteration", s.t},
                {"allocation", {{"n_repr", q.allocation.n_repr}, {"n_info", q.allocation.n_info}}},
                {"feature_names", e.data->raw.feature_names},
                {"entries", entries}};
    }

    nlohmann::json resource(const State& e) const {
        const auto& s = e.session;
        const BatchAllocation next = balance(s.t, s.config.balancing);
        nlohmann::json j = {{"id", s.id},
                            {"dataset", s.dataset_ref},
                            {"status", status(e)},
                            {"iteration", s.t},
                            {"mode", to_string(e.mode)},
                            {"strategy", to_string(s.config.strategy)},
                            {"balancing", s.config.balancing},
                            {"M", s.config.M},
                            {"T", s.config.T},
                            {"seed", s.seed},
                            {"next_allocation", {{"n_repr", next.n_repr}, {"n_info", next.n_info}}},
                            {"pending", s.pending ? batch_payload(e) : nlohmann::json(nullptr)},
                            {"pool", pool_json(s)},
                            {"metrics_available", !s.test.empty()}};
        if (!s.history.empty()) j["latest"] = record_to_json(s.history.back(), true);
        return j;
    }

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(registry_mu_);
        const auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    std::shared_ptr<const DatasetPair> dataset_pair(const std::string& name) {
        std::lock_guard lock(data_mu_);
        auto it = datasets_.find(name);
        if (it != datasets_.end()) return it->second;
        auto pair = std::make_shared<DatasetPair>();
        pair->raw = manifest_.load_raw(name);
        pair->standardized = standardize(pair->raw);
        datasets_[name] = pair;
        return pair;
    }

    std::string next_id() {
        std::ostringstream ss;
        ss << "s" << std::setw(6) << std::setfill('0') << ++counter_;
        return ss.str();
    }

    /// Write-temp-then-rename snapshot of one session. Returns an error response on failure.
    std::optional<ApiResponse> persist(const State& e) const {
        if (state_dir_.empty()) return std::nullopt;
        const nlohmann::json doc = {{"mode", to_string(e.mode)},
                                    {"finished", e.finished},
                                    {"session", session_to_json(e.session)}};
        const auto final_path = state_dir_ / (e.session.id + ".json");
        const auto tmp_path = state_dir_ / (e.session.id + ".json.tmp");
        try {
            {
                std::ofstream out(tmp_path, std::ios::trunc);
                out << doc.dump();
                out.flush();
                if (!out) throw DataError("write failed");
            }
            std::filesystem::rename(tmp_path, final_path);
        } catch (const std::exception& ex) {
            return error(500, "could not persist session " + e.session.id + ": " + ex.what());
        }
        return std::nullopt;
    }

    void restore() {
        for (const auto& f : std::filesystem::directory_iterator(state_dir_)) {
            if (f.path().extension() != ".json") continue;
            try {
                std::ifstream in(f.path());
                const auto doc = nlohmann::json::parse(in);
                auto entry = std::make_shared<Entry>();
                entry->session = session_from_json(doc.at("session"));
                entry->mode = doc.at("mode").get<std::string>() == "replay" ? SessionMode::replay : SessionMode::human;
                entry->finished = doc.at("finished").get<bool>();
                entry->data = dataset_pair(entry->session.dataset_ref);
                const auto& id = entry->session.id;
                if (id.size() > 1 && id[0] == 's') {
                    counter_ = std::max<std::uint64_t>(counter_.load(), std::stoull(id.substr(1)));
                }
                sessions_[id] = entry;
                log::info("restored session " + id);
            } catch (const std::exception& ex) {
                log::warn("skipping snapshot " + f.path().string() + ": " + ex.what());
            }
        }
    }

    DatasetManifest manifest_;
    std::filesystem::path state_dir_;
    mutable std::mutex registry_mu_;
    std::mutex data_mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::map<std::string, std::shared_ptr<const DatasetPair>> datasets_;
    std::atomic<std::uint64_t> counter_{0};
};

}  // namespace alad
