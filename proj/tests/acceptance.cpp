// Acceptance runner: one PASS/FAIL line per acceptance criterion.
//
// usage: acceptance [name-substring ...]
// With arguments, only criteria whose name contains one of them are run.

#include "alad/classifier.hpp"
#include "alad/engine.hpp"
#include "alad/metrics.hpp"
#include "alad/mixture.hpp"
#include "alad/results.hpp"
#include "alad/service.hpp"
#include "alad/strategies.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

extern char** environ;

using namespace alad;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failed checks; the first few messages become the outcome detail.
class Tally {
public:
    void check(bool ok, const std::string& what) {
        ++checks_;
        if (!ok) {
            ++failed_;
            if (msgs_.size() < 3) msgs_.push_back(what);
        }
    }
    Outcome outcome(const std::string& summary) const {
        std::string d = summary;
        for (const auto& m : msgs_) d += "; " + m;
        if (failed_) d += " (" + std::to_string(failed_) + "/" + std::to_string(checks_) + " checks failed)";
        return {failed_ == 0, d};
    }

private:
    int checks_ = 0;
    int failed_ = 0;
    std::vector<std::string> msgs_;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

Index hardware_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

const DatasetManifest& data_manifest() {
    static const DatasetManifest m = DatasetManifest::from_file(fs::path(ALAD_SOURCE_DIR) / "data" / "manifest.json");
    return m;
}

fs::path scratch(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("alad_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Per-iteration mean of one metric over the runs of a strategy.
std::vector<double> mean_curve(const std::vector<SuiteCell>& cells, const std::string& dataset, StrategyKind k,
                               const std::function<double(const MetricsRecord&)>& metric) {
    std::vector<double> sum;
    std::vector<int> n;
    for (const auto& c : cells) {
        if (c.dataset != dataset || c.strategy != k) continue;
        for (const auto& r : c.result.records) {
            if (sum.size() <= r.iteration) sum.resize(r.iteration + 1, 0.0), n.resize(r.iteration + 1, 0);
            sum[r.iteration] += metric(r);
            ++n[r.iteration];
        }
    }
    for (Index i = 0; i < sum.size(); ++i) sum[i] /= n[i];
    return sum;
}

const RunResult& cell_run(const std::vector<SuiteCell>& cells, const std::string& dataset, StrategyKind k, Index run) {
    for (const auto& c : cells) {
        if (c.dataset == dataset && c.strategy == k && c.result.run == run) return c.result;
    }
    throw StateError("missing cell");
}

std::int64_t ulps_apart(double a, double b) {
    std::int64_t ia, ib;
    std::memcpy(&ia, &a, sizeof a);
    std::memcpy(&ib, &b, sizeof b);
    return ia > ib ? ia - ib : ib - ia;
}

double prauc_of(const MetricsRecord& r) { return r.prauc.value_or(0.0); }

// Criteria ----------------------------------------------------------------------

Outcome balance_table() {
    std::ifstream in(fs::path(ALAD_SOURCE_DIR) / "tests" / "data" / "balance_golden.json");
    const auto rows = json::parse(in);
    Tally t;
    for (const auto& r : rows) {
        const BalancingParams p{r.at("b").get<Index>(), r.at("c").get<double>(), r.at("T1").get<Index>(),
                                r.at("T2").get<Index>()};
        const auto a = balance(r.at("t").get<Index>(), p);
        const BatchAllocation want{r.at("n_repr").get<Index>(), r.at("n_info").get<Index>()};
        t.check(a == want, "row t=" + std::to_string(r.at("t").get<Index>()) + " c=" + fmt(p.c, 1));
    }
    t.check(balance(1, {20, 0.0, 0, 5}) == BatchAllocation{19, 1}, "t=1 -> (19,1)");
    t.check(balance(6, {20, 0.0, 0, 5}) == BatchAllocation{0, 20}, "t=6 -> (0,20)");
    return t.outcome(std::to_string(rows.size()) + " rows exact");
}

Outcome entropy_suite() {
    Tally t;
    const std::vector<double> half{0.5, 0.5}, hot{0.0, 1.0}, skew{0.9, 0.1};
    t.check(std::abs(entropy(half) - std::log(2.0)) < 1e-12, "H(0.5,0.5) != ln 2");
    t.check(entropy(hot) == 0.0, "H(one-hot) != 0");
    t.check(std::abs(entropy(skew) - 0.325083) < 1e-6, "H(0.9,0.1) != 0.325083");
    Rng r(77);
    for (int i = 0; i < 1000; ++i) {
        const Index k = 2 + r.index(6);
        std::vector<double> p(k);
        double s = 0.0;
        for (auto& v : p) s += (v = r.uniform() + 1e-3);
        for (auto& v : p) v /= s;
        const double h = entropy(p);
        auto q = p;
        r.shuffle(q);
        t.check(std::abs(entropy(q) - h) < 1e-12, "permutation changed entropy");
    }
    return t.outcome("known values and 1000 permuted simplexes");
}

Outcome em_bic() {
    Tally t;
    double worst_drop = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng r(seed + 5000);
        const Index d = 1 + r.index(3);
        const Index K = 1 + r.index(4);
        const auto ds = make_synthetic(table_shaped_spec(60 + r.index(140), d, 3, seed), seed);
        const auto g = fit_em(ds.features, K, GmmFitConfig{}, seed);
        const auto& tr = g.log_likelihood_trace();
        for (std::size_t i = 1; i < tr.size(); ++i) worst_drop = std::max(worst_drop, tr[i - 1] - tr[i]);
    }
    t.check(worst_drop <= 1e-8, "log-likelihood dropped by " + std::to_string(worst_drop));

    int hits = 0;
    GmmFitConfig cfg;
    cfg.k_max = 8;
    const std::vector<Vector> centers{(Vector(2) << 0, 0).finished(), (Vector(2) << 10, 0).finished(),
                                      (Vector(2) << 0, 10).finished()};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        hits += select_k(fixtures::blobs(centers, 100, 1.0, 900 + seed), cfg, seed).K() == 3;
    }
    t.check(hits >= 18, "BIC chose K=3 in only " + std::to_string(hits) + "/20");

    Rng r(4);
    Matrix X(300, 1);
    for (Eigen::Index i = 0; i < 300; ++i) X(i, 0) = (i % 3 == 0 ? 5.0 : 0.0) + r.normal();
    const auto g = select_k(X, GmmFitConfig{}, 1);
    double lo = 1e9, hi = -1e9;
    for (Index k = 0; k < g.K(); ++k) {
        const double mu = g.means()(static_cast<Eigen::Index>(k), 0);
        const double sd = std::sqrt(g.covariances()[k](0, 0));
        lo = std::min(lo, mu - 10.0 * sd);
        hi = std::max(hi, mu + 10.0 * sd);
    }
    const int n = 200000;
    const double h = (hi - lo) / n;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) integral += ((i == 0 || i == n) ? 0.5 : 1.0) * std::exp(g.log_density(Vector::Constant(1, lo + i * h)));
    integral *= h;
    t.check(std::abs(integral - 1.0) <= 1e-3, "quadrature " + fmt(integral, 6));
    return t.outcome("max LL drop " + std::to_string(worst_drop) + ", K=3 in " + std::to_string(hits) +
                     "/20, integral " + fmt(integral, 6));
}

Outcome classifier_oracle() {
    Tally t;
    double worst = 0.0, worst_sum = 0.0;
    Rng probe(5);
    for (const auto& s : fixtures::small_corpus()) {
        const Matrix K = fixtures::rbf_gram(s.X, s.gamma);
        const auto y = fixtures::pm1(s.y);
        const double want = oracle::svm_dual_minimum(K, y, s.C);
        worst = std::max(worst, std::abs(solve_smo(K, y, s.C).objective - want));
        const auto clf = train(s.X, s.y, {s.gamma, s.C});
        if (clf.svm) worst = std::max(worst, std::abs(clf.svm->dual_objective - want));
        for (int q = 0; q < 50; ++q) {
            Vector x(s.X.cols());
            for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = 3.0 * probe.normal();
            const auto p = clf.predict_proba(x);
            worst_sum = std::max(worst_sum, std::abs(p[0] + p[1] - 1.0));
            t.check(p[0] >= 0.0 && p[1] >= 0.0, "negative probability");
        }
    }
    t.check(worst <= 1e-4, "dual objective gap " + std::to_string(worst));
    t.check(worst_sum <= 1e-9, "probability sum off by " + std::to_string(worst_sum));
    return t.outcome("50 sets, max dual gap " + std::to_string(worst) + ", max |p0+p1-1| " + std::to_string(worst_sum));
}

Outcome prauc_oracle() {
    Tally t;
    double worst = 0.0;
    Rng r(4242);
    for (int trial = 0; trial < 500; ++trial) {
        const Index m = 1 + r.index(12);
        std::vector<double> s(m);
        std::vector<int> y(m);
        const Index levels = 1 + r.index(6);
        for (Index i = 0; i < m; ++i) {
            s[i] = static_cast<double>(r.index(levels)) / 4.0;
            y[i] = static_cast<int>(r.index(2));
        }
        y[r.index(m)] = 1;
        const double a = prauc(s, y), b = oracle::average_precision_sweep(s, y);
        worst = std::max(worst, std::abs(a - b));
        t.check(ulps_apart(a, b) <= 4, "trial " + std::to_string(trial));
    }
    t.check(prauc(std::vector<double>{5, 4, 1, 0}, std::vector<int>{1, 1, 0, 0}) == 1.0, "perfect ranking");
    t.check(prauc(std::vector<double>(10, 0.3), std::vector<int>{1, 0, 0, 1, 0, 0, 0, 0, 0, 0}) == 0.2,
            "all-tied scores");
    return t.outcome("500 enumerated cases within 4 ulp, max difference " + std::to_string(worst * 1e16) + "e-16");
}

Outcome cold_start() {
    const std::vector<std::string> names{"abalone", "thyroid-standin", "cardiotocography-standin"};
    std::vector<Dataset> data;
    for (const auto& n : names) data.push_back(standardize(data_manifest().load(n)));
    std::vector<const Dataset*> ptrs;
    for (const auto& d : data) ptrs.push_back(&d);
    ExperimentConfig cfg;
    cfg.session.T = 15;
    cfg.runs = 20;
    const auto cells = run_suite(
        ptrs, {StrategyKind::adaptive, StrategyKind::random, StrategyKind::max_entropy, StrategyKind::kmedoids}, cfg,
        hardware_workers());

    Tally t;
    std::string summary;
    const double floor = -0.01;
    for (const auto& n : names) {
        const auto ad = mean_curve(cells, n, StrategyKind::adaptive, prauc_of);
        const auto rn = mean_curve(cells, n, StrategyKind::random, prauc_of);
        const auto me = mean_curve(cells, n, StrategyKind::max_entropy, prauc_of);
        const auto km = mean_curve(cells, n, StrategyKind::kmedoids, prauc_of);
        const Index last = 15;
        int wins = 0;
        bool late_ok = true;
        for (Index i = 1; i <= last; ++i) {
            const bool ok = ad[i] - rn[i] >= floor;
            wins += ok;
            if (i >= 5) late_ok = late_ok && ok;
        }
        t.check(ad[last] - me[last] >= floor, n + ": adaptive " + fmt(ad[last]) + " < max_entropy " + fmt(me[last]));
        t.check(ad[last] - km[last] >= floor, n + ": adaptive " + fmt(ad[last]) + " < kmedoids " + fmt(km[last]));
        t.check(wins >= 12, n + ": adaptive >= random in " + std::to_string(wins) + "/15");
        t.check(late_ok, n + ": adaptive < random at some iteration >= 5");
        summary += (summary.empty() ? "" : " | ") + n + " final adaptive " + fmt(ad[last]) + " random " + fmt(rn[last]) +
                   " max_entropy " + fmt(me[last]) + " kmedoids " + fmt(km[last]) + ", >= random " +
                   std::to_string(wins) + "/15";
    }
    return t.outcome(summary);
}

Outcome discovery() {
    const Dataset ds = standardize(data_manifest().load("cluster-scatter"));
    const std::vector<const Dataset*> ptrs{&ds};
    ExperimentConfig cfg;
    cfg.session.T = 5;
    cfg.runs = 50;
    const auto cells = run_suite(ptrs, {StrategyKind::adaptive, StrategyKind::random}, cfg, hardware_workers());
    int early = 0, beats = 0;
    for (Index run = 0; run < 50; ++run) {
        const auto& a = cell_run(cells, ds.name, StrategyKind::adaptive, run).records;
        const auto& r = cell_run(cells, ds.name, StrategyKind::random, run).records;
        early += a.at(2).anomalies_discovered > a.at(0).anomalies_discovered;
        beats += a.at(5).anomalies_discovered > r.at(5).anomalies_discovered;
    }
    Tally t;
    t.check(early >= 40, "new anomaly within 2 batches in " + std::to_string(early) + "/50");
    t.check(beats >= 40, "beats random at iteration 5 in " + std::to_string(beats) + "/50");
    const auto ad = mean_curve(cells, ds.name, StrategyKind::adaptive, [](const MetricsRecord& m) { return double(m.anomalies_discovered); });
    const auto rn = mean_curve(cells, ds.name, StrategyKind::random, [](const MetricsRecord& m) { return double(m.anomalies_discovered); });
    return t.outcome("early discovery " + std::to_string(early) + "/50, beats random " + std::to_string(beats) +
                     "/50, mean found at iteration 5: adaptive " + fmt(ad[5], 2) + " random " + fmt(rn[5], 2));
}

Outcome c_steering() {
    const Dataset ds = standardize(data_manifest().load("email-standin"));
    const std::vector<const Dataset*> ptrs{&ds};
    ExperimentConfig cfg;
    cfg.session.M = 20;
    cfg.session.T = 3;
    cfg.session.balancing.c = 0.5;
    cfg.runs = 20;
    const auto cells = run_suite(ptrs, {StrategyKind::adaptive, StrategyKind::max_entropy}, cfg, hardware_workers());
    const auto ad = mean_curve(cells, ds.name, StrategyKind::adaptive, prauc_of);
    const auto me = mean_curve(cells, ds.name, StrategyKind::max_entropy, prauc_of);
    Tally t;
    std::string s;
    for (Index i = 1; i <= 3; ++i) {
        const double gap = ad[i] - me[i];
        t.check(std::abs(gap) <= 0.05, "iteration " + std::to_string(i) + " gap " + fmt(gap));
        s += (s.empty() ? "" : ", ") + std::string("t=") + std::to_string(i) + " adaptive " + fmt(ad[i]) +
             " max_entropy " + fmt(me[i]);
    }
    return t.outcome(s);
}

int run_cli(const std::vector<std::string>& args) {
    std::string cmd = std::string(ALAD_CLI_PATH);
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism() {
    const auto dir = scratch("cli");
    const auto smoke = (fs::path(ALAD_SOURCE_DIR) / "data" / "smoke.json").string();
    Tally t;
    t.check(run_cli({"run", smoke, "--out", (dir / "a").string()}) == 0, "first run failed");
    t.check(run_cli({"run", smoke, "--out", (dir / "b").string()}) == 0, "second run failed");
    const auto a = slurp(dir / "a" / "results.jsonl"), b = slurp(dir / "b" / "results.jsonl");
    t.check(!a.empty() && a == b, "results.jsonl differs");
    t.check(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"), "results.csv differs");
    t.check(run_cli({"selfcheck", (dir / "a" / "results.jsonl").string()}) == 0, "selfcheck rejected output");
    fs::remove_all(dir);
    return t.outcome(std::to_string(std::count(a.begin(), a.end(), '\n')) + " rows byte-identical");
}

// Service helpers -----------------------------------------------------------------

json answers_for(const json& batch, const Dataset& ds) {
    json labels = json::object();
    for (const auto& e : batch.at("entries")) {
        const Index i = e.at("index").get<Index>();
        labels[std::to_string(i)] = ds.labels[i];
    }
    return {{"labels", labels}};
}

class ServerProcess {
public:
    ServerProcess(int port, const fs::path& state) : port_(port) {
        const std::string bind = "127.0.0.1:" + std::to_string(port);
        const std::string manifest = (fs::path(ALAD_SOURCE_DIR) / "data" / "manifest.json").string();
        std::vector<std::string> args{ALAD_CLI_PATH, "--log-level", "error", "serve", "--bind", bind,
                                      "--manifest", manifest, "--state", state.string()};
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        posix_spawn_file_actions_t quiet;
        posix_spawn_file_actions_init(&quiet);
        posix_spawn_file_actions_addopen(&quiet, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
        const int rc = posix_spawn(&pid_, argv[0], &quiet, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&quiet);
        if (rc != 0) throw StateError("spawn failed");
        httplib::Client c("127.0.0.1", port_);
        for (int i = 0; i < 600; ++i) {
            if (auto r = c.Get("/v1/health"); r && r->status == 200) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        kill();
        throw StateError("server did not come up");
    }
    ~ServerProcess() { kill(); }

    void kill() {
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, nullptr, 0);
            pid_ = -1;
        }
    }

    std::pair<int, json> call(const std::string& method, const std::string& path, const json& body = json()) const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(300, 0);
        httplib::Result r = method == "GET" ? c.Get(path) : c.Post(path, body.is_null() ? "" : body.dump(), "application/json");
        if (!r) return {-1, json()};
        return {r->status, json::parse(r->body)};
    }

private:
    int port_;
    pid_t pid_ = -1;
};

int free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    socklen_t len = sizeof addr;
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        if (fd >= 0) ::close(fd);
        throw StateError("no free port");
    }
    ::close(fd);
    return ntohs(addr.sin_port);
}

IndexList indices_of(const json& batch) {
    IndexList out;
    for (const auto& e : batch.at("entries")) out.push_back(e.at("index").get<Index>());
    return out;
}

Outcome service_linearizability_snapshot() {
    Tally t;
    const Dataset raw = data_manifest().load_raw("abalone");

    // conflicting submits against one session, in-process server
    int single_winner_rounds = 0;
    {
        SessionService svc(data_manifest());
        httplib::Server server;
        svc.mount(server);
        const int port = server.bind_to_any_port("127.0.0.1");
        std::thread th([&] { server.listen_after_bind(); });
        server.wait_until_ready();
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(300, 0);
        auto made = c.Post("/v1/sessions", json{{"dataset", "abalone"}, {"strategy", "random"}, {"T", 25}, {"seed", 3}}.dump(),
                           "application/json");
        const std::string id = json::parse(made->body).at("id");
        for (int round = 0; round < 20; ++round) {
            auto b = c.Post("/v1/sessions/" + id + "/batch");
            const std::string body = answers_for(json::parse(b->body), raw).dump();
            std::atomic<int> ready{0};
            int status[3] = {0, 0, 0};
            std::vector<std::thread> ts;
            for (int k = 0; k < 3; ++k) {
                ts.emplace_back([&, k] {
                    httplib::Client cl("127.0.0.1", port);
                    cl.set_read_timeout(300, 0);
                    ++ready;
                    while (ready.load() < 3) {
                    }
                    auto r = cl.Post("/v1/sessions/" + id + "/labels", body, "application/json");
                    status[k] = r ? r->status : -1;
                });
            }
            for (auto& x : ts) x.join();
            int ok = 0, conflict = 0;
            for (int s : status) {
                ok += s / 100 == 2;
                conflict += s == 409;
            }
            t.check(ok == 1 && conflict == 2, "round " + std::to_string(round) + " statuses " + std::to_string(status[0]) +
                                                  "," + std::to_string(status[1]) + "," + std::to_string(status[2]));
            const auto s = svc.engine_state(id);
            t.check(s->history.size() == static_cast<std::size_t>(round + 2) && !s->pending, "state corrupted");
            single_winner_rounds += ok == 1;
        }
        server.stop();
        th.join();
    }

    // kill -9 mid-session versus an uninterrupted server
    const auto dir = scratch("svc");
    const json create = {{"dataset", "abalone"}, {"mode", "replay"}, {"seed", 9}};
    IndexList uninterrupted, resumed;
    json alloc_a, alloc_b;
    {
        ServerProcess s(free_port(), dir / "a");
        const auto [st, made] = s.call("POST", "/v1/sessions", create);
        const std::string id = made.at("id");
        const auto b1 = s.call("POST", "/v1/sessions/" + id + "/batch").second;
        t.check(s.call("POST", "/v1/sessions/" + id + "/labels", answers_for(b1, raw)).first == 200, "submit failed");
        const auto b2 = s.call("POST", "/v1/sessions/" + id + "/batch").second;
        uninterrupted = indices_of(b2);
        alloc_a = b2.at("allocation");
    }
    {
        std::string id;
        json b1;
        {
            ServerProcess s(free_port(), dir / "b");
            id = s.call("POST", "/v1/sessions", create).second.at("id");
            b1 = s.call("POST", "/v1/sessions/" + id + "/batch").second;
            s.kill();
        }
        ServerProcess s(free_port(), dir / "b");
        const auto [st, res] = s.call("GET", "/v1/sessions/" + id);
        t.check(st == 200 && res.at("status") == "awaiting_labels", "session not restored with its pending batch");
        t.check(st == 200 && indices_of(res.at("pending")) == indices_of(b1), "pending batch changed across restart");
        t.check(s.call("POST", "/v1/sessions/" + id + "/labels", answers_for(b1, raw)).first == 200, "submit after restart failed");
        const auto b2 = s.call("POST", "/v1/sessions/" + id + "/batch").second;
        resumed = indices_of(b2);
        alloc_b = b2.at("allocation");
    }
    t.check(!uninterrupted.empty() && uninterrupted == resumed, "next batch differs after kill-restart");
    t.check(alloc_a == alloc_b, "allocation differs after kill-restart");
    fs::remove_all(dir);
    return t.outcome(std::to_string(single_winner_rounds) + "/20 three-way races had one winner; next batch after kill -9 " +
                     (uninterrupted == resumed ? "identical" : "different") + " (" + std::to_string(resumed.size()) +
                     " indices)");
}

}  // namespace

int main(int argc, char** argv) {
    log::set_sink([](log::Level, const std::string&) {});
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"balancing-golden-table", balance_table},
        {"entropy-suite", entropy_suite},
        {"em-bic-properties", em_bic},
        {"classifier-qp-oracle", classifier_oracle},
        {"prauc-oracle", prauc_oracle},
        {"cold-start-directional", cold_start},
        {"anomaly-discovery", discovery},
        {"c-steering", c_steering},
        {"end-to-end-determinism", cli_determinism},
        {"service-linearizability-snapshot", service_linearizability_snapshot},
    };
    std::vector<std::string> filters(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        if (!filters.empty() &&
            std::none_of(filters.begin(), filters.end(), [&](const std::string& f) { return name.find(f) != std::string::npos; })) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << fmt(secs, 1) << "s] " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
