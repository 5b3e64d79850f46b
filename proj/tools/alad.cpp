// alad: dataset preparation, experiment sweeps, the labeling service and
// result self-checks.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 data error, 4 runtime failure.

#include "alad/engine.hpp"
#include "alad/log.hpp"
#include "alad/prepare.hpp"
#include "alad/results.hpp"
#include "alad/service.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

int cmd_prepare(const std::string& name, const std::string& raw, const fs::path& out, std::optional<fs::path> manifest) {
    const auto prepared = alad::prepare(name, raw);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    alad::write_csv(prepared.data, out);

    const fs::path manifest_path = manifest.value_or(out.parent_path() / "manifest.json");
    alad::DatasetManifest m;
    m.base_dir = manifest_path.parent_path();
    if (fs::exists(manifest_path)) m = alad::DatasetManifest::from_file(manifest_path);
    alad::ManifestEntry entry;
    entry.name = name;
    entry.path = fs::relative(fs::absolute(out), fs::absolute(manifest_path).parent_path()).generic_string();
    entry.expected = prepared.expected;
    bool replaced = false;
    for (auto& e : m.entries) {
        if (e.name == name) {
            e = entry;
            replaced = true;
        }
    }
    if (!replaced) m.entries.push_back(entry);
    {
        std::ofstream mf(manifest_path);
        mf << m.to_json().dump(2) << '\n';
    }

    const auto& d = prepared.data;
    std::cout << name << ": n=" << d.n() << " d=" << d.d() << " anomalies=" << d.anomaly_count() << " -> " << out.string()
              << '\n';
    if (!prepared.mismatches.empty()) {
        std::cerr << "count check failed against expected n=" << prepared.expected.n << " d=" << prepared.expected.d
                  << " anomalies=" << prepared.expected.anomalies << ":\n";
        for (const auto& s : prepared.mismatches) std::cerr << "  " << s << '\n';
        return kExitData;
    }
    return 0;
}

int cmd_run(const fs::path& manifest_path, std::optional<alad::Index> workers_flag, std::optional<fs::path> out_flag) {
    const auto manifest = alad::RunManifest::load(manifest_path);
    alad::Index workers = 1;
    if (const auto w = env("ALAD_WORKERS")) {
        try {
            workers = std::stoul(*w);
        } catch (const std::exception&) {
            throw alad::ConfigError("ALAD_WORKERS must be a positive integer");
        }
    }
    if (workers_flag) workers = *workers_flag;
    if (workers < 1) throw alad::ConfigError("worker count must be >= 1");
    fs::path out_dir = manifest.output_dir;
    if (const auto o = env("ALAD_OUT_DIR")) out_dir = *o;
    if (out_flag) out_dir = *out_flag;

    std::vector<alad::Dataset> datasets;
    for (const auto& n : manifest.dataset_names) datasets.push_back(manifest.datasets.load(n));
    std::vector<const alad::Dataset*> ptrs;
    for (const auto& d : datasets) ptrs.push_back(&d);

    const auto start = std::chrono::system_clock::now();
    const auto cells = alad::run_suite(ptrs, manifest.strategies, manifest.experiment, workers);
    const auto end = std::chrono::system_clock::now();

    fs::create_directories(out_dir);
    if (manifest.emit_jsonl) {
        std::ofstream f(out_dir / "results.jsonl", std::ios::binary);
        alad::write_jsonl(cells, f);
    }
    if (manifest.emit_csv) {
        std::ofstream f(out_dir / "results.csv", std::ios::binary);
        alad::write_csv(cells, f);
    }
    {
        std::ofstream f(out_dir / "timing.log");
        const auto t0 = std::chrono::system_clock::to_time_t(start);
        const auto t1 = std::chrono::system_clock::to_time_t(end);
        f << "# started " << std::put_time(std::gmtime(&t0), "%FT%TZ") << " finished "
          << std::put_time(std::gmtime(&t1), "%FT%TZ") << " workers " << workers << '\n';
        f << "# dataset strategy run iteration wall_time_ms\n";
        alad::write_timing_log(cells, f);
    }

    std::cout << std::left << std::setw(20) << "dataset" << std::setw(16) << "strategy" << std::setw(11) << "iteration"
              << std::setw(12) << "mean_prauc" << "mean_discovered\n";
    for (const auto& row : alad::summarize(cells)) {
        std::ostringstream pr;
        if (row.mean_prauc) pr << std::fixed << std::setprecision(4) << *row.mean_prauc;
        else pr << "n/a";
        std::cout << std::left << std::setw(20) << row.dataset << std::setw(16) << row.strategy << std::setw(11)
                  << row.final_iteration << std::setw(12) << pr.str() << std::fixed << std::setprecision(2)
                  << row.mean_discovered << '\n';
    }
    std::cout << "results written to " << out_dir.string() << '\n';
    return 0;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const std::string& bind, const fs::path& manifest_path, const fs::path& state_dir,
              std::optional<fs::path> static_dir) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw alad::ConfigError("--bind must be HOST:PORT");
    const std::string host = bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw alad::ConfigError("--bind port is not a number");
    }
    const auto manifest = alad::DatasetManifest::from_file(manifest_path);
    for (const auto& e : manifest.entries) manifest.load_raw(e.name);

    alad::SessionService service(manifest, state_dir);
    httplib::Server svr;
    service.mount(svr);
    if (static_dir && !svr.set_mount_point("/", static_dir->string())) {
        throw alad::ConfigError("static directory '" + static_dir->string() + "' does not exist");
    }
    if (port == 0) {
        port = svr.bind_to_any_port(host);
        if (port < 0) throw alad::Error("could not bind " + host);
    } else if (!svr.bind_to_port(host, port)) {
        throw alad::Error("could not bind " + bind);
    }
    g_server = &svr;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on " << host << ":" << port << std::endl;
    svr.listen_after_bind();
    g_server = nullptr;
    return 0;
}

int cmd_selfcheck(const fs::path& path) {
    const auto rep = alad::selfcheck_file(path);
    for (const auto& e : rep.errors) std::cerr << e << '\n';
    std::cout << path.string() << ": " << rep.lines << " rows, " << rep.series << " series, " << rep.errors.size()
              << " problems -> " << (rep.ok() ? "OK" : "FAILED") << '\n';
    return rep.ok() ? 0 : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive active learning for anomaly detection"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "debug, info, warning or error")->envname("ALAD_LOG_LEVEL");

    auto* prep = app.add_subcommand("prepare", "Convert a raw dataset into the canonical CSV");
    std::string prep_name, prep_raw, prep_out, prep_manifest;
    prep->add_option("name", prep_name, "abalone, thyroid, cardiotocography or email-standin")->required();
    prep->add_option("raw", prep_raw, "raw file (a generator seed for email-standin)")->required();
    prep->add_option("out", prep_out, "output CSV")->required();
    prep->add_option("--manifest", prep_manifest, "dataset manifest to update (default: next to OUT)");

    auto* run = app.add_subcommand("run", "Run an experiment sweep from a manifest");
    std::string run_manifest, run_out;
    alad::Index run_workers = 0;
    run->add_option("manifest", run_manifest, "run manifest JSON")->required();
    auto* workers_opt = run->add_option("--workers", run_workers, "parallel workers (env ALAD_WORKERS)");
    auto* out_opt = run->add_option("--out", run_out, "output directory (env ALAD_OUT_DIR)");

    auto* serve = app.add_subcommand("serve", "Serve the labeling session API");
    std::string bind = env("ALAD_BIND").value_or("127.0.0.1:8080");
    std::string serve_manifest = env("ALAD_MANIFEST").value_or("data/manifest.json");
    std::string state_dir = env("ALAD_STATE_DIR").value_or("state");
    std::string static_dir;
    serve->add_option("--bind", bind, "HOST:PORT (env ALAD_BIND)");
    serve->add_option("--manifest", serve_manifest, "dataset manifest (env ALAD_MANIFEST)");
    serve->add_option("--state", state_dir, "snapshot directory (env ALAD_STATE_DIR)");
    auto* static_opt = serve->add_option("--static", static_dir, "directory of UI assets served at /");

    auto* check = app.add_subcommand("selfcheck", "Validate a results file (.jsonl or .csv)");
    std::string check_path;
    check->add_option("results", check_path, "results file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    const std::map<std::string, alad::log::Level> levels = {{"debug", alad::log::Level::debug},
                                                            {"info", alad::log::Level::info},
                                                            {"warning", alad::log::Level::warning},
                                                            {"error", alad::log::Level::error}};
    if (!levels.count(log_level)) {
        std::cerr << "unknown log level '" << log_level << "'\n";
        return kExitConfig;
    }
    const auto min_level = levels.at(log_level);
    alad::log::set_sink([min_level](alad::log::Level level, const std::string& msg) {
        if (level < min_level) return;
        static const char* names[] = {"debug", "info", "warning", "error"};
        std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
    });

    try {
        if (*prep) {
            return cmd_prepare(prep_name, prep_raw, prep_out,
                               prep_manifest.empty() ? std::nullopt : std::optional<fs::path>(prep_manifest));
        }
        if (*run) {
            return cmd_run(run_manifest, workers_opt->count() ? std::optional(run_workers) : std::nullopt,
                           out_opt->count() ? std::optional<fs::path>(run_out) : std::nullopt);
        }
        if (*serve) {
            return cmd_serve(bind, serve_manifest, state_dir,
                             static_opt->count() ? std::optional<fs::path>(static_dir) : std::nullopt);
        }
        if (*check) return cmd_selfcheck(check_path);
    } catch (const alad::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const alad::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}
