#pragma once

// Experiment run manifests, JSON-lines / CSV result files, the published JSON
// schemas and the result-file self-check.

#include "alad/core.hpp"
#include "alad/dataset.hpp"
#include "alad/engine.hpp"
#include "alad/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace alad {

/// A sweep over datasets x strategies sharing one session configuration.
struct RunManifest {
    DatasetManifest datasets;
    std::vector<std::string> dataset_names;
    std::vector<StrategyKind> strategies;
    ExperimentConfig experiment;
    std::filesystem::path output_dir = "results";
    bool emit_jsonl = true;
    bool emit_csv = true;

    static RunManifest parse(const nlohmann::json& j, const std::filesystem::path& base_dir) {
        RunManifest m;
        try {
            if (j.contains("dataset_manifest")) {
                std::filesystem::path p = j.at("dataset_manifest").get<std::string>();
                if (p.is_relative()) p = base_dir / p;
                m.datasets = DatasetManifest::from_file(p);
            } else {
                m.datasets = DatasetManifest::parse(j, base_dir);
            }
            const auto& e = j.at("experiment");
            m.dataset_names = e.at("datasets").get<std::vector<std::string>>();
            for (const auto& s : e.at("strategies")) m.strategies.push_back(strategy_from_string(s.get<std::string>()));
            m.experiment.session = e.get<SessionConfig>();
            m.experiment.runs = e.value("runs", m.experiment.runs);
            m.experiment.base_seed = e.value("base_seed", m.experiment.base_seed);
            if (j.contains("output_dir")) {
                std::filesystem::path out = j.at("output_dir").get<std::string>();
                m.output_dir = out.is_relative() ? base_dir / out : out;
            } else {
                m.output_dir = base_dir / "results";
            }
            if (j.contains("emit")) {
                const auto emit = j.at("emit").get<std::vector<std::string>>();
                m.emit_jsonl = std::find(emit.begin(), emit.end(), "jsonl") != emit.end();
                m.emit_csv = std::find(emit.begin(), emit.end(), "csv") != emit.end();
                for (const auto& x : emit) {
                    if (x != "jsonl" && x != "csv") throw ConfigError("run manifest: unknown emit format '" + x + "'");
                }
            }
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(std::string("run manifest: ") + ex.what());
        }
        if (m.dataset_names.empty()) throw ConfigError("run manifest: no datasets listed");
        if (m.strategies.empty()) throw ConfigError("run manifest: no strategies listed");
        for (const auto& n : m.dataset_names) {
            if (!m.datasets.find(n)) throw ConfigError("run manifest: dataset '" + n + "' is not declared");
        }
        m.experiment.validate();
        return m;
    }

    static RunManifest load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open run manifest '" + path.string() + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError("run manifest '" + path.string() + "': " + ex.what());
        }
        return parse(j, path.parent_path());
    }
};

// Result rows ----------------------------------------------------------------

inline nlohmann::json result_row(const SuiteCell& cell, const MetricsRecord& r) {
    nlohmann::json j = {{"dataset", cell.dataset},
                        {"strategy", to_string(cell.strategy)},
                        {"run", cell.result.run},
                        {"seed", cell.result.seed}};
    j.update(record_to_json(r));
    j["truncated"] = cell.result.truncated;
    return j;
}

inline std::string format_real(double v) { return format_shortest(v); }

inline void write_jsonl(const std::vector<SuiteCell>& cells, std::ostream& out) {
    for (const auto& cell : cells) {
        for (const auto& r : cell.result.records) out << result_row(cell, r).dump() << '\n';
    }
}

inline void write_csv(const std::vector<SuiteCell>& cells, std::ostream& out) {
    out << "dataset,strategy,run,seed,iteration,labels_used,prauc,anomalies_discovered,truncated\n";
    for (const auto& cell : cells) {
        for (const auto& r : cell.result.records) {
            out << cell.dataset << ',' << to_string(cell.strategy) << ',' << cell.result.run << ','
                << cell.result.seed << ',' << r.iteration << ',' << r.labels_used << ','
                << (r.prauc ? format_real(*r.prauc) : std::string()) << ',' << r.anomalies_discovered << ','
                << (cell.result.truncated ? "true" : "false") << '\n';
        }
    }
}

/// Wall-clock sidecar: one line per record, kept apart so result files stay reproducible.
inline void write_timing_log(const std::vector<SuiteCell>& cells, std::ostream& out) {
    for (const auto& cell : cells) {
        for (const auto& r : cell.result.records) {
            out << cell.dataset << ' ' << to_string(cell.strategy) << ' ' << cell.result.run << ' ' << r.iteration
                << ' ' << format_real(r.wall_time_ms) << '\n';
        }
    }
}

struct SummaryRow {
    std::string dataset;
    std::string strategy;
    Index final_iteration = 0;
    std::optional<double> mean_prauc;
    double mean_discovered = 0.0;
    Index runs = 0;
};

/// Final-iteration means per (dataset, strategy), in first-seen order.
inline std::vector<SummaryRow> summarize(const std::vector<SuiteCell>& cells) {
    std::vector<SummaryRow> rows;
    std::map<std::pair<std::string, std::string>, Index> pos;
    std::vector<Index> prauc_n;
    for (const auto& cell : cells) {
        const auto key = std::make_pair(cell.dataset, to_string(cell.strategy));
        auto it = pos.find(key);
        if (it == pos.end()) {
            it = pos.emplace(key, rows.size()).first;
            rows.push_back({key.first, key.second, 0, std::nullopt, 0.0, 0});
            prauc_n.push_back(0);
        }
        SummaryRow& row = rows[it->second];
        const auto& last = cell.result.records.back();
        row.final_iteration = std::max(row.final_iteration, last.iteration);
        row.mean_discovered += static_cast<double>(last.anomalies_discovered);
        if (last.prauc) {
            row.mean_prauc = row.mean_prauc.value_or(0.0) + *last.prauc;
            ++prauc_n[it->second];
        }
        ++row.runs;
    }
    for (Index i = 0; i < rows.size(); ++i) {
        rows[i].mean_discovered /= static_cast<double>(rows[i].runs);
        if (rows[i].mean_prauc) *rows[i].mean_prauc /= static_cast<double>(prauc_n[i]);
    }
    return rows;
}

// Schemas ---------------------------------------------------------------------

/// JSON Schema documents for result rows and the session API payloads.
inline const nlohmann::json& schema_document() {
    static const nlohmann::json doc = nlohmann::json::parse(R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "alad v1",
  "$defs": {
    "result_row": {
      "type": "object",
      "required": ["dataset", "strategy", "run", "seed", "iteration", "labels_used", "prauc", "anomalies_discovered", "truncated"],
      "additionalProperties": false,
      "properties": {
        "dataset": {"type": "string", "minLength": 1},
        "strategy": {"enum": ["adaptive", "random", "max_entropy", "kmedoids", "representative", "informative"]},
        "run": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "iteration": {"type": "integer", "minimum": 0},
        "labels_used": {"type": "integer", "minimum": 0},
        "prauc": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "anomalies_discovered": {"type": "integer", "minimum": 0},
        "truncated": {"type": "boolean"}
      }
    },
    "metrics_record": {
      "type": "object",
      "required": ["iteration", "labels_used", "prauc", "anomalies_discovered"],
      "properties": {
        "iteration": {"type": "integer", "minimum": 0},
        "labels_used": {"type": "integer", "minimum": 0},
        "prauc": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "anomalies_discovered": {"type": "integer", "minimum": 0},
        "wall_time_ms": {"type": "number", "minimum": 0}
      }
    },
    "allocation": {
      "type": "object",
      "required": ["n_repr", "n_info"],
      "properties": {"n_repr": {"type": "integer", "minimum": 0}, "n_info": {"type": "integer", "minimum": 0}}
    },
    "balancing": {
      "type": "object",
      "required": ["b", "c", "T1", "T2"],
      "properties": {
        "b": {"type": "integer", "minimum": 1},
        "c": {"type": "number", "minimum": 0, "maximum": 1},
        "T1": {"type": "integer", "minimum": 0},
        "T2": {"type": "integer", "minimum": 1}
      }
    },
    "create_session": {
      "type": "object",
      "required": ["dataset"],
      "properties": {
        "dataset": {"type": "string"},
        "strategy": {"enum": ["adaptive", "random", "max_entropy", "kmedoids", "representative", "informative"]},
        "mode": {"enum": ["human", "replay"]},
        "b": {"type": "integer", "minimum": 1},
        "M": {"type": "integer", "minimum": 2},
        "T": {"type": "integer", "minimum": 1},
        "c": {"type": "number", "minimum": 0, "maximum": 1},
        "T1": {"type": "integer", "minimum": 0},
        "T2": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0}
      }
    },
    "batch_entry": {
      "type": "object",
      "required": ["index", "features", "p_anomaly", "provenance", "score"],
      "properties": {
        "index": {"type": "integer", "minimum": 0},
        "features": {"type": "array", "items": {"type": "number"}},
        "raw_features": {"type": "array", "items": {"type": "number"}},
        "p_anomaly": {"type": "number", "minimum": 0, "maximum": 1},
        "provenance": {"enum": ["representative", "informative", "random", "max_entropy", "kmedoids"]},
        "score": {"type": "number"}
      }
    },
    "batch": {
      "type": "object",
      "required": ["session", "iteration", "allocation", "entries"],
      "properties": {
        "session": {"type": "string"},
        "iteration": {"type": "integer", "minimum": 1},
        "allocation": {"$ref": "#/$defs/allocation"},
        "entries": {"type": "array", "items": {"$ref": "#/$defs/batch_entry"}}
      }
    },
    "labels": {
      "type": "object",
      "required": ["labels"],
      "properties": {
        "labels": {"type": "object", "patternProperties": {"^[0-9]+$": {"enum": [0, 1]}}, "additionalProperties": false}
      }
    },
    "params_patch": {
      "type": "object",
      "properties": {
        "c": {"type": "number", "minimum": 0, "maximum": 1},
        "T1": {"type": "integer", "minimum": 0},
        "T2": {"type": "integer", "minimum": 1}
      },
      "additionalProperties": false
    },
    "session": {
      "type": "object",
      "required": ["id", "dataset", "status", "iteration", "mode", "strategy", "balancing", "pool", "metrics_available"],
      "properties": {
        "id": {"type": "string"},
        "dataset": {"type": "string"},
        "status": {"enum": ["awaiting_batch", "awaiting_labels", "finished"]},
        "iteration": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["human", "replay"]},
        "strategy": {"type": "string"},
        "balancing": {"$ref": "#/$defs/balancing"},
        "next_allocation": {"$ref": "#/$defs/allocation"},
        "pending": {"oneOf": [{"type": "null"}, {"$ref": "#/$defs/batch"}]},
        "pool": {
          "type": "object",
          "required": ["labeled", "unlabeled", "test"],
          "properties": {
            "labeled": {"type": "integer"}, "unlabeled": {"type": "integer"}, "test": {"type": "integer"}
          }
        },
        "metrics_available": {"type": "boolean"},
        "latest": {"$ref": "#/$defs/metrics_record"}
      }
    },
    "metrics": {
      "type": "object",
      "required": ["session", "records", "param_changes", "pool", "metrics_available"],
      "properties": {
        "session": {"type": "string"},
        "records": {"type": "array", "items": {"$ref": "#/$defs/metrics_record"}},
        "param_changes": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["at_iteration", "before", "after"],
            "properties": {
              "at_iteration": {"type": "integer", "minimum": 0},
              "before": {"$ref": "#/$defs/balancing"},
              "after": {"$ref": "#/$defs/balancing"}
            }
          }
        },
        "pool": {"type": "object"},
        "metrics_available": {"type": "boolean"}
      }
    },
    "error": {
      "type": "object",
      "required": ["error"],
      "properties": {"error": {"type": "string"}, "details": {"type": "array", "items": {"type": "string"}}}
    }
  }
})");
    return doc;
}

// Self-check ------------------------------------------------------------------

struct SelfCheckReport {
    Index lines = 0;
    Index series = 0;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty() && lines > 0; }
};

namespace detail {

inline bool is_nonneg_int(const nlohmann::json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }

inline void check_row(const nlohmann::json& row, Index lineno, std::vector<std::string>& errors) {
    const std::string at = "line " + std::to_string(lineno) + ": ";
    if (!row.is_object()) {
        errors.push_back(at + "not an object");
        return;
    }
    static const std::set<std::string> allowed = {"dataset", "strategy", "run", "seed", "iteration",
                                                  "labels_used", "prauc", "anomalies_discovered", "truncated"};
    for (const auto& [k, v] : row.items()) {
        (void)v;
        if (!allowed.count(k)) errors.push_back(at + "unexpected field '" + k + "'");
    }
    for (const auto& k : allowed) {
        if (!row.contains(k)) errors.push_back(at + "missing field '" + k + "'");
    }
    if (row.contains("dataset") && (!row["dataset"].is_string() || row["dataset"].get<std::string>().empty())) {
        errors.push_back(at + "dataset must be a non-empty string");
    }
    if (row.contains("strategy")) {
        try {
            strategy_from_string(row["strategy"].get<std::string>());
        } catch (const std::exception&) {
            errors.push_back(at + "unknown strategy");
        }
    }
    for (const char* k : {"run", "seed", "iteration", "labels_used", "anomalies_discovered"}) {
        if (row.contains(k) && !is_nonneg_int(row[k])) errors.push_back(at + k + " must be a non-negative integer");
    }
    if (row.contains("prauc")) {
        const auto& p = row["prauc"];
        if (!(p.is_null() || (p.is_number() && p.get<double>() >= 0.0 && p.get<double>() <= 1.0))) {
            errors.push_back(at + "prauc must be null or in [0, 1]");
        }
    }
    if (row.contains("truncated") && !row["truncated"].is_boolean()) errors.push_back(at + "truncated must be boolean");
}

}  // namespace detail

/// Validate a results JSON-lines stream: per-row schema, then per-series
/// ordering (iterations 0, 1, 2, ...), non-decreasing labels and discoveries.
inline SelfCheckReport selfcheck_jsonl(std::istream& in) {
    SelfCheckReport rep;
    struct SeriesState {
        Index next_iteration = 0;
        Index labels = 0;
        Index discovered = 0;
    };
    std::map<std::tuple<std::string, std::string, Index>, SeriesState> series;
    std::string line;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            rep.errors.push_back("line " + std::to_string(lineno) + ": empty line");
            continue;
        }
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            rep.errors.push_back("line " + std::to_string(lineno) + ": invalid JSON");
            continue;
        }
        ++rep.lines;
        const Index before = rep.errors.size();
        detail::check_row(row, lineno, rep.errors);
        if (rep.errors.size() != before) continue;

        const auto key = std::make_tuple(row["dataset"].get<std::string>(), row["strategy"].get<std::string>(),
                                         row["run"].get<Index>());
        auto& st = series[key];
        const Index it = row["iteration"].get<Index>();
        const Index labels = row["labels_used"].get<Index>();
        const Index disc = row["anomalies_discovered"].get<Index>();
        const std::string at = "line " + std::to_string(lineno) + ": ";
        if (it != st.next_iteration) {
            rep.errors.push_back(at + "iteration " + std::to_string(it) + " out of sequence (expected " +
                                 std::to_string(st.next_iteration) + ")");
        }
        if (it > 0 && labels < st.labels) rep.errors.push_back(at + "labels_used decreased");
        if (it > 0 && disc < st.discovered) rep.errors.push_back(at + "anomalies_discovered decreased");
        if (disc > labels) rep.errors.push_back(at + "more anomalies discovered than labels used");
        st.next_iteration = it + 1;
        st.labels = labels;
        st.discovered = disc;
    }
    rep.series = series.size();
    if (rep.lines == 0) rep.errors.push_back("no result rows");
    return rep;
}

/// Validate the tidy CSV by converting each row to its JSON form and running the JSON-lines checks.
inline SelfCheckReport selfcheck_csv(std::istream& in) {
    static const std::string header = "dataset,strategy,run,seed,iteration,labels_used,prauc,anomalies_discovered,truncated";
    std::string line;
    if (!std::getline(in, line) || line != header) {
        SelfCheckReport rep;
        rep.errors.push_back("line 1: unexpected CSV header");
        return rep;
    }
    std::stringstream converted;
    std::vector<std::string> early;
    Index lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto f = detail::split_csv_line(line);
        nlohmann::json row = nlohmann::json::object();
        auto as_int = [&](const std::string& v) -> nlohmann::json {
            const auto x = detail::parse_real(v);
            if (!x || *x < 0 || *x != std::floor(*x)) return v;
            return static_cast<Index>(*x);
        };
        if (f.size() == 9) {
            row["dataset"] = f[0];
            row["strategy"] = f[1];
            row["run"] = as_int(f[2]);
            row["seed"] = as_int(f[3]);
            row["iteration"] = as_int(f[4]);
            row["labels_used"] = as_int(f[5]);
            const auto p = detail::parse_real(f[6]);
            row["prauc"] = f[6].empty() ? nlohmann::json(nullptr) : (p ? nlohmann::json(*p) : nlohmann::json(f[6]));
            row["anomalies_discovered"] = as_int(f[7]);
            row["truncated"] = f[8] == "true" ? nlohmann::json(true) : f[8] == "false" ? nlohmann::json(false) : nlohmann::json(f[8]);
        } else {
            early.push_back("line " + std::to_string(lineno) + ": expected 9 fields");
        }
        converted << row.dump() << '\n';
    }
    SelfCheckReport rep = selfcheck_jsonl(converted);
    rep.errors.insert(rep.errors.begin(), early.begin(), early.end());
    return rep;
}

/// Dispatch on extension: .csv files get the CSV check, anything else is read as JSON lines.
inline SelfCheckReport selfcheck_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open results file '" + path.string() + "'");
    if (path.extension() == ".csv") return selfcheck_csv(in);
    return selfcheck_jsonl(in);
}

}  // namespace alad
