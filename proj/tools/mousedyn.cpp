// mousedyn: command-line pipeline for mouse-dynamics authentication.
//
//   ingest    events file -> normalized session store + manifest
//   train     session store -> model artifacts (one per user, or one ann)
//   evaluate  artifacts -> report (json, table, ROC points)
//   stream    artifact + event stream -> trust decisions
//   report    reports dir -> comparison table + ROC plots
//   synthesize  write a synthetic multi-user event file
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 model error,
// 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mousedyn/events.hpp"
#include "mousedyn/pipeline.hpp"
#include "mousedyn/report.hpp"
#include "mousedyn/stream.hpp"
#include "mousedyn/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mousedyn;

namespace {

constexpr const char* kSessionsFile = "sessions.csv";
constexpr const char* kManifestFile = "manifest.json";

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << content;
    if (!out) throw ConfigError("failed writing " + p.string());
}

json read_json(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::exception& e) {
        throw DataError(p.string() + ": " + e.what());
    }
}

void require_exists(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

struct LoadedData {
    std::vector<Session> sessions;
    std::size_t block_len = kDefaultBlockLen;
};

/// Accepts either an ingest output directory or a raw events file.
LoadedData load_data(const fs::path& data, std::optional<std::size_t> block_len, bool lenient) {
    require_exists(data, "data");
    LoadedData out;
    fs::path events = data;
    if (fs::is_directory(data)) {
        events = data / kSessionsFile;
        require_exists(events, "session store");
        if (fs::exists(data / kManifestFile))
            out.block_len = read_json(data / kManifestFile).at("block_len").get<std::size_t>();
    }
    if (block_len) out.block_len = *block_len;
    std::ifstream in(events);
    if (!in) throw DataError("cannot read " + events.string());
    ParseOptions opts;
    opts.lenient = lenient;
    out.sessions = parse_events(in, opts).sessions;
    if (out.sessions.empty()) throw DataError("no events in " + events.string());
    return out;
}

std::string artifact_name(int user) { return "user_" + std::to_string(user) + ".json"; }

std::map<int, json> load_binary_artifacts(const fs::path& dir) {
    require_exists(dir, "model directory");
    std::map<int, json> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("user_", 0) != 0 || entry.path().extension() != ".json") continue;
        auto a = read_json(entry.path());
        validate_artifact(a);
        const int target = a.at("target").get<int>();
        out[target] = std::move(a);
    }
    if (out.empty()) throw ConfigError("no model artifacts in " + dir.string());
    return out;
}

// ---------------------------------------------------------------- commands

struct IngestArgs {
    std::string events, out;
    std::size_t block_len = kDefaultBlockLen;
    bool lenient = false;
};

int cmd_ingest(const IngestArgs& a) {
    require_exists(a.events, "events file");
    if (a.block_len < 2) throw ConfigError("--block-len must be >= 2");
    std::ifstream in(a.events);
    if (!in) throw DataError("cannot read " + a.events);
    ParseOptions opts;
    opts.lenient = a.lenient;
    const auto parsed = parse_events(in, opts);
    if (parsed.sessions.empty()) throw DataError("no events in " + a.events);

    std::ostringstream store;
    serialize_events(store, parsed.sessions);
    const fs::path out = a.out;
    write_file(out / kSessionsFile, store.str());

    json subjects = json::array();
    for (const auto& s : parsed.sessions)
        subjects.push_back({{"subject", s.subject},
                            {"events", s.events.size()},
                            {"actions", s.events.size() / a.block_len}});
    const json manifest = {{"format", "mousedyn-sessions"},
                           {"format_version", 1},
                           {"block_len", a.block_len},
                           {"accepted_rows", parsed.accepted},
                           {"rejected_rows", parsed.rejected},
                           {"source_fingerprint", fingerprint(store.str())},
                           {"subjects", subjects}};
    write_file(out / kManifestFile, manifest.dump(2) + "\n");
    std::cout << "ingested " << parsed.accepted << " events from " << parsed.sessions.size() << " subjects";
    if (parsed.rejected) std::cout << " (" << parsed.rejected << " rows rejected)";
    std::cout << " -> " << out.string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, out, model, preset = "release";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> block_len;
    double split = 0.8;
    std::size_t workers = 1;
    bool lenient = false;
};

PipelineConfig make_config(const std::string& model, const std::string& preset, std::uint64_t seed, double split) {
    auto cfg = PipelineConfig::make(model_kind_from_string(model), preset_from_string(preset), seed);
    if (!(split > 0 && split < 1)) throw ConfigError("--split must be in (0, 1)");
    cfg.train_fraction = split;
    return cfg;
}

int cmd_train(const TrainArgs& a) {
    if (!a.seed) throw ConfigError("--seed is required for train");
    auto cfg = make_config(a.model, a.preset, *a.seed, a.split);
    const auto data = load_data(a.data, a.block_len, a.lenient);
    const auto corpus = Corpus::build(data.sessions, data.block_len);
    const fs::path out = fs::path(a.out) / a.model;
    if (cfg.kind == ModelKind::ann) {
        const auto artifact = train_multiclass(corpus, cfg);
        write_file(out / "model.json", artifact.dump() + "\n");
        std::cout << "trained ann (" << artifact.at("classes") << " classes) -> " << (out / "model.json").string() << "\n";
        return 0;
    }
    cfg.forest.workers = a.workers;
    const auto artifacts = train_all_binary(corpus, cfg, a.workers);
    for (const auto& [user, artifact] : artifacts) write_file(out / artifact_name(user), artifact.dump() + "\n");
    std::cout << "trained " << artifacts.size() << " " << a.model << " models -> " << out.string() << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string data, models, out, model;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    bool lenient = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
    if (!a.seed) throw ConfigError("--seed is required for evaluate");
    const auto kind = model_kind_from_string(a.model);
    const fs::path model_dir = fs::path(a.models) / a.model;
    require_exists(model_dir, "model directory");
    const fs::path out = a.out;

    const auto check_seed = [&](const json& artifact) {
        if (artifact.at("seed").get<std::uint64_t>() != *a.seed)
            throw ConfigError("artifact seed " + artifact.at("seed").dump() + " does not match --seed " +
                              std::to_string(*a.seed));
        if (artifact.at("kind").get<std::string>() != a.model)
            throw ConfigError("artifact kind " + artifact.at("kind").get<std::string>() + " does not match --model");
    };

    EvalReport report;
    if (kind == ModelKind::ann) {
        require_exists(model_dir / "model.json", "ann artifact");
        const auto artifact = read_json(model_dir / "model.json");
        validate_artifact(artifact);
        check_seed(artifact);
        const auto data = load_data(a.data, artifact.at("block_len").get<std::size_t>(), a.lenient);
        const auto corpus = Corpus::build(data.sessions, data.block_len);
        report.kind = kind;
        report.preset = artifact.at("preset").get<std::string>();
        report.seed = *a.seed;
        report.source_fingerprint = corpus.fingerprint;
        report.multiclass = evaluate_multiclass(artifact, corpus);
    } else {
        const auto artifacts = load_binary_artifacts(model_dir);
        const auto& first = artifacts.begin()->second;
        for (const auto& [_, art] : artifacts) check_seed(art);
        const auto data = load_data(a.data, first.at("block_len").get<std::size_t>(), a.lenient);
        const auto corpus = Corpus::build(data.sessions, data.block_len);
        const auto evals = evaluate_all_binary(artifacts, corpus, a.workers);
        report = make_binary_report(kind, first.at("preset").get<std::string>(), *a.seed, corpus.fingerprint, evals);
        std::ostringstream csv;
        write_roc_csv(csv, report.rocs);
        write_file(out / (a.model + "_roc.csv"), csv.str());
    }
    write_file(out / (a.model + ".json"), to_json(report).dump(2) + "\n");
    std::ostringstream table;
    write_report_table(table, report);
    write_file(out / (a.model + ".txt"), table.str());
    std::cout << table.str();
    return 0;
}

struct StreamArgs {
    std::string model;
    std::vector<std::string> events;
    TrustPolicy policy;
    bool lenient = false;
};

int cmd_stream(const StreamArgs& a) {
    require_exists(a.model, "model artifact");
    for (const auto& e : a.events)
        if (e != "-") require_exists(e, "events file");
    a.policy.validate();
    const BinaryScorer scorer(read_json(a.model));
    StreamAuthenticator auth([&](const MouseAction& act) { return scorer.score(act); }, a.policy, scorer.block_len());

    const auto emit = [](const Decision& d) {
        std::cout << json{{"action", d.action_index}, {"score", d.score}, {"trust", d.trust},
                          {"status", to_string(d.status)}}.dump()
                  << "\n";
    };
    const auto run = [&](std::istream& in) {
        ParseOptions opts;
        opts.lenient = a.lenient;
        EventLineReader reader(opts);
        std::string line;
        std::size_t line_no = 0;
        RawEvent ev;
        while (std::getline(in, line)) {
            if (reader.read(line, ++line_no, ev) != EventLineReader::Outcome::event) continue;
            if (const auto d = auth.push(ev)) emit(*d);
        }
    };
    if (a.events.empty()) {
        run(std::cin);
    } else {
        for (const auto& path : a.events) {
            if (path == "-") {
                run(std::cin);
                continue;
            }
            std::ifstream in(path);
            if (!in) throw DataError("cannot read " + path);
            run(in);
        }
    }
    const auto s = auth.finish();
    std::cout << json{{"summary",
                       {{"events", s.events},
                        {"actions", s.actions},
                        {"discarded_events", s.discarded_events},
                        {"alarms", s.alarms},
                        {"final_trust", s.final_trust}}}}
                     .dump()
              << "\n";
    return 0;
}

struct ReportArgs {
    std::string reports, out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<EvalReport> reports;
    if (fs::exists(a.reports)) {
        if (!fs::is_directory(a.reports)) throw ConfigError("--reports must be a directory");
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(a.reports))
            if (entry.path().extension() == ".json") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto j = read_json(f);
            if (!j.is_object() || j.value("format", "") != kReportFormat) continue;
            reports.push_back(report_from_json(j));
        }
    }
    const auto rows = compare_reports(reports);
    std::ostringstream table;
    write_comparison_table(table, rows);
    std::cout << table.str();
    const fs::path out = a.out.empty() ? fs::path(a.reports) : fs::path(a.out);
    if (!reports.empty() || !a.out.empty()) write_file(out / "comparison.txt", table.str());
    for (const auto& r : reports) {
        if (r.rocs.empty()) continue;
        std::ostringstream svg;
        write_roc_svg(svg, r.rocs, to_string(r.kind) + " ROC curves");
        write_file(out / ("roc_" + to_string(r.kind) + ".svg"), svg.str());
    }
    return 0;
}

struct SynthArgs {
    std::string out;
    std::size_t users = 4, events = 5010;
    std::uint64_t seed = 0;
};

int cmd_synthesize(const SynthArgs& a) {
    if (a.users < 1) throw ConfigError("--users must be >= 1");
    std::ostringstream os;
    serialize_events(os, synthesize_corpus(a.users, a.events, a.seed));
    write_file(a.out, os.str());
    std::cout << "wrote " << a.users << " x " << a.events << " events -> " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mouse-dynamics authentication pipeline"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "parse an events file into a session store");
    c_ingest->add_option("--events", ingest.events, "events file")->required();
    c_ingest->add_option("--out", ingest.out, "output directory")->required();
    c_ingest->add_option("--block-len", ingest.block_len, "events per action");
    c_ingest->add_flag("--lenient", ingest.lenient, "skip malformed rows");

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "train model artifacts");
    c_train->add_option("--data,--events", train.data, "ingest directory or events file")->required();
    c_train->add_option("--out", train.out, "models directory")->required();
    c_train->add_option("--model", train.model, "knn|rf|svm|cnn|ann")->required();
    c_train->add_option("--seed", train.seed, "run seed");
    c_train->add_option("--preset", train.preset, "release|ci");
    c_train->add_option("--split", train.split, "train fraction");
    c_train->add_option("--block-len", train.block_len, "events per action");
    c_train->add_option("--workers", train.workers, "parallel workers");
    c_train->add_flag("--lenient", train.lenient, "skip malformed rows");

    EvaluateArgs eval;
    auto* c_eval = app.add_subcommand("evaluate", "evaluate trained artifacts on their held-out split");
    c_eval->add_option("--data,--events", eval.data, "ingest directory or events file")->required();
    c_eval->add_option("--models", eval.models, "models directory")->required();
    c_eval->add_option("--out", eval.out, "reports directory")->required();
    c_eval->add_option("--model", eval.model, "knn|rf|svm|cnn|ann")->required();
    c_eval->add_option("--seed", eval.seed, "run seed used for training");
    c_eval->add_option("--workers", eval.workers, "parallel workers");
    c_eval->add_flag("--lenient", eval.lenient, "skip malformed rows");

    StreamArgs stream;
    auto* c_stream = app.add_subcommand("stream", "continuous authentication over an event stream");
    c_stream->add_option("--model", stream.model, "binary model artifact")->required();
    c_stream->add_option("--events", stream.events, "event files in order ('-' or none for stdin)");
    c_stream->add_option("--initial-trust", stream.policy.initial_trust, "starting trust");
    c_stream->add_option("--lambda", stream.policy.lambda, "weight of each new score");
    c_stream->add_option("--trust-threshold", stream.policy.threshold, "low-trust threshold");
    c_stream->add_option("--consecutive", stream.policy.consecutive, "low updates before alarm");
    c_stream->add_flag("--lenient", stream.lenient, "skip malformed rows");

    ReportArgs rep;
    auto* c_report = app.add_subcommand("report", "compare evaluation reports");
    c_report->add_option("--reports", rep.reports, "reports directory")->required();
    c_report->add_option("--out", rep.out, "output directory (default: reports directory)");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synthesize", "write synthetic multi-user events");
    c_synth->add_option("--out", synth.out, "events file")->required();
    c_synth->add_option("--users", synth.users, "number of users");
    c_synth->add_option("--events", synth.events, "events per user");
    c_synth->add_option("--seed", synth.seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*c_ingest) return cmd_ingest(ingest);
        if (*c_train) return cmd_train(train);
        if (*c_eval) return cmd_evaluate(eval);
        if (*c_stream) return cmd_stream(stream);
        if (*c_report) return cmd_report(rep);
        if (*c_synth) return cmd_synthesize(synth);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "data error: malformed document: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
