// clv: data preparation, protocol runs, checkpoint evaluation and reports.
//
// Exit codes: 0 success, 1 unexpected failure, 2 ingestion failure,
// 3 training divergence, 4 misconfiguration, 5 empty results store.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "clv/data/manifest.hpp"
#include "clv/data/synthetic.hpp"
#include "clv/eval.hpp"
#include "clv/runtime.hpp"
#include "clv/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace clv;

namespace {

enum Exit { kOk = 0, kFailure = 1, kIngestion = 2, kDivergence = 3, kMisconfig = 4, kEmptyStore = 5 };

struct Globals {
    std::string output_root = "clv_out";
    bool deterministic = false;
};

struct PrepareArgs {
    bool synthetic = false;
    std::string dataset;
    std::string root;
    std::string manifest;
    bool strict = false;
    SyntheticOptions synth;
};

struct RunArgs {
    std::string method = "simclr";
    std::string protocol = "baseline";
    std::string test = "test1";
    std::string dataset = "hgd";
    std::string train_dataset;
    std::string test_dataset;
    std::string hgd_manifest;
    std::string adcd_manifest;
    std::string scale = "desk";
    std::string encoder = "tiny3d";
    std::string probe = "frozen";
    std::string split_level = "subject";
    std::uint64_t seed = 0;
    std::optional<int> epochs, batch_size, probe_steps;
    std::optional<double> temperature, learning_rate, weight_decay;
    int clip_length = 0;
    double split_ratio = 0.7;
    bool subject_vote = false;
    std::string checkpoint;
    std::string results;
};

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string protocol = "baseline";
    std::string test = "test1";
    std::string dataset = "hgd";
    int clip_length = 0;
    bool subject_vote = false;
    bool store = false;
    std::string results;
};

struct ReportArgs {
    std::string results;
    std::string format = "text";
    std::vector<std::string> filters;
    std::string figures;
    bool no_figures = false;
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void append_locked(const fs::path& file, const std::string& line) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    const int fd = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error("cannot open " + file.string());
    ::flock(fd, LOCK_EX);
    const std::string data = line + "\n";
    const bool ok = ::write(fd, data.data(), data.size()) == static_cast<ssize_t>(data.size());
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (!ok) throw std::runtime_error("short write to " + file.string());
}

/// Records the resolved invocation before any heavy work starts. The INI copy
/// can be passed back through --config to repeat the run.
void write_run_manifest(const Globals& g, const CLI::App& app, const std::string& command, ordered_json resolved,
                        std::uint64_t seed) {
    const std::string started = utc_now();
    std::string run_id = started;
    std::erase_if(run_id, [](char c) { return c == '-' || c == ':'; });
    run_id = "run-" + run_id + "-" + std::to_string(::getpid());
    const fs::path dir = fs::path(g.output_root) / "runs";
    fs::create_directories(dir);
    const fs::path ini = dir / (run_id + ".ini");
    std::ofstream(ini) << app.config_to_str(false, false);

    ordered_json rec;
    rec["run_id"] = run_id;
    rec["command"] = command;
    rec["started_at"] = started;
    rec["seed"] = seed;
    rec["deterministic"] = g.deterministic;
    rec["output_root"] = fs::absolute(g.output_root).string();
    rec["config_file"] = ini.string();
    rec["config"] = std::move(resolved);
    rec["version"] = version();
    append_locked(fs::path(g.output_root) / "runs.jsonl", rec.dump());
}

fs::path default_manifest(const Globals& g, const std::string& name) {
    return fs::path(g.output_root) / "manifests" / (name + ".jsonl");
}

void print_issues(const std::vector<IngestionIssue>& issues) {
    for (const auto& i : issues) std::cerr << "  " << i.path << ": " << i.reason << "\n";
}

// ------------------------------------------------------------------ prepare

int cmd_prepare(const Globals& g, const PrepareArgs& a) {
    if (a.synthetic) {
        const fs::path root = a.root.empty() ? fs::path(g.output_root) / "data" : fs::path(a.root);
        const fs::path out = a.manifest.empty() ? default_manifest(g, a.synth.name) : fs::path(a.manifest);
        const DatasetManifest m = generate_synthetic(a.synth, root);
        write_manifest(m, out);
        int asd = 0;
        std::set<std::string> subjects;
        for (const auto& e : m.entries) {
            asd += e.label == Label::asd;
            subjects.insert(e.subject_id);
        }
        std::cout << "synthetic '" << a.synth.name << "': " << subjects.size() << " subjects, " << m.size()
                  << " clips (" << asd << " ASD, " << m.size() - asd << " Control), separation " << a.synth.separation
                  << ", seed " << a.synth.seed << "\nmanifest: " << out.string() << "\n";
        return kOk;
    }
    if (a.dataset.empty() || a.root.empty()) throw ConfigError("prepare needs --synthetic or --dataset with --root");
    const DatasetId id = parse_dataset(a.dataset);
    if (id == DatasetId::synth) throw ConfigError("use --synthetic to create synthetic data");
    const ManifestBuild b = build_manifest(a.root, id);
    if (a.strict && !b.issues.empty()) {
        throw IngestionError(std::to_string(b.issues.size()) + " unreadable or unrecognised clip(s) (--strict)",
                             b.issues);
    }
    const fs::path out = a.manifest.empty() ? default_manifest(g, a.dataset) : fs::path(a.manifest);
    write_manifest(b.manifest, out);
    std::cout << a.dataset << ": " << b.manifest.size() << " clips, " << b.asd_subjects << " ASD subjects, "
              << b.control_subjects << " Control subjects\n";
    if (id == DatasetId::hgd) {
        std::cout << "expected " << kHgdAsdSubjects << " ASD and " << kHgdControlSubjects << " Control subjects\n";
    }
    for (const auto& w : b.warnings) std::cerr << "warning: " << w << "\n";
    if (!b.issues.empty()) {
        std::cerr << b.issues.size() << " clip(s) skipped:\n";
        print_issues(b.issues);
    }
    std::cout << "manifest: " << out.string() << "\n";
    return kOk;
}

// ------------------------------------------------------------------ run

/// Maps a dataset name to the role it plays and the manifest file holding it.
std::pair<SourceRole, fs::path> locate(const Globals& g, const RunArgs& a, const std::string& dataset) {
    if (dataset == "synth") return {SourceRole::hgd, a.hgd_manifest.empty() ? default_manifest(g, "synth") : fs::path(a.hgd_manifest)};
    const SourceRole role = parse_role(dataset);
    const std::string& explicit_path = role == SourceRole::hgd ? a.hgd_manifest : a.adcd_manifest;
    return {role, explicit_path.empty() ? default_manifest(g, dataset) : fs::path(explicit_path)};
}

DatasetManifest read_if_needed(const fs::path& file, bool needed) {
    if (!needed) return {};
    if (!fs::exists(file)) {
        throw IngestionError("manifest " + file.string() + " not found (run 'clv prepare' first)",
                             {{file.string(), "missing manifest"}});
    }
    return read_manifest(file);
}

ExperimentConfig resolve(const RunArgs& a, SourceRole source) {
    ExperimentConfig c;
    c.regime = default_regime(parse_method(a.method), parse_scale(a.scale));
    c.regime.seed = a.seed;
    c.regime.probe = parse_probe(a.probe);
    if (a.epochs) c.regime.epochs = *a.epochs;
    if (a.batch_size) c.regime.batch_size = *a.batch_size;
    if (a.temperature) c.regime.loss.temperature = *a.temperature;
    if (a.learning_rate) c.regime.optimizer.learning_rate = *a.learning_rate;
    if (a.weight_decay) c.regime.optimizer.weight_decay = *a.weight_decay;
    if (a.probe_steps) c.regime.probe_config.steps = *a.probe_steps;
    c.encoder.architecture = parse_architecture(a.encoder);
    c.protocol = {parse_setup(a.protocol), parse_test(a.test), source};
    c.split_ratio = a.split_ratio;
    if (a.split_level == "subject") {
        c.split_level = SplitLevel::subject;
    } else if (a.split_level == "clip") {
        c.split_level = SplitLevel::clip;
    } else {
        throw ConfigError("unknown split level '" + a.split_level + "' (expected subject or clip)");
    }
    c.clip_length = a.clip_length;
    c.eval.subject_vote = a.subject_vote;
    if (!a.checkpoint.empty()) c.checkpoint = a.checkpoint;
    validate(c.protocol);
    c.regime.validate();
    return c;
}

int cmd_run(const Globals& g, const CLI::App& app, const RunArgs& a) {
    const SetupId setup = parse_setup(a.protocol);
    fs::path hgd_file, adcd_file;
    bool need_hgd = true, need_adcd = true;
    SourceRole source = SourceRole::hgd;
    if (setup == SetupId::baseline) {
        auto [role, file] = locate(g, a, a.dataset);
        source = role;
        (role == SourceRole::hgd ? hgd_file : adcd_file) = file;
        need_hgd = role == SourceRole::hgd;
        need_adcd = !need_hgd;
    } else if (setup == SetupId::cross) {
        if (a.train_dataset.empty() || a.test_dataset.empty()) {
            throw ConfigError("cross protocol needs --train-dataset and --test-dataset");
        }
        const SourceRole tr = parse_role(a.train_dataset), te = parse_role(a.test_dataset);
        if (tr == te) throw ConfigError("cross protocol needs two different datasets");
        source = tr;
        hgd_file = locate(g, a, "hgd").second;
        adcd_file = locate(g, a, "adcd").second;
    } else {
        hgd_file = locate(g, a, "hgd").second;
        adcd_file = locate(g, a, "adcd").second;
    }
    ExperimentConfig cfg = resolve(a, source);
    const fs::path results = a.results.empty() ? fs::path(g.output_root) / "results.jsonl" : fs::path(a.results);

    ordered_json resolved = cfg.to_json();
    resolved["hgd_manifest"] = need_hgd ? hgd_file.string() : "";
    resolved["adcd_manifest"] = need_adcd ? adcd_file.string() : "";
    resolved["results"] = results.string();
    write_run_manifest(g, app, "run", resolved, a.seed);

    const DatasetManifest hgd = read_if_needed(hgd_file, need_hgd);
    const DatasetManifest adcd = read_if_needed(adcd_file, need_adcd);
    cfg.on_epoch = [](int epoch, double loss) { std::cerr << "epoch " << epoch + 1 << " loss " << loss << "\n"; };

    const ResultsStore store(results);
    const MetricsReport r = run_protocol(cfg, hgd, adcd, &store);
    std::cout << compare_table({r}).text();
    if (!r.excluded.empty()) {
        std::cerr << r.excluded.size() << " test clip(s) excluded:\n";
        print_issues(r.excluded);
    }
    std::cout << "appended to " << results.string() << "\n";
    return kOk;
}

// ------------------------------------------------------------------ eval

int cmd_eval(const Globals& g, const CLI::App& app, const EvalArgs& a) {
    const SetupSpec spec{parse_setup(a.protocol), parse_test(a.test), parse_role(a.dataset == "synth" ? "hgd" : a.dataset)};
    validate(spec);
    ordered_json resolved = {{"checkpoint", a.checkpoint}, {"manifest", a.manifest}, {"protocol", spec.key()},
                             {"clip_length", a.clip_length}, {"subject_vote", a.subject_vote}};
    write_run_manifest(g, app, "eval", resolved, 0);
    const DatasetManifest m = read_if_needed(a.manifest, true);
    const DatasetManifest test = [&] {
        bool any_split = false;
        for (const auto& e : m.entries) any_split = any_split || e.split != SplitTag::unassigned;
        return any_split ? m.filter(SplitTag::test) : m;
    }();
    const MetricsReport r = evaluate(a.checkpoint, test, a.clip_length, spec, EvalOptions{a.subject_vote});
    std::cout << compare_table({r}).text();
    if (!r.excluded.empty()) {
        std::cerr << r.excluded.size() << " test clip(s) excluded:\n";
        print_issues(r.excluded);
    }
    if (a.store) {
        const fs::path results = a.results.empty() ? fs::path(g.output_root) / "results.jsonl" : fs::path(a.results);
        ResultsStore(results).append(r);
        std::cout << "appended to " << results.string() << "\n";
    }
    return kOk;
}

// ------------------------------------------------------------------ report

bool matches(const MetricsReport& r, const std::vector<std::pair<std::string, std::string>>& filters) {
    for (const auto& [k, v] : filters) {
        bool ok = false;
        if (k == "protocol") ok = v == to_string(r.protocol.setup) || v == r.protocol.key();
        else if (k == "method") ok = v == r.method;
        else if (k == "test") ok = v == to_string(r.protocol.test);
        else if (k == "source" || k == "dataset") ok = v == to_string(r.protocol.source);
        else throw ConfigError("unknown filter key '" + k + "' (protocol, method, test, source)");
        if (!ok) return false;
    }
    return true;
}

std::string file_stem(const std::string& key) {
    std::string s = key;
    for (auto& c : s) {
        if (c == '/' || c == '>' || c == '-') c = '_';
    }
    return s;
}

std::string strip_count(const std::string& column) { return column.substr(0, column.find(" (n=")); }

int cmd_report(const Globals& g, const ReportArgs& a) {
    if (a.format != "text" && a.format != "csv") throw ConfigError("unknown format '" + a.format + "' (text or csv)");
    std::vector<std::pair<std::string, std::string>> filters;
    for (const auto& f : a.filters) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) throw ConfigError("filter '" + f + "' is not key=value");
        filters.emplace_back(f.substr(0, eq), f.substr(eq + 1));
    }
    const fs::path results = a.results.empty() ? fs::path(g.output_root) / "results.jsonl" : fs::path(a.results);
    std::vector<MetricsReport> reports;
    for (auto& r : ResultsStore(results).read_all()) {
        if (matches(r, filters)) reports.push_back(std::move(r));
    }
    if (reports.empty()) {
        std::cerr << "no results" << (filters.empty() ? "" : " matching the filter") << " in " << results.string()
                  << "\n";
        return kEmptyStore;
    }

    std::map<std::tuple<int, int, int>, std::vector<MetricsReport>> groups;
    for (auto& r : reports) {
        groups[{static_cast<int>(r.protocol.setup), static_cast<int>(r.protocol.source),
                static_cast<int>(r.protocol.test)}]
            .push_back(r);
    }
    std::vector<std::pair<std::string, ComparisonTable>> tables;
    for (const auto& [k, group] : groups) tables.emplace_back(group.front().protocol.key(), compare_table(group));
    const ComparisonTable summary = summary_table(reports);

    const fs::path figures = a.figures.empty() ? fs::path(g.output_root) / "figures" : fs::path(a.figures);
    if (!a.no_figures) {
        for (const auto& [key, t] : tables) write_bar_chart(t, figures / (file_stem(key) + ".png"));
        if (tables.size() > 1) write_bar_chart(summary, figures / "summary.png");
    }

    if (a.format == "text") {
        for (const auto& [key, t] : tables) std::cout << t.text() << "\n";
        if (tables.size() > 1) std::cout << summary.text();
        return kOk;
    }
    // One CSV for every protocol: protocol,row,<method columns>,best.
    std::vector<std::string> columns;
    for (const auto& [key, t] : tables) {
        for (const auto& c : t.columns) {
            if (std::find(columns.begin(), columns.end(), strip_count(c)) == columns.end()) {
                columns.push_back(strip_count(c));
            }
        }
    }
    std::sort(columns.begin(), columns.end(), [](const std::string& x, const std::string& y) {
        auto rank = [](const std::string& c) {
            return c == "BinClassifier" ? 0 : c == "SimCLR" ? 1 : c == "SupCLR" ? 2 : 3;
        };
        return std::make_pair(rank(x), x) < std::make_pair(rank(y), y);
    });
    ComparisonTable long_form;
    long_form.columns = columns;
    for (const auto& [key, t] : tables) {
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            long_form.rows.push_back(key + "|" + t.rows[r]);
            std::vector<std::optional<double>> row(columns.size());
            for (std::size_t c = 0; c < t.columns.size(); ++c) {
                const auto at = std::find(columns.begin(), columns.end(), strip_count(t.columns[c]));
                row[static_cast<std::size_t>(at - columns.begin())] = t.cells[r][c];
            }
            long_form.cells.push_back(std::move(row));
        }
    }
    // Split "key|row" into two CSV columns.
    std::istringstream in(long_form.csv());
    std::string line;
    std::getline(in, line);
    std::cout << "protocol," << line << "\n";
    while (std::getline(in, line)) {
        const auto bar = line.find('|');
        std::cout << line.substr(0, bar) << "," << line.substr(bar + 1) << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive learning for ASD vs control video classification"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI/TOML file with option values; command-line flags take precedence");

    Globals g;
    app.add_option("--output-root", g.output_root, "Directory for manifests, results, runs and figures")
        ->envname("CLV_OUTPUT_ROOT")
        ->capture_default_str();
    app.add_flag("--deterministic", g.deterministic, "Pin math libraries to one thread for exact repeatability")
        ->envname("CLV_DETERMINISTIC");

    // prepare
    PrepareArgs pa;
    auto* prepare = app.add_subcommand("prepare", "Build a dataset manifest or generate synthetic data");
    prepare->add_flag("--synthetic", pa.synthetic, "Generate the synthetic low inter-class variability dataset");
    prepare->add_option("--dataset", pa.dataset, "Dataset to scan: hgd or adcd");
    prepare->add_option("--root", pa.root, "Data root (holds <dataset>/...) or synthetic output directory");
    prepare->add_option("--manifest", pa.manifest, "Manifest output file (default <output-root>/manifests/<name>.jsonl)");
    prepare->add_flag("--strict", pa.strict, "Fail with exit code 2 if any clip is unreadable");
    prepare->add_option("--subjects", pa.synth.n_subjects, "Synthetic subjects (even index = ASD)")->capture_default_str();
    prepare->add_option("--clips-per-subject", pa.synth.clips_per_subject)->capture_default_str();
    prepare->add_option("--separation", pa.synth.separation, "Class separation in [0, 1]")->capture_default_str();
    prepare->add_option("--seed", pa.synth.seed)->capture_default_str();
    prepare->add_option("--amplitude", pa.synth.amplitude, "Oscillation amplitude in pixels")->capture_default_str();
    prepare->add_option("--control-background-shift", pa.synth.control_background_shift)->capture_default_str();
    prepare->add_option("--name", pa.synth.name, "Synthetic dataset name (subject prefix, manifest name)")
        ->capture_default_str();

    // run
    RunArgs ra;
    auto* run = app.add_subcommand("run", "Train and evaluate one method under one protocol");
    run->add_option("--method", ra.method, "binclassifier, simclr or supcon")->capture_default_str();
    run->add_option("--protocol", ra.protocol, "baseline, cross, setup1, setup2 or setup3")->capture_default_str();
    run->add_option("--test", ra.test, "test1, test2 or test3 (mixed setups)")->capture_default_str();
    run->add_option("--dataset", ra.dataset, "Baseline dataset: hgd, adcd or synth")->capture_default_str();
    run->add_option("--train-dataset", ra.train_dataset, "Cross protocol training dataset (hgd or adcd)");
    run->add_option("--test-dataset", ra.test_dataset, "Cross protocol test dataset (hgd or adcd)");
    run->add_option("--hgd-manifest", ra.hgd_manifest, "Manifest playing the hand-gesture role");
    run->add_option("--adcd-manifest", ra.adcd_manifest, "Manifest playing the AD+CD role");
    run->add_option("--scale", ra.scale, "Default regime: full (100 epochs, batch 8) or desk (10 epochs, batch 16)")->capture_default_str();
    run->add_option("--encoder", ra.encoder, "tiny3d or r2plus1d-18")->capture_default_str();
    run->add_option("--probe", ra.probe, "frozen or finetune")->capture_default_str();
    run->add_option("--seed", ra.seed)->capture_default_str();
    run->add_option("--epochs", ra.epochs);
    run->add_option("--batch-size", ra.batch_size);
    run->add_option("--temperature", ra.temperature);
    run->add_option("--lr", ra.learning_rate, "Learning rate");
    run->add_option("--weight-decay", ra.weight_decay);
    run->add_option("--probe-steps", ra.probe_steps);
    run->add_option("--clip-length", ra.clip_length, "Frames per clip (0 = training dataset default)")
        ->capture_default_str();
    run->add_option("--split-ratio", ra.split_ratio)->capture_default_str();
    run->add_option("--split-level", ra.split_level, "subject or clip")->capture_default_str();
    run->add_flag("--subject-vote", ra.subject_vote, "Majority vote over each subject's clips");
    run->add_option("--checkpoint", ra.checkpoint, "Save the trained network here");
    run->add_option("--results", ra.results, "Results store (default <output-root>/results.jsonl)");

    // eval
    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Evaluate a saved checkpoint on a manifest's test clips");
    ev->add_option("--checkpoint", ea.checkpoint)->required();
    ev->add_option("--manifest", ea.manifest)->required();
    ev->add_option("--protocol", ea.protocol)->capture_default_str();
    ev->add_option("--test", ea.test)->capture_default_str();
    ev->add_option("--dataset", ea.dataset)->capture_default_str();
    ev->add_option("--clip-length", ea.clip_length)->capture_default_str();
    ev->add_flag("--subject-vote", ea.subject_vote);
    ev->add_flag("--store", ea.store, "Append the report to the results store");
    ev->add_option("--results", ea.results);

    // report
    ReportArgs rp;
    auto* report = app.add_subcommand("report", "Comparison tables and bar charts from the results store");
    report->add_option("--results", rp.results, "Results store (default <output-root>/results.jsonl)");
    report->add_option("--format", rp.format, "text or csv")->capture_default_str();
    report->add_option("--filter", rp.filters, "key=value on protocol, method, test or source (repeatable)");
    report->add_option("--figures", rp.figures, "Directory for bar charts (default <output-root>/figures)");
    report->add_flag("--no-figures", rp.no_figures);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kMisconfig;
    }

    set_deterministic(g.deterministic);
    try {
        if (prepare->parsed()) return cmd_prepare(g, pa);
        if (run->parsed()) return cmd_run(g, app, ra);
        if (ev->parsed()) return cmd_eval(g, app, ea);
        if (report->parsed()) return cmd_report(g, rp);
    } catch (const IngestionError& e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        print_issues(e.issues());
        return kIngestion;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kDivergence;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kMisconfig;
    } catch (const ContractError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kMisconfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
