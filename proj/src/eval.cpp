#include "clv/eval.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "clv/seed.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace clv {
namespace {

/// HGD classes first, then AD+CD, then synthetic, then anything else by name.
std::pair<int, std::string> class_rank(const std::string& name) {
    int base = 0;
    for (const auto* list : {&hgd_action_classes(), &adcd_action_classes(), &synthetic_action_classes()}) {
        const auto it = std::find(list->begin(), list->end(), name);
        if (it != list->end()) return {base + static_cast<int>(it - list->begin()), ""};
        base += 100;
    }
    return {base, name};
}

int method_rank(const std::string& m) {
    if (m == "binclassifier") return 0;
    if (m == "simclr") return 1;
    if (m == "supcon") return 2;
    return 3;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Runs `f`, re-raising any failure as the same error type with "<name>: " prepended.
template <typename F>
decltype(auto) stage(const char* name, F&& f) {
    const std::string p = std::string(name) + ": ";
    try {
        return f();
    } catch (const IngestionError& e) {
        throw IngestionError(p + e.what(), e.issues());
    } catch (const ConfigError& e) {
        throw ConfigError(p + e.what());
    } catch (const ContractError& e) {
        throw ContractError(p + e.what());
    } catch (const StructureError& e) {
        throw StructureError(p + e.what());
    } catch (const DomainError& e) {
        throw DomainError(p + e.what());
    } catch (const PolicyError& e) {
        throw PolicyError(p + e.what());
    } catch (const DivergenceError& e) {
        throw DivergenceError(p + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(p + e.what());
    }
}

bool has_unassigned(const DatasetManifest& m) {
    return std::any_of(m.entries.begin(), m.entries.end(),
                       [](const ManifestEntry& e) { return e.split == SplitTag::unassigned; });
}

ordered_json counts_json(const ClipSet& s) {
    return {{"clips", s.size()}, {"asd", s.count(Label::asd)}, {"control", s.count(Label::control)}};
}

ordered_json issues_json(const std::vector<IngestionIssue>& issues) {
    ordered_json out = ordered_json::array();
    for (const auto& i : issues) out.push_back({{"path", i.path}, {"reason", i.reason}});
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Indices of the largest values of a row; empty when fewer than two cells are present.
std::vector<std::size_t> best_of(const std::vector<std::optional<double>>& row) {
    std::vector<std::size_t> best;
    int present = 0;
    double top = -1;
    for (std::size_t c = 0; c < row.size(); ++c) {
        if (!row[c]) continue;
        ++present;
        if (*row[c] > top) {
            top = *row[c];
            best = {c};
        } else if (*row[c] == top) {
            best.push_back(c);
        }
    }
    if (present < 2) best.clear();
    return best;
}

}  // namespace

// ------------------------------------------------------------------ report

int MetricsReport::total() const {
    int n = 0;
    for (const auto& c : per_class) n += c.n_total;
    return n;
}

int MetricsReport::total_correct() const {
    int n = 0;
    for (const auto& c : per_class) n += c.n_correct;
    return n;
}

const ClassMetrics* MetricsReport::find(const std::string& action_class) const {
    for (const auto& c : per_class) {
        if (c.action_class == action_class) return &c;
    }
    return nullptr;
}

MetricsReport make_report(const std::vector<std::string>& action_classes, const std::vector<int>& labels,
                          const std::vector<int>& predictions, const SetupSpec& protocol, const std::string& method) {
    if (action_classes.size() != labels.size() || labels.size() != predictions.size()) {
        throw ContractError("make_report: " + std::to_string(action_classes.size()) + " classes, " +
                            std::to_string(labels.size()) + " labels, " + std::to_string(predictions.size()) +
                            " predictions");
    }
    if (labels.empty()) throw ContractError("make_report: empty test set");

    std::map<std::pair<int, std::string>, ClassMetrics> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& g = groups[class_rank(action_classes[i])];
        g.action_class = action_classes[i];
        ++g.n_total;
        if (predictions[i] == labels[i]) ++g.n_correct;
    }
    MetricsReport r;
    r.protocol = protocol;
    r.method = method;
    for (auto& [rank, g] : groups) {
        g.accuracy = 100.0 * g.n_correct / g.n_total;
        r.per_class.push_back(g);
    }
    double sum = 0;
    for (const auto& c : r.per_class) sum += c.accuracy;
    r.average = sum / static_cast<double>(r.per_class.size());
    r.single_class = std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels.front(); }) ||
                     single_class_test(protocol);
    return r;
}

MetricsReport evaluate(Network& net, const ClipSet& test, const SetupSpec& protocol, const std::string& method,
                       const EvalOptions& opt) {
    if (test.empty()) throw ContractError("evaluate: empty test set");
    const Eigen::VectorXf logits = predict_logits(net, test);
    std::vector<int> pred(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) pred[i] = logits(static_cast<Eigen::Index>(i)) > 0.0f ? 1 : 0;

    if (opt.subject_vote) {
        std::map<std::string, std::pair<int, double>> votes;  // subject -> (ASD votes - Control votes, logit sum)
        for (std::size_t i = 0; i < test.size(); ++i) {
            auto& v = votes[test.subject_ids[i]];
            v.first += pred[i] ? 1 : -1;
            v.second += logits(static_cast<Eigen::Index>(i));
        }
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto& v = votes[test.subject_ids[i]];
            pred[i] = v.first != 0 ? (v.first > 0 ? 1 : 0) : (v.second > 0 ? 1 : 0);
        }
    }
    MetricsReport r = make_report(test.action_classes, test.labels, pred, protocol, method);
    r.metadata["eval"] = {{"subject_vote", opt.subject_vote}};
    return r;
}

MetricsReport evaluate(const fs::path& checkpoint, const DatasetManifest& test, int clip_length,
                       const SetupSpec& protocol, const EvalOptions& opt) {
    if (test.empty()) throw ContractError("evaluate: empty test manifest");
    auto loaded = load_checkpoint(checkpoint);
    if (clip_length <= 0) clip_length = default_clip_length(test.entries.front().dataset);
    PreprocessConfig pre;
    pre.size = loaded.net->encoder.spec().height;
    std::vector<IngestionIssue> skipped;
    const ClipSet clips = load_clip_set(test, clip_length, pre, &skipped);
    if (clips.empty()) throw IngestionError("evaluate: no readable test clip", skipped);

    const auto& cc = loaded.config;
    std::string method;
    if (cc.contains("regime") && cc["regime"].contains("method")) {
        method = cc["regime"]["method"].get<std::string>();
    } else if (cc.contains("method")) {
        method = cc["method"].get<std::string>();
    }
    MetricsReport r = evaluate(*loaded.net, clips, protocol, method, opt);
    r.excluded = skipped;
    r.metadata["checkpoint"] = loaded.config;
    r.metadata["clip_length"] = clip_length;
    return r;
}

ordered_json to_json(const MetricsReport& r) {
    ordered_json j;
    j["protocol"] = {{"key", r.protocol.key()},
                     {"setup", to_string(r.protocol.setup)},
                     {"test", to_string(r.protocol.test)},
                     {"source", to_string(r.protocol.source)}};
    j["method"] = r.method;
    j["single_class"] = r.single_class;
    j["average"] = r.average;
    ordered_json rows = ordered_json::array();
    for (const auto& c : r.per_class) {
        rows.push_back({{"action_class", c.action_class},
                        {"n_correct", c.n_correct},
                        {"n_total", c.n_total},
                        {"accuracy", c.accuracy}});
    }
    j["per_class"] = rows;
    j["excluded"] = issues_json(r.excluded);
    j["metadata"] = r.metadata;
    return j;
}

MetricsReport report_from_json(const ordered_json& j) {
    MetricsReport r;
    const auto& p = j.at("protocol");
    r.protocol.setup = parse_setup(p.at("setup").get<std::string>());
    r.protocol.test = parse_test(p.at("test").get<std::string>());
    r.protocol.source = parse_role(p.at("source").get<std::string>());
    r.method = j.at("method").get<std::string>();
    r.single_class = j.at("single_class").get<bool>();
    r.average = j.at("average").get<double>();
    for (const auto& row : j.at("per_class")) {
        ClassMetrics c;
        c.action_class = row.at("action_class").get<std::string>();
        c.n_correct = row.at("n_correct").get<int>();
        c.n_total = row.at("n_total").get<int>();
        c.accuracy = row.at("accuracy").get<double>();
        r.per_class.push_back(c);
    }
    for (const auto& e : j.at("excluded")) {
        r.excluded.push_back({e.at("path").get<std::string>(), e.at("reason").get<std::string>()});
    }
    if (j.contains("metadata")) r.metadata = j.at("metadata");
    return r;
}

// ------------------------------------------------------------------ store

void ResultsStore::append(const MetricsReport& r) const {
    if (file_.has_parent_path()) fs::create_directories(file_.parent_path());
    const std::string line = to_json(r).dump() + "\n";
    const int fd = ::open(file_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error("cannot open results store " + file_.string());
    if (::flock(fd, LOCK_EX) != 0) {
        ::close(fd);
        throw std::runtime_error("cannot lock results store " + file_.string());
    }
    std::size_t done = 0;
    bool ok = true;
    while (done < line.size()) {
        const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
        if (n <= 0) {
            ok = false;
            break;
        }
        done += static_cast<std::size_t>(n);
    }
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (!ok) throw std::runtime_error("short write to results store " + file_.string());
}

std::vector<MetricsReport> ResultsStore::read_all() const {
    std::vector<MetricsReport> out;
    std::ifstream in(file_);
    if (!in) return out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(report_from_json(ordered_json::parse(line)));
        } catch (const std::exception& e) {
            throw ContractError(file_.string() + ":" + std::to_string(lineno) + ": bad record: " + e.what());
        }
    }
    return out;
}

// ------------------------------------------------------------------ protocol

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["protocol"] = {{"key", protocol.key()},
                     {"setup", clv::to_string(protocol.setup)},
                     {"test", clv::to_string(protocol.test)},
                     {"source", clv::to_string(protocol.source)}};
    j["regime"] = clv::to_json(regime);
    j["encoder"] = clv::to_string(encoder.architecture);
    j["split_ratio"] = split_ratio;
    j["split_level"] = split_level == SplitLevel::subject ? "subject" : "clip";
    j["clip_length"] = clip_length;
    j["frame_size"] = preprocess.size;
    j["subject_vote"] = eval.subject_vote;
    return j;
}

MetricsReport run_protocol(const ExperimentConfig& cfg, const DatasetManifest& hgd_in, const DatasetManifest& adcd_in,
                           const ResultsStore* store) {
    stage("config", [&] {
        validate(cfg.protocol);
        cfg.regime.validate();
        if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0)) {
            throw ConfigError("split ratio must lie in (0, 1), got " + format_number(cfg.split_ratio));
        }
    });

    DatasetManifest hgd = hgd_in;
    DatasetManifest adcd = adcd_in;
    ordered_json split_warnings = ordered_json::array();
    stage("split", [&] {
        std::uint64_t stream = 21;
        for (auto* m : {&hgd, &adcd}) {
            const std::uint64_t s = derive_seed(cfg.regime.seed, stream++);
            if (m->empty() || !has_unassigned(*m)) continue;
            auto res = split_manifest(*m, cfg.split_ratio, s, cfg.split_level);
            *m = std::move(res.manifest);
            for (auto& w : res.warnings) split_warnings.push_back(w);
        }
    });

    const SetupData data = stage("setup", [&] {
        SetupData d = build_setup(cfg.protocol, hgd, adcd);
        if (d.train.empty()) throw ContractError("protocol " + cfg.protocol.key() + " has no training clips");
        if (d.test.empty()) throw ContractError("protocol " + cfg.protocol.key() + " has no test clips");
        return d;
    });

    const int clip_length =
        cfg.clip_length > 0 ? cfg.clip_length : default_clip_length(data.train.entries.front().dataset);
    std::vector<IngestionIssue> train_skipped, test_skipped;
    ClipSet train, test;
    stage("load", [&] {
        train = load_clip_set(data.train, clip_length, cfg.preprocess, &train_skipped);
        test = load_clip_set(data.test, clip_length, cfg.preprocess, &test_skipped);
        if (train.empty()) throw IngestionError("no readable training clip", train_skipped);
        if (test.empty()) throw IngestionError("no readable test clip", test_skipped);
    });

    EncoderSpec spec = cfg.encoder;
    spec.frames = clip_length;
    spec.height = spec.width = cfg.preprocess.size;
    Network net(spec, cfg.regime.seed);
    const TrainOutcome outcome = stage("train", [&] { return train_method(cfg.regime, train, net, cfg.on_epoch); });

    if (cfg.checkpoint) {
        stage("checkpoint", [&] { save_checkpoint(net, cfg.to_json(), *cfg.checkpoint); });
    }

    MetricsReport report =
        stage("evaluate", [&] { return evaluate(net, test, cfg.protocol, to_string(cfg.regime.method), cfg.eval); });
    report.excluded = test_skipped;

    auto& md = report.metadata;
    md["config"] = cfg.to_json();
    md["clip_length"] = clip_length;
    md["train"] = counts_json(train);
    md["test"] = counts_json(test);
    md["train_skipped"] = issues_json(train_skipped);
    md["split_warnings"] = split_warnings;
    ordered_json losses = ordered_json::array();
    for (double l : outcome.history.epoch_loss) losses.push_back(l);
    md["epoch_loss"] = losses;
    md["skipped_batches"] = outcome.history.skipped_batches;
    md["probe"] = {{"steps", outcome.probe.steps}, {"train_accuracy", outcome.probe.train_accuracy}};
    md["parameter_checksum"] = hex64(Network::checksum(net.all_parameters()));

    if (store != nullptr) stage("store", [&] { store->append(report); });
    return report;
}

// ------------------------------------------------------------------ tables

std::string method_title(const std::string& method) {
    if (method == "binclassifier") return "BinClassifier";
    if (method == "simclr") return "SimCLR";
    if (method == "supcon") return "SupCLR";
    return method;
}

namespace {

/// Reports grouped by method in column order.
std::vector<std::pair<std::string, std::vector<const MetricsReport*>>> by_method(
    const std::vector<MetricsReport>& reports) {
    std::map<std::pair<int, std::string>, std::vector<const MetricsReport*>> groups;
    for (const auto& r : reports) groups[{method_rank(r.method), r.method}].push_back(&r);
    std::vector<std::pair<std::string, std::vector<const MetricsReport*>>> out;
    for (auto& [k, v] : groups) out.emplace_back(k.second, v);
    return out;
}

std::string column_name(const std::string& method, std::size_t n) {
    return method_title(method) + (n > 1 ? " (n=" + std::to_string(n) + ")" : "");
}

}  // namespace

ComparisonTable compare_table(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ContractError("compare_table: no reports");
    const std::string key = reports.front().protocol.key();
    for (const auto& r : reports) {
        if (r.protocol.key() != key) {
            throw ContractError("compare_table: reports mix protocols " + key + " and " + r.protocol.key());
        }
    }
    std::map<std::pair<int, std::string>, std::string> classes;
    bool single = false;
    for (const auto& r : reports) {
        single = single || r.single_class;
        for (const auto& c : r.per_class) classes[class_rank(c.action_class)] = c.action_class;
    }

    ComparisonTable t;
    t.title = key + (single ? " [single-class test set]" : "");
    for (const auto& [rank, name] : classes) t.rows.push_back(name);
    t.rows.push_back("Average");
    t.cells.assign(t.rows.size(), {});

    for (const auto& [method, group] : by_method(reports)) {
        t.columns.push_back(column_name(method, group.size()));
        std::size_t row = 0;
        for (const auto& [rank, name] : classes) {
            double sum = 0;
            int n = 0;
            for (const auto* r : group) {
                if (const auto* c = r->find(name)) {
                    sum += c->accuracy;
                    ++n;
                }
            }
            t.cells[row++].push_back(n ? std::optional<double>(sum / n) : std::nullopt);
        }
        double sum = 0;
        for (const auto* r : group) sum += r->average;
        t.cells[row].push_back(sum / static_cast<double>(group.size()));
    }
    return t;
}

ComparisonTable summary_table(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ContractError("summary_table: no reports");
    auto order = [](const SetupSpec& s) {
        return std::make_tuple(static_cast<int>(s.setup), static_cast<int>(s.source), static_cast<int>(s.test));
    };
    std::map<std::tuple<int, int, int>, std::string> keys;
    for (const auto& r : reports) keys[order(r.protocol)] = r.protocol.key();

    ComparisonTable t;
    t.title = "Average accuracy by protocol";
    for (const auto& [o, k] : keys) t.rows.push_back(k);
    t.cells.assign(t.rows.size(), {});
    for (const auto& [method, group] : by_method(reports)) {
        t.columns.push_back(method_title(method));
        std::size_t row = 0;
        for (const auto& [o, k] : keys) {
            double sum = 0;
            int n = 0;
            for (const auto* r : group) {
                if (r->protocol.key() == k) {
                    sum += r->average;
                    ++n;
                }
            }
            t.cells[row++].push_back(n ? std::optional<double>(sum / n) : std::nullopt);
        }
    }
    return t;
}

std::string ComparisonTable::text() const {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({""});
    for (const auto& c : columns) grid.back().push_back(c);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto best = best_of(cells[r]);
        std::vector<std::string> line{rows[r]};
        for (std::size_t c = 0; c < cells[r].size(); ++c) {
            if (!cells[r][c]) {
                line.push_back("-");
                continue;
            }
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", *cells[r][c]);
            const bool mark = std::find(best.begin(), best.end(), c) != best.end();
            line.push_back(std::string(buf) + (mark ? "*" : " "));
        }
        grid.push_back(std::move(line));
    }
    std::vector<std::size_t> width(columns.size() + 1, 0);
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    }
    std::ostringstream out;
    out << title << "\n";
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t c = 0; c < grid[i].size(); ++c) {
            const auto& s = grid[i][c];
            const std::string pad(width[c] - s.size(), ' ');
            out << (c == 0 ? s + pad : pad + s) << (c + 1 < grid[i].size() ? "  " : "");
        }
        out << "\n";
        if (i == 0 || (i + 2 == grid.size() && rows.back() == "Average")) out << std::string(total - 2, '-') << "\n";
    }
    return out.str();
}

std::string ComparisonTable::csv() const {
    std::ostringstream out;
    out << "row";
    for (const auto& c : columns) out << "," << csv_field(c);
    out << ",best\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << csv_field(rows[r]);
        for (const auto& v : cells[r]) out << "," << (v ? format_number(*v) : "");
        std::string best;
        for (auto c : best_of(cells[r])) best += (best.empty() ? "" : ";") + columns[c];
        out << "," << csv_field(best) << "\n";
    }
    return out.str();
}

ComparisonTable parse_table_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    ComparisonTable t;
    if (!std::getline(in, line)) throw ContractError("parse_table_csv: empty input");
    auto header = split_csv_line(line);
    if (header.size() < 2 || header.front() != "row" || header.back() != "best") {
        throw ContractError("parse_table_csv: unexpected header '" + line + "'");
    }
    t.columns.assign(header.begin() + 1, header.end() - 1);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ContractError("parse_table_csv: line " + std::to_string(lineno) + " has " +
                                std::to_string(fields.size()) + " fields, expected " + std::to_string(header.size()));
        }
        t.rows.push_back(fields.front());
        std::vector<std::optional<double>> row;
        for (std::size_t c = 1; c + 1 < fields.size(); ++c) {
            const auto& f = fields[c];
            if (f.empty()) {
                row.push_back(std::nullopt);
                continue;
            }
            double v = 0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
                throw ContractError("parse_table_csv: line " + std::to_string(lineno) + ": bad number '" + f + "'");
            }
            row.push_back(v);
        }
        t.cells.push_back(std::move(row));
    }
    return t;
}

void write_bar_chart(const ComparisonTable& table, const fs::path& png) {
    static const cv::Scalar palette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148}};
    const int n_cols = std::max<int>(1, static_cast<int>(table.columns.size()));
    const int bar = 18, gap = 30, left = 50, top = 40, plot_h = 220, bottom = 70;
    const int group_w = n_cols * bar + gap;
    const int width = std::max(360, left + static_cast<int>(table.rows.size()) * group_w + 20);
    const int height = top + plot_h + bottom;
    cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    const auto font = cv::FONT_HERSHEY_SIMPLEX;

    cv::putText(img, table.title, {left, 20}, font, 0.45, {0, 0, 0}, 1, cv::LINE_AA);
    for (int tick = 0; tick <= 100; tick += 25) {
        const int y = top + plot_h - tick * plot_h / 100;
        cv::line(img, {left, y}, {width - 10, y}, {225, 225, 225}, 1);
        cv::putText(img, std::to_string(tick), {8, y + 4}, font, 0.35, {80, 80, 80}, 1, cv::LINE_AA);
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const int x0 = left + static_cast<int>(r) * group_w + gap / 2;
        for (std::size_t c = 0; c < table.cells[r].size(); ++c) {
            if (!table.cells[r][c]) continue;
            const double v = std::clamp(*table.cells[r][c], 0.0, 100.0);
            const int h = static_cast<int>(v * plot_h / 100.0 + 0.5);
            const int x = x0 + static_cast<int>(c) * bar;
            cv::rectangle(img, {x, top + plot_h - h}, {x + bar - 3, top + plot_h}, palette[c % 5], cv::FILLED);
        }
        std::string label = table.rows[r];
        if (label.size() > 14) label = label.substr(0, 13) + ".";
        cv::putText(img, label, {x0, top + plot_h + 16}, font, 0.33, {0, 0, 0}, 1, cv::LINE_AA);
    }
    cv::line(img, {left, top + plot_h}, {width - 10, top + plot_h}, {0, 0, 0}, 1);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const int x = left + static_cast<int>(c) * 120;
        const int y = top + plot_h + 45;
        cv::rectangle(img, {x, y - 9}, {x + 10, y + 1}, palette[c % 5], cv::FILLED);
        cv::putText(img, table.columns[c], {x + 14, y}, font, 0.38, {0, 0, 0}, 1, cv::LINE_AA);
    }
    if (png.has_parent_path()) fs::create_directories(png.parent_path());
    if (!cv::imwrite(png.string(), img)) throw std::runtime_error("cannot write chart " + png.string());
}

}  // namespace clv
