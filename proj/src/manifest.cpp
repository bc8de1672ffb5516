#include "clv/data/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "clv/data/video_io.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace clv {
namespace {

std::vector<fs::path> sorted_children(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

ManifestBuild build_manifest(const fs::path& root, DatasetId dataset) {
    const fs::path base = root / dataset_directory(dataset);
    if (!fs::is_directory(base)) {
        throw IngestionError("dataset directory " + base.string() + " does not exist",
                             {{base.string(), "missing directory"}});
    }
    ManifestBuild out;
    std::map<Label, std::set<std::string>> subjects;
    for (const auto& label_dir : sorted_children(base)) {
        if (!fs::is_directory(label_dir)) continue;
        Label label;
        try {
            label = parse_label(label_dir.filename().string());
        } catch (const ContractError&) {
            out.issues.push_back({label_dir.string(), "unknown label directory"});
            continue;
        }
        for (const auto& action_dir : sorted_children(label_dir)) {
            if (!fs::is_directory(action_dir)) continue;
            const std::string action = action_dir.filename().string();
            if (!is_valid_action(dataset, action)) {
                out.issues.push_back({action_dir.string(), "'" + action + "' is not an action class of " +
                                                               to_string(dataset)});
                continue;
            }
            for (const auto& subject_dir : sorted_children(action_dir)) {
                if (!fs::is_directory(subject_dir)) continue;
                for (const auto& clip : sorted_children(subject_dir)) {
                    std::string reason;
                    if (!probe_readable(clip, &reason)) {
                        out.issues.push_back({clip.string(), reason});
                        continue;
                    }
                    ManifestEntry e;
                    e.path = clip.generic_string();
                    e.label = label;
                    e.action_class = action;
                    e.subject_id = subject_dir.filename().string();
                    e.dataset = dataset;
                    out.manifest.entries.push_back(std::move(e));
                    subjects[label].insert(subject_dir.filename().string());
                }
            }
        }
    }
    std::sort(out.manifest.entries.begin(), out.manifest.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    out.asd_subjects = static_cast<int>(subjects[Label::asd].size());
    out.control_subjects = static_cast<int>(subjects[Label::control].size());
    if (dataset == DatasetId::hgd &&
        (out.asd_subjects != kHgdAsdSubjects || out.control_subjects != kHgdControlSubjects)) {
        out.warnings.push_back("HGD has " + std::to_string(out.asd_subjects) + " ASD and " +
                               std::to_string(out.control_subjects) + " Control subjects; expected " +
                               std::to_string(kHgdAsdSubjects) + " and " + std::to_string(kHgdControlSubjects));
    }
    if (out.manifest.empty()) {
        throw IngestionError("no readable clips under " + base.string(), out.issues);
    }
    return out;
}

void write_manifest(const DatasetManifest& m, std::ostream& out) {
    for (const auto& e : m.entries) {
        ordered_json j;
        j["path"] = e.path;
        j["label"] = to_string(e.label);
        j["action_class"] = e.action_class;
        j["subject_id"] = e.subject_id;
        j["dataset"] = to_string(e.dataset);
        j["split"] = to_string(e.split);
        out << j.dump() << '\n';
    }
}

void write_manifest(const DatasetManifest& m, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        write_manifest(m, out);
    }
    fs::rename(tmp, file);
}

DatasetManifest read_manifest(std::istream& in) {
    DatasetManifest m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = ordered_json::parse(line);
            ManifestEntry e;
            e.path = j.at("path").get<std::string>();
            e.label = parse_label(j.at("label").get<std::string>());
            e.action_class = j.at("action_class").get<std::string>();
            e.subject_id = j.at("subject_id").get<std::string>();
            e.dataset = parse_dataset(j.at("dataset").get<std::string>());
            e.split = parse_split(j.at("split").get<std::string>());
            m.entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw ContractError("manifest line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return m;
}

DatasetManifest read_manifest(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ContractError("cannot open manifest " + file.string());
    return read_manifest(in);
}

SplitResult split_manifest(const DatasetManifest& m, double ratio, std::uint64_t seed, SplitLevel level) {
    if (m.empty()) throw ContractError("split_manifest: empty manifest");
    if (!(ratio > 0 && ratio < 1)) throw ContractError("split_manifest: ratio must lie in (0, 1)");

    // Unit = subject or clip; each unit gets a stratum key.
    std::map<std::string, std::string> unit_stratum;
    std::map<std::string, std::set<std::string>> subject_actions;
    std::map<std::string, Label> subject_label;
    auto unit_of = [&](const ManifestEntry& e) { return level == SplitLevel::subject ? e.subject_id : e.clip_id(); };
    for (const auto& e : m.entries) {
        if (level == SplitLevel::subject) {
            subject_actions[e.subject_id].insert(e.action_class);
            auto [it, fresh] = subject_label.emplace(e.subject_id, e.label);
            if (!fresh && it->second != e.label) {
                throw ContractError("split_manifest: subject " + e.subject_id + " carries both labels");
            }
        } else {
            unit_stratum[e.clip_id()] = to_string(e.label) + "|" + e.action_class;
        }
    }
    if (level == SplitLevel::subject) {
        for (const auto& [subject, actions] : subject_actions) {
            std::string key = to_string(subject_label[subject]);
            for (const auto& a : actions) key += "|" + a;
            unit_stratum[subject] = key;
        }
    }

    std::map<std::string, std::vector<std::string>> strata;
    for (const auto& [unit, key] : unit_stratum) strata[key].push_back(unit);

    SplitResult out;
    std::mt19937_64 rng(seed);
    std::map<std::string, SplitTag> assignment;
    for (auto& [key, units] : strata) {
        std::shuffle(units.begin(), units.end(), rng);
        const auto n = static_cast<long>(units.size());
        const long n_train = static_cast<long>(std::floor(ratio * static_cast<double>(n) + 1e-9));
        if (n_train < 1 || n_train >= n) {
            out.warnings.push_back("stratum '" + key + "' has " + std::to_string(n) +
                                   " unit(s), too few to split; all assigned to train");
            for (const auto& u : units) assignment[u] = SplitTag::train;
            continue;
        }
        for (long i = 0; i < n; ++i) assignment[units[static_cast<std::size_t>(i)]] = i < n_train ? SplitTag::train : SplitTag::test;
    }
    out.manifest = m;
    for (auto& e : out.manifest.entries) e.split = assignment.at(unit_of(e));
    return out;
}

}  // namespace clv
