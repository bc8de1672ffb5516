#include <algorithm>
#include <filesystem>

#include "clv/data/types.hpp"
#include "clv/error.hpp"

namespace clv {

std::string to_string(Label l) { return l == Label::asd ? "ASD" : "Control"; }

std::string to_string(DatasetId d) {
    switch (d) {
        case DatasetId::hgd: return "HGD";
        case DatasetId::adcd: return "AD+CD";
        case DatasetId::synth: return "SYNTH";
    }
    return "?";
}

std::string to_string(SplitTag s) {
    switch (s) {
        case SplitTag::train: return "train";
        case SplitTag::test: return "test";
        case SplitTag::unassigned: return "unassigned";
    }
    return "?";
}

Label parse_label(std::string_view s) {
    if (s == "ASD") return Label::asd;
    if (s == "Control") return Label::control;
    throw ContractError("unknown label '" + std::string(s) + "' (expected ASD or Control)");
}

DatasetId parse_dataset(std::string_view s) {
    if (s == "HGD" || s == "hgd") return DatasetId::hgd;
    if (s == "AD+CD" || s == "adcd") return DatasetId::adcd;
    if (s == "SYNTH" || s == "synth") return DatasetId::synth;
    throw ConfigError("unknown dataset '" + std::string(s) + "'");
}

SplitTag parse_split(std::string_view s) {
    if (s == "train") return SplitTag::train;
    if (s == "test") return SplitTag::test;
    if (s == "unassigned") return SplitTag::unassigned;
    throw ContractError("unknown split '" + std::string(s) + "'");
}

std::string dataset_directory(DatasetId d) {
    switch (d) {
        case DatasetId::hgd: return "hgd";
        case DatasetId::adcd: return "adcd";
        case DatasetId::synth: return "synth";
    }
    return "?";
}

int default_clip_length(DatasetId d) {
    switch (d) {
        case DatasetId::hgd: return 16;
        case DatasetId::adcd: return 10;
        case DatasetId::synth: return 8;
    }
    return 0;
}

const std::vector<std::string>& hgd_action_classes() {
    static const std::vector<std::string> v{"Pass to Place", "Pass to Pour", "Placing", "Pouring"};
    return v;
}

const std::vector<std::string>& adcd_action_classes() {
    static const std::vector<std::string> v{
        "Touch Nose - Eat",         "Touch head - Shoot Ball", "Touch ear - Situp",       "Tapping - Chew",
        "Rolly Polly - Flic flac",  "Move the table - Push",   "Lock Hands - Shake Hands", "Arms Up - Fall Floor"};
    return v;
}

bool is_valid_action(DatasetId d, std::string_view action) {
    auto in = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), action) != v.end(); };
    switch (d) {
        case DatasetId::hgd: return in(hgd_action_classes());
        case DatasetId::adcd: return in(adcd_action_classes());
        case DatasetId::synth: return !action.empty();
    }
    return false;
}

void validate(const VideoSample& s) {
    if (s.frames.t < 1) throw ContractError("video " + s.clip_id + " has no frames");
    if (s.frames.rgb.size() != static_cast<std::size_t>(s.frames.t) * s.frames.h * s.frames.w * 3) {
        throw ContractError("video " + s.clip_id + " has inconsistent frame sizes");
    }
    if (!is_valid_action(s.dataset, s.action_class)) {
        throw ContractError("video " + s.clip_id + ": '" + s.action_class + "' is not an action class of " +
                            to_string(s.dataset));
    }
}

std::string ManifestEntry::clip_id() const {
    std::filesystem::path p(path);
    p.replace_extension();
    return p.generic_string();
}

std::map<std::string, SplitTag> DatasetManifest::split_assignment() const {
    std::map<std::string, SplitTag> out;
    for (const auto& e : entries) out[e.clip_id()] = e.split;
    return out;
}

DatasetManifest DatasetManifest::filter(SplitTag s) const {
    DatasetManifest out;
    for (const auto& e : entries) {
        if (e.split == s) out.entries.push_back(e);
    }
    return out;
}

}  // namespace clv
