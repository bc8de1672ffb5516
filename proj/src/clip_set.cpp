#include "clv/data/clip_set.hpp"

#include <algorithm>

namespace clv {

int ClipSet::count(Label l) const {
    return static_cast<int>(std::count(labels.begin(), labels.end(), label_value(l)));
}

std::vector<const Clip*> ClipSet::pointers(const std::vector<std::size_t>& idx) const {
    std::vector<const Clip*> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(&clips.at(i));
    return out;
}

std::vector<int> ClipSet::labels_of(const std::vector<std::size_t>& idx) const {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels.at(i));
    return out;
}

void ClipSet::push_back(Clip clip, Label label, std::string action, std::string subject, std::string id) {
    clips.push_back(std::move(clip));
    labels.push_back(label_value(label));
    action_classes.push_back(std::move(action));
    subject_ids.push_back(std::move(subject));
    clip_ids.push_back(std::move(id));
}

ClipSet load_clip_set(const DatasetManifest& m, int clip_length, const PreprocessConfig& cfg,
                      std::vector<IngestionIssue>* skipped) {
    ClipSet out;
    std::vector<IngestionIssue> issues;
    for (const auto& e : m.entries) {
        try {
            const VideoSample s = load_sample(e);
            out.push_back(preprocess(s.frames, clip_length, cfg, e.clip_id()), e.label, e.action_class, e.subject_id,
                          e.clip_id());
        } catch (const std::exception& ex) {
            issues.push_back({e.path, ex.what()});
        }
    }
    if (!issues.empty()) {
        if (skipped == nullptr) throw IngestionError(std::to_string(issues.size()) + " clip(s) could not be loaded", issues);
        skipped->insert(skipped->end(), issues.begin(), issues.end());
    }
    return out;
}

ClipSet clip_set_from_synthetic(const std::vector<SyntheticClip>& clips, int clip_length, const PreprocessConfig& cfg) {
    ClipSet out;
    for (const auto& c : clips) {
        const auto& action = synthetic_action_classes()[static_cast<std::size_t>(c.params.action)];
        out.push_back(preprocess(c.frames, clip_length, cfg, c.clip_id), c.params.label, action, c.subject_id, c.clip_id);
    }
    return out;
}

}  // namespace clv
