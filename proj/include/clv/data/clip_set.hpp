#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clv/data/synthetic.hpp"
#include "clv/data/types.hpp"
#include "clv/data/video_io.hpp"
#include "clv/error.hpp"

namespace clv {

/// Preprocessed clips held in memory with their metadata, in manifest order.
struct ClipSet {
    std::vector<Clip> clips;
    std::vector<int> labels;
    std::vector<std::string> action_classes;
    std::vector<std::string> subject_ids;
    std::vector<std::string> clip_ids;

    std::size_t size() const { return clips.size(); }
    bool empty() const { return clips.empty(); }
    int count(Label l) const;
    std::vector<const Clip*> pointers(const std::vector<std::size_t>& idx) const;
    std::vector<int> labels_of(const std::vector<std::size_t>& idx) const;
    void push_back(Clip clip, Label label, std::string action, std::string subject, std::string id);
};

/// Decodes and preprocesses every manifest entry to `clip_length` frames.
/// Unreadable clips are skipped and reported in `skipped` (or rethrown as an
/// IngestionError when `skipped` is null).
ClipSet load_clip_set(const DatasetManifest& m, int clip_length, const PreprocessConfig& cfg,
                      std::vector<IngestionIssue>* skipped = nullptr);

/// Same preprocessing, straight from rendered synthetic clips (no disk round trip).
ClipSet clip_set_from_synthetic(const std::vector<SyntheticClip>& clips, int clip_length, const PreprocessConfig& cfg);

}  // namespace clv
