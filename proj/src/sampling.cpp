#include "clv/data/sampling.hpp"

#include <string>

#include "clv/error.hpp"

namespace clv {

std::vector<int> uniform_sample_indices(int total_frames, int clip_length) {
    if (total_frames < 1 || clip_length < 1) {
        throw ContractError("uniform_sample_indices: need T >= 1 and k >= 1, got T=" + std::to_string(total_frames) +
                            ", k=" + std::to_string(clip_length));
    }
    std::vector<int> idx(static_cast<std::size_t>(clip_length), 0);
    if (clip_length == 1) return idx;
    const long long span = total_frames - 1;
    for (int i = 0; i < clip_length; ++i) {
        idx[static_cast<std::size_t>(i)] = static_cast<int>((i * span) / (clip_length - 1));
    }
    return idx;
}

Clip horizontal_flip(const Clip& clip) {
    Clip out = clip;
    for (int c = 0; c < 3; ++c) {
        for (int t = 0; t < clip.frames; ++t) {
            for (int y = 0; y < clip.height; ++y) {
                for (int x = 0; x < clip.width; ++x) out.at(c, t, y, x) = clip.at(c, t, y, clip.width - 1 - x);
            }
        }
    }
    out.view_tag = clip.view_tag == ViewTag::original ? ViewTag::flipped : ViewTag::original;
    return out;
}

std::pair<Clip, Clip> make_views(const Clip& clip) {
    if (clip.view_tag != ViewTag::original) throw ContractError("make_views: clip " + clip.source + " is already a view");
    return {clip, horizontal_flip(clip)};
}

nn::Volume<float> stack_clips(const std::vector<const Clip*>& clips) {
    if (clips.empty()) throw ContractError("stack_clips: empty batch");
    const Clip& first = *clips.front();
    nn::Volume<float> v({static_cast<nn::Index>(clips.size()), 3, first.frames, first.height, first.width});
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const Clip& c = *clips[i];
        if (c.frames != first.frames || c.height != first.height || c.width != first.width) {
            throw ContractError("stack_clips: clip " + c.source + " has a different shape");
        }
        v.sample(static_cast<nn::Index>(i)) = c.data;
    }
    return v;
}

ViewBatch make_view_batch(const std::vector<const Clip*>& clips, const std::vector<int>& labels) {
    if (labels.size() != clips.size()) throw ContractError("make_view_batch: one label per clip required");
    std::vector<Clip> views;
    views.reserve(2 * clips.size());
    ViewBatch batch;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        auto [a, b] = make_views(*clips[i]);
        views.push_back(std::move(a));
        views.push_back(std::move(b));
        batch.origin_ids.insert(batch.origin_ids.end(), {static_cast<int>(i), static_cast<int>(i)});
        batch.labels.insert(batch.labels.end(), {labels[i], labels[i]});
    }
    std::vector<const Clip*> ptrs;
    for (const auto& v : views) ptrs.push_back(&v);
    batch.views = stack_clips(ptrs);
    return batch;
}

}  // namespace clv
