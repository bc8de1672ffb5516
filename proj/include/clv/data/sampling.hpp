#pragma once

#include <utility>
#include <vector>

#include "clv/data/types.hpp"
#include "clv/nn/volume.hpp"

namespace clv {

/// floor(linspace(0, T-1, k)), evaluated exactly in integers. When T < k the
/// same formula repeats indices, which loop-pads short videos.
std::vector<int> uniform_sample_indices(int total_frames, int clip_length);

/// Left-right mirror of every frame.
Clip horizontal_flip(const Clip& clip);

/// (original, mirrored copy tagged `flipped`).
std::pair<Clip, Clip> make_views(const Clip& clip);

/// N clips expanded to 2N views: rows 2i and 2i+1 are clip i and its mirror.
struct ViewBatch {
    nn::Volume<float> views;
    std::vector<int> origin_ids;
    std::vector<int> labels;
};

ViewBatch make_view_batch(const std::vector<const Clip*>& clips, const std::vector<int>& labels);

/// Stacks clips (all the same shape) into an encoder input volume.
nn::Volume<float> stack_clips(const std::vector<const Clip*>& clips);

}  // namespace clv
