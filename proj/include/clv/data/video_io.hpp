#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "clv/data/types.hpp"

namespace clv {

/// Resize shorter side to `size`, center-crop square, scale to [0, 1], then
/// standardize per channel with fixed constants.
struct PreprocessConfig {
    int size = 32;
    std::array<float, 3> mean{0.43216f, 0.394666f, 0.37645f};
    std::array<float, 3> stddev{0.22803f, 0.22145f, 0.216989f};
};

/// True for a frame-folder clip (`<clip>/frame_00000.png`, ...).
bool is_frame_folder(const std::filesystem::path& p);

/// Decodes a video container or frame folder into RGB frames.
/// Throws std::runtime_error if nothing decodable is found.
Frames8 load_frames(const std::filesystem::path& p);

/// Cheap readability probe: decodes the first frame only.
bool probe_readable(const std::filesystem::path& p, std::string* reason = nullptr);

/// Writes frames as `dir/frame_%05d.png`.
void write_frame_folder(const Frames8& frames, const std::filesystem::path& dir);

/// Picks `clip_length` frames by uniform sampling and preprocesses them.
Clip preprocess(const Frames8& frames, int clip_length, const PreprocessConfig& cfg, std::string source = {});

VideoSample load_sample(const ManifestEntry& entry);

}  // namespace clv
