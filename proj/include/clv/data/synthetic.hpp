#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clv/data/types.hpp"

namespace clv {

/// Parameters of the synthetic low inter-class variability generator.
///
/// Every clip shows a textured disk following one of four trajectory
/// templates over a noisy background. Superimposed on the trajectory is a
/// small perpendicular oscillation whose frequency is the only class cue:
/// ASD clips oscillate `separation * kFrequencyGap` cycles per clip faster
/// than controls. Subject appearance (disk size, colour, background tint) and
/// per-clip jitter (phase, speed, frequency) are drawn identically for both
/// classes, so separation = 0 makes the classes indistinguishable.
struct SyntheticOptions {
    int n_subjects = 20;
    int clips_per_subject = 8;
    double separation = 0.5;
    std::uint64_t seed = 0;
    int frames = 16;
    int size = 32;
    /// Prefix for subject ids, keeps subjects of different synthetic sets distinct.
    std::string name = "synth";
    /// Brightness offset added to control backgrounds only; mimics a control
    /// class recorded elsewhere. 0 keeps backgrounds class-independent.
    double control_background_shift = 0.0;
    /// Mean oscillation amplitude in pixels; each clip draws within +-20%.
    double amplitude = 1.6;
};

inline constexpr double kBaseFrequency = 1.0;   // cycles per clip
inline constexpr double kFrequencyGap = 1.0;    // at separation = 1
inline constexpr double kFrequencyJitter = 0.25;

const std::vector<std::string>& synthetic_action_classes();

/// Generative parameters of one clip, exposed for oracle classifiers.
struct SyntheticClipParams {
    Label label = Label::control;
    int action = 0;
    double frequency = kBaseFrequency;
    double phase = 0;
    double amplitude = 1.5;
    double speed = 1.0;
    double radius = 4.0;
    double background = 0.4;
    std::uint64_t texture_seed = 0;
    double color[3] = {0.8, 0.6, 0.3};
};

struct SyntheticClip {
    SyntheticClipParams params;
    Frames8 frames;
    std::string subject_id;
    std::string clip_id;
};

/// Deterministic in (options, subject, clip).
SyntheticClip render_synthetic_clip(const SyntheticOptions& opt, int subject, int clip);

/// All clips in subject-major order, rendered in memory.
std::vector<SyntheticClip> render_synthetic(const SyntheticOptions& opt);

/// Renders and writes `<root>/synth/<label>/<action>/<subject>/<clip>/frame_%05d.png`,
/// returning the manifest (entries sorted by path, split unassigned).
DatasetManifest generate_synthetic(const SyntheticOptions& opt, const std::filesystem::path& root);

}  // namespace clv
