#include "clv/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "clv/data/video_io.hpp"
#include "clv/error.hpp"
#include "clv/seed.hpp"

namespace fs = std::filesystem;

namespace clv {
namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) { return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c); }

struct SubjectLook {
    Label label;
    double radius;
    double color[3];
    double background;
    std::uint64_t texture_seed;
};

SubjectLook subject_look(const SyntheticOptions& opt, int subject) {
    std::mt19937_64 rng(mix(opt.seed, static_cast<std::uint64_t>(subject), 0x5bULL));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SubjectLook s;
    s.label = subject % 2 == 0 ? Label::asd : Label::control;
    s.radius = 3.0 + 2.0 * u(rng);
    for (double& c : s.color) c = 0.55 + 0.45 * u(rng);
    s.background = 0.2 + 0.2 * u(rng);
    if (s.label == Label::control) s.background += opt.control_background_shift;
    s.texture_seed = rng();
    return s;
}

std::string padded(const char* prefix, int v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03d", prefix, v);
    return buf;
}

/// Trajectory position and unit perpendicular at progress s in [0, 1].
void trajectory(int action, double s, double speed, double size, double& x, double& y, double& px, double& py) {
    const double c = (size - 1) / 2.0;
    const double span = size * 0.5 * speed;
    switch (action) {
        case 0:  // horizontal reach
            x = c + (s - 0.5) * span;
            y = c;
            px = 0;
            py = 1;
            break;
        case 1:  // vertical lift
            x = c;
            y = c - (s - 0.5) * span;
            px = 1;
            py = 0;
            break;
        case 2: {  // half circle
            const double r = size * 0.25;
            const double th = std::numbers::pi * (0.25 + s * speed);
            x = c + r * std::cos(th);
            y = c + r * std::sin(th);
            px = std::cos(th);
            py = std::sin(th);
            break;
        }
        default:  // diagonal
            x = c + (s - 0.5) * span * 0.75;
            y = c + (s - 0.5) * span * 0.75;
            px = std::numbers::sqrt2 / 2;
            py = -std::numbers::sqrt2 / 2;
            break;
    }
}

}  // namespace

const std::vector<std::string>& synthetic_action_classes() {
    static const std::vector<std::string> v{"Reach", "Lift", "Circle", "Diagonal"};
    return v;
}

SyntheticClip render_synthetic_clip(const SyntheticOptions& opt, int subject, int clip) {
    if (opt.frames < 2 || opt.size < 8) throw ContractError("synthetic: need frames >= 2 and size >= 8");
    const SubjectLook look = subject_look(opt, subject);
    std::mt19937_64 rng(mix(opt.seed, static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(clip) + 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);

    SyntheticClip out;
    auto& p = out.params;
    p.label = look.label;
    p.action = clip % 4;
    p.frequency = kBaseFrequency + kFrequencyJitter * (2 * u(rng) - 1) +
                  (look.label == Label::asd ? opt.separation * kFrequencyGap : 0.0);
    p.phase = 2 * std::numbers::pi * u(rng);
    p.amplitude = opt.amplitude * (0.8 + 0.4 * u(rng));
    p.speed = 0.8 + 0.4 * u(rng);
    p.radius = look.radius;
    p.background = look.background;
    p.texture_seed = look.texture_seed;
    std::copy(std::begin(look.color), std::end(look.color), p.color);
    out.subject_id = opt.name + "_" + padded("s", subject);
    out.clip_id = padded("s", subject) + "_" + padded("c", clip);

    const int n = opt.size;
    std::vector<double> texture(static_cast<std::size_t>(n) * n);
    {
        std::mt19937_64 trng(p.texture_seed);
        std::uniform_real_distribution<double> tu(-0.08, 0.08);
        for (double& v : texture) v = tu(trng);
    }
    std::uniform_real_distribution<double> noise(-0.02, 0.02);

    Frames8& f = out.frames;
    f.t = opt.frames;
    f.h = n;
    f.w = n;
    f.rgb.assign(static_cast<std::size_t>(f.t) * n * n * 3, 0);
    for (int t = 0; t < f.t; ++t) {
        const double s = static_cast<double>(t) / (f.t - 1);
        double cx, cy, px, py;
        trajectory(p.action, s, p.speed, n, cx, cy, px, py);
        const double wobble = p.amplitude * std::sin(2 * std::numbers::pi * p.frequency * s + p.phase);
        cx += wobble * px;
        cy += wobble * py;
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const double d = std::hypot(x - cx, y - cy);
                const double cover = std::clamp(p.radius + 0.5 - d, 0.0, 1.0);
                const double bg = p.background + texture[static_cast<std::size_t>(y) * n + x];
                for (int c = 0; c < 3; ++c) {
                    const double v = bg * (1 - cover) + p.color[c] * cover + noise(rng);
                    f.at(t, y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
                }
            }
        }
    }
    return out;
}

std::vector<SyntheticClip> render_synthetic(const SyntheticOptions& opt) {
    if (opt.n_subjects < 2) throw ContractError("synthetic: need at least 2 subjects");
    if (opt.clips_per_subject < 1) throw ContractError("synthetic: need at least 1 clip per subject");
    if (!(opt.separation >= 0 && opt.separation <= 1)) throw ContractError("synthetic: separation must lie in [0, 1]");
    std::vector<SyntheticClip> out;
    out.reserve(static_cast<std::size_t>(opt.n_subjects) * opt.clips_per_subject);
    for (int s = 0; s < opt.n_subjects; ++s) {
        for (int c = 0; c < opt.clips_per_subject; ++c) out.push_back(render_synthetic_clip(opt, s, c));
    }
    return out;
}

DatasetManifest generate_synthetic(const SyntheticOptions& opt, const fs::path& root) {
    DatasetManifest m;
    for (auto& clip : render_synthetic(opt)) {
        const auto& action = synthetic_action_classes()[static_cast<std::size_t>(clip.params.action)];
        const fs::path dir = root / dataset_directory(DatasetId::synth) / to_string(clip.params.label) / action /
                             clip.subject_id / clip.clip_id;
        write_frame_folder(clip.frames, dir);
        ManifestEntry e;
        e.path = dir.generic_string();
        e.label = clip.params.label;
        e.action_class = action;
        e.subject_id = clip.subject_id;
        e.dataset = DatasetId::synth;
        m.entries.push_back(std::move(e));
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    return m;
}

}  // namespace clv
