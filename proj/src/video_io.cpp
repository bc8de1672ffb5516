#include "clv/data/video_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "clv/data/sampling.hpp"
#include "clv/error.hpp"

namespace fs = std::filesystem;

namespace clv {
namespace {

std::string frame_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05d.png", i);
    return buf;
}

std::vector<fs::path> frame_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (int i = 0;; ++i) {
        fs::path f = dir / frame_name(i);
        if (!fs::exists(f)) break;
        files.push_back(std::move(f));
    }
    return files;
}

void append_frame(Frames8& out, const cv::Mat& bgr, const std::string& where) {
    if (bgr.empty() || bgr.type() != CV_8UC3) throw std::runtime_error("undecodable frame in " + where);
    if (out.t == 0) {
        out.h = bgr.rows;
        out.w = bgr.cols;
    } else if (bgr.rows != out.h || bgr.cols != out.w) {
        throw std::runtime_error("frame size changes inside " + where);
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    const std::size_t bytes = static_cast<std::size_t>(out.h) * out.w * 3;
    const std::size_t offset = out.rgb.size();
    out.rgb.resize(offset + bytes);
    for (int y = 0; y < out.h; ++y) {
        std::copy_n(rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(out.w) * 3,
                    out.rgb.data() + offset + static_cast<std::size_t>(y) * out.w * 3);
    }
    ++out.t;
}

cv::Mat frame_to_mat(const Frames8& f, int t) {
    cv::Mat rgb(f.h, f.w, CV_8UC3);
    const std::size_t stride = static_cast<std::size_t>(f.w) * 3;
    for (int y = 0; y < f.h; ++y) {
        std::copy_n(f.rgb.data() + (static_cast<std::size_t>(t) * f.h + y) * stride, stride, rgb.ptr<std::uint8_t>(y));
    }
    return rgb;
}

}  // namespace

bool is_frame_folder(const fs::path& p) { return fs::is_directory(p) && fs::exists(p / frame_name(0)); }

Frames8 load_frames(const fs::path& p) {
    Frames8 out;
    if (fs::is_directory(p)) {
        const auto files = frame_files(p);
        if (files.empty()) throw std::runtime_error("no frame_00000.png in " + p.string());
        for (const auto& f : files) append_frame(out, cv::imread(f.string(), cv::IMREAD_COLOR), f.string());
        return out;
    }
    cv::VideoCapture cap(p.string(), cv::CAP_FFMPEG);
    if (!cap.isOpened()) throw std::runtime_error("cannot open video " + p.string());
    cv::Mat frame;
    while (cap.read(frame)) append_frame(out, frame, p.string());
    if (out.t == 0) throw std::runtime_error("no decodable frames in " + p.string());
    return out;
}

bool probe_readable(const fs::path& p, std::string* reason) {
    auto fail = [&](std::string why) {
        if (reason) *reason = std::move(why);
        return false;
    };
    try {
        if (fs::is_directory(p)) {
            if (!fs::exists(p / frame_name(0))) return fail("frame folder without frame_00000.png");
            if (cv::imread((p / frame_name(0)).string(), cv::IMREAD_COLOR).empty()) {
                return fail("frame_00000.png is not a decodable image");
            }
            return true;
        }
        cv::VideoCapture cap(p.string(), cv::CAP_FFMPEG);
        cv::Mat frame;
        if (!cap.isOpened() || !cap.read(frame) || frame.empty()) return fail("not a decodable video");
        return true;
    } catch (const std::exception& e) {
        return fail(e.what());
    }
}

void write_frame_folder(const Frames8& frames, const fs::path& dir) {
    fs::create_directories(dir);
    for (int t = 0; t < frames.t; ++t) {
        cv::Mat bgr;
        cv::cvtColor(frame_to_mat(frames, t), bgr, cv::COLOR_RGB2BGR);
        const fs::path f = dir / frame_name(t);
        if (!cv::imwrite(f.string(), bgr)) throw std::runtime_error("cannot write " + f.string());
    }
}

Clip preprocess(const Frames8& frames, int clip_length, const PreprocessConfig& cfg, std::string source) {
    if (frames.t < 1) throw ContractError("preprocess: video has no frames");
    if (cfg.size < 1) throw ContractError("preprocess: size must be positive");
    const auto idx = uniform_sample_indices(frames.t, clip_length);
    Clip clip;
    clip.frames = clip_length;
    clip.height = cfg.size;
    clip.width = cfg.size;
    clip.source = std::move(source);
    clip.data.resize(3, static_cast<Eigen::Index>(clip_length) * cfg.size * cfg.size);

    const double scale = static_cast<double>(cfg.size) / std::min(frames.h, frames.w);
    const int rw = std::max(cfg.size, static_cast<int>(std::lround(frames.w * scale)));
    const int rh = std::max(cfg.size, static_cast<int>(std::lround(frames.h * scale)));
    const int x0 = (rw - cfg.size) / 2;
    const int y0 = (rh - cfg.size) / 2;
    for (int k = 0; k < clip_length; ++k) {
        cv::Mat rgb = frame_to_mat(frames, idx[static_cast<std::size_t>(k)]);
        if (rw != frames.w || rh != frames.h) {
            cv::Mat resized;
            cv::resize(rgb, resized, cv::Size(rw, rh), 0, 0, scale < 1 ? cv::INTER_AREA : cv::INTER_LINEAR);
            rgb = resized;
        }
        for (int y = 0; y < cfg.size; ++y) {
            const std::uint8_t* row = rgb.ptr<std::uint8_t>(y0 + y);
            for (int x = 0; x < cfg.size; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const float v = static_cast<float>(row[(x0 + x) * 3 + c]) / 255.0f;
                    clip.at(c, k, y, x) = (v - cfg.mean[c]) / cfg.stddev[c];
                }
            }
        }
    }
    return clip;
}

VideoSample load_sample(const ManifestEntry& entry) {
    VideoSample s;
    s.frames = load_frames(entry.path);
    s.label = entry.label;
    s.action_class = entry.action_class;
    s.dataset = entry.dataset;
    s.subject_id = entry.subject_id;
    s.clip_id = entry.clip_id();
    validate(s);
    return s;
}

}  // namespace clv
