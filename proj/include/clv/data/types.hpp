#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace clv {

/// ASD is the positive class (1), Control the negative class (0).
enum class Label { control = 0, asd = 1 };
enum class DatasetId { hgd, adcd, synth };
enum class SplitTag { unassigned, train, test };
enum class ViewTag { original, flipped };

std::string to_string(Label l);
std::string to_string(DatasetId d);
std::string to_string(SplitTag s);
Label parse_label(std::string_view s);
DatasetId parse_dataset(std::string_view s);
SplitTag parse_split(std::string_view s);

/// Directory name of a dataset under the data root.
std::string dataset_directory(DatasetId d);
inline int label_value(Label l) { return static_cast<int>(l); }

/// Frames per clip fed to the encoder: 16 for HGD, 10 for AD+CD, 8 for synthetic data.
int default_clip_length(DatasetId d);

const std::vector<std::string>& hgd_action_classes();
/// ASD action paired with the HMDB51 action used for its control clips.
const std::vector<std::string>& adcd_action_classes();
bool is_valid_action(DatasetId d, std::string_view action);

/// HGD recruitment: 39 individuals, 19 ASD and 20 Control.
inline constexpr int kHgdAsdSubjects = 19;
inline constexpr int kHgdControlSubjects = 20;

/// Decoded 8-bit RGB frames, interleaved, T x H x W x 3.
struct Frames8 {
    int t = 0, h = 0, w = 0;
    std::vector<std::uint8_t> rgb;

    std::uint8_t& at(int frame, int y, int x, int ch) {
        return rgb[((static_cast<std::size_t>(frame) * h + y) * w + x) * 3 + ch];
    }
    std::uint8_t at(int frame, int y, int x, int ch) const {
        return rgb[((static_cast<std::size_t>(frame) * h + y) * w + x) * 3 + ch];
    }
};

struct VideoSample {
    Frames8 frames;
    Label label = Label::control;
    std::string action_class;
    DatasetId dataset = DatasetId::synth;
    std::string subject_id;
    std::string clip_id;
};

/// Throws ContractError when a sample violates its frame or class invariants.
void validate(const VideoSample& s);

/// Preprocessed clip in channel-major layout: row c holds frames x H x W values.
struct Clip {
    Eigen::Matrix<float, 3, Eigen::Dynamic, Eigen::RowMajor> data;
    int frames = 0, height = 0, width = 0;
    std::string source;
    ViewTag view_tag = ViewTag::original;

    float& at(int c, int t, int y, int x) { return data(c, (static_cast<Eigen::Index>(t) * height + y) * width + x); }
    float at(int c, int t, int y, int x) const {
        return data(c, (static_cast<Eigen::Index>(t) * height + y) * width + x);
    }
};

struct ManifestEntry {
    std::string path;
    Label label = Label::control;
    std::string action_class;
    std::string subject_id;
    DatasetId dataset = DatasetId::synth;
    SplitTag split = SplitTag::unassigned;

    /// Path without its extension; unique across datasets.
    std::string clip_id() const;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::map<std::string, SplitTag> split_assignment() const;
    DatasetManifest filter(SplitTag s) const;
    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
};

}  // namespace clv
