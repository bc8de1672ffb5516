#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "clv/data/types.hpp"
#include "clv/error.hpp"

namespace clv {

struct ManifestBuild {
    DatasetManifest manifest;
    std::vector<IngestionIssue> issues;
    std::vector<std::string> warnings;
    int asd_subjects = 0;
    int control_subjects = 0;
};

/// Scans `<root>/<dataset>/<label>/<action_class>/<subject_id>/<clip>` where
/// `<clip>` is a video file or a frame folder. Unreadable clips and unknown
/// labels/classes are reported in `issues` and left out. Throws IngestionError
/// when the dataset directory is missing or nothing usable is found.
ManifestBuild build_manifest(const std::filesystem::path& root, DatasetId dataset);

/// One JSON object per line with keys path, label, action_class, subject_id, dataset, split.
void write_manifest(const DatasetManifest& m, std::ostream& out);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& file);
DatasetManifest read_manifest(std::istream& in);
DatasetManifest read_manifest(const std::filesystem::path& file);

enum class SplitLevel { subject, clip };

struct SplitResult {
    DatasetManifest manifest;
    std::vector<std::string> warnings;
};

/// Stratified train/test split, deterministic in `seed`. Subject level keeps
/// every clip of a subject on one side; strata are (label, set of action
/// classes the subject performs). Clip level stratifies by (label, action_class).
/// Each stratum sends floor(ratio * n) units to train; a stratum that cannot
/// give both sides at least one unit goes entirely to train with a warning.
SplitResult split_manifest(const DatasetManifest& m, double ratio, std::uint64_t seed,
                           SplitLevel level = SplitLevel::subject);

}  // namespace clv
