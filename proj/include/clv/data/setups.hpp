#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "clv/data/types.hpp"

namespace clv {

enum class SetupId { baseline, cross, setup1, setup2, setup3 };
enum class TestId { test1, test2, test3 };
/// Which source plays the part of a dataset: the hand-gesture set or the AD+CD set.
enum class SourceRole { hgd, adcd };

std::string to_string(SetupId s);
std::string to_string(TestId t);
std::string to_string(SourceRole r);
SetupId parse_setup(std::string_view s);
TestId parse_test(std::string_view s);
SourceRole parse_role(std::string_view s);

struct SetupSpec {
    SetupId setup = SetupId::baseline;
    TestId test = TestId::test1;
    /// baseline: the dataset used; cross: the training dataset (testing uses
    /// the other one). Ignored by the mixed setups.
    SourceRole source = SourceRole::hgd;

    /// Stable key such as "setup3/test3" or "cross/adcd->hgd".
    std::string key() const;
    bool operator==(const SetupSpec&) const = default;
};

/// Throws ConfigError for combinations outside the experiment grid.
void validate(const SetupSpec& spec);

/// Whether the test set of this protocol contains a single class.
bool single_class_test(const SetupSpec& spec);

struct SetupData {
    DatasetManifest train;
    DatasetManifest test;
};

/// Composes train/test manifests from two already split sources.
///  baseline  train/test splits of one dataset
///  cross     train split of one dataset, test split of the other
///  setup1    train: ASD of both train splits + HGD train controls;
///            test1 HGD test ASD only, test2 AD+CD test, test3 both test splits
///  setup2    train: HGD train (ASD + controls) + AD+CD ASD from train and test;
///            test1 HGD test
///  setup3    train: both train splits; test1 HGD, test2 AD+CD, test3 both
SetupData build_setup(const SetupSpec& spec, const DatasetManifest& hgd, const DatasetManifest& adcd);

}  // namespace clv
