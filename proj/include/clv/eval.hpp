#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clv/checkpoint.hpp"
#include "clv/data/clip_set.hpp"
#include "clv/data/manifest.hpp"
#include "clv/data/setups.hpp"
#include "clv/training.hpp"

namespace clv {

struct ClassMetrics {
    std::string action_class;
    int n_correct = 0;
    int n_total = 0;
    /// 100 * n_correct / n_total.
    double accuracy = 0;
};

/// Accuracy per action class plus their unweighted mean.
struct MetricsReport {
    SetupSpec protocol;
    std::string method;
    /// Rows in canonical action-class order.
    std::vector<ClassMetrics> per_class;
    double average = 0;
    /// The test set holds one class only; accuracy is then the fraction of
    /// clips predicted as that class.
    bool single_class = false;
    /// Test clips left out because they could not be read.
    std::vector<IngestionIssue> excluded;
    /// Run description (config, seeds, counts). Never contains timestamps so
    /// that repeated runs produce identical records.
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

    int total() const;
    int total_correct() const;
    const ClassMetrics* find(const std::string& action_class) const;
};

/// Builds a report from per-clip predictions. Throws ContractError on
/// length mismatch or an empty test set.
MetricsReport make_report(const std::vector<std::string>& action_classes, const std::vector<int>& labels,
                          const std::vector<int>& predictions, const SetupSpec& protocol, const std::string& method);

struct EvalOptions {
    /// Replace every clip prediction by the majority vote over its subject's
    /// clips (ties go to the sign of the summed logits). Off by default.
    bool subject_vote = false;
};

/// Predicts every clip with the logit > 0 rule and groups by action class.
MetricsReport evaluate(Network& net, const ClipSet& test, const SetupSpec& protocol, const std::string& method,
                       const EvalOptions& opt = {});

/// Loads the checkpoint and the test clips; unreadable clips are excluded and
/// listed in the report. Neither file nor manifest is modified.
MetricsReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& test, int clip_length,
                       const SetupSpec& protocol, const EvalOptions& opt = {});

nlohmann::ordered_json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::ordered_json& j);

/// Append-only line-delimited JSON store; appends hold an exclusive flock so
/// concurrent writers never interleave records.
class ResultsStore {
public:
    explicit ResultsStore(std::filesystem::path file) : file_(std::move(file)) {}

    void append(const MetricsReport& r) const;
    std::vector<MetricsReport> read_all() const;
    const std::filesystem::path& path() const { return file_; }

private:
    std::filesystem::path file_;
};

struct ExperimentConfig {
    RegimeConfig regime;
    EncoderSpec encoder;
    SetupSpec protocol;
    double split_ratio = 0.7;
    SplitLevel split_level = SplitLevel::subject;
    /// Frames per clip; 0 picks the default of the training dataset. Mixed
    /// protocols use one length for every clip so that batches can stack.
    int clip_length = 0;
    PreprocessConfig preprocess;
    EvalOptions eval;
    /// When set, the trained network is saved here.
    std::optional<std::filesystem::path> checkpoint;
    /// Progress hook, not part of the serialized configuration.
    EpochCallback on_epoch;

    nlohmann::ordered_json to_json() const;
};

/// split (if needed) -> build_setup -> load -> train -> probe -> evaluate,
/// then appends to `store` when given. Errors keep their type and gain the
/// failing stage as a message prefix, e.g. "train: ...".
MetricsReport run_protocol(const ExperimentConfig& cfg, const DatasetManifest& hgd, const DatasetManifest& adcd,
                           const ResultsStore* store = nullptr);

/// Display name of a method column: BinClassifier, SimCLR, SupCLR.
std::string method_title(const std::string& method);

/// Methods as columns, rows labelled by `rows`; empty cells are absent values.
struct ComparisonTable {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::string> rows;
    std::vector<std::vector<std::optional<double>>> cells;

    /// Aligned text, two decimals, best value per row marked with '*'.
    std::string text() const;
    /// Header "row,<columns...>,best"; numbers in shortest round-trip form.
    std::string csv() const;
};

/// Per-action-class rows plus "Average" for reports of one protocol. Several
/// reports of the same method (e.g. seeds) are averaged cell by cell.
/// Throws ContractError when the reports span more than one protocol.
ComparisonTable compare_table(const std::vector<MetricsReport>& reports);

/// One row per protocol key holding each method's average accuracy.
ComparisonTable summary_table(const std::vector<MetricsReport>& reports);

/// Parses the output of ComparisonTable::csv() back into a table.
ComparisonTable parse_table_csv(const std::string& csv);

/// Grouped bar chart, one bar colour per column.
void write_bar_chart(const ComparisonTable& table, const std::filesystem::path& png);

}  // namespace clv
