#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <set>

#include "clv/eval.hpp"
#include "test_utils.hpp"

namespace clv {
namespace {

using test::TempDir;

SetupSpec baseline_spec() { return SetupSpec{SetupId::baseline, TestId::test1, SourceRole::hgd}; }

DatasetManifest synthetic_source(const std::filesystem::path& root, const std::string& name, int subjects,
                                 int clips, double background_shift = 0.0, std::uint64_t seed = 0) {
    SyntheticOptions o;
    o.n_subjects = subjects;
    o.clips_per_subject = clips;
    o.separation = 1.0;
    o.seed = seed;
    o.name = name;
    o.control_background_shift = background_shift;
    return generate_synthetic(o, root / name);
}

ExperimentConfig quick_config(Method m, SetupSpec spec, int epochs = 1) {
    ExperimentConfig c;
    c.regime = default_regime(m, DataScale::desk);
    c.regime.epochs = epochs;
    c.regime.batch_size = 8;
    c.regime.probe_config.steps = 20;
    c.regime.seed = 3;
    c.protocol = spec;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ------------------------------------------------------------------ reports

TEST(MetricsReport, AllCorrectGivesHundredEverywhere) {
    const std::vector<std::string> cls{"Placing", "Pouring", "Placing", "Pouring"};
    const std::vector<int> labels{1, 0, 0, 1};
    const auto r = make_report(cls, labels, labels, baseline_spec(), "simclr");
    for (const auto& c : r.per_class) EXPECT_EQ(c.accuracy, 100.0);
    EXPECT_EQ(r.average, 100.0);
    EXPECT_FALSE(r.single_class);
}

TEST(MetricsReport, ConstantAsdPredictorOnBalancedSetScoresFifty) {
    std::vector<std::string> cls;
    std::vector<int> labels, pred;
    for (int i = 0; i < 40; ++i) {
        cls.push_back(hgd_action_classes()[i % 4]);
        labels.push_back((i / 4) % 2);
        pred.push_back(1);
    }
    const auto r = make_report(cls, labels, pred, baseline_spec(), "binclassifier");
    EXPECT_NEAR(r.average, 50.0, 1e-9);
}

TEST(MetricsReport, HgdRowsFollowCanonicalOrder) {
    const std::vector<std::string> cls{"Pouring", "Placing", "Pass to Pour", "Pass to Place", "Pouring"};
    const std::vector<int> labels{1, 0, 1, 0, 0};
    const auto r = make_report(cls, labels, {1, 1, 1, 1, 1}, baseline_spec(), "simclr");
    ASSERT_EQ(r.per_class.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.per_class[i].action_class, hgd_action_classes()[i]);
    const auto table = compare_table({r});
    EXPECT_EQ(table.rows, (std::vector<std::string>{"Pass to Place", "Pass to Pour", "Placing", "Pouring", "Average"}));
}

TEST(MetricsReport, InvariantsHoldOnRandomPredictions) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 60);
        std::vector<std::string> cls;
        std::vector<int> labels, pred;
        for (int i = 0; i < n; ++i) {
            cls.push_back(adcd_action_classes()[rng() % adcd_action_classes().size()]);
            labels.push_back(static_cast<int>(rng() % 2));
            pred.push_back(static_cast<int>(rng() % 2));
        }
        const auto r = make_report(cls, labels, pred, baseline_spec(), "supcon");
        double sum = 0;
        int total = 0;
        for (const auto& c : r.per_class) {
            EXPECT_GE(c.accuracy, 0.0);
            EXPECT_LE(c.accuracy, 100.0);
            EXPECT_EQ(c.accuracy, 100.0 * c.n_correct / c.n_total);
            sum += c.accuracy;
            total += c.n_total;
        }
        EXPECT_NEAR(r.average, sum / static_cast<double>(r.per_class.size()), 1e-9);
        EXPECT_EQ(total, n);
    }
}

TEST(MetricsReport, AverageIsUnweightedOverClasses) {
    // 1/1 correct in one class, 1/3 in the other: unweighted mean 66.67, pooled 50.
    const auto r = make_report({"Placing", "Pouring", "Pouring", "Pouring"}, {1, 1, 1, 1}, {1, 1, 0, 0},
                               baseline_spec(), "simclr");
    EXPECT_NEAR(r.average, (100.0 + 100.0 / 3.0) / 2.0, 1e-9);
}

TEST(MetricsReport, FlagsSingleClassTestSets) {
    const SetupSpec s11{SetupId::setup1, TestId::test1, SourceRole::hgd};
    EXPECT_TRUE(make_report({"Placing", "Placing"}, {1, 0}, {1, 1}, s11, "simclr").single_class);
    EXPECT_TRUE(make_report({"Placing", "Placing"}, {1, 1}, {1, 0}, baseline_spec(), "simclr").single_class);
    EXPECT_FALSE(make_report({"Placing", "Placing"}, {1, 0}, {1, 0}, baseline_spec(), "simclr").single_class);
}

TEST(MetricsReport, RejectsMismatchedOrEmptyInput) {
    EXPECT_THROW(make_report({"Placing"}, {1, 0}, {1, 0}, baseline_spec(), "simclr"), ContractError);
    EXPECT_THROW(make_report({}, {}, {}, baseline_spec(), "simclr"), ContractError);
}

TEST(MetricsReport, JsonRoundTripIsExact) {
    auto r = make_report({"Reach", "Lift", "Lift"}, {1, 0, 1}, {1, 1, 0}, {SetupId::setup3, TestId::test2, SourceRole::hgd},
                         "supcon");
    r.excluded.push_back({"a/b", "unreadable"});
    r.metadata["seed"] = 4;
    const auto back = report_from_json(nlohmann::ordered_json::parse(to_json(r).dump()));
    EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
    EXPECT_EQ(back.average, r.average);
    EXPECT_EQ(back.protocol, r.protocol);
}

// ------------------------------------------------------------------ store

TEST(ResultsStore, AppendsAndReadsBack) {
    TempDir dir;
    ResultsStore store(dir.path() / "out" / "results.jsonl");
    EXPECT_TRUE(store.read_all().empty());
    const auto a = make_report({"Reach"}, {1}, {1}, baseline_spec(), "simclr");
    const auto b = make_report({"Lift", "Lift"}, {0, 1}, {1, 1}, baseline_spec(), "supcon");
    store.append(a);
    const std::string after_first = slurp(store.path());
    store.append(b);
    EXPECT_EQ(slurp(store.path()).rfind(after_first, 0), 0u);  // earlier records untouched
    const auto all = store.read_all();
    ASSERT_EQ(all.size(), 2u);
    EXPECT_EQ(all[0].method, "simclr");
    EXPECT_EQ(all[1].average, b.average);
}

TEST(ResultsStore, ConcurrentWritersDoNotInterleave) {
    TempDir dir;
    const ResultsStore store(dir.path() / "results.jsonl");
    auto r = make_report({"Reach"}, {1}, {1}, baseline_spec(), "simclr");
    r.metadata["padding"] = std::string(20000, 'x');  // larger than a pipe buffer
    std::vector<pid_t> kids;
    for (int k = 0; k < 4; ++k) {
        const pid_t pid = ::fork();
        ASSERT_GE(pid, 0);
        if (pid == 0) {
            auto mine = r;
            mine.metadata["writer"] = k;
            for (int i = 0; i < 25; ++i) store.append(mine);
            std::_Exit(0);
        }
        kids.push_back(pid);
    }
    for (auto pid : kids) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0);
    }
    const auto all = store.read_all();
    EXPECT_EQ(all.size(), 100u);
}

TEST(ResultsStore, MalformedLineNamesItsNumber) {
    TempDir dir;
    std::ofstream(dir.path() / "r.jsonl") << to_json(make_report({"Reach"}, {1}, {1}, baseline_spec(), "simclr")).dump()
                                          << "\n{broken\n";
    try {
        ResultsStore(dir.path() / "r.jsonl").read_all();
        FAIL() << "expected ContractError";
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
}

// ------------------------------------------------------------------ tables

std::vector<MetricsReport> three_methods() {
    const std::vector<std::string> cls{"Reach", "Lift", "Reach", "Lift"};
    const std::vector<int> labels{1, 1, 0, 0};
    return {make_report(cls, labels, {1, 0, 0, 1}, baseline_spec(), "supcon"),
            make_report(cls, labels, {1, 1, 0, 0}, baseline_spec(), "binclassifier"),
            make_report(cls, labels, {1, 1, 1, 0}, baseline_spec(), "simclr")};
}

TEST(CompareTable, ThreeMethodsGiveThreeColumns) {
    const auto t = compare_table(three_methods());
    EXPECT_EQ(t.columns, (std::vector<std::string>{"BinClassifier", "SimCLR", "SupCLR"}));
    EXPECT_EQ(t.rows, (std::vector<std::string>{"Reach", "Lift", "Average"}));
    ASSERT_EQ(t.cells.size(), 3u);
    EXPECT_EQ(*t.cells[2][0], 100.0);
    EXPECT_EQ(*t.cells[2][1], 75.0);
    EXPECT_EQ(*t.cells[2][2], 50.0);
    const std::string text = t.text();
    EXPECT_NE(text.find("100.00*"), std::string::npos) << text;
    EXPECT_EQ(text.find("75.00*"), std::string::npos) << text;
}

TEST(CompareTable, SingleReportGivesDegenerateTable) {
    const auto t = compare_table({three_methods()[0]});
    EXPECT_EQ(t.columns.size(), 1u);
    for (const auto& row : t.cells) EXPECT_EQ(row.size(), 1u);
    EXPECT_EQ(t.text().find('*'), std::string::npos);  // nothing to compare against
}

TEST(CompareTable, MixedProtocolsRaiseContractError) {
    auto reports = three_methods();
    reports[1].protocol = {SetupId::setup3, TestId::test1, SourceRole::hgd};
    EXPECT_THROW(compare_table(reports), ContractError);
}

TEST(CompareTable, RepeatedMethodsAreAveraged) {
    auto reports = three_methods();
    reports.push_back(make_report({"Reach", "Lift"}, {1, 1}, {0, 0}, baseline_spec(), "simclr"));
    const auto t = compare_table(reports);
    EXPECT_EQ(t.columns[1], "SimCLR (n=2)");
    EXPECT_EQ(*t.cells[2][1], (75.0 + 0.0) / 2.0);
}

TEST(CompareTable, CsvRoundTripIsExact) {
    auto reports = three_methods();
    reports.push_back(make_report({"Reach", "Reach", "Reach"}, {1, 1, 1}, {1, 0, 0}, baseline_spec(), "simclr"));
    const auto t = compare_table(reports);  // includes a 1/3-style value
    const auto back = parse_table_csv(t.csv());
    EXPECT_EQ(back.columns, t.columns);
    EXPECT_EQ(back.rows, t.rows);
    ASSERT_EQ(back.cells.size(), t.cells.size());
    for (std::size_t r = 0; r < t.cells.size(); ++r) {
        ASSERT_EQ(back.cells[r].size(), t.cells[r].size());
        for (std::size_t c = 0; c < t.cells[r].size(); ++c) EXPECT_EQ(back.cells[r][c], t.cells[r][c]);
    }
    EXPECT_NE(t.csv().find(",BinClassifier\n"), std::string::npos) << t.csv();  // best column of the Average row
}

TEST(SummaryTable, OneRowPerProtocol) {
    auto reports = three_methods();
    auto extra = reports[2];
    extra.protocol = {SetupId::setup3, TestId::test3, SourceRole::hgd};
    reports.push_back(extra);
    const auto t = summary_table(reports);
    EXPECT_EQ(t.rows, (std::vector<std::string>{"baseline/hgd", "setup3/test3"}));
    EXPECT_FALSE(t.cells[1][0].has_value());
    EXPECT_EQ(*t.cells[1][1], extra.average);
}

TEST(BarChart, WritesReadablePng) {
    TempDir dir;
    const auto png = dir.path() / "figs" / "baseline.png";
    write_bar_chart(compare_table(three_methods()), png);
    const std::string bytes = slurp(png);
    ASSERT_GT(bytes.size(), 100u);
    EXPECT_EQ(bytes.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
}

// ------------------------------------------------------------------ protocols

TEST(RunProtocol, BaselinePersistsOneReport) {
    TempDir dir;
    const auto hgd = synthetic_source(dir.path(), "a", 8, 2);
    const ResultsStore store(dir.path() / "results.jsonl");
    const auto r = run_protocol(quick_config(Method::binclassifier, baseline_spec()), hgd, {}, &store);
    const auto all = store.read_all();
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(to_json(all[0]).dump(), to_json(r).dump());
    EXPECT_EQ(r.method, "binclassifier");
    EXPECT_EQ(r.protocol.key(), "baseline/hgd");
    EXPECT_EQ(r.total(), 8);  // 4 test subjects x 2 clips
    EXPECT_EQ(r.metadata["clip_length"], 8);
}

TEST(RunProtocol, CrossTrainsOnlyOnTheOtherDataset) {
    TempDir dir;
    const auto hgd = synthetic_source(dir.path(), "a", 8, 2);
    const auto adcd = synthetic_source(dir.path(), "b", 8, 2, 0.1, 1);
    const SetupSpec spec{SetupId::cross, TestId::test1, SourceRole::adcd};
    const auto r = run_protocol(quick_config(Method::simclr, spec), hgd, adcd);
    EXPECT_EQ(r.protocol.key(), "cross/adcd->hgd");
    EXPECT_EQ(r.metadata["train"]["clips"], 8);  // train split of b only
    EXPECT_EQ(r.total(), 8);                     // test split of a only

    auto split = [](const DatasetManifest& m, std::uint64_t s) { return split_manifest(m, 0.7, s).manifest; };
    const auto setup = build_setup(spec, split(hgd, 1), split(adcd, 2));
    std::set<std::string> test_paths;
    for (const auto& e : setup.test.entries) test_paths.insert(e.path);
    for (const auto& e : setup.train.entries) {
        EXPECT_EQ(test_paths.count(e.path), 0u);
        EXPECT_EQ(e.subject_id.rfind("b_", 0), 0u) << e.subject_id;
    }
}

TEST(RunProtocol, Setup3Test3CountsAddUp) {
    TempDir dir;
    const auto hgd = synthetic_source(dir.path(), "a", 8, 2);
    const auto adcd = synthetic_source(dir.path(), "b", 8, 2, 0.1, 1);
    std::vector<MetricsReport> r;
    for (TestId t : {TestId::test1, TestId::test2, TestId::test3}) {
        r.push_back(run_protocol(quick_config(Method::supcon, {SetupId::setup3, t, SourceRole::hgd}), hgd, adcd));
    }
    EXPECT_EQ(r[2].total(), r[0].total() + r[1].total());
    EXPECT_EQ(r[2].total_correct(), r[0].total_correct() + r[1].total_correct());
    // Same seed, same training set: only the test set differs between the three runs.
    EXPECT_EQ(r[0].metadata["parameter_checksum"], r[2].metadata["parameter_checksum"]);
}

TEST(RunProtocol, RepeatedRunIsIdentical) {
    TempDir dir;
    const auto hgd = synthetic_source(dir.path(), "a", 8, 2);
    const auto cfg = quick_config(Method::simclr, baseline_spec(), 2);
    EXPECT_EQ(to_json(run_protocol(cfg, hgd, {})).dump(), to_json(run_protocol(cfg, hgd, {})).dump());
}

TEST(RunProtocol, ErrorsNameTheirStage) {
    TempDir dir;
    const auto hgd = synthetic_source(dir.path(), "a", 8, 2);
    auto expect_prefix = [](const std::exception& e, const std::string& prefix) {
        EXPECT_EQ(std::string(e.what()).rfind(prefix, 0), 0u) << e.what();
    };
    try {
        run_protocol(quick_config(Method::simclr, {SetupId::setup2, TestId::test3, SourceRole::hgd}), hgd, {});
        FAIL();
    } catch (const ConfigError& e) {
        expect_prefix(e, "config: ");
    }
    try {
        run_protocol(quick_config(Method::simclr, {SetupId::baseline, TestId::test1, SourceRole::adcd}), hgd, {});
        FAIL();
    } catch (const ContractError& e) {
        expect_prefix(e, "setup: ");
    }
    try {
        auto cfg = quick_config(Method::simclr, baseline_spec(), 3);
        cfg.regime.optimizer.learning_rate = 1e30;
        run_protocol(cfg, hgd, {});
        FAIL();
    } catch (const DivergenceError& e) {
        expect_prefix(e, "train: ");
        EXPECT_NE(std::string(e.what()).find("lr="), std::string::npos);
    }
}

TEST(Evaluate, CheckpointEvaluationExcludesUnreadableClipsAndMutatesNothing) {
    TempDir dir;
    auto hgd = synthetic_source(dir.path(), "a", 8, 2);
    auto cfg = quick_config(Method::binclassifier, baseline_spec());
    cfg.checkpoint = dir.path() / "model.ckpt";
    const auto trained = run_protocol(cfg, hgd, {});

    // Break one clip of the test manifest.
    const auto split = split_manifest(hgd, 0.7, 0).manifest;
    DatasetManifest test = split.filter(SplitTag::test);
    for (const auto& f : std::filesystem::directory_iterator(test.entries[0].path)) {
        std::ofstream(f.path(), std::ios::trunc) << "not a png";
    }
    const std::string ckpt_before = slurp(*cfg.checkpoint);
    const auto test_before = test.entries;

    const auto a = evaluate(*cfg.checkpoint, test, 0, baseline_spec());
    const auto b = evaluate(*cfg.checkpoint, test, 0, baseline_spec());
    EXPECT_EQ(a.excluded.size(), 1u);
    EXPECT_EQ(a.excluded[0].path, test.entries[0].path);
    EXPECT_EQ(a.total(), static_cast<int>(test.size()) - 1);
    EXPECT_EQ(a.method, "binclassifier");
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    EXPECT_EQ(slurp(*cfg.checkpoint), ckpt_before);
    ASSERT_EQ(test.entries.size(), test_before.size());
    for (std::size_t i = 0; i < test.size(); ++i) EXPECT_EQ(test.entries[i].path, test_before[i].path);
}

TEST(Evaluate, SubjectVoteGivesEveryClipOfASubjectOnePrediction) {
    SyntheticOptions o;
    o.n_subjects = 4;
    o.clips_per_subject = 3;
    const auto clips = clip_set_from_synthetic(render_synthetic(o), 8, PreprocessConfig{});
    EncoderSpec spec;
    Network net(spec, 1);
    const auto r = evaluate(net, clips, baseline_spec(), "simclr", EvalOptions{true});
    // With one prediction per subject, each subject contributes all or none of its clips.
    EXPECT_EQ(r.total_correct() % 3, 0);
    EXPECT_EQ(r.metadata["eval"]["subject_vote"], true);
}

}  // namespace
}  // namespace clv
