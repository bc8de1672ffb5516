#include "clv/data/setups.hpp"

#include "clv/error.hpp"

namespace clv {
namespace {

DatasetManifest select(const DatasetManifest& m, SplitTag split, const Label* only = nullptr) {
    DatasetManifest out;
    for (const auto& e : m.entries) {
        if (e.split == split && (only == nullptr || e.label == *only)) out.entries.push_back(e);
    }
    return out;
}

void append(DatasetManifest& dst, const DatasetManifest& src) {
    dst.entries.insert(dst.entries.end(), src.entries.begin(), src.entries.end());
}

void require_split(const DatasetManifest& m, const char* which) {
    for (const auto& e : m.entries) {
        if (e.split == SplitTag::unassigned) {
            throw ContractError(std::string("build_setup: ") + which + " manifest is not split (" + e.path + ")");
        }
    }
}

}  // namespace

std::string to_string(SetupId s) {
    switch (s) {
        case SetupId::baseline: return "baseline";
        case SetupId::cross: return "cross";
        case SetupId::setup1: return "setup1";
        case SetupId::setup2: return "setup2";
        case SetupId::setup3: return "setup3";
    }
    return "?";
}

std::string to_string(TestId t) {
    switch (t) {
        case TestId::test1: return "test1";
        case TestId::test2: return "test2";
        case TestId::test3: return "test3";
    }
    return "?";
}

std::string to_string(SourceRole r) { return r == SourceRole::hgd ? "hgd" : "adcd"; }

SetupId parse_setup(std::string_view s) {
    if (s == "baseline") return SetupId::baseline;
    if (s == "cross") return SetupId::cross;
    if (s == "setup1") return SetupId::setup1;
    if (s == "setup2") return SetupId::setup2;
    if (s == "setup3") return SetupId::setup3;
    throw ConfigError("unknown protocol '" + std::string(s) + "'");
}

TestId parse_test(std::string_view s) {
    if (s == "test1") return TestId::test1;
    if (s == "test2") return TestId::test2;
    if (s == "test3") return TestId::test3;
    throw ConfigError("unknown test set '" + std::string(s) + "'");
}

SourceRole parse_role(std::string_view s) {
    if (s == "hgd") return SourceRole::hgd;
    if (s == "adcd") return SourceRole::adcd;
    throw ConfigError("unknown dataset role '" + std::string(s) + "' (expected hgd or adcd)");
}

std::string SetupSpec::key() const {
    switch (setup) {
        case SetupId::baseline: return "baseline/" + to_string(source);
        case SetupId::cross:
            return "cross/" + to_string(source) + "->" + to_string(source == SourceRole::hgd ? SourceRole::adcd : SourceRole::hgd);
        default: return to_string(setup) + "/" + to_string(test);
    }
}

void validate(const SetupSpec& spec) {
    const bool ok = [&] {
        switch (spec.setup) {
            case SetupId::baseline:
            case SetupId::cross:
            case SetupId::setup2: return spec.test == TestId::test1;
            case SetupId::setup1:
            case SetupId::setup3: return true;
        }
        return false;
    }();
    if (!ok) throw ConfigError("protocol " + to_string(spec.setup) + " has no " + to_string(spec.test));
}

bool single_class_test(const SetupSpec& spec) { return spec.setup == SetupId::setup1 && spec.test == TestId::test1; }

SetupData build_setup(const SetupSpec& spec, const DatasetManifest& hgd, const DatasetManifest& adcd) {
    validate(spec);
    require_split(hgd, "hgd");
    require_split(adcd, "adcd");
    const Label asd = Label::asd;
    const Label control = Label::control;
    SetupData d;
    switch (spec.setup) {
        case SetupId::baseline: {
            const auto& m = spec.source == SourceRole::hgd ? hgd : adcd;
            d.train = select(m, SplitTag::train);
            d.test = select(m, SplitTag::test);
            break;
        }
        case SetupId::cross: {
            const auto& from = spec.source == SourceRole::hgd ? hgd : adcd;
            const auto& to = spec.source == SourceRole::hgd ? adcd : hgd;
            d.train = select(from, SplitTag::train);
            d.test = select(to, SplitTag::test);
            break;
        }
        case SetupId::setup1:
            d.train = select(hgd, SplitTag::train, &asd);
            append(d.train, select(adcd, SplitTag::train, &asd));
            append(d.train, select(hgd, SplitTag::train, &control));
            if (spec.test == TestId::test1) {
                d.test = select(hgd, SplitTag::test, &asd);
            } else if (spec.test == TestId::test2) {
                d.test = select(adcd, SplitTag::test);
            } else {
                d.test = select(hgd, SplitTag::test);
                append(d.test, select(adcd, SplitTag::test));
            }
            break;
        case SetupId::setup2:
            d.train = select(hgd, SplitTag::train);
            append(d.train, select(adcd, SplitTag::train, &asd));
            append(d.train, select(adcd, SplitTag::test, &asd));
            d.test = select(hgd, SplitTag::test);
            break;
        case SetupId::setup3:
            d.train = select(hgd, SplitTag::train);
            append(d.train, select(adcd, SplitTag::train));
            if (spec.test == TestId::test1) {
                d.test = select(hgd, SplitTag::test);
            } else if (spec.test == TestId::test2) {
                d.test = select(adcd, SplitTag::test);
            } else {
                d.test = select(hgd, SplitTag::test);
                append(d.test, select(adcd, SplitTag::test));
            }
            break;
    }
    return d;
}

}  // namespace clv
