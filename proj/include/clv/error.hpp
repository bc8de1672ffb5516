#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace clv {

/// Violated precondition or shape contract.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation (e.g. a zero-norm vector).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed grouping structure, e.g. an origin group without its pair.
class StructureError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Unknown method, protocol or setup combination.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by the empty-positive policy of the supervised contrastive loss.
class PolicyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite loss during training; the message carries lr, batch and epoch.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IngestionIssue {
    std::string path;
    std::string reason;
};

/// Dataset ingestion failure with one entry per offending file.
class IngestionError : public std::runtime_error {
public:
    IngestionError(const std::string& what, std::vector<IngestionIssue> issues)
        : std::runtime_error(what), issues_(std::move(issues)) {}

    const std::vector<IngestionIssue>& issues() const noexcept { return issues_; }

private:
    std::vector<IngestionIssue> issues_;
};

}  // namespace clv
