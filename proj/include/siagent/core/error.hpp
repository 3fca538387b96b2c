#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace siagent {

enum class ErrorKind {
    EmptyWindow,
    WindowIncomplete,
    OrderViolation,
    IoError,
    UnknownTarget,
    InvalidDirection,
    InvalidRecord,
    StateError,
    ParseError,
    InsufficientData,
    BackendError,
    BackendTimeout,
    ConfigError,
    MockMiss,
    ParseFailure,
    InputError,
    PlanRejected,
    PlanFailure,
    PatternError,
    EmptyBatch,
    Conflict,
    NotFound,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error the pipeline raises. Callers that only care about the
/// category can catch this and switch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
public:
    explicit KindedError(const std::string& what) : Error(K, what) {}
};

using EmptyWindow = KindedError<ErrorKind::EmptyWindow>;
using WindowIncomplete = KindedError<ErrorKind::WindowIncomplete>;
using IoError = KindedError<ErrorKind::IoError>;
using UnknownTarget = KindedError<ErrorKind::UnknownTarget>;
using InvalidDirection = KindedError<ErrorKind::InvalidDirection>;
using InvalidRecord = KindedError<ErrorKind::InvalidRecord>;
using StateError = KindedError<ErrorKind::StateError>;
using InsufficientData = KindedError<ErrorKind::InsufficientData>;
using BackendError = KindedError<ErrorKind::BackendError>;
using BackendTimeout = KindedError<ErrorKind::BackendTimeout>;
using ConfigError = KindedError<ErrorKind::ConfigError>;
using MockMiss = KindedError<ErrorKind::MockMiss>;
using ParseFailure = KindedError<ErrorKind::ParseFailure>;
using InputError = KindedError<ErrorKind::InputError>;
using PlanRejected = KindedError<ErrorKind::PlanRejected>;
using PlanFailure = KindedError<ErrorKind::PlanFailure>;
using PatternError = KindedError<ErrorKind::PatternError>;
using EmptyBatch = KindedError<ErrorKind::EmptyBatch>;
using Conflict = KindedError<ErrorKind::Conflict>;
using NotFound = KindedError<ErrorKind::NotFound>;

/// Sequence numbers arrived out of order; index() is the position in the
/// input stream of the first offending frame.
class OrderViolation : public Error {
public:
    OrderViolation(std::size_t index, const std::string& what)
        : Error(ErrorKind::OrderViolation, what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Malformed text input. line() is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace siagent
