#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tailcal {

enum class ErrorCode {
  // input / user errors
  MissingColumn,
  NonPositiveWeight,
  NegativeAmount,
  DuplicateId,
  MalformedInput,
  UnknownVariable,
  EmptyDataset,
  InvalidArgument,
  // numerical errors
  ZeroBenchmark,
  DomainError,
  InfiniteMean,
  EmptyExceedanceSet,
  InsufficientTail,
  DegenerateRegression,
  EmptyTail,
  SingularGram,
  NoFeasibleSolution,
  NegativeAmountProduced,
  ZeroItemTotal,
  SharesNotNormalized,
  ZeroMean,
  SingletonStratum,
  AllReplicatesFailed,
  EmptySample,
};

std::string_view to_string(ErrorCode code);

/// True for codes caused by bad input files or arguments rather than by the
/// numerics (the CLI maps these to exit status 1).
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Row-level ingestion failure; `row` is 1-based and counts data rows only.
class RowError : public Error {
 public:
  RowError(ErrorCode code, std::size_t row, const std::string& message)
      : Error(code, "row " + std::to_string(row) + ": " + message), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace tailcal
