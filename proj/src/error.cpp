#include "tailcal/error.hpp"

namespace tailcal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::NegativeAmount: return "NegativeAmount";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroBenchmark: return "ZeroBenchmark";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InfiniteMean: return "InfiniteMean";
    case ErrorCode::EmptyExceedanceSet: return "EmptyExceedanceSet";
    case ErrorCode::InsufficientTail: return "InsufficientTail";
    case ErrorCode::DegenerateRegression: return "DegenerateRegression";
    case ErrorCode::EmptyTail: return "EmptyTail";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::NoFeasibleSolution: return "NoFeasibleSolution";
    case ErrorCode::NegativeAmountProduced: return "NegativeAmountProduced";
    case ErrorCode::ZeroItemTotal: return "ZeroItemTotal";
    case ErrorCode::SharesNotNormalized: return "SharesNotNormalized";
    case ErrorCode::ZeroMean: return "ZeroMean";
    case ErrorCode::SingletonStratum: return "SingletonStratum";
    case ErrorCode::AllReplicatesFailed: return "AllReplicatesFailed";
    case ErrorCode::EmptySample: return "EmptySample";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn:
    case ErrorCode::NonPositiveWeight:
    case ErrorCode::NegativeAmount:
    case ErrorCode::DuplicateId:
    case ErrorCode::MalformedInput:
    case ErrorCode::UnknownVariable:
    case ErrorCode::EmptyDataset:
    case ErrorCode::InvalidArgument:
      return true;
    default:
      return false;
  }
}

}  // namespace tailcal
