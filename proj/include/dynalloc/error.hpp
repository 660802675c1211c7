#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dynalloc {

/// Broad failure class; the CLI maps these onto exit codes.
enum class ErrorCategory { config, data, numerical };

enum class ErrorKind {
  // data_panel
  MissingValue,
  NonMonotonicDates,
  NonPositivePrice,
  ReturnOutOfRange,
  DuplicateAsset,
  ParseError,
  FileNotFound,
  WeightSumError,
  UnknownAsset,
  EmptyPanel,
  // univariate_vol
  ZeroVariance,
  SeriesTooShort,
  NonConvergence,
  InvalidParams,
  // dependence
  ConstantColumn,
  SingularCorrelation,
  OutOfRangeInput,
  BadTailLevel,
  DegenerateWeights,
  // scenario_engine
  InsufficientHistory,
  InvalidModel,
  SampleTooSmall,
  BadAlpha,
  // regime_switch
  NumericalUnderflow,
  LengthMismatch,
  NoOverlap,
  // alpha_models
  InsufficientWindow,
  CollinearRegressors,
  TooFewAssets,
  NoEligibleGroups,
  // allocators
  ZeroVol,
  NotPSD,
  NotPD,
  InfeasibleLP,
  // backtester
  ResultTooShort,
  TooFewStrategies,
  // cli
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingValue: return "MissingValue";
    case ErrorKind::NonMonotonicDates: return "NonMonotonicDates";
    case ErrorKind::NonPositivePrice: return "NonPositivePrice";
    case ErrorKind::ReturnOutOfRange: return "ReturnOutOfRange";
    case ErrorKind::DuplicateAsset: return "DuplicateAsset";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::WeightSumError: return "WeightSumError";
    case ErrorKind::UnknownAsset: return "UnknownAsset";
    case ErrorKind::EmptyPanel: return "EmptyPanel";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::SeriesTooShort: return "SeriesTooShort";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::SingularCorrelation: return "SingularCorrelation";
    case ErrorKind::OutOfRangeInput: return "OutOfRangeInput";
    case ErrorKind::BadTailLevel: return "BadTailLevel";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::InsufficientHistory: return "InsufficientHistory";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::SampleTooSmall: return "SampleTooSmall";
    case ErrorKind::BadAlpha: return "BadAlpha";
    case ErrorKind::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::InsufficientWindow: return "InsufficientWindow";
    case ErrorKind::CollinearRegressors: return "CollinearRegressors";
    case ErrorKind::TooFewAssets: return "TooFewAssets";
    case ErrorKind::NoEligibleGroups: return "NoEligibleGroups";
    case ErrorKind::ZeroVol: return "ZeroVol";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NotPD: return "NotPD";
    case ErrorKind::InfeasibleLP: return "InfeasibleLP";
    case ErrorKind::ResultTooShort: return "ResultTooShort";
    case ErrorKind::TooFewStrategies: return "TooFewStrategies";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

constexpr ErrorCategory category_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::FileNotFound:
    case ErrorKind::WeightSumError:
    case ErrorKind::UnknownAsset:
    case ErrorKind::BadAlpha:
    case ErrorKind::BadTailLevel:
    case ErrorKind::InvalidParams:
      return ErrorCategory::config;
    case ErrorKind::NonConvergence:
    case ErrorKind::NumericalUnderflow:
    case ErrorKind::NotPSD:
    case ErrorKind::NotPD:
    case ErrorKind::InfeasibleLP:
    case ErrorKind::SingularCorrelation:
    case ErrorKind::CollinearRegressors:
    case ErrorKind::InvalidModel:
      return ErrorCategory::numerical;
    default:
      return ErrorCategory::data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace dynalloc
