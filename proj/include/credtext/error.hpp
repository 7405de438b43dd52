#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace credtext {

enum class Errc {
  // corpus
  MissingFile,
  SchemaMismatch,
  DuplicateId,
  InvalidLabel,
  DegenerateSplit,
  MissingText,
  // tabular
  AllMissingFeature,
  SingleClassTrain,
  UnknownFeature,
  TooFewRows,
  UnfittedFeature,
  // textfeat
  EmptyCorpus,
  InvalidTopics,
  DimMismatch,
  MalformedLine,
  MissingId,
  NonFiniteValue,
  // model
  RowMismatch,
  EmptySource,
  NonFiniteLoss,
  ColumnMismatch,
  InvalidConfig,
  // eval
  SingleClass,
  NoPositives,
  BadK,
  AllDegenerate,
  // explain
  EmptyText,
  DegenerateDesign,
  // econ
  MissingEconomics,
  PortfolioMismatch,
  // lingcomp
  ZeroVector,
  EmptySample,
  ZeroVariance,
  // refine
  AuthMissing,
  Timeout,
  RateLimitedExhausted,
  HttpError,
  MalformedResponse,
  FormatMismatch,
  MissingSection,
  CacheCorrupt,
  // synthgen
  CalibrationFailure,
  // cli
  ConfigInvalid,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Error raised by every module. `what()` reads "<module>: <Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(std::string_view module, Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string module_;
  std::string detail_;
};

}  // namespace credtext
