#include "credtext/error.hpp"

namespace credtext {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::DegenerateSplit: return "DegenerateSplit";
    case Errc::MissingText: return "MissingText";
    case Errc::AllMissingFeature: return "AllMissingFeature";
    case Errc::SingleClassTrain: return "SingleClassTrain";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::UnfittedFeature: return "UnfittedFeature";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::InvalidTopics: return "InvalidTopics";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::MissingId: return "MissingId";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::RowMismatch: return "RowMismatch";
    case Errc::EmptySource: return "EmptySource";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::ColumnMismatch: return "ColumnMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NoPositives: return "NoPositives";
    case Errc::BadK: return "BadK";
    case Errc::AllDegenerate: return "AllDegenerate";
    case Errc::EmptyText: return "EmptyText";
    case Errc::DegenerateDesign: return "DegenerateDesign";
    case Errc::MissingEconomics: return "MissingEconomics";
    case Errc::PortfolioMismatch: return "PortfolioMismatch";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptySample: return "EmptySample";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::AuthMissing: return "AuthMissing";
    case Errc::Timeout: return "Timeout";
    case Errc::RateLimitedExhausted: return "RateLimitedExhausted";
    case Errc::HttpError: return "HttpError";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::FormatMismatch: return "FormatMismatch";
    case Errc::MissingSection: return "MissingSection";
    case Errc::CacheCorrupt: return "CacheCorrupt";
    case Errc::CalibrationFailure: return "CalibrationFailure";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

namespace {
std::string format_what(std::string_view module, Errc code, const std::string& detail) {
  std::string out(module);
  out += ": ";
  out += errc_name(code);
  if (!detail.empty()) {
    out += ": ";
    out += detail;
  }
  return out;
}
}  // namespace

Error::Error(std::string_view module, Errc code, const std::string& detail)
    : std::runtime_error(format_what(module, code, detail)),
      code_(code),
      module_(module),
      detail_(detail) {}

}  // namespace credtext
