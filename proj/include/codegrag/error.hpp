#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace codegrag {

/// Machine-readable failure kinds shared by every stage of the toolkit.
enum class ErrorCode {
  UsageError,
  UnsupportedLanguage,
  ExtractionFailed,
  MalformedGraphData,
  EmptyCorpus,
  IndexOutOfRange,
  IoFailure,
  SchemaVersionMismatch,
  EncoderUnavailable,
  DimensionMismatch,
  ShapeMismatch,
  EmptyGraph,
  MissingVectors,
  NonFiniteLoss,
  MissingDescription,
  EmptyPool,
  MissingKnowledge,
  LlmUnavailable,
  LlmRefusal,
  SandboxFailure,
  GradientCheckFailed,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::UnsupportedLanguage: return "UnsupportedLanguage";
    case ErrorCode::ExtractionFailed: return "ExtractionFailed";
    case ErrorCode::MalformedGraphData: return "MalformedGraphData";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::EncoderUnavailable: return "EncoderUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::MissingVectors: return "MissingVectors";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingDescription: return "MissingDescription";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::MissingKnowledge: return "MissingKnowledge";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::LlmRefusal: return "LlmRefusal";
    case ErrorCode::SandboxFailure: return "SandboxFailure";
    case ErrorCode::GradientCheckFailed: return "GradientCheckFailed";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace codegrag
