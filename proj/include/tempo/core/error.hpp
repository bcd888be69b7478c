#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tempo {

enum class Errc {
  InvalidValue,
  InsufficientData,
  EmptySession,
  LengthError,
  DegenerateTemplate,
  EmptyAudio,
  ReviewMismatch,
  ShapeError,
  MaskError,
  ConfigError,
  NumericalError,
  OptimizerError,
  DomainError,
  GraphError,
  StratificationError,
  ModalityError,
  EmptyCategory,
  DivergenceError,
  ModelStateError,
  EmptyEvaluation,
  DegenerateLabels,
  FormatError,
  IoError,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's JSON error channel) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tempo
