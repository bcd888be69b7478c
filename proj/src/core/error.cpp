#include "tempo/core/error.hpp"

namespace tempo {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::EmptySession: return "EmptySession";
    case Errc::LengthError: return "LengthError";
    case Errc::DegenerateTemplate: return "DegenerateTemplate";
    case Errc::EmptyAudio: return "EmptyAudio";
    case Errc::ReviewMismatch: return "ReviewMismatch";
    case Errc::ShapeError: return "ShapeError";
    case Errc::MaskError: return "MaskError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::NumericalError: return "NumericalError";
    case Errc::OptimizerError: return "OptimizerError";
    case Errc::DomainError: return "DomainError";
    case Errc::GraphError: return "GraphError";
    case Errc::StratificationError: return "StratificationError";
    case Errc::ModalityError: return "ModalityError";
    case Errc::EmptyCategory: return "EmptyCategory";
    case Errc::DivergenceError: return "DivergenceError";
    case Errc::ModelStateError: return "ModelStateError";
    case Errc::EmptyEvaluation: return "EmptyEvaluation";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::FormatError: return "FormatError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace tempo
