#include "erpdeck/error.hpp"

namespace erpdeck {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_input: return "InvalidInput";
    case Errc::invalid_band: return "InvalidBand";
    case Errc::signal_too_short: return "SignalTooShort";
    case Errc::epoch_out_of_bounds: return "EpochOutOfBounds";
    case Errc::invalid_factor: return "InvalidFactor";
    case Errc::constraint_unsatisfiable: return "ConstraintUnsatisfiable";
    case Errc::invalid_protocol: return "InvalidProtocol";
    case Errc::shape_error: return "ShapeError";
    case Errc::unknown_architecture: return "UnknownArchitecture";
    case Errc::degenerate_labels: return "DegenerateLabels";
    case Errc::empty_model: return "EmptyModel";
    case Errc::undefined_metric: return "UndefinedMetric";
    case Errc::incomplete_block: return "IncompleteBlock";
    case Errc::not_fitted: return "NotFitted";
    case Errc::validation_error: return "ValidationError";
    case Errc::numerical_error: return "NumericalError";
    case Errc::not_positive_definite: return "NotPositiveDefinite";
    case Errc::io_error: return "IoError";
    case Errc::corrupt_model: return "CorruptModel";
  }
  return "UnknownError";
}

}  // namespace erpdeck
