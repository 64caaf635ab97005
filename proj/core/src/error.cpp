#include "gabornoise/error.hpp"

namespace gabornoise {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::zero_points: return "ZeroPoints";
    case Errc::degenerate_field: return "DegenerateField";
    case Errc::not_normalized: return "NotNormalized";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::empty_perturbation_set: return "EmptyPerturbationSet";
    case Errc::empty_list: return "EmptyList";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::invalid_layer: return "InvalidLayer";
    case Errc::unreadable_file: return "UnreadableFile";
    case Errc::format_error: return "FormatError";
    case Errc::oracle_failure: return "OracleFailure";
    case Errc::spawn_failure: return "SpawnFailure";
    case Errc::handshake_timeout: return "HandshakeTimeout";
    case Errc::descriptor_mismatch: return "DescriptorMismatch";
  }
  return "Unknown";
}

}  // namespace gabornoise
