#include "braidforge/error.hpp"

namespace braidforge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::PositionInvalid: return "PositionInvalid";
    case Errc::LetterOutOfRange: return "LetterOutOfRange";
    case Errc::NotDestabilizable: return "NotDestabilizable";
    case Errc::TargetTooShort: return "TargetTooShort";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::GenerationExhausted: return "GenerationExhausted";
    case Errc::InvalidSplit: return "InvalidSplit";
    case Errc::StrandLimitExceeded: return "StrandLimitExceeded";
    case Errc::ZeroPolynomial: return "ZeroPolynomial";
    case Errc::NotAKnot: return "NotAKnot";
    case Errc::PaddingOverflow: return "PaddingOverflow";
    case Errc::TooLong: return "TooLong";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NoTripletsFound: return "NoTripletsFound";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::BridgeUnavailable: return "BridgeUnavailable";
    case Errc::Timeout: return "Timeout";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::StatusMismatch: return "StatusMismatch";
    case Errc::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace braidforge
