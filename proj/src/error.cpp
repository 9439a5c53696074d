#include "qlbn/error.hpp"

namespace qlbn {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::malformed_row: return "MalformedRow";
    case Errc::empty_log: return "EmptyLog";
    case Errc::xml_syntax: return "XmlSyntax";
    case Errc::missing_required_attribute: return "MissingRequiredAttribute";
    case Errc::unknown_variable: return "UnknownVariable";
    case Errc::unknown_activity: return "UnknownActivity";
    case Errc::missing_cells_present: return "MissingCellsPresent";
    case Errc::all_cells_missing: return "AllCellsMissing";
    case Errc::unknown_evidence_variable: return "UnknownEvidenceVariable";
    case Errc::dimension_overflow: return "DimensionOverflow";
    case Errc::query_is_evidence: return "QueryIsEvidence";
    case Errc::zero_mass: return "ZeroMass";
    case Errc::negative_probability: return "NegativeProbability";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io: return "Io";
    }
    return "Unknown";
}

bool is_numerical(Errc code) noexcept {
    switch (code) {
    case Errc::dimension_overflow:
    case Errc::zero_mass:
    case Errc::negative_probability:
        return true;
    default:
        return false;
    }
}

static std::string decorate(Errc code, const std::string& what, std::optional<std::size_t> location) {
    std::string msg{to_string(code)};
    if (location)
        msg += "(" + std::to_string(*location) + ")";
    if (!what.empty())
        msg += ": " + what;
    return msg;
}

Error::Error(Errc code, const std::string& what, std::optional<std::size_t> location)
    : std::runtime_error(decorate(code, what, location)), code_(code), location_(location) {}

}  // namespace qlbn
