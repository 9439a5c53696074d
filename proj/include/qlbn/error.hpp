#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qlbn {

enum class Errc {
    malformed_row,
    empty_log,
    xml_syntax,
    missing_required_attribute,
    unknown_variable,
    unknown_activity,
    missing_cells_present,
    all_cells_missing,
    unknown_evidence_variable,
    dimension_overflow,
    query_is_evidence,
    zero_mass,
    negative_probability,
    invalid_argument,
    io,
};

std::string_view to_string(Errc code) noexcept;

// Numerical failures map to CLI exit code 2, everything else to 1.
bool is_numerical(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, std::optional<std::size_t> location = std::nullopt);

    Errc code() const noexcept { return code_; }

    // Line number (CSV) or event index (XES) when the error points at input.
    std::optional<std::size_t> location() const noexcept { return location_; }

private:
    Errc code_;
    std::optional<std::size_t> location_;
};

}  // namespace qlbn
