#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qlbn::bayesnet {

using VarId = std::size_t;

// Value index convention: 0 = present, 1 = absent.
enum class Value : std::uint8_t { present = 0, absent = 1 };

// Table over discrete variables. For a CPT, vars[0] is the child and the rest are its parents.
// Flat layout: index = sum_k a_k * stride_k with stride_0 = 1 and stride_k = stride_{k-1} * card_{k-1},
// so the first variable is least significant.
struct Factor {
    std::vector<VarId> vars;
    std::vector<std::size_t> cards;
    std::vector<double> vals;

    static Factor zeros(std::vector<VarId> vars, std::vector<std::size_t> cards);

    std::size_t size() const noexcept { return vals.size(); }
    std::vector<std::size_t> strides() const;
    std::optional<std::size_t> position_of(VarId var) const noexcept;

    std::size_t index_of(std::span<const std::size_t> assignment) const;
    std::vector<std::size_t> assignment_of(std::size_t index) const;

    bool operator==(const Factor&) const = default;
};

}  // namespace qlbn::bayesnet
