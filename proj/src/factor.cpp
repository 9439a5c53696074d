#include "qlbn/factor.hpp"

#include "qlbn/error.hpp"

#include <algorithm>

namespace qlbn::bayesnet {

Factor Factor::zeros(std::vector<VarId> vars, std::vector<std::size_t> cards) {
    if (vars.size() != cards.size())
        throw Error(Errc::invalid_argument, "factor vars and cards differ in length");
    std::size_t n = 1;
    for (std::size_t c : cards) {
        if (c == 0)
            throw Error(Errc::invalid_argument, "zero cardinality");
        n *= c;
    }
    return Factor{std::move(vars), std::move(cards), std::vector<double>(n, 0.0)};
}

std::vector<std::size_t> Factor::strides() const {
    std::vector<std::size_t> s(cards.size());
    std::size_t acc = 1;
    for (std::size_t k = 0; k < cards.size(); ++k) {
        s[k] = acc;
        acc *= cards[k];
    }
    return s;
}

std::optional<std::size_t> Factor::position_of(VarId var) const noexcept {
    auto it = std::find(vars.begin(), vars.end(), var);
    if (it == vars.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - vars.begin());
}

std::size_t Factor::index_of(std::span<const std::size_t> assignment) const {
    if (assignment.size() != cards.size())
        throw Error(Errc::invalid_argument, "assignment length does not match factor");
    std::size_t index = 0, stride = 1;
    for (std::size_t k = 0; k < cards.size(); ++k) {
        if (assignment[k] >= cards[k])
            throw Error(Errc::invalid_argument, "assignment value out of range");
        index += assignment[k] * stride;
        stride *= cards[k];
    }
    return index;
}

std::vector<std::size_t> Factor::assignment_of(std::size_t index) const {
    if (index >= vals.size())
        throw Error(Errc::invalid_argument, "index out of range");
    std::vector<std::size_t> a(cards.size());
    for (std::size_t k = 0; k < cards.size(); ++k) {
        a[k] = index % cards[k];
        index /= cards[k];
    }
    return a;
}

}  // namespace qlbn::bayesnet
