#pragma once

// Reference implementations used only by tests. They enumerate everything explicitly and share no
// code with the library beyond the BayesNet container.

#include "qlbn/bayesnet.hpp"
#include "qlbn/random.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace oracle {

using qlbn::bayesnet::BayesNet;
using qlbn::bayesnet::Evidence;
using qlbn::bayesnet::Factor;
using qlbn::bayesnet::Value;
using qlbn::bayesnet::VarId;
using qlbn::eventlog::Cell;
using qlbn::procmine::DagStructure;

// values[v] = 0 (present) or 1 (absent).
inline double cpt_entry(const BayesNet& net, VarId v, const std::vector<int>& values) {
    const auto& parents = net.dag.parents[v];
    std::size_t index = static_cast<std::size_t>(values[v]);
    std::size_t weight = 2;
    for (VarId p : parents) {
        index += static_cast<std::size_t>(values[p]) * weight;
        weight *= 2;
    }
    return net.cpts[v].vals.at(index);
}

inline double joint_probability(const BayesNet& net, const std::vector<int>& values) {
    double p = 1.0;
    for (VarId v = 0; v < net.size(); ++v)
        p *= cpt_entry(net, v, values);
    return p;
}

inline std::vector<int> decode(std::uint64_t code, std::size_t n) {
    std::vector<int> values(n);
    for (std::size_t v = 0; v < n; ++v)
        values[v] = static_cast<int>((code >> v) & 1);
    return values;
}

// P(query = present | e) by summing every complete assignment.
inline std::optional<double> posterior_present(const BayesNet& net, VarId query, const Evidence& e) {
    double present = 0.0, total = 0.0;
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << net.size()); ++code) {
        auto values = decode(code, net.size());
        bool consistent = true;
        for (const auto& [var, value] : e)
            consistent = consistent && values[var] == static_cast<int>(value);
        if (!consistent)
            continue;
        double p = joint_probability(net, values);
        total += p;
        if (values[query] == 0)
            present += p;
    }
    if (!(total > 0.0))
        return std::nullopt;
    return present / total;
}

// Random DAG: each node picks parents among earlier nodes. Entries are strictly positive unless
// `allow_deterministic`, which sometimes pins a row to (1, 0) or (0, 1).
inline BayesNet random_net(qlbn::Rng& rng, std::size_t n, std::size_t max_parents = 3,
                           bool allow_deterministic = false) {
    DagStructure dag;
    for (std::size_t v = 0; v < n; ++v) {
        dag.nodes.push_back("X" + std::to_string(v));
        std::vector<std::size_t> parents;
        for (std::size_t u = 0; u < v; ++u)
            if (parents.size() < max_parents && rng.uniform01() < 0.5)
                parents.push_back(u);
        dag.parents.push_back(parents);
    }
    std::vector<std::vector<double>> tables(n);
    for (std::size_t v = 0; v < n; ++v) {
        tables[v].resize(std::size_t{2} << dag.parents[v].size());
        for (std::size_t i = 0; i < tables[v].size(); i += 2) {
            double a = 0.02 + 0.96 * rng.uniform01();
            if (allow_deterministic && rng.uniform01() < 0.15)
                a = rng.uniform01() < 0.5 ? 1.0 : 0.0;
            tables[v][i] = a;
            tables[v][i + 1] = 1.0 - a;
        }
    }
    return BayesNet::from_tables(dag, tables);
}

// Rows of 0/1/-1 (missing) drawn by ancestral sampling, then masked.
inline std::vector<std::vector<int>> sample_rows(const BayesNet& net, qlbn::Rng& rng, std::size_t rows,
                                                 double missing) {
    std::vector<std::vector<int>> out;
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<int> values(net.size(), 0);
        for (VarId v = 0; v < net.size(); ++v) {
            values[v] = 0;
            double p_present = cpt_entry(net, v, values);
            values[v] = rng.uniform01() < p_present ? 0 : 1;
        }
        for (auto& x : values)
            if (rng.uniform01() < missing)
                x = -1;
        out.push_back(values);
    }
    return out;
}

inline qlbn::eventlog::CaseMatrix to_matrix(const DagStructure& dag, const std::vector<std::vector<int>>& rows) {
    std::vector<std::string> ids;
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ids.push_back("c" + std::to_string(r));
        for (int x : rows[r])
            cells.push_back(x < 0 ? Cell::missing : x == 0 ? Cell::present : Cell::absent);
    }
    return {dag.nodes, ids, cells};
}

// One EM step done the slow way: for every row, posterior over all completions, then expected
// family counts and a smoothed re-estimate.
inline BayesNet em_step(const BayesNet& net, const std::vector<std::vector<int>>& rows, double pseudocount) {
    const std::size_t n = net.size();
    std::vector<std::map<std::pair<std::vector<int>, int>, double>> counts(n);
    for (const auto& row : rows) {
        std::vector<std::pair<std::vector<int>, double>> completions;
        double total = 0.0;
        for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
            auto values = decode(code, n);
            bool ok = true;
            for (std::size_t v = 0; v < n; ++v)
                if (row[v] >= 0 && row[v] != values[v])
                    ok = false;
            if (!ok)
                continue;
            double p = joint_probability(net, values);
            completions.emplace_back(values, p);
            total += p;
        }
        for (const auto& [values, p] : completions)
            for (std::size_t v = 0; v < n; ++v) {
                std::vector<int> pa;
                for (auto u : net.dag.parents[v])
                    pa.push_back(values[u]);
                counts[v][{pa, values[v]}] += p / total;
            }
    }
    std::vector<std::vector<double>> tables(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto& parents = net.dag.parents[v];
        tables[v].assign(std::size_t{2} << parents.size(), 0.0);
        for (std::size_t cfg = 0; cfg < (std::size_t{1} << parents.size()); ++cfg) {
            std::vector<int> pa;
            for (std::size_t k = 0; k < parents.size(); ++k)
                pa.push_back(static_cast<int>((cfg >> k) & 1));
            double a = counts[v][{pa, 0}] + pseudocount;
            double b = counts[v][{pa, 1}] + pseudocount;
            tables[v][2 * cfg] = a + b > 0 ? a / (a + b) : 0.5;
            tables[v][2 * cfg + 1] = a + b > 0 ? b / (a + b) : 0.5;
        }
    }
    return BayesNet::from_tables(net.dag, tables);
}

inline double observed_log_likelihood(const BayesNet& net, const std::vector<std::vector<int>>& rows) {
    double ll = 0.0;
    for (const auto& row : rows) {
        double total = 0.0;
        for (std::uint64_t code = 0; code < (std::uint64_t{1} << net.size()); ++code) {
            auto values = decode(code, net.size());
            bool ok = true;
            for (std::size_t v = 0; v < net.size(); ++v)
                if (row[v] >= 0 && row[v] != values[v])
                    ok = false;
            if (ok)
                total += joint_probability(net, values);
        }
        ll += std::log(total);
    }
    return ll;
}

}  // namespace oracle
