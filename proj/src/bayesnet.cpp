#include "qlbn/bayesnet.hpp"

#include "qlbn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

namespace qlbn::bayesnet {

using eventlog::CaseMatrix;
using eventlog::Cell;

// ---------------------------------------------------------------------------
// Network

BayesNet BayesNet::from_tables(DagStructure dag, std::vector<std::vector<double>> tables) {
    if (tables.size() != dag.size())
        throw Error(Errc::invalid_argument, "one CPT per node required");
    if (!dag.is_acyclic())
        throw Error(Errc::invalid_argument, "network structure contains a cycle");
    BayesNet net;
    net.cpts.reserve(dag.size());
    for (VarId v = 0; v < dag.size(); ++v) {
        std::vector<VarId> vars{v};
        vars.insert(vars.end(), dag.parents[v].begin(), dag.parents[v].end());
        Factor f = Factor::zeros(vars, std::vector<std::size_t>(vars.size(), 2));
        if (tables[v].size() != f.size())
            throw Error(Errc::invalid_argument, "CPT for '" + dag.nodes[v] + "' has " +
                                                    std::to_string(tables[v].size()) + " entries, expected " +
                                                    std::to_string(f.size()));
        f.vals = std::move(tables[v]);
        net.cpts.push_back(std::move(f));
    }
    net.dag = std::move(dag);
    validate_cpts(net);
    return net;
}

VarId BayesNet::id_of(std::string_view name) const {
    if (auto idx = dag.index_of(name))
        return *idx;
    throw Error(Errc::unknown_variable, std::string{name});
}

void validate_cpts(const BayesNet& net, double tol) {
    for (VarId v = 0; v < net.size(); ++v) {
        const Factor& f = net.cpts[v];
        for (std::size_t row = 0; row < f.size(); row += 2) {
            double a = f.vals[row], b = f.vals[row + 1];
            if (!(a >= 0.0) || !(b >= 0.0))
                throw Error(Errc::negative_probability, "CPT of '" + net.name_of(v) + "'");
            if (std::abs(a + b - 1.0) > tol)
                throw Error(Errc::invalid_argument, "CPT row of '" + net.name_of(v) + "' sums to " +
                                                        std::to_string(a + b));
        }
    }
}

Evidence parse_evidence(const BayesNet& net, std::span<const std::string> items) {
    Evidence e;
    for (const auto& item : items) {
        auto eq = item.rfind('=');
        if (eq == std::string::npos)
            throw Error(Errc::invalid_argument, "evidence must look like VAR=present|absent: " + item);
        std::string name = item.substr(0, eq), value = item.substr(eq + 1);
        VarId v;
        try {
            v = net.id_of(name);
        } catch (const Error&) {
            throw Error(Errc::unknown_evidence_variable, name);
        }
        Value val;
        if (value == "present")
            val = Value::present;
        else if (value == "absent")
            val = Value::absent;
        else
            throw Error(Errc::invalid_argument, "evidence value must be present or absent: " + item);
        if (!e.emplace(v, val).second)
            throw Error(Errc::invalid_argument, "evidence variable repeated: " + name);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Learning from complete data

namespace {

std::vector<std::size_t> resolve_columns(const CaseMatrix& m, const DagStructure& dag) {
    std::vector<std::size_t> col(dag.size());
    for (VarId v = 0; v < dag.size(); ++v) {
        auto idx = m.index_of(dag.nodes[v]);
        if (!idx)
            throw Error(Errc::unknown_variable, dag.nodes[v]);
        col[v] = *idx;
    }
    return col;
}

}  // namespace

BayesNet learn_mle(const CaseMatrix& matrix, const DagStructure& dag) {
    if (matrix.missing_count() != 0)
        throw Error(Errc::missing_cells_present, std::to_string(matrix.missing_count()) + " missing cells");
    auto col = resolve_columns(matrix, dag);

    std::vector<std::vector<double>> tables(dag.size());
    for (VarId v = 0; v < dag.size(); ++v) {
        const auto& parents = dag.parents[v];
        std::vector<std::uint64_t> counts(std::size_t{2} << parents.size(), 0);
        for (std::size_t r = 0; r < matrix.rows(); ++r) {
            auto row = matrix.row(r);
            std::size_t index = row[col[v]] == Cell::absent ? 1 : 0;
            for (std::size_t k = 0; k < parents.size(); ++k)
                if (row[col[parents[k]]] == Cell::absent)
                    index += std::size_t{2} << k;
            ++counts[index];
        }
        auto& t = tables[v];
        t.resize(counts.size());
        for (std::size_t i = 0; i < counts.size(); i += 2) {
            std::uint64_t n = counts[i] + counts[i + 1];
            if (n == 0) {
                t[i] = t[i + 1] = 0.5;
            } else {
                t[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
                t[i + 1] = static_cast<double>(counts[i + 1]) / static_cast<double>(n);
            }
        }
    }
    return BayesNet::from_tables(dag, std::move(tables));
}

// ---------------------------------------------------------------------------
// Exact inference

std::vector<Factor> observe_evidence(std::vector<Factor> factors, const Evidence& e) {
    for (const auto& [var, value] : e) {
        bool found = false;
        for (auto& f : factors) {
            auto pos = f.position_of(var);
            if (!pos)
                continue;
            found = true;
            std::size_t observed = static_cast<std::size_t>(value);
            if (observed >= f.cards[*pos])
                throw Error(Errc::invalid_argument, "evidence value out of range");
            std::size_t stride = f.strides()[*pos], card = f.cards[*pos];
            for (std::size_t i = 0; i < f.size(); ++i)
                if ((i / stride) % card != observed)
                    f.vals[i] = 0.0;
        }
        if (!found)
            throw Error(Errc::unknown_evidence_variable, "variable id " + std::to_string(var));
    }
    return factors;
}

Factor full_joint(std::span<const Factor> factors, const JointOptions& opts) {
    std::set<VarId> children, all;
    std::map<VarId, std::size_t> card_of;
    for (const auto& f : factors) {
        if (f.vars.empty())
            throw Error(Errc::invalid_argument, "factor without variables");
        if (!children.insert(f.vars[0]).second)
            throw Error(Errc::invalid_argument, "variable " + std::to_string(f.vars[0]) + " is a child twice");
        for (std::size_t k = 0; k < f.vars.size(); ++k) {
            all.insert(f.vars[k]);
            auto [it, inserted] = card_of.emplace(f.vars[k], f.cards[k]);
            if (!inserted && it->second != f.cards[k])
                throw Error(Errc::invalid_argument, "inconsistent cardinality for variable " + std::to_string(f.vars[k]));
        }
    }
    if (children != all)
        throw Error(Errc::invalid_argument, "every variable must be the child of exactly one factor");
    if (all.size() > opts.max_vars)
        throw Error(Errc::dimension_overflow, std::to_string(all.size()) + " variables exceed the cap of " +
                                                  std::to_string(opts.max_vars));

    std::vector<VarId> vars(all.begin(), all.end());
    std::vector<std::size_t> cards;
    for (VarId v : vars)
        cards.push_back(card_of[v]);
    Factor joint = Factor::zeros(vars, cards);

    const std::size_t n = vars.size(), nf = factors.size();
    // delta[j * nf + f]: how far factor f's index moves when joint variable j steps by one.
    std::vector<std::size_t> delta(n * nf, 0);
    for (std::size_t fi = 0; fi < nf; ++fi) {
        auto strides = factors[fi].strides();
        for (std::size_t k = 0; k < factors[fi].vars.size(); ++k) {
            auto j = static_cast<std::size_t>(std::lower_bound(vars.begin(), vars.end(), factors[fi].vars[k]) -
                                              vars.begin());
            delta[j * nf + fi] = strides[k];
        }
    }

    std::vector<std::size_t> a(n, 0), idx(nf, 0);
    for (std::size_t i = 0; i < joint.size(); ++i) {
        double p = 1.0;
        for (std::size_t fi = 0; fi < nf; ++fi)
            p *= factors[fi].vals[idx[fi]];
        joint.vals[i] = p;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t* d = &delta[j * nf];
            if (++a[j] < cards[j]) {
                for (std::size_t fi = 0; fi < nf; ++fi)
                    idx[fi] += d[fi];
                break;
            }
            for (std::size_t fi = 0; fi < nf; ++fi)
                idx[fi] -= (cards[j] - 1) * d[fi];
            a[j] = 0;
        }
    }
    return joint;
}

MarginalVectors marginalize(const Factor& joint, VarId query, const Evidence& e) {
    if (e.contains(query))
        throw Error(Errc::query_is_evidence, "variable id " + std::to_string(query));
    auto qpos = joint.position_of(query);
    if (!qpos)
        throw Error(Errc::unknown_variable, "query variable id " + std::to_string(query) + " not in joint");
    if (joint.cards[*qpos] != 2)
        throw Error(Errc::invalid_argument, "query must be binary");

    std::vector<std::pair<std::size_t, std::size_t>> observed;  // (position, value)
    for (const auto& [var, value] : e) {
        auto pos = joint.position_of(var);
        if (!pos)
            throw Error(Errc::unknown_evidence_variable, "variable id " + std::to_string(var));
        observed.emplace_back(*pos, static_cast<std::size_t>(value));
    }

    MarginalVectors mv;
    mv.pos.reserve(joint.size() / 2);
    mv.neg.reserve(joint.size() / 2);
    std::vector<std::size_t> a(joint.cards.size(), 0);
    for (std::size_t i = 0; i < joint.size(); ++i) {
        bool consistent = std::all_of(observed.begin(), observed.end(),
                                      [&](const auto& o) { return a[o.first] == o.second; });
        double v = consistent ? joint.vals[i] : 0.0;
        (a[*qpos] == 0 ? mv.pos : mv.neg).push_back(v);
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (++a[j] < joint.cards[j])
                break;
            a[j] = 0;
        }
    }
    return mv;
}

Distribution classical_prob(const MarginalVectors& mv) {
    double sp = std::accumulate(mv.pos.begin(), mv.pos.end(), 0.0);
    double sn = std::accumulate(mv.neg.begin(), mv.neg.end(), 0.0);
    double total = sp + sn;
    if (!(total > 0.0))
        throw Error(Errc::zero_mass, "evidence has zero probability under the model");
    double alpha = 1.0 / total;
    return {alpha * sp, alpha * sn};
}

Distribution infer(const BayesNet& net, VarId query, const Evidence& e, const JointOptions& opts) {
    if (query >= net.size())
        throw Error(Errc::unknown_variable, "query variable id " + std::to_string(query));
    if (e.contains(query))
        throw Error(Errc::query_is_evidence, net.name_of(query));
    auto factors = observe_evidence(net.cpts, e);
    Factor joint = full_joint(factors, opts);
    return classical_prob(marginalize(joint, query, e));
}

// ---------------------------------------------------------------------------
// JSON

std::string net_to_json(const BayesNet& net) {
    using nlohmann::json;
    json nodes = json::array();
    for (VarId v = 0; v < net.size(); ++v) {
        json parents = json::array();
        for (VarId p : net.dag.parents[v])
            parents.push_back(net.dag.nodes[p]);
        nodes.push_back({{"name", net.dag.nodes[v]}, {"parents", parents}, {"cpt", net.cpts[v].vals}});
    }
    return json{{"nodes", nodes}}.dump(2);
}

BayesNet net_from_json(std::string_view text) {
    using nlohmann::json;
    try {
        json j = json::parse(text);
        DagStructure dag = procmine::dag_from_json(text);
        std::vector<std::vector<double>> tables;
        for (const auto& n : j.at("nodes"))
            tables.push_back(n.at("cpt").get<std::vector<double>>());
        // Parent lists are stored by name and may be listed in any order; tables follow that order.
        std::size_t v = 0;
        for (const auto& n : j.at("nodes")) {
            std::vector<VarId> listed;
            for (const auto& p : n.at("parents"))
                listed.push_back(*dag.index_of(p.get<std::string>()));
            if (!std::is_sorted(listed.begin(), listed.end())) {
                Factor src = Factor::zeros(std::vector<VarId>(listed.size() + 1), std::vector<std::size_t>(listed.size() + 1, 2));
                if (tables[v].size() != src.size())
                    throw Error(Errc::invalid_argument, "CPT size mismatch for '" + dag.nodes[v] + "'");
                src.vals = tables[v];
                std::vector<std::size_t> order(listed.size());
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(), [&](auto x, auto y) { return listed[x] < listed[y]; });
                std::vector<double> permuted(src.size());
                for (std::size_t i = 0; i < src.size(); ++i) {
                    auto a = src.assignment_of(i);
                    std::vector<std::size_t> b{a[0]};
                    for (auto k : order)
                        b.push_back(a[k + 1]);
                    permuted[src.index_of(b)] = src.vals[i];
                }
                tables[v] = std::move(permuted);
            }
            ++v;
        }
        return BayesNet::from_tables(std::move(dag), std::move(tables));
    } catch (const json::exception& ex) {
        throw Error(Errc::invalid_argument, std::string{"network JSON: "} + ex.what());
    }
}

}  // namespace qlbn::bayesnet
