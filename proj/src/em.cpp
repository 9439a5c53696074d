#include "qlbn/bayesnet.hpp"

#include "qlbn/error.hpp"
#include "qlbn/random.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace qlbn::bayesnet {

using eventlog::CaseMatrix;
using eventlog::Cell;

namespace {

// A distinct row of the matrix: `mask` has a bit per observed variable, `bits` the observed
// values (1 = absent) at those positions.
struct Pattern {
    std::uint32_t mask = 0;
    std::uint32_t bits = 0;
    double multiplicity = 0.0;
};

struct EStep {
    std::vector<double> weights;  // expected count of every complete assignment
    double log_likelihood = 0.0;
};

std::vector<Pattern> collect_patterns(const CaseMatrix& m, const DagStructure& dag) {
    std::vector<std::size_t> col(dag.size());
    for (VarId v = 0; v < dag.size(); ++v) {
        auto idx = m.index_of(dag.nodes[v]);
        if (!idx)
            throw Error(Errc::unknown_variable, dag.nodes[v]);
        col[v] = *idx;
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> counts;
    std::size_t observed_cells = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        std::uint32_t mask = 0, bits = 0;
        for (VarId v = 0; v < dag.size(); ++v) {
            Cell c = row[col[v]];
            if (c == Cell::missing)
                continue;
            ++observed_cells;
            mask |= std::uint32_t{1} << v;
            if (c == Cell::absent)
                bits |= std::uint32_t{1} << v;
        }
        counts[{mask, bits}] += 1.0;
    }
    if (observed_cells == 0)
        throw Error(Errc::all_cells_missing, std::to_string(m.rows()) + " rows without an observed cell");
    std::vector<Pattern> out;
    out.reserve(counts.size());
    for (const auto& [key, n] : counts)
        out.push_back({key.first, key.second, n});
    return out;
}

EStep expect(const BayesNet& net, const std::vector<Pattern>& patterns) {
    Factor joint = full_joint(net.cpts);
    const std::uint32_t all = static_cast<std::uint32_t>(joint.size() - 1);
    EStep out;
    out.weights.assign(joint.size(), 0.0);
    for (const auto& p : patterns) {
        const std::uint32_t free = all & ~p.mask;
        double mass = 0.0;
        std::uint32_t sub = free;
        do {
            mass += joint.vals[p.bits | sub];
            sub = (sub - 1) & free;
        } while (sub != free);
        if (!(mass > 0.0)) {
            out.log_likelihood = -std::numeric_limits<double>::infinity();
            continue;
        }
        out.log_likelihood += p.multiplicity * std::log(mass);
        const double scale = p.multiplicity / mass;
        sub = free;
        do {
            out.weights[p.bits | sub] += scale * joint.vals[p.bits | sub];
            sub = (sub - 1) & free;
        } while (sub != free);
    }
    return out;
}

BayesNet maximize(const DagStructure& dag, const std::vector<double>& w, double pc) {
    std::vector<std::vector<double>> tables(dag.size());
    for (VarId v = 0; v < dag.size(); ++v) {
        const auto& parents = dag.parents[v];
        std::vector<double> counts(std::size_t{2} << parents.size(), 0.0);
        for (std::size_t x = 0; x < w.size(); ++x) {
            if (w[x] == 0.0)
                continue;
            std::size_t index = (x >> v) & 1;
            for (std::size_t k = 0; k < parents.size(); ++k)
                index |= ((x >> parents[k]) & 1) << (k + 1);
            counts[index] += w[x];
        }
        auto& t = tables[v];
        t.resize(counts.size());
        for (std::size_t i = 0; i < counts.size(); i += 2) {
            double a = counts[i] + pc, b = counts[i + 1] + pc, n = a + b;
            if (n > 0.0) {
                t[i] = a / n;
                t[i + 1] = b / n;
            } else {
                t[i] = t[i + 1] = 0.5;
            }
        }
    }
    BayesNet net;
    net.dag = dag;
    for (VarId v = 0; v < dag.size(); ++v) {
        std::vector<VarId> vars{v};
        vars.insert(vars.end(), dag.parents[v].begin(), dag.parents[v].end());
        Factor f = Factor::zeros(vars, std::vector<std::size_t>(vars.size(), 2));
        f.vals = std::move(tables[v]);
        net.cpts.push_back(std::move(f));
    }
    return net;
}

double log_prior(const BayesNet& net, double pc) {
    if (pc == 0.0)
        return 0.0;
    double s = 0.0;
    for (const auto& f : net.cpts)
        for (double t : f.vals)
            s += std::log(t);
    return pc * s;
}

}  // namespace

BayesNet em_initial_net(const DagStructure& dag, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> tables(dag.size());
    for (VarId v = 0; v < dag.size(); ++v) {
        auto& t = tables[v];
        t.resize(std::size_t{2} << dag.parents[v].size());
        for (std::size_t i = 0; i < t.size(); i += 2) {
            double a = 0.5 + rng.uniform(-0.01, 0.01);
            double b = 0.5 + rng.uniform(-0.01, 0.01);
            t[i] = a / (a + b);
            t[i + 1] = b / (a + b);
        }
    }
    return BayesNet::from_tables(dag, std::move(tables));
}

EmResult learn_em(const CaseMatrix& matrix, const DagStructure& dag, const EmConfig& cfg) {
    if (cfg.max_iters < 1)
        throw Error(Errc::invalid_argument, "max_iters must be at least 1");
    if (!(cfg.pseudocount >= 0.0))
        throw Error(Errc::invalid_argument, "pseudocount must be non-negative");
    if (dag.size() > JointOptions{}.max_vars)
        throw Error(Errc::dimension_overflow, std::to_string(dag.size()) + " variables exceed the joint cap");
    auto patterns = collect_patterns(matrix, dag);

    EmResult res;
    res.net = em_initial_net(dag, cfg.seed);
    EStep e = expect(res.net, patterns);
    res.log_likelihood = e.log_likelihood;
    res.objective = e.log_likelihood + log_prior(res.net, cfg.pseudocount);
    res.log_likelihood_trace.push_back(res.log_likelihood);
    res.objective_trace.push_back(res.objective);

    for (int it = 1; it <= cfg.max_iters; ++it) {
        res.net = maximize(dag, e.weights, cfg.pseudocount);
        res.iterations = it;
        e = expect(res.net, patterns);
        double previous = res.objective;
        res.log_likelihood = e.log_likelihood;
        res.objective = e.log_likelihood + log_prior(res.net, cfg.pseudocount);
        res.log_likelihood_trace.push_back(res.log_likelihood);
        res.objective_trace.push_back(res.objective);
        if (std::abs(res.objective - previous) < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace qlbn::bayesnet
