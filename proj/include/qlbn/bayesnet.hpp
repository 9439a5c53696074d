#pragma once

#include "qlbn/eventlog.hpp"
#include "qlbn/factor.hpp"
#include "qlbn/procmine.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qlbn::bayesnet {

using procmine::DagStructure;

// Binary network. cpts[v].vars == [v] ++ dag.parents[v].
struct BayesNet {
    DagStructure dag;
    std::vector<Factor> cpts;

    // Builds CPT factors from flat stride-ordered tables and validates them.
    static BayesNet from_tables(DagStructure dag, std::vector<std::vector<double>> tables);

    std::size_t size() const noexcept { return dag.size(); }
    VarId id_of(std::string_view name) const;  // throws UnknownVariable
    const std::string& name_of(VarId v) const { return dag.nodes.at(v); }
};

// Throws unless every parent row of every CPT sums to 1 within `tol` and entries are >= 0.
void validate_cpts(const BayesNet& net, double tol = 1e-9);

using Evidence = std::map<VarId, Value>;

// `VAR=present` / `VAR=absent` pairs, resolved against the network.
Evidence parse_evidence(const BayesNet& net, std::span<const std::string> items);

// Joint entries with the query present (pos) and absent (neg), in increasing joint-index order over
// all remaining variables; entries that contradict the evidence are zero.
struct MarginalVectors {
    std::vector<double> pos;
    std::vector<double> neg;
};

struct Distribution {
    double present = 0.0;
    double absent = 0.0;

    bool operator==(const Distribution&) const = default;
};

BayesNet learn_mle(const eventlog::CaseMatrix& matrix, const DagStructure& dag);

struct EmConfig {
    int max_iters = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    double pseudocount = 1.0;
};

struct EmResult {
    BayesNet net;
    double log_likelihood = 0.0;  // observed-data log-likelihood of `net`
    // log_likelihood + pseudocount * sum(log theta): the quantity EM with a Dirichlet
    // pseudocount ascends. Equal to log_likelihood when the pseudocount is 0.
    double objective = 0.0;
    std::vector<double> log_likelihood_trace;  // one entry per E-step
    std::vector<double> objective_trace;
    int iterations = 0;  // M-steps performed
    bool converged = false;
};

// Uniform CPTs perturbed by U(-0.01, 0.01) per entry, then row-renormalized.
BayesNet em_initial_net(const DagStructure& dag, std::uint64_t seed);

// Expected-counts EM for binary CPTs. Missing cells are filled by exact inference over the full
// joint, so the network must fit under the joint-size cap.
EmResult learn_em(const eventlog::CaseMatrix& matrix, const DagStructure& dag, const EmConfig& cfg = {});

std::vector<Factor> observe_evidence(std::vector<Factor> factors, const Evidence& e);

struct JointOptions {
    std::size_t max_vars = 25;
};

// Product of all factors over the sorted union of their variables.
Factor full_joint(std::span<const Factor> factors, const JointOptions& opts = {});

MarginalVectors marginalize(const Factor& joint, VarId query, const Evidence& e);

Distribution classical_prob(const MarginalVectors& mv);

Distribution infer(const BayesNet& net, VarId query, const Evidence& e, const JointOptions& opts = {});

// `{nodes: [{name, parents: [...], cpt: [...]}]}`, CPTs in stride order.
std::string net_to_json(const BayesNet& net);
BayesNet net_from_json(std::string_view text);

}  // namespace qlbn::bayesnet
