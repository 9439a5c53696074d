#pragma once

#include "qlbn/eventlog.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qlbn::procmine {

struct EdgeStats {
    std::uint64_t count = 0;
    double p = 0.0;

    bool operator==(const EdgeStats&) const = default;
};

using EdgeKey = std::pair<std::string, std::string>;

// Directly-follows graph. `p = count / out_totals[src]`, where the row total is the number of
// occurrences of src (a case ending at src still counts). The total is fixed when the graph is
// built so that pruning leaves surviving probabilities untouched.
struct TransitionGraph {
    std::vector<std::string> nodes;                    // sorted
    std::map<EdgeKey, EdgeStats> edges;                // ordered by (src, dst)
    std::map<std::string, std::uint64_t> out_totals;  // occurrences per node

    bool has_node(std::string_view name) const;
    double probability(const std::string& src, const std::string& dst) const;

    bool operator==(const TransitionGraph&) const = default;
};

struct MergeRule {
    std::vector<std::string> members;
    std::string merged_name;

    bool operator==(const MergeRule&) const = default;
};

struct DagStructure {
    std::vector<std::string> nodes;
    std::vector<std::vector<std::size_t>> parents;  // ascending node indices

    std::size_t size() const noexcept { return nodes.size(); }
    std::optional<std::size_t> index_of(std::string_view name) const noexcept;

    // Kahn's algorithm, smallest available index first. Empty optional if the graph has a cycle.
    std::optional<std::vector<std::size_t>> topological_order() const;
    bool is_acyclic() const { return topological_order().has_value(); }

    bool operator==(const DagStructure&) const = default;
};

struct RemovedEdge {
    std::string src;
    std::string dst;
    double p = 0.0;
};

struct CycleRemoval {
    DagStructure dag;
    std::vector<RemovedEdge> removed;  // in deletion order
};

TransitionGraph build_transition_graph(const eventlog::EventLog& log);

// Removes edges with p < threshold. Surviving probabilities are not renormalized; nodes are kept.
TransitionGraph prune_edges(const TransitionGraph& g, double threshold = 0.05);

// Contracts each rule's members into `merged_name`. Edges among members are dropped, parallel
// external edges have their counts summed. The merged node's row is renormalized over its
// external edges; other rows keep their original denominators.
TransitionGraph apply_merges(const TransitionGraph& g, std::span<const MergeRule> rules);

// Pairs (a, b) with P(b | a) >= tau where a is b's only predecessor, chained into groups.
// Suggestions only; nothing is applied.
std::vector<MergeRule> suggest_merges(const TransitionGraph& g, double tau = 0.99);

// Repeatedly finds a directed cycle and deletes its lowest-probability edge (ties: smallest
// (src, dst)). Parents are read off the surviving edges.
CycleRemoval remove_cycles(const TransitionGraph& g);

// Renames every member activity in the log to its rule's merged name.
eventlog::EventLog merge_activities(const eventlog::EventLog& log, std::span<const MergeRule> rules);

std::string graph_to_json(const TransitionGraph& g);
TransitionGraph graph_from_json(std::string_view text);

std::string rules_to_json(std::span<const MergeRule> rules);
std::vector<MergeRule> rules_from_json(std::string_view text);

// `{nodes: [{name, parents: [...]}]}`, the network file without CPTs.
std::string dag_to_json(const DagStructure& dag);
DagStructure dag_from_json(std::string_view text);

}  // namespace qlbn::procmine
