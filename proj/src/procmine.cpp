#include "qlbn/procmine.hpp"

#include "qlbn/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include <json.hpp>

namespace qlbn::procmine {

using eventlog::EventLog;
using nlohmann::json;

bool TransitionGraph::has_node(std::string_view name) const {
    return std::binary_search(nodes.begin(), nodes.end(), name);
}

double TransitionGraph::probability(const std::string& src, const std::string& dst) const {
    auto it = edges.find({src, dst});
    return it == edges.end() ? 0.0 : it->second.p;
}

std::optional<std::size_t> DagStructure::index_of(std::string_view name) const noexcept {
    auto it = std::find(nodes.begin(), nodes.end(), name);
    if (it == nodes.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

std::optional<std::vector<std::size_t>> DagStructure::topological_order() const {
    std::size_t n = nodes.size();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t p : parents[v]) {
            if (p == v)
                return std::nullopt;
            children[p].push_back(v);
            ++indegree[v];
        }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t v = 0; v < n; ++v)
        if (indegree[v] == 0)
            ready.push(v);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        std::size_t v = ready.top();
        ready.pop();
        order.push_back(v);
        for (std::size_t c : children[v])
            if (--indegree[c] == 0)
                ready.push(c);
    }
    if (order.size() != n)
        return std::nullopt;
    return order;
}

namespace {

void recompute_probabilities(TransitionGraph& g) {
    for (auto& [key, e] : g.edges) {
        auto total = g.out_totals[key.first];
        e.p = total == 0 ? 0.0 : static_cast<double>(e.count) / static_cast<double>(total);
    }
}

}  // namespace

TransitionGraph build_transition_graph(const EventLog& log) {
    if (log.empty())
        throw Error(Errc::empty_log, "cannot build a transition graph from an empty log");
    TransitionGraph g;
    std::set<std::string> nodes;
    for (const auto& [id, seq] : log.cases()) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            nodes.insert(seq[i].activity);
            ++g.out_totals[seq[i].activity];
            if (i + 1 < seq.size())
                ++g.edges[{seq[i].activity, seq[i + 1].activity}].count;
        }
    }
    g.nodes.assign(nodes.begin(), nodes.end());
    for (const auto& n : g.nodes)
        g.out_totals.try_emplace(n, 0);
    recompute_probabilities(g);
    return g;
}

TransitionGraph prune_edges(const TransitionGraph& g, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw Error(Errc::invalid_argument, "prune threshold must lie in [0, 1]");
    TransitionGraph out = g;
    std::erase_if(out.edges, [&](const auto& kv) { return kv.second.p < threshold; });
    return out;
}

TransitionGraph apply_merges(const TransitionGraph& g, std::span<const MergeRule> rules) {
    std::map<std::string, std::string> target;
    std::set<std::string> merged_names;
    for (const auto& rule : rules) {
        if (rule.members.empty())
            throw Error(Errc::invalid_argument, "merge rule '" + rule.merged_name + "' has no members");
        if (rule.merged_name.empty())
            throw Error(Errc::invalid_argument, "merge rule without merged_name");
        for (const auto& m : rule.members) {
            if (!g.has_node(m))
                throw Error(Errc::unknown_activity, m);
            if (!target.emplace(m, rule.merged_name).second)
                throw Error(Errc::invalid_argument, "activity '" + m + "' appears in more than one merge rule");
        }
        bool self_named = std::find(rule.members.begin(), rule.members.end(), rule.merged_name) != rule.members.end();
        if (g.has_node(rule.merged_name) && !self_named)
            throw Error(Errc::invalid_argument, "merged name '" + rule.merged_name + "' collides with a node");
        if (!merged_names.insert(rule.merged_name).second)
            throw Error(Errc::invalid_argument, "merged name '" + rule.merged_name + "' used twice");
    }
    auto map_node = [&](const std::string& n) -> const std::string& {
        auto it = target.find(n);
        return it == target.end() ? n : it->second;
    };

    TransitionGraph out;
    std::set<std::string> nodes;
    for (const auto& n : g.nodes)
        nodes.insert(map_node(n));
    out.nodes.assign(nodes.begin(), nodes.end());
    for (const auto& n : g.nodes)
        if (!target.contains(n))
            out.out_totals[n] = g.out_totals.at(n);
    for (const auto& name : merged_names)
        out.out_totals[name] = 0;

    for (const auto& [key, e] : g.edges) {
        const auto& src = map_node(key.first);
        const auto& dst = map_node(key.second);
        bool internal = src == dst && (target.contains(key.first) || target.contains(key.second));
        if (internal)
            continue;
        out.edges[{src, dst}].count += e.count;
        if (merged_names.contains(src))
            out.out_totals[src] += e.count;
    }
    recompute_probabilities(out);
    return out;
}

std::vector<MergeRule> suggest_merges(const TransitionGraph& g, double tau) {
    if (!(tau > 0.0 && tau <= 1.0))
        throw Error(Errc::invalid_argument, "tau must lie in (0, 1]");
    std::map<std::string, std::vector<std::string>> predecessors;
    for (const auto& [key, e] : g.edges)
        predecessors[key.second].push_back(key.first);

    // next[a] = b for every qualifying pair
    std::map<std::string, std::string> next;
    std::set<std::string> has_prev;
    for (const auto& [key, e] : g.edges) {
        const auto& [a, b] = key;
        if (a == b || e.p < tau)
            continue;
        const auto& preds = predecessors[b];
        if (preds.size() != 1 || preds.front() != a)
            continue;
        next[a] = b;
        has_prev.insert(b);
    }

    std::vector<MergeRule> rules;
    std::set<std::string> used;
    auto emit_chain = [&](const std::string& head) {
        MergeRule rule;
        std::string cur = head;
        while (!used.contains(cur)) {
            used.insert(cur);
            rule.members.push_back(cur);
            auto it = next.find(cur);
            if (it == next.end())
                break;
            cur = it->second;
        }
        if (rule.members.size() < 2)
            return;
        for (std::size_t i = 0; i < rule.members.size(); ++i)
            rule.merged_name += (i ? "+" : "") + rule.members[i];
        rules.push_back(std::move(rule));
    };
    for (const auto& [a, b] : next)
        if (!has_prev.contains(a))
            emit_chain(a);
    for (const auto& [a, b] : next)  // pure cycles have no head
        if (!used.contains(a))
            emit_chain(a);
    return rules;
}

namespace {

// First cycle reached by a DFS over sorted nodes and sorted successors, as a list of edges.
std::optional<std::vector<EdgeKey>> find_cycle(const std::vector<std::string>& nodes,
                                               const std::map<EdgeKey, EdgeStats>& edges) {
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& [key, e] : edges)
        succ[key.first].push_back(key.second);

    enum class Color { white, gray, black };
    std::map<std::string, Color> color;
    for (const auto& n : nodes)
        color[n] = Color::white;

    struct Frame {
        std::string node;
        std::size_t next_child = 0;
    };
    for (const auto& root : nodes) {
        if (color[root] != Color::white)
            continue;
        std::vector<Frame> stack{{root, 0}};
        color[root] = Color::gray;
        while (!stack.empty()) {
            Frame& top = stack.back();
            const auto& children = succ[top.node];
            if (top.next_child == children.size()) {
                color[top.node] = Color::black;
                stack.pop_back();
                continue;
            }
            const std::string child = children[top.next_child++];
            if (color[child] == Color::gray) {
                std::vector<EdgeKey> cycle;
                auto start = std::find_if(stack.begin(), stack.end(), [&](const Frame& f) { return f.node == child; });
                for (auto it = start; it + 1 != stack.end(); ++it)
                    cycle.emplace_back(it->node, (it + 1)->node);
                cycle.emplace_back(stack.back().node, child);
                return cycle;
            }
            if (color[child] == Color::white) {
                color[child] = Color::gray;
                stack.push_back({child, 0});
            }
        }
    }
    return std::nullopt;
}

}  // namespace

CycleRemoval remove_cycles(const TransitionGraph& g) {
    CycleRemoval result;
    auto edges = g.edges;
    while (auto cycle = find_cycle(g.nodes, edges)) {
        const EdgeKey* weakest = nullptr;
        for (const auto& key : *cycle) {
            if (!weakest) {
                weakest = &key;
                continue;
            }
            double p = edges.at(key).p, best = edges.at(*weakest).p;
            if (p < best || (p == best && key < *weakest))
                weakest = &key;
        }
        result.removed.push_back({weakest->first, weakest->second, edges.at(*weakest).p});
        edges.erase(*weakest);
    }

    result.dag.nodes = g.nodes;
    result.dag.parents.assign(g.nodes.size(), {});
    for (const auto& [key, e] : edges) {
        auto src = result.dag.index_of(key.first);
        auto dst = result.dag.index_of(key.second);
        if (!src || !dst)
            throw Error(Errc::unknown_activity, "edge endpoint not in node list: " + key.first + " -> " + key.second);
        result.dag.parents[*dst].push_back(*src);
    }
    for (auto& ps : result.dag.parents)
        std::sort(ps.begin(), ps.end());
    return result;
}

EventLog merge_activities(const EventLog& log, std::span<const MergeRule> rules) {
    std::map<std::string, std::string> aliases;
    for (const auto& rule : rules)
        for (const auto& m : rule.members) {
            if (!log.activity_universe().contains(m))
                throw Error(Errc::unknown_activity, m);
            aliases[m] = rule.merged_name;
        }
    return eventlog::rename_activities(log, aliases);
}

// ---------------------------------------------------------------------------
// JSON

std::string graph_to_json(const TransitionGraph& g) {
    json j;
    j["nodes"] = g.nodes;
    j["edges"] = json::array();
    for (const auto& [key, e] : g.edges)
        j["edges"].push_back({{"src", key.first}, {"dst", key.second}, {"p", e.p}, {"count", e.count}});
    return j.dump(2);
}

TransitionGraph graph_from_json(std::string_view text) {
    try {
        json j = json::parse(text);
        TransitionGraph g;
        g.nodes = j.at("nodes").get<std::vector<std::string>>();
        std::sort(g.nodes.begin(), g.nodes.end());
        for (const auto& n : g.nodes)
            g.out_totals[n] = 0;
        for (const auto& e : j.at("edges")) {
            std::string src = e.at("src"), dst = e.at("dst");
            if (!g.has_node(src) || !g.has_node(dst))
                throw Error(Errc::unknown_activity, "edge " + src + " -> " + dst + " references unknown node");
            EdgeStats stats{e.at("count").get<std::uint64_t>(), e.at("p").get<double>()};
            // Row totals are implied by any edge with p > 0.
            if (stats.p > 0.0 && g.out_totals[src] == 0)
                g.out_totals[src] = static_cast<std::uint64_t>(std::llround(static_cast<double>(stats.count) / stats.p));
            g.edges[{src, dst}] = stats;
        }
        return g;
    } catch (const json::exception& ex) {
        throw Error(Errc::invalid_argument, std::string{"graph JSON: "} + ex.what());
    }
}

std::string rules_to_json(std::span<const MergeRule> rules) {
    json j = json::array();
    for (const auto& r : rules)
        j.push_back({{"members", r.members}, {"merged_name", r.merged_name}});
    return j.dump(2);
}

std::vector<MergeRule> rules_from_json(std::string_view text) {
    try {
        std::vector<MergeRule> rules;
        for (const auto& r : json::parse(text)) {
            MergeRule rule{r.at("members").get<std::vector<std::string>>(), r.at("merged_name").get<std::string>()};
            std::set<std::string> distinct(rule.members.begin(), rule.members.end());
            if (distinct.size() != rule.members.size())
                throw Error(Errc::invalid_argument, "merge rule '" + rule.merged_name + "' repeats a member");
            rules.push_back(std::move(rule));
        }
        return rules;
    } catch (const json::exception& ex) {
        throw Error(Errc::invalid_argument, std::string{"merge rules JSON: "} + ex.what());
    }
}

std::string dag_to_json(const DagStructure& dag) {
    json nodes = json::array();
    for (std::size_t v = 0; v < dag.size(); ++v) {
        json parents = json::array();
        for (std::size_t p : dag.parents[v])
            parents.push_back(dag.nodes[p]);
        nodes.push_back({{"name", dag.nodes[v]}, {"parents", parents}});
    }
    return json{{"nodes", nodes}}.dump(2);
}

DagStructure dag_from_json(std::string_view text) {
    try {
        json j = json::parse(text);
        DagStructure dag;
        for (const auto& n : j.at("nodes"))
            dag.nodes.push_back(n.at("name").get<std::string>());
        dag.parents.resize(dag.nodes.size());
        std::size_t v = 0;
        for (const auto& n : j.at("nodes")) {
            for (const auto& p : n.at("parents")) {
                auto idx = dag.index_of(p.get<std::string>());
                if (!idx)
                    throw Error(Errc::unknown_variable, "parent '" + p.get<std::string>() + "' of " + dag.nodes[v]);
                dag.parents[v].push_back(*idx);
            }
            std::sort(dag.parents[v].begin(), dag.parents[v].end());
            ++v;
        }
        if (!dag.is_acyclic())
            throw Error(Errc::invalid_argument, "network structure contains a cycle");
        return dag;
    } catch (const json::exception& ex) {
        throw Error(Errc::invalid_argument, std::string{"DAG JSON: "} + ex.what());
    }
}

}  // namespace qlbn::procmine
