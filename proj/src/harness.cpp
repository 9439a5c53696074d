#include "qlbn/harness.hpp"

#include "qlbn/error.hpp"
#include "qlbn/random.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace qlbn::harness {

using bayesnet::BayesNet;
using bayesnet::Evidence;
using bayesnet::Factor;
using eventlog::CaseMatrix;
using eventlog::Cell;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    if (!(missing >= 0.0 && missing < 1.0))
        throw Error(Errc::invalid_argument, "missing fraction must lie in [0, 1)");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw Error(Errc::invalid_argument, "prune threshold must lie in [0, 1]");
    if (seeds.empty())
        throw Error(Errc::invalid_argument, "at least one seed is required");
    if (em_max_iters < 1)
        throw Error(Errc::invalid_argument, "em.max_iters must be at least 1");
    if (!(em_pseudocount >= 0.0))
        throw Error(Errc::invalid_argument, "em.pseudocount must be non-negative");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path{p};
    if (path.empty() || path.is_absolute() || base.empty())
        return path;
    return base / path;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ExperimentConfig config_from_json(std::string_view text, const std::filesystem::path& base) {
    ExperimentConfig cfg;
    try {
        json j = json::parse(text);
        if (j.contains("log"))
            cfg.log = resolve(base, j["log"].get<std::string>());
        if (j.contains("merges"))
            cfg.merges = resolve(base, j["merges"].get<std::string>());
        if (j.contains("aliases"))
            cfg.aliases = resolve(base, j["aliases"].get<std::string>());
        cfg.threshold = j.value("threshold", cfg.threshold);
        cfg.missing = j.value("missing", cfg.missing);
        if (j.contains("seeds"))
            cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("mode"))
            cfg.mode = quantum::parse_mode(j["mode"].get<std::string>());
        if (j.contains("queries"))
            cfg.queries = j["queries"].get<std::vector<std::string>>();
        if (j.contains("evidence"))
            cfg.evidence = j["evidence"].get<std::vector<std::string>>();
        if (j.contains("lifecycles")) {
            cfg.keep_lifecycles.clear();
            for (const auto& s : j["lifecycles"]) {
                auto lc = eventlog::parse_lifecycle(s.get<std::string>());
                if (!lc)
                    throw Error(Errc::invalid_argument, "unknown lifecycle " + s.get<std::string>());
                cfg.keep_lifecycles.push_back(*lc);
            }
        }
        if (j.contains("em")) {
            const auto& em = j["em"];
            cfg.em_max_iters = em.value("max_iters", cfg.em_max_iters);
            cfg.em_tol = em.value("tol", cfg.em_tol);
            cfg.em_pseudocount = em.value("pseudocount", cfg.em_pseudocount);
        }
        cfg.threads = j.value("threads", cfg.threads);
    } catch (const json::exception& ex) {
        throw Error(Errc::invalid_argument, std::string{"config JSON: "} + ex.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return config_from_json(slurp(path), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["log"] = cfg.log.string();
    j["merges"] = cfg.merges.string();
    j["aliases"] = cfg.aliases.string();
    j["threshold"] = cfg.threshold;
    j["missing"] = cfg.missing;
    j["seeds"] = cfg.seeds;
    j["mode"] = quantum::to_string(cfg.mode);
    j["queries"] = cfg.queries;
    j["evidence"] = cfg.evidence;
    ordered_json lcs = ordered_json::array();
    for (auto lc : cfg.keep_lifecycles)
        lcs.push_back(std::string{eventlog::to_string(lc)});
    j["lifecycles"] = lcs;
    j["em"] = {{"max_iters", cfg.em_max_iters}, {"tol", cfg.em_tol}, {"pseudocount", cfg.em_pseudocount}};
    j["threads"] = cfg.threads;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Missingness

CaseMatrix inject_missing(const CaseMatrix& m, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0))
        throw Error(Errc::invalid_argument, "missing fraction must lie in [0, 1)");
    const std::size_t n = m.cells();
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    CaseMatrix out = m;
    if (k == 0)
        return out;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(order[i], order[j]);
        out.set(order[i] / m.cols(), order[i] % m.cols(), Cell::missing);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

PreparedData prepare(const eventlog::EventLog& log, const std::vector<procmine::MergeRule>& rules,
                     const ExperimentConfig& cfg) {
    cfg.validate();
    PreparedData d;
    eventlog::LifecycleFilter keep(cfg.keep_lifecycles.begin(), cfg.keep_lifecycles.end());
    eventlog::EventLog filtered = eventlog::filter_lifecycle(log, keep);
    d.activity_count = filtered.activity_universe().size();

    auto graph = procmine::build_transition_graph(filtered);
    graph = procmine::prune_edges(graph, cfg.threshold);
    d.graph = procmine::apply_merges(graph, rules);
    d.structure = procmine::remove_cycles(d.graph);

    eventlog::EventLog merged = procmine::merge_activities(filtered, rules);
    d.matrix = eventlog::to_case_matrix(merged, d.structure.dag.nodes);
    d.control = bayesnet::learn_mle(d.matrix, d.structure.dag);
    return d;
}

PreparedData prepare(const ExperimentConfig& cfg) {
    eventlog::EventLog log = eventlog::read_log(cfg.log);
    if (!cfg.aliases.empty()) {
        std::map<std::string, std::string> aliases;
        try {
            aliases = json::parse(slurp(cfg.aliases)).get<std::map<std::string, std::string>>();
        } catch (const json::exception& ex) {
            throw Error(Errc::invalid_argument, std::string{"aliases JSON: "} + ex.what());
        }
        log = eventlog::rename_activities(log, aliases);
    }
    std::vector<procmine::MergeRule> rules;
    if (!cfg.merges.empty())
        rules = procmine::rules_from_json(slurp(cfg.merges));
    return prepare(log, rules, cfg);
}

namespace {

std::uint64_t em_seed(std::uint64_t seed) {
    // splitmix64 finalizer, so the EM start and the deletion mask draw from unrelated streams
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SeedNet learn_one(const PreparedData& data, const ExperimentConfig& cfg, std::uint64_t seed) {
    SeedNet s;
    s.seed = seed;
    try {
        CaseMatrix holes = inject_missing(data.matrix, cfg.missing, seed);
        bayesnet::EmConfig em{cfg.em_max_iters, cfg.em_tol, em_seed(seed), cfg.em_pseudocount};
        s.em = bayesnet::learn_em(holes, data.structure.dag, em);
    } catch (const std::exception& ex) {
        s.error = ex.what();
    }
    return s;
}

}  // namespace

std::vector<SeedNet> learn_seed_nets(const PreparedData& data, const ExperimentConfig& cfg) {
    std::vector<SeedNet> out(cfg.seeds.size());
    unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.seeds.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            out[i] = learn_one(data, cfg, cfg.seeds[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < cfg.seeds.size();)
                out[i] = learn_one(data, cfg, cfg.seeds[i]);
        });
    for (auto& t : pool)
        t.join();
    return out;
}

namespace {

std::vector<bayesnet::VarId> resolve_queries(const BayesNet& net, const ExperimentConfig& cfg, const Evidence& e) {
    std::vector<bayesnet::VarId> q;
    if (cfg.queries.empty()) {
        for (bayesnet::VarId v = 0; v < net.size(); ++v)
            if (!e.contains(v))
                q.push_back(v);
    } else {
        for (const auto& name : cfg.queries)
            q.push_back(net.id_of(name));
    }
    return q;
}

// Classical answers for every query from one joint.
std::vector<double> classical_present(const BayesNet& net, const std::vector<bayesnet::VarId>& queries,
                                      const Evidence& e) {
    Factor joint = bayesnet::full_joint(bayesnet::observe_evidence(net.cpts, e));
    std::vector<double> out;
    for (auto q : queries)
        out.push_back(bayesnet::classical_prob(bayesnet::marginalize(joint, q, e)).present);
    return out;
}

double mean_of(const std::vector<double>& xs) {
    return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2)
        return 0.0;
    double m = mean_of(xs), s = 0.0;
    for (double x : xs)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

void summarize(ExperimentReport& r) {
    std::vector<double> q, c;
    for (const auto& s : r.seeds)
        if (s.ok()) {
            q.push_back(s.mean_quantum_err);
            c.push_back(s.mean_classical_err);
        }
    r.mean_quantum_err = mean_of(q);
    r.mean_classical_err = mean_of(c);
    r.std_quantum_err = sample_std(q);
    r.std_classical_err = sample_std(c);
}

}  // namespace

std::size_t ExperimentReport::successful_seeds() const {
    return static_cast<std::size_t>(std::count_if(seeds.begin(), seeds.end(), [](const auto& s) { return s.ok(); }));
}

bool ExperimentReport::quantum_wins_every_seed() const {
    if (successful_seeds() != seeds.size() || seeds.empty())
        return false;
    return std::all_of(seeds.begin(), seeds.end(),
                       [](const auto& s) { return s.mean_quantum_err <= s.mean_classical_err; });
}

ExperimentReport evaluate(const PreparedData& data, const std::vector<SeedNet>& nets, const ExperimentConfig& cfg,
                          InterferenceMode mode) {
    ExperimentReport r;
    r.mode = quantum::to_string(mode);
    r.missing = cfg.missing;
    r.threshold = cfg.threshold;
    r.evidence = cfg.evidence;

    const Evidence e = bayesnet::parse_evidence(data.control, cfg.evidence);
    const auto queries = resolve_queries(data.control, cfg, e);
    const auto control = classical_present(data.control, queries, e);

    for (const auto& sn : nets) {
        SeedReport s;
        s.seed = sn.seed;
        if (!sn.em) {
            s.error = sn.error.empty() ? "no network" : sn.error;
            r.seeds.push_back(std::move(s));
            continue;
        }
        s.em_iterations = sn.em->iterations;
        s.em_converged = sn.em->converged;
        s.em_log_likelihood = sn.em->log_likelihood;
        try {
            const BayesNet& net = sn.em->net;
            const auto anet = quantum::amplitudes_from_cpt(net);
            Factor joint = quantum::quantum_joint(anet, e);
            for (double& v : joint.vals)
                v *= v;
            std::vector<double> qerr, cerr;
            for (std::size_t i = 0; i < queries.size(); ++i) {
                auto mv = bayesnet::marginalize(joint, queries[i], e);
                auto classical = bayesnet::classical_prob(mv);
                auto quantum = quantum::quantum_prob(mv, mode);
                ReportRow row;
                row.variable = net.name_of(queries[i]);
                row.quantum_p = quantum.distribution.present;
                row.classical_p = classical.present;
                row.control_p = control[i];
                row.quantum_err_pct = std::abs(row.quantum_p - row.control_p) * 100.0;
                row.classical_err_pct = std::abs(row.classical_p - row.control_p) * 100.0;
                row.phi = quantum.params.angles.phi;
                row.h_theta = quantum.params.theta;
                row.clamped = quantum.clamped;
                qerr.push_back(row.quantum_err_pct);
                cerr.push_back(row.classical_err_pct);
                s.rows.push_back(std::move(row));
            }
            s.mean_quantum_err = mean_of(qerr);
            s.mean_classical_err = mean_of(cerr);
        } catch (const std::exception& ex) {
            s.rows.clear();
            s.error = ex.what();
        }
        r.seeds.push_back(std::move(s));
    }
    summarize(r);
    return r;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    PreparedData data = prepare(cfg);
    return evaluate(data, learn_seed_nets(data, cfg), cfg, cfg.mode);
}

// ---------------------------------------------------------------------------
// Emission

ReportFormat parse_format(std::string_view text) {
    if (text == "json")
        return ReportFormat::json;
    if (text == "csv")
        return ReportFormat::csv;
    if (text == "markdown" || text == "md")
        return ReportFormat::markdown;
    throw Error(Errc::invalid_argument, "format must be json, csv or markdown: " + std::string{text});
}

namespace {

std::string num(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

// Shortest representation that reads back to the same double.
std::string exact(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

ordered_json finite_or_null(double x) {
    if (std::isfinite(x))
        return x;
    return nullptr;
}

double number_or_nan(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

std::string emit_report(const ExperimentReport& r, ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out{kCsvHeader};
        out += '\n';
        for (const auto& s : r.seeds)
            for (const auto& row : s.rows)
                out += csv_field(row.variable) + ',' + exact(row.quantum_p) + ',' + exact(row.classical_p) + ',' +
                       exact(row.control_p) + ',' + exact(row.quantum_err_pct) + ',' + exact(row.classical_err_pct) +
                       '\n';
        return out;
    }

    if (format == ReportFormat::markdown) {
        std::ostringstream md;
        md << "# Inference errors against the control network\n\n";
        md << "Mode: " << r.mode << ", missing fraction: " << num(r.missing, 2) << ", prune threshold: "
           << num(r.threshold, 2) << "\n";
        if (!r.evidence.empty()) {
            md << "Evidence:";
            for (const auto& e : r.evidence)
                md << ' ' << e;
            md << "\n";
        }
        for (const auto& s : r.seeds) {
            md << "\n## Seed " << s.seed << "\n\n";
            if (!s.ok()) {
                md << "Failed: " << s.error << "\n";
                continue;
            }
            md << "| Inferences | Quantum | Classical | Baseline | Quantum Error (%) | Classical Error (%) |\n";
            md << "|---|---:|---:|---:|---:|---:|\n";
            for (const auto& row : s.rows)
                md << "| Pr( " << row.variable << " = present ) | " << num(row.quantum_p, 4) << " | "
                   << num(row.classical_p, 4) << " | " << num(row.control_p, 4) << " | "
                   << num(row.quantum_err_pct, 2) << " | " << num(row.classical_err_pct, 2) << " |\n";
            md << "| **Average** | | | | **" << num(s.mean_quantum_err, 2) << "** | **"
               << num(s.mean_classical_err, 2) << "** |\n";
            md << "\nEM: " << s.em_iterations << " iterations, " << (s.em_converged ? "converged" : "not converged")
               << "\n";
        }
        md << "\n## Across seeds\n\n";
        md << "| | Quantum | Classical |\n|---|---:|---:|\n";
        md << "| Mean error (%) | " << num(r.mean_quantum_err, 2) << " | " << num(r.mean_classical_err, 2) << " |\n";
        md << "| Std. dev. (%) | " << num(r.std_quantum_err, 2) << " | " << num(r.std_classical_err, 2) << " |\n";
        md << "\nSeeds with quantum mean error <= classical: "
           << std::count_if(r.seeds.begin(), r.seeds.end(),
                            [](const auto& s) { return s.ok() && s.mean_quantum_err <= s.mean_classical_err; })
           << " of " << r.seeds.size() << "\n";
        return md.str();
    }

    ordered_json j;
    j["mode"] = r.mode;
    j["missing"] = r.missing;
    j["threshold"] = r.threshold;
    j["evidence"] = r.evidence;
    ordered_json seeds = ordered_json::array();
    for (const auto& s : r.seeds) {
        ordered_json js;
        js["seed"] = s.seed;
        if (!s.ok())
            js["error"] = s.error;
        ordered_json rows = ordered_json::array();
        for (const auto& row : s.rows) {
            ordered_json jr;
            jr["variable"] = row.variable;
            jr["quantum_p"] = row.quantum_p;
            jr["classical_p"] = row.classical_p;
            jr["control_p"] = row.control_p;
            jr["quantum_err_pct"] = row.quantum_err_pct;
            jr["classical_err_pct"] = row.classical_err_pct;
            jr["phi"] = finite_or_null(row.phi);
            jr["h_theta"] = row.h_theta;
            jr["clamped"] = row.clamped;
            rows.push_back(std::move(jr));
        }
        js["rows"] = std::move(rows);
        js["mean_quantum_err"] = s.mean_quantum_err;
        js["mean_classical_err"] = s.mean_classical_err;
        js["em"] = {{"iterations", s.em_iterations},
                    {"converged", s.em_converged},
                    {"log_likelihood", finite_or_null(s.em_log_likelihood)}};
        seeds.push_back(std::move(js));
    }
    j["seeds"] = std::move(seeds);
    j["mean_quantum_err"] = r.mean_quantum_err;
    j["mean_classical_err"] = r.mean_classical_err;
    j["std_quantum_err"] = r.std_quantum_err;
    j["std_classical_err"] = r.std_classical_err;
    return j.dump(2) + "\n";
}

ExperimentReport report_from_json(std::string_view text) {
    try {
        json j = json::parse(text);
        ExperimentReport r;
        r.mode = j.at("mode").get<std::string>();
        r.missing = j.at("missing").get<double>();
        r.threshold = j.at("threshold").get<double>();
        r.evidence = j.value("evidence", std::vector<std::string>{});
        for (const auto& js : j.at("seeds")) {
            SeedReport s;
            s.seed = js.at("seed").get<std::uint64_t>();
            s.error = js.value("error", std::string{});
            for (const auto& jr : js.at("rows")) {
                ReportRow row;
                row.variable = jr.at("variable").get<std::string>();
                row.quantum_p = jr.at("quantum_p").get<double>();
                row.classical_p = jr.at("classical_p").get<double>();
                row.control_p = jr.at("control_p").get<double>();
                row.quantum_err_pct = jr.at("quantum_err_pct").get<double>();
                row.classical_err_pct = jr.at("classical_err_pct").get<double>();
                row.phi = number_or_nan(jr.at("phi"));
                row.h_theta = jr.at("h_theta").get<double>();
                row.clamped = jr.at("clamped").get<bool>();
                s.rows.push_back(std::move(row));
            }
            s.mean_quantum_err = js.at("mean_quantum_err").get<double>();
            s.mean_classical_err = js.at("mean_classical_err").get<double>();
            const auto& em = js.at("em");
            s.em_iterations = em.at("iterations").get<int>();
            s.em_converged = em.at("converged").get<bool>();
            s.em_log_likelihood = number_or_nan(em.at("log_likelihood"));
            r.seeds.push_back(std::move(s));
        }
        r.mean_quantum_err = j.at("mean_quantum_err").get<double>();
        r.mean_classical_err = j.at("mean_classical_err").get<double>();
        r.std_quantum_err = j.at("std_quantum_err").get<double>();
        r.std_classical_err = j.at("std_classical_err").get<double>();
        return r;
    } catch (const json::exception& ex) {
        throw Error(Errc::invalid_argument, std::string{"report JSON: "} + ex.what());
    }
}

}  // namespace qlbn::harness
