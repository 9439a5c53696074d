#include "qlbn/bayesnet.hpp"
#include "qlbn/error.hpp"
#include "qlbn/eventlog.hpp"
#include "qlbn/harness.hpp"
#include "qlbn/procmine.hpp"
#include "qlbn/quantum.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace qlbn;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n')
            std::cout << '\n';
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f)
        throw Error(Errc::io, "cannot write " + out);
    f << text;
    if (!text.empty() && text.back() != '\n')
        f << '\n';
}

// Options shared by every subcommand that runs the pipeline from a log.
struct PipelineArgs {
    std::string config;
    std::string log;
    std::string merges;
    std::string aliases;
    std::optional<double> threshold;
    std::optional<double> missing;
    std::vector<std::uint64_t> seeds;
    std::optional<std::string> mode;
    unsigned threads = 0;

    void add_to(CLI::App& cmd, bool experiment) {
        cmd.add_option("--config", config, "experiment config JSON");
        cmd.add_option("--log", log, "event log (.csv, .xes, optionally .gz)");
        cmd.add_option("--merges", merges, "merge rules JSON");
        cmd.add_option("--aliases", aliases, "activity alias JSON");
        cmd.add_option("--threshold", threshold, "prune threshold");
        if (experiment) {
            cmd.add_option("--missing", missing, "missing-cell fraction");
            cmd.add_option("--seed", seeds, "RNG seed (repeatable)");
            cmd.add_option("--mode", mode, "interference mode: amplitude|probability");
            cmd.add_option("--threads", threads, "worker threads for per-seed runs");
        }
    }

    harness::ExperimentConfig resolve() const {
        harness::ExperimentConfig cfg = config.empty() ? harness::ExperimentConfig{} : harness::load_config(config);
        if (!log.empty())
            cfg.log = log;
        if (!merges.empty())
            cfg.merges = merges;
        if (!aliases.empty())
            cfg.aliases = aliases;
        if (threshold)
            cfg.threshold = *threshold;
        if (missing)
            cfg.missing = *missing;
        if (!seeds.empty())
            cfg.seeds = seeds;
        if (mode)
            cfg.mode = quantum::parse_mode(*mode);
        if (threads)
            cfg.threads = threads;
        if (cfg.log.empty())
            throw Error(Errc::invalid_argument, "no event log given (use --log or a config with \"log\")");
        cfg.validate();
        return cfg;
    }
};

eventlog::EventLog load_log(const harness::ExperimentConfig& cfg) {
    auto log = eventlog::read_log(cfg.log);
    if (!cfg.aliases.empty())
        log = eventlog::rename_activities(
            log, nlohmann::json::parse(slurp(cfg.aliases.string())).get<std::map<std::string, std::string>>());
    return log;
}

int run(int argc, char** argv) {
    CLI::App app{"Quantum-like Bayesian networks over process event logs"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse a log and print activity counts");
    PipelineArgs ingest_args;
    ingest_args.add_to(*ingest, false);
    std::string ingest_out, ingest_csv;
    bool ingest_all = false;
    ingest->add_option("--out", ingest_out, "write counts JSON here instead of stdout");
    ingest->add_option("--csv", ingest_csv, "also write the parsed log as canonical CSV");
    ingest->add_flag("--all-lifecycles", ingest_all, "count W_ tasks in every lifecycle state");

    // mine
    auto* mine = app.add_subcommand("mine", "build, prune, merge and de-cycle the transition graph");
    PipelineArgs mine_args;
    mine_args.add_to(*mine, false);
    std::string mine_out, graph_out, removal_out;
    std::optional<double> suggest_tau;
    mine->add_option("--out", mine_out, "DAG JSON output");
    mine->add_option("--graph-out", graph_out, "pruned and merged transition graph JSON");
    mine->add_option("--removed-out", removal_out, "deleted cycle edges JSON");
    mine->add_option("--suggest", suggest_tau, "print merge suggestions at this tau and exit");

    // learn
    auto* learn = app.add_subcommand("learn", "learn CPTs for the mined structure");
    PipelineArgs learn_args;
    learn_args.add_to(*learn, true);
    std::string learn_out, learn_method = "mle";
    learn->add_option("--method", learn_method, "mle or em")->check(CLI::IsMember({"mle", "em"}));
    learn->add_option("--out", learn_out, "network JSON output");

    // infer
    auto* infer = app.add_subcommand("infer", "answer a query on a learned network");
    std::string net_path, query, infer_mode = "amplitude";
    std::vector<std::string> evidence;
    bool classical_only = false;
    infer->add_option("--net", net_path, "network JSON")->required();
    infer->add_option("--query", query, "query variable")->required();
    infer->add_option("--evidence", evidence, "VAR=present|absent (repeatable)");
    infer->add_option("--mode", infer_mode, "interference mode: amplitude|probability");
    infer->add_flag("--classical", classical_only, "force h_theta = pi/2");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "run the control vs missing-data comparison");
    PipelineArgs exp_args;
    exp_args.add_to(*experiment, true);
    std::string exp_format = "json", exp_out;
    std::vector<std::string> exp_evidence;
    experiment->add_option("--format", exp_format, "json|csv|markdown");
    experiment->add_option("--out", exp_out, "report output");
    experiment->add_option("--evidence", exp_evidence, "VAR=present|absent applied to every query");

    // report
    auto* report = app.add_subcommand("report", "re-emit a JSON report in another format");
    std::string report_in, report_format = "markdown", report_out;
    report->add_option("--input", report_in, "report JSON")->required();
    report->add_option("--format", report_format, "json|csv|markdown");
    report->add_option("--out", report_out, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (ingest->parsed()) {
        auto cfg = ingest_args.resolve();
        auto log = load_log(cfg);
        std::optional<eventlog::LifecycleFilter> filter;
        if (!ingest_all)
            filter = eventlog::LifecycleFilter(cfg.keep_lifecycles.begin(), cfg.keep_lifecycles.end());
        auto stats = eventlog::activity_stats(log, filter);
        nlohmann::ordered_json j;
        j["events"] = log.event_count();
        j["retained_events"] = stats.total;
        j["cases"] = log.case_count();
        j["activities"] = nlohmann::ordered_json::parse(eventlog::stats_to_json(stats));
        emit(j.dump(2), ingest_out);
        if (!ingest_csv.empty()) {
            std::ofstream f(ingest_csv, std::ios::binary);
            if (!f)
                throw Error(Errc::io, "cannot write " + ingest_csv);
            eventlog::write_csv(f, log);
        }
        return 0;
    }

    if (mine->parsed()) {
        auto cfg = mine_args.resolve();
        auto log = eventlog::filter_lifecycle(
            load_log(cfg), eventlog::LifecycleFilter(cfg.keep_lifecycles.begin(), cfg.keep_lifecycles.end()));
        auto graph = procmine::prune_edges(procmine::build_transition_graph(log), cfg.threshold);
        if (suggest_tau) {
            emit(procmine::rules_to_json(procmine::suggest_merges(graph, *suggest_tau)), mine_out);
            return 0;
        }
        std::vector<procmine::MergeRule> rules;
        if (!cfg.merges.empty())
            rules = procmine::rules_from_json(slurp(cfg.merges.string()));
        graph = procmine::apply_merges(graph, rules);
        auto removal = procmine::remove_cycles(graph);
        if (!graph_out.empty())
            emit(procmine::graph_to_json(graph), graph_out);
        nlohmann::ordered_json removed = nlohmann::ordered_json::array();
        for (const auto& r : removal.removed)
            removed.push_back({{"src", r.src}, {"dst", r.dst}, {"p", r.p}});
        if (!removal_out.empty())
            emit(removed.dump(2), removal_out);
        for (const auto& r : removal.removed)
            std::cerr << "removed cycle edge " << r.src << " -> " << r.dst << " (p = " << r.p << ")\n";
        emit(procmine::dag_to_json(removal.dag), mine_out);
        return 0;
    }

    if (learn->parsed()) {
        auto cfg = learn_args.resolve();
        auto data = harness::prepare(cfg);
        if (learn_method == "mle") {
            emit(bayesnet::net_to_json(data.control), learn_out);
            return 0;
        }
        cfg.seeds.resize(1);
        auto nets = harness::learn_seed_nets(data, cfg);
        if (!nets[0].em)
            throw Error(Errc::invalid_argument, nets[0].error);
        const auto& em = *nets[0].em;
        std::cerr << "EM: " << em.iterations << " iterations, " << (em.converged ? "converged" : "not converged")
                  << ", log-likelihood " << em.log_likelihood << "\n";
        emit(bayesnet::net_to_json(em.net), learn_out);
        return 0;
    }

    if (infer->parsed()) {
        auto net = bayesnet::net_from_json(slurp(net_path));
        auto e = bayesnet::parse_evidence(net, evidence);
        auto anet = quantum::amplitudes_from_cpt(net);
        auto mode = quantum::parse_mode(infer_mode);
        std::optional<quantum::InterferenceParams> forced;
        if (classical_only)
            forced = quantum::InterferenceParams::classical(mode);
        emit(quantum::result_to_json(quantum::infer_quantum(anet, net.id_of(query), e, mode, forced)), "");
        return 0;
    }

    if (experiment->parsed()) {
        auto cfg = exp_args.resolve();
        if (!exp_evidence.empty())
            cfg.evidence = exp_evidence;
        auto format = harness::parse_format(exp_format);
        auto r = harness::run_experiment(cfg);
        emit(harness::emit_report(r, format), exp_out);
        return r.successful_seeds() == r.seeds.size() ? 0 : 2;
    }

    if (report->parsed()) {
        auto r = harness::report_from_json(slurp(report_in));
        emit(harness::emit_report(r, harness::parse_format(report_format)), report_out);
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const qlbn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return qlbn::is_numerical(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
