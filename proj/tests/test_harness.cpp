#include "oracles.hpp"

#include "qlbn/error.hpp"
#include "qlbn/harness.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

using namespace qlbn;
using namespace qlbn::harness;
using eventlog::Cell;
using eventlog::EventLog;
using eventlog::EventRecord;
using eventlog::Lifecycle;

namespace {

// S starts every case; B -> A closes a loop and S -> D is rare enough to be pruned.
const std::vector<std::pair<std::vector<std::string>, int>> kVariants{
    {{"S", "A", "B", "E"}, 30},
    {{"S", "A", "C", "E"}, 12},
    {{"S", "B", "E"}, 5},
    {{"S", "A", "B", "A", "C", "E"}, 2},
    {{"S", "D", "E"}, 1},
};

EventLog toy_log() {
    std::vector<EventRecord> records;
    int c = 0;
    for (const auto& [seq, n] : kVariants)
        for (int k = 0; k < n; ++k, ++c) {
            long long t = 0;
            for (const auto& a : seq)
                records.push_back({"case" + std::to_string(c), a, Lifecycle::complete,
                                   eventlog::Timestamp{std::chrono::milliseconds{t++}}});
            // Scheduled worker events are dropped by the lifecycle filter.
            if (k % 3 == 0)
                records.push_back({"case" + std::to_string(c), "W_Review", Lifecycle::schedule,
                                   eventlog::Timestamp{std::chrono::milliseconds{t++}}});
        }
    return EventLog::from_records(records);
}

ExperimentConfig toy_config() {
    ExperimentConfig cfg;
    cfg.seeds = {1, 2, 3};
    cfg.missing = 0.3;
    return cfg;
}

// CPTs by counting case presence directly.
bayesnet::BayesNet oracle_control(const procmine::DagStructure& dag) {
    std::vector<std::vector<int>> rows;
    for (const auto& [seq, n] : kVariants) {
        std::set<std::string> seen(seq.begin(), seq.end());
        std::vector<int> row;
        for (const auto& v : dag.nodes)
            row.push_back(seen.count(v) ? 0 : 1);
        for (int k = 0; k < n; ++k)
            rows.push_back(row);
    }
    std::vector<std::vector<double>> tables;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        const auto& pa = dag.parents[v];
        std::vector<double> t(std::size_t{2} << pa.size(), 0.0);
        for (std::size_t cfg = 0; cfg < (std::size_t{1} << pa.size()); ++cfg) {
            double present = 0, total = 0;
            for (const auto& r : rows) {
                bool match = true;
                for (std::size_t k = 0; k < pa.size(); ++k)
                    match = match && r[pa[k]] == static_cast<int>((cfg >> k) & 1);
                if (!match)
                    continue;
                total += 1;
                present += r[v] == 0;
            }
            t[2 * cfg] = total > 0 ? present / total : 0.5;
            t[2 * cfg + 1] = total > 0 ? 1 - present / total : 0.5;
        }
        tables.push_back(t);
    }
    return bayesnet::BayesNet::from_tables(dag, tables);
}

// Quantum estimate for a query by explicit enumeration and the law of cosines, written
// independently of the library's heuristic.
double oracle_quantum(const bayesnet::BayesNet& net, std::size_t q) {
    std::vector<double> pos, neg;
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << net.size()); ++code) {
        auto values = oracle::decode(code, net.size());
        (values[q] == 0 ? pos : neg).push_back(oracle::joint_probability(net, values));
    }
    double a2 = 0, b2 = 0, c2 = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        a2 += pos[i] * pos[i];
        b2 += neg[i] * neg[i];
        c2 += (pos[i] - neg[i]) * (pos[i] - neg[i]);
    }
    double a = std::sqrt(a2), b = std::sqrt(b2), c = std::sqrt(c2);
    if (c < 1e-12)
        return *oracle::posterior_present(net, q, {});
    auto ac = [](double x) { return std::acos(std::max(-1.0, std::min(1.0, x))); };
    double cos_c = (a2 + b2 - c2) / (2 * a * b);
    double phi;
    if (cos_c > 1 - 1e-12)  // parallel: limit of the ratio
        phi = a < b ? -INFINITY : 0.0;
    else
        phi = (ac(cos_c) - ac((a2 - b2 + c2) / (2 * c * a))) / ac((b2 - a2 + c2) / (2 * c * b));
    double h = phi < -2 ? 1.5408 : phi <= 0 ? 1.5178 : phi >= 0.15 ? std::numbers::pi : 0.0;
    auto side = [&](const std::vector<double>& v) {
        double s = 0, pairs = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            s += v[i];
            for (std::size_t j = i + 1; j < v.size(); ++j)
                pairs += std::sqrt(v[i]) * std::sqrt(v[j]);
        }
        return std::max(0.0, s + 2 * std::cos(h) * pairs);
    };
    double p = side(pos), n = side(neg);
    if (p == 0 && n == 0)  // both sides wiped out: classical fallback
        return *oracle::posterior_present(net, q, {});
    return p / (p + n);
}

}  // namespace

TEST_CASE("inject_missing") {
    eventlog::CaseMatrix m(std::vector<std::string>(10, "v"), std::vector<std::string>(10, "r"),
                           std::vector<Cell>(100, Cell::present));
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        auto h = inject_missing(m, 0.7, seed);
        CHECK(h.missing_count() == 70);
        CHECK(h == inject_missing(m, 0.7, seed));
    }
    CHECK(inject_missing(m, 0.7, 1) != inject_missing(m, 0.7, 2));
    CHECK(inject_missing(m, 0.0, 5) == m);
    CHECK(inject_missing(m, 0.999, 5).missing_count() == 99);
    eventlog::CaseMatrix odd(std::vector<std::string>(3, "v"), std::vector<std::string>(7, "r"),
                             std::vector<Cell>(21, Cell::absent));
    CHECK(inject_missing(odd, 0.7, 3).missing_count() == 14);  // floor(14.7)
    CHECK_THROWS_AS(inject_missing(m, 1.0, 1), Error);
    CHECK_THROWS_AS(inject_missing(m, -0.1, 1), Error);
}

TEST_CASE("toy pipeline structure") {
    auto data = prepare(toy_log(), {}, toy_config());
    const auto& dag = data.structure.dag;
    CHECK(dag.nodes == std::vector<std::string>{"A", "B", "C", "D", "E", "S"});
    using P = std::vector<std::size_t>;
    CHECK(dag.parents == std::vector<P>{{5}, {0, 5}, {0}, {}, {1, 2, 3}, {}});
    REQUIRE(data.structure.removed.size() == 1);
    CHECK(data.structure.removed[0].src == "B");
    CHECK(data.structure.removed[0].dst == "A");
    CHECK(data.activity_count == 7);  // W_Review survives in the universe only
    CHECK(data.matrix.rows() == 50);
}

TEST_CASE("toy pipeline matches the oracle") {
    auto cfg = toy_config();
    auto data = prepare(toy_log(), {}, cfg);
    auto control = oracle_control(data.structure.dag);
    for (std::size_t v = 0; v < control.size(); ++v)
        for (std::size_t i = 0; i < control.cpts[v].size(); ++i)
            CHECK(data.control.cpts[v].vals[i] == doctest::Approx(control.cpts[v].vals[i]).epsilon(1e-12));

    auto nets = learn_seed_nets(data, cfg);
    auto report = evaluate(data, nets, cfg, InterferenceMode::amplitude);
    REQUIRE(report.seeds.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        REQUIRE(report.seeds[s].ok());
        const auto& net = nets[s].em->net;
        const auto& rows = report.seeds[s].rows;
        REQUIRE(rows.size() == 6);
        double qsum = 0, csum = 0;
        for (std::size_t q = 0; q < rows.size(); ++q) {
            CHECK(rows[q].variable == data.structure.dag.nodes[q]);
            CHECK(rows[q].control_p == doctest::Approx(*oracle::posterior_present(control, q, {})).epsilon(1e-12));
            CHECK(rows[q].classical_p == doctest::Approx(*oracle::posterior_present(net, q, {})).epsilon(1e-12));
            CHECK(rows[q].quantum_p == doctest::Approx(oracle_quantum(net, q)).epsilon(1e-9));
            CHECK(rows[q].quantum_err_pct == doctest::Approx(std::abs(rows[q].quantum_p - rows[q].control_p) * 100));
            CHECK(rows[q].classical_err_pct == doctest::Approx(std::abs(rows[q].classical_p - rows[q].control_p) * 100));
            qsum += rows[q].quantum_err_pct;
            csum += rows[q].classical_err_pct;
        }
        CHECK(report.seeds[s].mean_quantum_err == doctest::Approx(qsum / 6));
        CHECK(report.seeds[s].mean_classical_err == doctest::Approx(csum / 6));
    }
    double m = 0;
    for (const auto& s : report.seeds)
        m += s.mean_quantum_err;
    CHECK(report.mean_quantum_err == doctest::Approx(m / 3));
    double var = 0;
    for (const auto& s : report.seeds)
        var += (s.mean_quantum_err - m / 3) * (s.mean_quantum_err - m / 3);
    CHECK(report.std_quantum_err == doctest::Approx(std::sqrt(var / 2)));
}

TEST_CASE("no missing data and no smoothing reproduces the control classically") {
    auto cfg = toy_config();
    cfg.missing = 0.0;
    cfg.em_pseudocount = 0.0;
    cfg.em_tol = 1e-12;
    auto data = prepare(toy_log(), {}, cfg);
    auto report = evaluate(data, learn_seed_nets(data, cfg), cfg, InterferenceMode::amplitude);
    for (const auto& s : report.seeds)
        for (const auto& row : s.rows)
            CHECK(row.classical_err_pct <= 1e-7);
}

TEST_CASE("ties give equal errors") {
    auto cfg = toy_config();
    auto data = prepare(toy_log(), {}, cfg);
    auto report = evaluate(data, learn_seed_nets(data, cfg), cfg, InterferenceMode::amplitude);
    for (const auto& s : report.seeds)
        for (const auto& row : s.rows)
            if (row.quantum_p == row.classical_p)
                CHECK(row.quantum_err_pct == row.classical_err_pct);
}

TEST_CASE("reports are deterministic, also with threads") {
    auto cfg = toy_config();
    auto data = prepare(toy_log(), {}, cfg);
    auto a = emit_report(evaluate(data, learn_seed_nets(data, cfg), cfg, cfg.mode), ReportFormat::json);
    auto b = emit_report(evaluate(data, learn_seed_nets(data, cfg), cfg, cfg.mode), ReportFormat::json);
    cfg.threads = 3;
    auto c = emit_report(evaluate(data, learn_seed_nets(data, cfg), cfg, cfg.mode), ReportFormat::json);
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("evidence sweeps and explicit queries") {
    auto cfg = toy_config();
    cfg.evidence = {"C=present"};
    cfg.queries = {"A", "E"};
    auto data = prepare(toy_log(), {}, cfg);
    auto report = evaluate(data, learn_seed_nets(data, cfg), cfg, cfg.mode);
    REQUIRE(report.seeds[0].rows.size() == 2);
    // Every case with C also has A. E falls short of 1 only through the unseen (C, D) parent row.
    auto control = oracle_control(data.structure.dag);
    bayesnet::Evidence e{{2, bayesnet::Value::present}};
    CHECK(report.seeds[0].rows[0].control_p == doctest::Approx(1.0));
    CHECK(report.seeds[0].rows[1].control_p == doctest::Approx(*oracle::posterior_present(control, 4, e)).epsilon(1e-12));
    CHECK(report.seeds[0].rows[1].control_p == doctest::Approx(1.0 - 0.5 / 50));

    cfg.queries = {"C"};
    CHECK_THROWS_AS(evaluate(data, learn_seed_nets(data, cfg), cfg, cfg.mode), Error);
}

TEST_CASE("failed seeds are recorded, not fatal") {
    auto cfg = toy_config();
    auto data = prepare(toy_log(), {}, cfg);
    auto nets = learn_seed_nets(data, cfg);
    nets[1].em.reset();
    nets[1].error = "boom";
    auto report = evaluate(data, nets, cfg, cfg.mode);
    CHECK(report.seeds[1].error == "boom");
    CHECK(report.successful_seeds() == 2);
    CHECK_FALSE(report.quantum_wins_every_seed());
    CHECK(report.mean_quantum_err ==
          doctest::Approx((report.seeds[0].mean_quantum_err + report.seeds[2].mean_quantum_err) / 2));
}

TEST_CASE("report formats") {
    ExperimentReport r;
    r.mode = "amplitude";
    r.missing = 0.7;
    r.threshold = 0.05;
    SeedReport s;
    s.seed = 1;
    s.rows.push_back({"A_PREACCEPTED", 0.1526, 0.3298, 0.0673, 8.53, 26.25, -0.5, 1.5178, false});
    s.mean_quantum_err = 8.53;
    s.mean_classical_err = 26.25;
    r.seeds.push_back(s);

    auto csv = emit_report(r, ReportFormat::csv);
    CHECK(csv == "variable,quantum_p,classical_p,control_p,quantum_err_pct,classical_err_pct\n"
                 "A_PREACCEPTED,0.1526,0.3298,0.0673,8.53,26.25\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

    auto back = report_from_json(emit_report(r, ReportFormat::json));
    CHECK(back.seeds.size() == 1);
    CHECK(back.seeds[0].rows == r.seeds[0].rows);
    CHECK(emit_report(back, ReportFormat::json) == emit_report(r, ReportFormat::json));

    auto md = emit_report(r, ReportFormat::markdown);
    CHECK(md.find("| Pr( A_PREACCEPTED = present ) | 0.1526 | 0.3298 | 0.0673 | 8.53 | 26.25 |") !=
          std::string::npos);

    CHECK(parse_format("md") == ReportFormat::markdown);
    CHECK_THROWS_AS(parse_format("xml"), Error);
}

TEST_CASE("config files") {
    auto dir = std::filesystem::temp_directory_path() / "qlbn_cfg_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "cfg.json");
        f << R"({"log": "log.csv", "merges": "/abs/m.json", "missing": 0.5, "seeds": [9],
                 "mode": "probability", "em": {"pseudocount": 0.0}, "lifecycles": ["COMPLETE", "START"]})";
    }
    auto cfg = load_config(dir / "cfg.json");
    CHECK(cfg.log == dir / "log.csv");
    CHECK(cfg.merges == "/abs/m.json");
    CHECK(cfg.missing == 0.5);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{9});
    CHECK(cfg.mode == InterferenceMode::probability);
    CHECK(cfg.em_pseudocount == 0.0);
    CHECK(cfg.threshold == 0.05);
    CHECK(cfg.keep_lifecycles.size() == 2);
    auto again = config_from_json(config_to_json(cfg));
    CHECK(again.log == cfg.log);
    CHECK(again.seeds == cfg.seeds);
    CHECK_THROWS_AS(config_from_json(R"({"missing": 1.0})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"seeds": []})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"mode": "wave"})"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("run_experiment from files") {
    auto dir = std::filesystem::temp_directory_path() / "qlbn_run_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "log.csv");
        eventlog::write_csv(f, toy_log());
    }
    {
        std::ofstream f(dir / "merges.json");
        f << R"([{"members": ["B", "C"], "merged_name": "BC"}])";
    }
    {
        std::ofstream f(dir / "cfg.json");
        f << R"({"log": "log.csv", "merges": "merges.json", "seeds": [4, 5], "missing": 0.2})";
    }
    auto r = run_experiment(load_config(dir / "cfg.json"));
    CHECK(r.successful_seeds() == 2);
    std::set<std::string> vars;
    for (const auto& row : r.seeds[0].rows)
        vars.insert(row.variable);
    CHECK(vars == std::set<std::string>{"A", "BC", "D", "E", "S"});
    std::filesystem::remove_all(dir);
}
