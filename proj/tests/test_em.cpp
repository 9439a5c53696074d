#include "oracles.hpp"

#include "qlbn/bayesnet.hpp"
#include "qlbn/error.hpp"

#include <doctest.h>

using namespace qlbn;
using namespace qlbn::bayesnet;
using eventlog::CaseMatrix;
using eventlog::Cell;

namespace {

double max_cpt_diff(const BayesNet& a, const BayesNet& b) {
    double d = 0;
    for (std::size_t v = 0; v < a.size(); ++v)
        for (std::size_t i = 0; i < a.cpts[v].size(); ++i)
            d = std::max(d, std::abs(a.cpts[v].vals[i] - b.cpts[v].vals[i]));
    return d;
}

}  // namespace

TEST_CASE("initial net is a perturbed uniform and depends only on the seed") {
    DagStructure dag{{"A", "B"}, {{}, {0}}};
    auto a = em_initial_net(dag, 3), b = em_initial_net(dag, 3), c = em_initial_net(dag, 4);
    CHECK(a.cpts == b.cpts);
    CHECK(a.cpts != c.cpts);
    for (const auto& f : a.cpts)
        for (std::size_t i = 0; i < f.size(); i += 2) {
            CHECK(std::abs(f.vals[i] - 0.5) <= 0.0101);
            CHECK(f.vals[i] + f.vals[i + 1] == doctest::Approx(1.0).epsilon(1e-15));
        }
}

TEST_CASE("complete data: EM without smoothing is MLE") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto truth = oracle::random_net(rng, 2 + rng.below(5));
        auto m = oracle::to_matrix(truth.dag, oracle::sample_rows(truth, rng, 200, 0.0));
        auto em = learn_em(m, truth.dag, {200, 1e-12, 7, 0.0});
        CHECK(max_cpt_diff(em.net, learn_mle(m, truth.dag)) <= 1e-9);
        CHECK(em.converged);
    }
}

TEST_CASE("root node: missing rows carry no information") {
    // Three present, two absent, plus k missing rows: the estimate stays 3/5.
    for (int k : {0, 2, 7}) {
        std::vector<std::vector<int>> rows{{0}, {0}, {0}, {1}, {1}};
        for (int i = 0; i < k; ++i)
            rows.push_back({-1});
        DagStructure dag{{"A"}, {{}}};
        auto em = learn_em(oracle::to_matrix(dag, rows), dag, {2000, 0.0, 1, 0.0});  // linear rate k / (5 + k)
        CHECK(em.net.cpts[0].vals[0] == doctest::Approx(0.6).epsilon(1e-9));
    }
    // Only present observations: converges to certainty without smoothing.
    DagStructure dag{{"A"}, {{}}};
    auto em = learn_em(oracle::to_matrix(dag, {{0}, {0}, {0}, {-1}, {-1}}), dag, {200, 1e-12, 1, 0.0});
    CHECK(em.net.cpts[0].vals[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("three-node chain at 30% missing agrees with the enumeration oracle") {
    DagStructure dag{{"A", "B", "C"}, {{}, {0}, {1}}};
    auto truth = BayesNet::from_tables(dag, {{0.3, 0.7}, {0.8, 0.2, 0.25, 0.75}, {0.6, 0.4, 0.1, 0.9}});
    Rng rng(7);
    auto rows = oracle::sample_rows(truth, rng, 400, 0.3);
    auto m = oracle::to_matrix(dag, rows);

    for (double pc : {0.0, 1.0}) {
        const int iters = 25;
        auto em = learn_em(m, dag, {iters, 0.0, 7, pc});  // tol 0: run every iteration
        CHECK(em.iterations == iters);
        CHECK_FALSE(em.converged);
        auto ref = em_initial_net(dag, 7);
        for (int i = 0; i < iters; ++i)
            ref = oracle::em_step(ref, rows, pc);
        CHECK(max_cpt_diff(em.net, ref) <= 1e-6);
        CHECK(em.log_likelihood == doctest::Approx(oracle::observed_log_likelihood(ref, rows)).epsilon(1e-12));
    }
}

TEST_CASE("random nets: oracle agreement and monotone objective") {
    Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        auto truth = oracle::random_net(rng, 2 + rng.below(4));
        auto rows = oracle::sample_rows(truth, rng, 60, 0.2 + 0.5 * rng.uniform01());
        auto m = oracle::to_matrix(truth.dag, rows);
        double pc = trial % 2 ? 1.0 : 0.0;
        bool any_observed = false;
        for (const auto& r : rows)
            for (int x : r)
                any_observed = any_observed || x >= 0;
        if (!any_observed)
            continue;
        auto em = learn_em(m, truth.dag, {10, 0.0, 11, pc});
        auto ref = em_initial_net(truth.dag, 11);
        for (int i = 0; i < 10; ++i)
            ref = oracle::em_step(ref, rows, pc);
        CHECK(max_cpt_diff(em.net, ref) <= 1e-9);
        for (std::size_t i = 1; i < em.objective_trace.size(); ++i)
            CHECK(em.objective_trace[i] >= em.objective_trace[i - 1] - 1e-9);
        if (pc == 0.0)
            CHECK(em.log_likelihood_trace == em.objective_trace);
    }
}

TEST_CASE("em errors and flags") {
    DagStructure dag{{"A", "B"}, {{}, {0}}};
    CaseMatrix all_missing({"A", "B"}, {"1", "2"}, std::vector<Cell>(4, Cell::missing));
    try {
        learn_em(all_missing, dag);
        FAIL("expected AllCellsMissing");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::all_cells_missing);
    }
    CaseMatrix some({"A", "B"}, {"1", "2"}, {Cell::present, Cell::missing, Cell::absent, Cell::present});
    CHECK_THROWS_AS(learn_em(some, dag, {0, 1e-6, 0, 1.0}), Error);
    auto capped = learn_em(some, dag, {1, 0.0, 0, 1.0});
    CHECK(capped.iterations == 1);
    CHECK_FALSE(capped.converged);
    CHECK(capped.log_likelihood_trace.size() == 2);
    DagStructure unknown{{"A", "Z"}, {{}, {}}};
    CHECK_THROWS_AS(learn_em(some, unknown), Error);
}
