#include "qlbn/quantum.hpp"

#include "qlbn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

namespace qlbn::quantum {

AmplitudeNet amplitudes_from_cpt(const BayesNet& net) {
    AmplitudeNet anet{net.dag, net.cpts};
    for (VarId v = 0; v < anet.size(); ++v)
        for (double& x : anet.amps[v].vals) {
            if (!(x >= 0.0))
                throw Error(Errc::negative_probability, "CPT of '" + net.name_of(v) + "'");
            x = std::sqrt(x);
        }
    return anet;
}

Factor quantum_joint(const AmplitudeNet& anet, const Evidence& e, const JointOptions& opts) {
    auto factors = bayesnet::observe_evidence(anet.amps, e);
    return bayesnet::full_joint(factors, opts);
}

std::string to_string(InterferenceMode mode) {
    return mode == InterferenceMode::amplitude ? "amplitude" : "probability";
}

InterferenceMode parse_mode(std::string_view text) {
    if (text == "amplitude")
        return InterferenceMode::amplitude;
    if (text == "probability")
        return InterferenceMode::probability;
    throw Error(Errc::invalid_argument, "interference mode must be amplitude or probability: " + std::string{text});
}

InterferenceParams InterferenceParams::classical(InterferenceMode mode) {
    InterferenceParams p;
    p.theta = std::numbers::pi / 2;
    p.cos_theta = 0.0;
    p.mode = mode;
    return p;
}

InterferenceParams InterferenceParams::at(double theta, InterferenceMode mode) {
    InterferenceParams p;
    p.theta = theta;
    p.cos_theta = std::cos(theta);
    p.mode = mode;
    return p;
}

double heuristic_angle(double phi) {
    if (phi < -2.0)
        return kThetaStrongNegative;
    if (phi >= -2.0 && phi <= 0.0)
        return kThetaNegative;
    if (phi >= kPhiUpper)
        return std::numbers::pi;
    return 0.0;
}

namespace {

// Angle between u and v as 2 atan2(|u^ - v^|, |u^ + v^|), which stays accurate near 0 and pi
// where acos of the normalized dot product loses half its digits.
double vector_angle(const std::vector<long double>& u, const std::vector<long double>& v) {
    long double nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    long double d = 0, s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        long double x = u[i] / nu, y = v[i] / nv;
        d += (x - y) * (x - y);
        s += (x + y) * (x + y);
    }
    return static_cast<double>(2 * std::atan2(std::sqrt(d), std::sqrt(s)));
}

// Below this angle between pos and neg the triangle is treated as flat.
constexpr double kCollinearAngle = 1e-9;

}  // namespace

InterferenceParams similarity_heuristic(std::span<const double> pos, std::span<const double> neg,
                                        InterferenceMode mode) {
    if (pos.size() != neg.size() || pos.empty())
        throw Error(Errc::invalid_argument, "similarity needs two non-empty vectors of equal length");
    long double aa = 0, bb = 0, cc = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        long double p = pos[i], n = neg[i];
        aa += p * p;
        bb += n * n;
        cc += (p - n) * (p - n);
    }
    const double a = std::sqrt(static_cast<double>(aa));
    const double b = std::sqrt(static_cast<double>(bb));
    const double c = std::sqrt(static_cast<double>(cc));
    if (c < 1e-12 || a * b < 1e-24) {
        InterferenceParams p = InterferenceParams::classical(mode);
        p.degenerate = true;
        return p;
    }
    const std::size_t m = pos.size();
    std::vector<long double> p(m), n(m), p_minus_n(m), minus_p(m), minus_n(m), n_minus_p(m);
    for (std::size_t i = 0; i < m; ++i) {
        p[i] = pos[i];
        n[i] = neg[i];
        p_minus_n[i] = p[i] - n[i];
        n_minus_p[i] = -p_minus_n[i];
        minus_p[i] = -p[i];
        minus_n[i] = -n[i];
    }
    SimilarityAngles s;
    s.theta_c = vector_angle(p, n);
    if (s.theta_c < kCollinearAngle) {
        // Flat triangle: the limits of the angles as pos and neg become parallel. With |pos| < |neg|
        // the ratio diverges to -inf, otherwise it tends to 0.
        s.theta_c = 0.0;
        if (a < b) {
            s.theta_a = 0.0;
            s.theta_b = std::numbers::pi;
            s.phi = -INFINITY;
        } else {
            s.theta_a = std::numbers::pi;
            s.theta_b = 0.0;
            s.phi = 0.0;
        }
    } else {
        s.theta_a = vector_angle(p_minus_n, minus_n);  // at the tip of neg, opposite |pos|
        s.theta_b = vector_angle(n_minus_p, minus_p);  // at the tip of pos, opposite |neg|
        s.phi = s.theta_c / s.theta_a - s.theta_b / s.theta_a;
    }

    InterferenceParams out = InterferenceParams::at(heuristic_angle(s.phi), mode);
    out.angles = s;
    out.in_gap = s.phi > 0.0 && s.phi < kPhiUpper;
    return out;
}

namespace {

// Beyond this length the pair sum is taken from ((sum x)^2 - sum x^2) / 2.
constexpr std::size_t kExplicitPairLimit = 4096;

std::uint64_t pair_count(std::size_t m) { return m < 2 ? 0 : static_cast<std::uint64_t>(m) * (m - 1) / 2; }

}  // namespace

InterferenceSum interference_term(std::span<const double> vec, const InterferenceParams& params) {
    const std::size_t m = vec.size();
    InterferenceSum out;
    out.pair_ops = pair_count(m);

    std::vector<long double> x(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (!(vec[i] >= 0.0))
            throw Error(Errc::negative_probability, "interference input entry " + std::to_string(i));
        x[i] = params.mode == InterferenceMode::amplitude ? std::sqrt(static_cast<long double>(vec[i])) : vec[i];
    }

    long double pairs = 0;
    if (m <= kExplicitPairLimit) {
        std::uint64_t ops = 0;
        for (std::size_t i = 0; i < m; ++i) {
            long double row = 0;
            for (std::size_t j = i + 1; j < m; ++j, ++ops)
                row += x[j];
            pairs += x[i] * row;
        }
        out.pair_ops = ops;
    } else {
        long double s = 0, s2 = 0;
        for (long double v : x) {
            s += v;
            s2 += v * v;
        }
        pairs = std::max((s * s - s2) / 2, 0.0L);
    }
    out.value = static_cast<double>(2 * params.cos_theta * pairs);
    return out;
}

QuantumOutcome quantum_prob(const MarginalVectors& mv, InterferenceMode mode,
                            const std::optional<InterferenceParams>& forced) {
    if (mv.pos.size() != mv.neg.size())
        throw Error(Errc::invalid_argument, "marginal vectors differ in length");
    const Distribution classical = bayesnet::classical_prob(mv);
    QuantumOutcome out;
    out.params = forced ? *forced : similarity_heuristic(mv.pos, mv.neg, mode);
    out.params.mode = forced ? forced->mode : mode;

    if (out.params.cos_theta == 0.0) {
        out.distribution = classical;
        out.pair_ops = 2 * pair_count(mv.pos.size());
        return out;
    }

    const double sp = std::accumulate(mv.pos.begin(), mv.pos.end(), 0.0);
    const double sn = std::accumulate(mv.neg.begin(), mv.neg.end(), 0.0);
    const double alpha = 1.0 / (sp + sn);
    // Scaling every lambda by alpha scales the amplitude pair sum by alpha and the
    // probability pair sum by alpha squared.
    const double scale = out.params.mode == InterferenceMode::amplitude ? alpha : alpha * alpha;

    InterferenceSum ip = interference_term(mv.pos, out.params);
    InterferenceSum in = interference_term(mv.neg, out.params);
    out.pair_ops = ip.pair_ops + in.pair_ops;

    if (ip.value == 0.0 && in.value == 0.0) {
        out.distribution = classical;
        return out;
    }

    double qp = alpha * sp + scale * ip.value;
    double qn = alpha * sn + scale * in.value;
    if (qp < 0.0) {
        qp = 0.0;
        out.clamped = true;
    }
    if (qn < 0.0) {
        qn = 0.0;
        out.clamped = true;
    }
    if (!(qp + qn > 0.0)) {
        out.fallback = true;
        out.distribution = classical;
        return out;
    }
    const double gamma = 1.0 / (qp + qn);
    out.distribution = {gamma * qp, gamma * qn};
    return out;
}

InferenceResult infer_quantum(const AmplitudeNet& anet, VarId query, const Evidence& e, InterferenceMode mode,
                              const std::optional<InterferenceParams>& forced, const JointOptions& opts) {
    if (query >= anet.size())
        throw Error(Errc::unknown_variable, "query variable id " + std::to_string(query));
    if (e.contains(query))
        throw Error(Errc::query_is_evidence, anet.dag.nodes[query]);

    Factor joint = quantum_joint(anet, e, opts);
    for (double& v : joint.vals)
        v *= v;
    MarginalVectors mv = bayesnet::marginalize(joint, query, e);

    InferenceResult r;
    r.query = anet.dag.nodes[query];
    for (const auto& [var, value] : e)
        r.evidence.emplace_back(anet.dag.nodes[var], value);
    r.classical = bayesnet::classical_prob(mv);
    QuantumOutcome q = quantum_prob(mv, mode, forced);
    r.quantum = q.distribution;
    r.params = q.params;
    r.clamped = q.clamped;
    r.fallback = q.fallback;
    r.pair_ops = q.pair_ops;
    return r;
}

namespace {

nlohmann::ordered_json finite_or_null(double x) {
    if (std::isfinite(x))
        return x;
    return nullptr;
}

}  // namespace

std::string result_to_json(const InferenceResult& r) {
    using nlohmann::ordered_json;
    ordered_json ev = ordered_json::object();
    for (const auto& [name, value] : r.evidence)
        ev[name] = value == bayesnet::Value::present ? "present" : "absent";
    ordered_json j;
    j["query"] = r.query;
    j["evidence"] = ev;
    j["classical"] = {{"present", r.classical.present}, {"absent", r.classical.absent}};
    j["quantum"] = {{"present", r.quantum.present}, {"absent", r.quantum.absent}};
    j["phi"] = r.params.degenerate ? ordered_json(nullptr) : finite_or_null(r.params.angles.phi);
    j["h_theta"] = r.params.theta;
    j["mode"] = to_string(r.params.mode);
    j["clamped"] = r.clamped;
    j["pair_ops"] = r.pair_ops;
    j["degenerate"] = r.params.degenerate;
    j["phi_in_gap"] = r.params.in_gap;
    j["fallback"] = r.fallback;
    return j.dump(2);
}

}  // namespace qlbn::quantum
