#pragma once

#include "qlbn/bayesnet.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qlbn::quantum {

using bayesnet::BayesNet;
using bayesnet::Distribution;
using bayesnet::Evidence;
using bayesnet::Factor;
using bayesnet::JointOptions;
using bayesnet::MarginalVectors;
using bayesnet::VarId;
using procmine::DagStructure;

// Amplitude magnitudes |psi| laid out like the CPTs they came from. Phases are not stored.
struct AmplitudeNet {
    DagStructure dag;
    std::vector<Factor> amps;

    std::size_t size() const noexcept { return dag.size(); }
};

AmplitudeNet amplitudes_from_cpt(const BayesNet& net);

// Product of amplitude magnitudes per assignment, entries contradicting `e` zeroed.
Factor quantum_joint(const AmplitudeNet& anet, const Evidence& e, const JointOptions& opts = {});

// amplitude: pairs multiply sqrt(lambda_i) * sqrt(lambda_j). probability: pairs multiply the
// vector entries themselves.
enum class InterferenceMode { amplitude, probability };

std::string to_string(InterferenceMode mode);
InterferenceMode parse_mode(std::string_view text);  // throws invalid_argument

struct SimilarityAngles {
    double theta_a = 0.0;
    double theta_b = 0.0;
    double theta_c = 0.0;
    double phi = 0.0;
};

struct InterferenceParams {
    double theta = 0.0;      // h_theta
    double cos_theta = 0.0;
    InterferenceMode mode = InterferenceMode::amplitude;
    SimilarityAngles angles;
    bool degenerate = false;  // similarity undefined, interference switched off
    bool in_gap = false;      // 0 < phi < 0.15, mapped to theta = 0

    // theta = pi/2 with the cosine pinned to exactly 0.
    static InterferenceParams classical(InterferenceMode mode = InterferenceMode::amplitude);
    static InterferenceParams at(double theta, InterferenceMode mode = InterferenceMode::amplitude);
};

inline constexpr double kThetaStrongNegative = 1.5408;  // phi < -2
inline constexpr double kThetaNegative = 1.5178;        // -2 <= phi <= 0
inline constexpr double kPhiUpper = 0.15;

// Piecewise map from the similarity ratio to the effective phase difference. NaN falls through to
// the last arm and yields 0.
double heuristic_angle(double phi);

InterferenceParams similarity_heuristic(std::span<const double> pos, std::span<const double> neg,
                                        InterferenceMode mode = InterferenceMode::amplitude);

struct InterferenceSum {
    double value = 0.0;
    std::uint64_t pair_ops = 0;  // m(m-1)/2 = m(m+1)/2 - m
};

// 2 * cos_theta * sum over pairs i < j, in the basis given by params.mode.
InterferenceSum interference_term(std::span<const double> vec, const InterferenceParams& params);

struct QuantumOutcome {
    Distribution distribution;
    InterferenceParams params;
    bool clamped = false;   // a side went negative and was set to 0
    bool fallback = false;  // both sides clamped; the classical result is returned
    std::uint64_t pair_ops = 0;
};

// Classical mass plus interference, clamped and renormalized. `forced` bypasses the heuristic.
QuantumOutcome quantum_prob(const MarginalVectors& mv, InterferenceMode mode = InterferenceMode::amplitude,
                            const std::optional<InterferenceParams>& forced = std::nullopt);

struct InferenceResult {
    std::string query;
    std::vector<std::pair<std::string, bayesnet::Value>> evidence;
    Distribution classical;
    Distribution quantum;
    InterferenceParams params;
    bool clamped = false;
    bool fallback = false;
    std::uint64_t pair_ops = 0;
};

InferenceResult infer_quantum(const AmplitudeNet& anet, VarId query, const Evidence& e,
                              InterferenceMode mode = InterferenceMode::amplitude,
                              const std::optional<InterferenceParams>& forced = std::nullopt,
                              const JointOptions& opts = {});

std::string result_to_json(const InferenceResult& r);

}  // namespace qlbn::quantum
