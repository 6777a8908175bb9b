#pragma once

#include <ostream>
#include <utility>
#include <vector>

#include "flex/conic.hpp"
#include "flex/linalg.hpp"
#include "flex/model.hpp"
#include "flex/prediction.hpp"
#include "flex/uncertainty.hpp"

namespace flex {

struct ComfortSpec {
    Vec t_min, t_max;  // per room, degC
    double eps_c = 0.2;
    double eps_t = 0.05;
    void validate(int ny) const;
};

struct PowerLimits {
    Vec p_min, p_max;  // per heating input, kW (p_max >= p_min >= 0)
    void validate(int np) const;
};

struct EnvelopeProblemSpec {
    double lambda_slack = 1e3;  // comfort slack penalty, per degC per step
    /// Objective weight favoring early consumption.
    double omega(int k, int horizon) const {
        return std::exp(-static_cast<double>(k) / horizon);
    }
};

enum class Formulation { UI, UA, UafOpt, UafFixed };
const char* to_string(Formulation f);

/// Cumulative-energy envelope plus the power profiles and slacks that
/// generated it. Energies accumulate the delivery steps 1..N, e_up[k-1]
/// covering steps 1..k; profile rows cover 0..N+1 with row N+1 pinned at 0.
struct FlexibilityEnvelope {
    Formulation formulation = Formulation::UI;
    double dt = 1.0;
    int horizon = 0;
    Vec e_up, e_down;          // kWh, size N
    Mat p_up, p_down;          // (N+2) x np
    Mat slack_up, slack_down;  // (N+2) x ny, per-room gamma+ + gamma-
    double objective_up = 0.0;
    double objective_down = 0.0;
    // (step, input) pairs where a fixed policy's power margin exceeded half
    // the power band and was clamped to it.
    std::vector<std::pair<int, int>> power_infeasible;
};

struct EnvelopeInputs {
    const StateSpaceModel* model = nullptr;
    const PredictionOperator* op = nullptr;
    Vec x0;       // state estimate at step 0
    Mat weather;  // (N+2) x nd nominal forecast
    ComfortSpec comfort;
    PowerLimits limits;
    EnvelopeProblemSpec spec;
};

FlexibilityEnvelope envelope_ui(const EnvelopeInputs& in);

FlexibilityEnvelope envelope_ua(const EnvelopeInputs& in, const StackedNoiseBasis& basis);

struct UafOptResult {
    FlexibilityEnvelope envelope;
    std::vector<Mat> gains_up;    // M_1..M_N for the upper bound
    std::vector<Mat> gains_down;  // M_1..M_N for the lower bound
};

UafOptResult envelope_uaf_opt(const EnvelopeInputs& in, const StackedNoiseBasis& basis);

FlexibilityEnvelope envelope_uaf_fixed(const EnvelopeInputs& in, const StackedNoiseBasis& basis,
                                       const std::vector<Mat>& gains_up,
                                       const std::vector<Mat>& gains_down);

/// Time-integrated gap between the energy bounds (kWh * h).
double compute_fea(const FlexibilityEnvelope& env);

/// Largest step k (capped at N) such that the tightened comfort band stays
/// non-empty for every room at every step up to k; -1 when even step 0 fails.
/// Margins use the affine policy when `gains` is non-empty.
int compute_mfph(const StackedNoiseBasis& basis, const PredictionOperator& op,
                 const ComfortSpec& comfort, const std::vector<Mat>& gains);

void write_envelope_csv(std::ostream& os, const FlexibilityEnvelope& env);

} // namespace flex
