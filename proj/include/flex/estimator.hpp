#pragma once

#include "flex/linalg.hpp"
#include "flex/model.hpp"

namespace flex {

struct RiccatiResult {
    Mat gain;        // filter gain K = P C' (C P C' + Sigma_v)^-1
    Mat covariance;  // steady-state a-priori error covariance P
    int iterations = 0;
    double residual = 0.0;  // relative Frobenius residual of the fixed point
};

/// Fixed point of the discrete Riccati recursion for (A, C, Sigma_w, Sigma_v).
/// Throws NoConvergence after `max_iter` iterations.
RiccatiResult steady_state_gain(const StateSpaceModel& model, const NoiseSpec& noise,
                                double tol = 1e-9, int max_iter = 10000);

struct StateEstimate {
    Vec x_hat;
    Mat gain;
};

/// One predict-correct step. The measurement equation includes the direct
/// feedthrough D u, so the innovation is formed with the inputs applied at the
/// measurement instant (d_now, p_now) while the state propagates with the
/// previous inputs:
///   x+ = A x + B u_prev + K (y - C (A x + B u_prev) - D u_now)
StateEstimate update_state_estimate(const StateEstimate& est, const StateSpaceModel& model,
                                    const Vec& d_prev, const Vec& p_prev,
                                    const Vec& d_now, const Vec& p_now,
                                    const Vec& y_meas);

} // namespace flex
