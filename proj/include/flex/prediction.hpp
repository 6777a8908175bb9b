#pragma once

#include <vector>

#include "flex/linalg.hpp"
#include "flex/model.hpp"

namespace flex {

/// k-step output prediction maps for a validated model, covering prediction
/// indices k = 0..N+1. The response maps depend only on the lag k-i, so one
/// table of C*A^j products backs all (k, i) queries:
///   power_map(k,i)   = C A^{k-1-i} B_p (i<k), D_p (i=k), 0 (i>k)
///   weather_map(k,i) = C A^{k-1-i} B_d (i<k), D_d (i=k), 0 (i>k)
///   process_noise_map(k,i) = C A^{k-1-i} (i<k), 0 (i>=k)
class PredictionOperator {
public:
    PredictionOperator(const StateSpaceModel& model, int horizon);

    int horizon() const { return n_; }        // N
    int steps() const { return n_ + 2; }      // indices 0..N+1
    const StateSpaceModel& model() const { return *model_; }

    const Mat& a_power(int k) const { return a_pow_[k]; }      // A^k, k <= N+1
    const Mat& c_a_power(int j) const { return c_a_pow_[j]; }  // C A^j

    Mat power_map(int k, int i) const;
    Mat weather_map(int k, int i) const;
    Mat process_noise_map(int k, int i) const;

private:
    const StateSpaceModel* model_;
    int n_;
    std::vector<Mat> a_pow_;     // A^0..A^{N+1}
    std::vector<Mat> c_a_pow_;   // C A^0..C A^{N}
    std::vector<Mat> c_a_b_p_;   // C A^j B_p
    std::vector<Mat> c_a_b_d_;   // C A^j B_d
};

/// Expected output trajectory from Eq.-style response sums:
///   y[k] = C A^k x0 + sum_{i<=k} (power_map(k,i) p[i] + weather_map(k,i) d[i]).
/// `weather` and `powers` hold one row per step, indices 0..N+1.
Mat predict_nominal(const PredictionOperator& op, const Vec& x0,
                    const Mat& weather, const Mat& powers);

/// Noise-free step-by-step simulation of the state equations; used as the
/// independent cross-check of predict_nominal and by the closed-loop plant.
Mat simulate_outputs(const StateSpaceModel& model, const Vec& x0,
                     const Mat& weather, const Mat& powers);

} // namespace flex
