#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flex/linalg.hpp"
#include "flex/model.hpp"
#include "flex/prediction.hpp"

namespace flex {

/// Inverse standard-normal CDF (absolute error below 1e-9 on (0,1)).
/// Throws DomainError outside (0,1).
double gaussian_quantile(double p);

/// AR(1) forecast-error model: err[k] = phi^k err[0] + sum phi^i innov[k-i],
/// with err[0] ~ N(0, Sigma_d0) and innovations ~ N(0, Sigma_d).
struct WeatherErrorModel {
    Mat phi;       // nd x nd, spectral radius < 1
    Mat Sigma_d;   // innovation covariance
    Mat Sigma_d0;  // initial-error covariance

    int nd() const { return static_cast<int>(phi.rows()); }
    void validate() const;
};

WeatherErrorModel default_weather_error_model();

void save_weather_error_json(const std::string& path, const WeatherErrorModel& wem);
WeatherErrorModel load_weather_error_json(const std::string& path);

/// Covariance of the k-step weather forecast error.
Mat weather_error_covariance(const WeatherErrorModel& wem, int k);

/// Covariance of the k-step thermal model error:
/// Sigma_v + sum_{i=0}^{k-1} (C A^i) Sigma_w (C A^i)'.
Mat model_error_covariance(const PredictionOperator& op, const NoiseSpec& noise, int k);

/// Linear maps from one stacked Gaussian noise vector
///   xi = [d_err0; innov_1..innov_N; w_0..w_N; v_0..v_{N+1}]
/// to every disturbance quantity over the horizon. cov(xi) is block diagonal;
/// sigma_half is its symmetric square root, so row norms of map*sigma_half
/// are standard deviations. Innovations enter at steps 1..N; the step N+1
/// weather error is the propagated error without a fresh innovation.
struct StackedNoiseBasis {
    int horizon = 0;  // N
    int dim = 0;      // length of xi
    int nd = 0, ny = 0, nx = 0;
    int off_innov = 0, off_w = 0, off_v = 0;  // block offsets (d_err0 at 0)

    Mat sigma_half;           // dim x dim, block diagonal
    std::vector<Mat> d_map;   // k=0..N+1: nd x dim, xi -> weather error at k
    std::vector<Mat> e_map;   // k=0..N+1: ny x dim, xi -> model error at k
    std::vector<Mat> r_map;   // k=0..N:   (nd+ny) x dim, xi -> [d_err; e] at k
    std::vector<Mat> y_map;   // k=0..N+1: ny x dim, xi -> output deviation, no feedback

    std::vector<Mat> y_map_half;  // y_map[k] * sigma_half
    std::vector<Mat> r_map_half;  // r_map[k] * sigma_half

    /// Output-deviation covariance at step k (no feedback).
    Mat output_covariance(int k) const {
        return y_map_half[k] * y_map_half[k].transpose();
    }
};

StackedNoiseBasis build_stacked_basis(const PredictionOperator& op, const NoiseSpec& noise,
                                      const WeatherErrorModel& wem);

/// Comfort-bound margin without feedback: per room,
/// sqrt(Var(y_err_k)_jj) * q(1 - eps_c).
Vec margin_no_feedback(const StackedNoiseBasis& basis, int k, double eps_c);

/// Power margin for feedback gain M_k (np x (nd+ny)) reading the disturbance
/// observed at step k-1; zero for k = 0.
Vec margin_power(const StackedNoiseBasis& basis, const Mat& m_k, int k, double eps_t);

/// Comfort margin under the affine policy `gains` (gains[i-1] is the gain
/// applied at step i, i = 1..N). Reduces to margin_no_feedback for zero gains.
Vec margin_output_with_feedback(const StackedNoiseBasis& basis, const PredictionOperator& op,
                                const std::vector<Mat>& gains, int k, double eps_c);

struct SafetyMargins {
    std::vector<Vec> comfort;  // k = 0..N+1, per room (degC)
    std::vector<Vec> power;    // k = 0..N, per input (kW); zero without feedback
};

/// Margins for all steps; with empty `gains` these are the no-feedback margins.
SafetyMargins compute_margins(const StackedNoiseBasis& basis, const PredictionOperator& op,
                              const std::vector<Mat>& gains, double eps_c, double eps_t);

/// Synthetic winter-day weather forecast: column 0 ambient temperature (degC),
/// column 1 solar irradiance (kW/m2). One row per step.
Mat synth_weather_forecast(std::uint64_t seed, int steps);

} // namespace flex
