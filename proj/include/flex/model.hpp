#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flex/linalg.hpp"

namespace flex {

struct ModelLabels {
    std::vector<std::string> outputs;
    std::vector<std::string> heat_inputs;
    std::vector<std::string> weather_inputs;
};

/// Discrete-time linear thermal model
///   x[t+1] = A x[t] + B_d d[t] + B_p p[t] + w[t]
///   y[t]   = C x[t] + D_d d[t] + D_p p[t] + v[t]
/// with d the weather inputs and p the heating power inputs (kW).
struct StateSpaceModel {
    Mat A;    // nx x nx
    Mat B_d;  // nx x nd
    Mat B_p;  // nx x np
    Mat C;    // ny x nx
    Mat D_d;  // ny x nd
    Mat D_p;  // ny x np
    double dt = 1.0;  // timestep length, hours
    ModelLabels labels;

    int nx() const { return static_cast<int>(A.rows()); }
    int ny() const { return static_cast<int>(C.rows()); }
    int np() const { return static_cast<int>(B_p.cols()); }
    int nd() const { return static_cast<int>(B_d.cols()); }
};

struct NoiseSpec {
    Mat Sigma_w;  // nx x nx process noise covariance
    Mat Sigma_v;  // ny x ny measurement noise covariance (degC^2)
};

/// Checks all structural invariants; returns the model reference on success.
/// Throws UnstableModel, DimensionMismatch or NonPsdCovariance.
const StateSpaceModel& validate_model(const StateSpaceModel& model, const NoiseSpec& noise);

struct SyntheticBuilding {
    StateSpaceModel model;
    NoiseSpec noise;
};

/// Deterministic synthetic building: one state per room plus a thermal-mass
/// state, diagonally dominant dynamics with nonnegative couplings, and noise
/// covariances scaled so the 1-step output error std lands near 0.05-0.15 degC
/// and the long-horizon std near 0.3-0.7 degC. `noise_scale` multiplies both
/// noise stds (used to construct high-uncertainty instances).
SyntheticBuilding generate_synthetic_building(std::uint64_t seed, int ny,
                                              double coupling = 0.3,
                                              double noise_scale = 1.0);

/// Model exchange document (JSON): dense row-major matrices plus dt and labels.
void save_model_json(const std::string& path, const StateSpaceModel& model,
                     const NoiseSpec& noise);
SyntheticBuilding load_model_json(const std::string& path);

} // namespace flex
