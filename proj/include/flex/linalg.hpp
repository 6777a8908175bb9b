#pragma once

#include <Eigen/Dense>

namespace flex {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Largest eigenvalue magnitude of a (possibly non-symmetric) square matrix.
double spectral_radius(const Mat& a);

bool is_symmetric(const Mat& a, double tol = 1e-9);

/// Throws NonPsdCovariance if `a` is not symmetric PSD within `tol`
/// (relative to the largest eigenvalue magnitude).
void check_psd(const Mat& a, const char* what, double tol = 1e-9);

/// Symmetric square root of a PSD matrix via eigen factorization.
/// Eigenvalues in [-clamp_tol, 0) are clamped to zero; anything below
/// -clamp_tol (relative) throws NonPsdCovariance.
Mat psd_sqrt(const Mat& a, double clamp_tol = 1e-12);

/// Solves the discrete Lyapunov equation P = A P A' + Q for stable A.
Mat discrete_lyapunov(const Mat& a, const Mat& q, double tol = 1e-13, int max_iter = 10000);

} // namespace flex
