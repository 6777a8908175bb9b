#include "flex/linalg.hpp"

#include <string>

#include "flex/errors.hpp"

namespace flex {

double spectral_radius(const Mat& a) {
    if (a.rows() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_symmetric(const Mat& a, double tol) {
    if (a.rows() != a.cols()) return false;
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

void check_psd(const Mat& a, const char* what, double tol) {
    if (!is_symmetric(a, tol))
        throw NonPsdCovariance(std::string(what) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    const Vec& ev = es.eigenvalues();
    double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -tol * scale)
        throw NonPsdCovariance(std::string(what) + " has a negative eigenvalue");
}

Mat psd_sqrt(const Mat& a, double clamp_tol) {
    if (!is_symmetric(a, 1e-9))
        throw NonPsdCovariance("matrix for square root is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    Vec ev = es.eigenvalues();
    double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -clamp_tol * scale)
            throw NonPsdCovariance("matrix for square root has a negative eigenvalue");
        ev[i] = std::max(ev[i], 0.0);
    }
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Mat discrete_lyapunov(const Mat& a, const Mat& q, double tol, int max_iter) {
    // Doubling iteration: P_{j+1} = P_j + A_j P_j A_j', A_{j+1} = A_j^2.
    Mat p = q;
    Mat ak = a;
    for (int it = 0; it < max_iter; ++it) {
        Mat step = ak * p * ak.transpose();
        p += step;
        double rel = step.cwiseAbs().maxCoeff() / std::max(1.0, p.cwiseAbs().maxCoeff());
        if (rel < tol) return p;
        ak = ak * ak;
    }
    throw NoConvergence("discrete Lyapunov iteration did not converge");
}

} // namespace flex
