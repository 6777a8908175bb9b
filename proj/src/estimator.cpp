#include "flex/estimator.hpp"

#include "flex/errors.hpp"

namespace flex {

RiccatiResult steady_state_gain(const StateSpaceModel& m, const NoiseSpec& noise,
                                double tol, int max_iter) {
    Mat p = noise.Sigma_w;
    double residual = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Mat s = m.C * p * m.C.transpose() + noise.Sigma_v;
        Mat k_t = s.ldlt().solve(m.C * p * m.A.transpose());  // (A P C' S^-1)'
        Mat next = m.A * p * m.A.transpose() - k_t.transpose() * (m.C * p * m.A.transpose()) +
                   noise.Sigma_w;
        next = 0.5 * (next + next.transpose());
        residual = (next - p).norm() / std::max(1.0, p.norm());
        p = next;
        if (residual <= tol) {
            Mat sfin = m.C * p * m.C.transpose() + noise.Sigma_v;
            Mat gain = sfin.ldlt().solve(m.C * p.transpose()).transpose();  // P C' S^-1
            return {gain, p, it, residual};
        }
    }
    throw NoConvergence("Riccati recursion did not reach tolerance; residual " +
                        std::to_string(residual));
}

StateEstimate update_state_estimate(const StateEstimate& est, const StateSpaceModel& m,
                                    const Vec& d_prev, const Vec& p_prev,
                                    const Vec& d_now, const Vec& p_now,
                                    const Vec& y_meas) {
    Vec x_pred = m.A * est.x_hat + m.B_d * d_prev + m.B_p * p_prev;
    Vec y_pred = m.C * x_pred + m.D_d * d_now + m.D_p * p_now;
    StateEstimate out;
    out.gain = est.gain;
    out.x_hat = x_pred + est.gain * (y_meas - y_pred);
    return out;
}

} // namespace flex
