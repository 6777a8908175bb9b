#include "flex/prediction.hpp"

#include "flex/errors.hpp"

namespace flex {

PredictionOperator::PredictionOperator(const StateSpaceModel& model, int horizon)
    : model_(&model), n_(horizon) {
    if (horizon < 1) throw DimensionMismatch("prediction horizon must be >= 1");
    a_pow_.reserve(n_ + 2);
    a_pow_.push_back(Mat::Identity(model.nx(), model.nx()));
    for (int k = 1; k <= n_ + 1; ++k) a_pow_.push_back(a_pow_.back() * model.A);
    c_a_pow_.reserve(n_ + 1);
    for (int j = 0; j <= n_; ++j) {
        c_a_pow_.push_back(model.C * a_pow_[j]);
        c_a_b_p_.push_back(c_a_pow_[j] * model.B_p);
        c_a_b_d_.push_back(c_a_pow_[j] * model.B_d);
    }
}

Mat PredictionOperator::power_map(int k, int i) const {
    if (i > k) return Mat::Zero(model_->ny(), model_->np());
    if (i == k) return model_->D_p;
    return c_a_b_p_[k - 1 - i];
}

Mat PredictionOperator::weather_map(int k, int i) const {
    if (i > k) return Mat::Zero(model_->ny(), model_->nd());
    if (i == k) return model_->D_d;
    return c_a_b_d_[k - 1 - i];
}

Mat PredictionOperator::process_noise_map(int k, int i) const {
    if (i >= k) return Mat::Zero(model_->ny(), model_->nx());
    return c_a_pow_[k - 1 - i];
}

Mat predict_nominal(const PredictionOperator& op, const Vec& x0,
                    const Mat& weather, const Mat& powers) {
    const StateSpaceModel& m = op.model();
    const int steps = op.steps();
    if (weather.rows() != steps || weather.cols() != m.nd())
        throw LengthMismatch("weather trajectory must be (N+2) x nd");
    if (powers.rows() != steps || powers.cols() != m.np())
        throw LengthMismatch("power trajectory must be (N+2) x np");
    if (x0.size() != m.nx()) throw LengthMismatch("x0 size != nx");

    Mat y(steps, m.ny());
    for (int k = 0; k < steps; ++k) {
        Vec yk = m.C * (op.a_power(k) * x0);
        for (int i = 0; i <= k; ++i) {
            yk += op.power_map(k, i) * powers.row(i).transpose();
            yk += op.weather_map(k, i) * weather.row(i).transpose();
        }
        y.row(k) = yk.transpose();
    }
    return y;
}

Mat simulate_outputs(const StateSpaceModel& m, const Vec& x0,
                     const Mat& weather, const Mat& powers) {
    const int steps = static_cast<int>(weather.rows());
    if (powers.rows() != steps) throw LengthMismatch("weather/power length mismatch");
    Mat y(steps, m.ny());
    Vec x = x0;
    for (int k = 0; k < steps; ++k) {
        y.row(k) = (m.C * x + m.D_d * weather.row(k).transpose() +
                    m.D_p * powers.row(k).transpose())
                       .transpose();
        x = m.A * x + m.B_d * weather.row(k).transpose() +
            m.B_p * powers.row(k).transpose();
    }
    return y;
}

} // namespace flex
