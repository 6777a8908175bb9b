#include "flex/uncertainty.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "flex/errors.hpp"
#include "flex/rng.hpp"

namespace flex {

namespace {

// Wichura's AS 241 rational approximations (PPND16 regions).
double ppnd16(double p) {
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        double num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                           6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                         1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                       1.3314166789178437745e+2) * r + 3.3871328727963666080e0);
        double den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                           3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                         5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                       4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                           2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                         3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                       4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                           1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                         6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                       2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                           1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                         2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                       5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                           1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                         1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                       5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return q < 0.0 ? -val : val;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

} // namespace

double gaussian_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile argument must be in (0,1)");
    double x = ppnd16(p);
    // Two Newton polish steps on the CDF residual.
    for (int i = 0; i < 2; ++i) {
        double pdf = normal_pdf(x);
        if (pdf < 1e-300) break;
        x -= (normal_cdf(x) - p) / pdf;
    }
    return x;
}

void WeatherErrorModel::validate() const {
    if (phi.rows() != phi.cols()) throw DimensionMismatch("phi must be square");
    if (Sigma_d.rows() != phi.rows() || Sigma_d0.rows() != phi.rows())
        throw DimensionMismatch("weather covariance shape mismatch");
    if (!(spectral_radius(phi) < 1.0))
        throw UnstableModel("weather AR coefficient has spectral radius >= 1");
    check_psd(Sigma_d, "Sigma_d");
    check_psd(Sigma_d0, "Sigma_d0");
}

WeatherErrorModel default_weather_error_model() {
    WeatherErrorModel wem;
    wem.phi = Eigen::Vector2d(0.92, 0.85).asDiagonal();
    wem.Sigma_d = Eigen::Vector2d(0.35 * 0.35, 0.04 * 0.04).asDiagonal();
    wem.Sigma_d0 = Eigen::Vector2d(0.25 * 0.25, 0.03 * 0.03).asDiagonal();
    return wem;
}

Mat weather_error_covariance(const WeatherErrorModel& wem, int k) {
    const int nd = wem.nd();
    Mat phik = Mat::Identity(nd, nd);
    Mat cov = Mat::Zero(nd, nd);
    for (int i = 0; i < k; ++i) {
        cov += phik * wem.Sigma_d * phik.transpose();
        phik = wem.phi * phik;
    }
    cov += phik * wem.Sigma_d0 * phik.transpose();
    return cov;
}

Mat model_error_covariance(const PredictionOperator& op, const NoiseSpec& noise, int k) {
    Mat cov = noise.Sigma_v;
    for (int i = 0; i < k; ++i) {
        const Mat& cai = op.c_a_power(i);
        cov += cai * noise.Sigma_w * cai.transpose();
    }
    return cov;
}

StackedNoiseBasis build_stacked_basis(const PredictionOperator& op, const NoiseSpec& noise,
                                      const WeatherErrorModel& wem) {
    const StateSpaceModel& m = op.model();
    if (wem.nd() != m.nd()) throw DimensionMismatch("weather error model channel count");
    wem.validate();

    StackedNoiseBasis b;
    b.horizon = op.horizon();
    b.nd = m.nd();
    b.ny = m.ny();
    b.nx = m.nx();
    const int n = b.horizon;
    b.off_innov = b.nd;
    b.off_w = b.nd * (n + 1);
    b.off_v = b.off_w + b.nx * (n + 1);
    b.dim = b.off_v + b.ny * (n + 2);

    // Block-diagonal square root of cov(xi).
    b.sigma_half = Mat::Zero(b.dim, b.dim);
    Mat sd0 = psd_sqrt(wem.Sigma_d0);
    Mat sd = psd_sqrt(wem.Sigma_d);
    Mat sw = psd_sqrt(noise.Sigma_w);
    Mat sv = psd_sqrt(noise.Sigma_v);
    b.sigma_half.block(0, 0, b.nd, b.nd) = sd0;
    for (int j = 1; j <= n; ++j)
        b.sigma_half.block(b.off_innov + (j - 1) * b.nd, b.off_innov + (j - 1) * b.nd,
                           b.nd, b.nd) = sd;
    for (int i = 0; i <= n; ++i)
        b.sigma_half.block(b.off_w + i * b.nx, b.off_w + i * b.nx, b.nx, b.nx) = sw;
    for (int k = 0; k <= n + 1; ++k)
        b.sigma_half.block(b.off_v + k * b.ny, b.off_v + k * b.ny, b.ny, b.ny) = sv;

    std::vector<Mat> phi_pow(n + 2);
    phi_pow[0] = Mat::Identity(b.nd, b.nd);
    for (int k = 1; k <= n + 1; ++k) phi_pow[k] = wem.phi * phi_pow[k - 1];

    b.d_map.resize(n + 2);
    b.e_map.resize(n + 2);
    b.y_map.resize(n + 2);
    b.r_map.resize(n + 1);
    for (int k = 0; k <= n + 1; ++k) {
        Mat dm = Mat::Zero(b.nd, b.dim);
        dm.block(0, 0, b.nd, b.nd) = phi_pow[k];
        for (int j = 1; j <= std::min(k, n); ++j)
            dm.block(0, b.off_innov + (j - 1) * b.nd, b.nd, b.nd) = phi_pow[k - j];
        b.d_map[k] = std::move(dm);

        Mat em = Mat::Zero(b.ny, b.dim);
        em.block(0, b.off_v + k * b.ny, b.ny, b.ny) = Mat::Identity(b.ny, b.ny);
        for (int i = 0; i < k; ++i)
            em.block(0, b.off_w + i * b.nx, b.ny, b.nx) = op.c_a_power(k - 1 - i);
        b.e_map[k] = std::move(em);

        Mat ym = b.e_map[k];
        for (int i = 0; i <= k; ++i) ym += op.weather_map(k, i) * b.d_map[i];
        b.y_map[k] = std::move(ym);

        if (k <= n) {
            Mat rm(b.nd + b.ny, b.dim);
            rm.topRows(b.nd) = b.d_map[k];
            rm.bottomRows(b.ny) = b.e_map[k];
            b.r_map[k] = std::move(rm);
        }
    }

    b.y_map_half.resize(n + 2);
    b.r_map_half.resize(n + 1);
    for (int k = 0; k <= n + 1; ++k) b.y_map_half[k] = b.y_map[k] * b.sigma_half;
    for (int k = 0; k <= n; ++k) b.r_map_half[k] = b.r_map[k] * b.sigma_half;
    return b;
}

namespace {

double margin_scale(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("risk level must be in (0,1)");
    return std::max(gaussian_quantile(1.0 - eps), 0.0);
}

} // namespace

Vec margin_no_feedback(const StackedNoiseBasis& basis, int k, double eps_c) {
    return basis.y_map_half[k].rowwise().norm() * margin_scale(eps_c);
}

Vec margin_power(const StackedNoiseBasis& basis, const Mat& m_k, int k, double eps_t) {
    double q = margin_scale(eps_t);
    if (k == 0) return Vec::Zero(m_k.rows());
    if (m_k.cols() != basis.nd + basis.ny)
        throw DimensionMismatch("feedback gain column count != nd + ny");
    return (m_k * basis.r_map_half[k - 1]).rowwise().norm() * q;
}

Vec margin_output_with_feedback(const StackedNoiseBasis& basis, const PredictionOperator& op,
                                const std::vector<Mat>& gains, int k, double eps_c) {
    Mat g = basis.y_map_half[k];
    const int last = std::min(k, basis.horizon);
    for (int i = 1; i <= last; ++i) {
        if (static_cast<int>(gains.size()) < i) break;
        g += op.power_map(k, i) * (gains[i - 1] * basis.r_map_half[i - 1]);
    }
    return g.rowwise().norm() * margin_scale(eps_c);
}

SafetyMargins compute_margins(const StackedNoiseBasis& basis, const PredictionOperator& op,
                              const std::vector<Mat>& gains, double eps_c, double eps_t) {
    SafetyMargins sm;
    const int n = basis.horizon;
    const int np = op.model().np();
    sm.comfort.resize(n + 2);
    sm.power.assign(n + 1, Vec::Zero(np));
    for (int k = 0; k <= n + 1; ++k) {
        sm.comfort[k] = gains.empty() ? margin_no_feedback(basis, k, eps_c)
                                      : margin_output_with_feedback(basis, op, gains, k, eps_c);
    }
    if (!gains.empty()) {
        for (int k = 1; k <= n; ++k) sm.power[k] = margin_power(basis, gains[k - 1], k, eps_t);
    }
    return sm;
}

Mat synth_weather_forecast(std::uint64_t seed, int steps) {
    Rng rng(mix_seed(seed, 0x77ea73e5UL));
    Mat w(steps, 2);
    double t_mean = rng.uniform(-2.0, 6.0);
    double amp = rng.uniform(2.0, 5.0);
    double s_peak = rng.uniform(0.1, 0.6);
    double phase = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < steps; ++k) {
        double h = static_cast<double>(k % 24);
        w(k, 0) = t_mean - amp * std::cos(2.0 * 3.14159265358979323846 * (h - 14.0 - phase) / 24.0);
        double s = std::sin(3.14159265358979323846 * (h - 7.0) / 10.0);
        w(k, 1) = (h >= 7.0 && h <= 17.0) ? s_peak * std::max(0.0, s) : 0.0;
    }
    return w;
}

namespace {

using nlohmann::json;

json mat_out(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_in(const json& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw SchemaError(std::string("matrix field '") + what + "' missing or empty");
    Mat m(j.size(), j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i)
        for (std::size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
    return m;
}

} // namespace

void save_weather_error_json(const std::string& path, const WeatherErrorModel& wem) {
    json doc;
    doc["phi"] = mat_out(wem.phi);
    doc["Sigma_d"] = mat_out(wem.Sigma_d);
    doc["Sigma_d0"] = mat_out(wem.Sigma_d0);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write weather error file: " + path);
    out << doc.dump(1) << "\n";
}

WeatherErrorModel load_weather_error_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read weather error file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError(std::string("invalid weather error JSON: ") + e.what());
    }
    WeatherErrorModel wem;
    wem.phi = mat_in(doc.at("phi"), "phi");
    wem.Sigma_d = mat_in(doc.at("Sigma_d"), "Sigma_d");
    wem.Sigma_d0 = mat_in(doc.at("Sigma_d0"), "Sigma_d0");
    wem.validate();
    return wem;
}

} // namespace flex
