#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flex/envelope.hpp"
#include "flex/errors.hpp"
#include "flex/model.hpp"
#include "flex/rng.hpp"
#include "flex/uncertainty.hpp"

using namespace flex;

namespace {

struct Instance {
    SyntheticBuilding b;
    WeatherErrorModel wem;
    PredictionOperator op;
    StackedNoiseBasis basis;
    EnvelopeInputs in;
    Mat weather;

    Instance(std::uint64_t seed, int n, double band = 2.0, double eps_c = 0.2,
             double noise_scale = 1.0)
        : b(generate_synthetic_building(seed, 3, 0.3, noise_scale)),
          wem(default_weather_error_model()),
          op(b.model, n),
          basis(build_stacked_basis(op, b.noise, wem)) {
        weather = synth_weather_forecast(seed, n + 2);
        in.model = &b.model;
        in.op = &op;
        in.x0 = Vec::Constant(b.model.nx(), 21.0);
        in.weather = weather;
        in.comfort.t_min = Vec::Constant(3, 21.0 - band / 2);
        in.comfort.t_max = Vec::Constant(3, 21.0 + band / 2);
        in.comfort.eps_c = eps_c;
        in.comfort.eps_t = 0.05;
        in.limits.p_min = Vec::Zero(3);
        in.limits.p_max = Vec::Constant(3, 5.0 / 3.0);
        in.spec.lambda_slack = 1e3;
    }
};

// Scalar two-timestep toy (N = 1) with closed-form margins; weather error is
// zero so the affine gain only acts on the model-error channel.
struct Toy {
    double a = 0.9, bp = 1.2, bd = 0.1;
    double x0 = 21.0, d0 = 15.0, d1 = 16.0;
    double tmin = 20.0, tmax = 22.3;
    double pmax = 2.0;
    double sv = 0.04, sw = 0.02;  // variances
    double eps_c = 0.2, eps_t = 0.05;
    double lambda = 1e3;
    double w0 = 1.0, w1 = std::exp(-1.0);

    double ybar0() const { return x0; }
    double ybar1(double p0) const { return a * x0 + bp * p0 + bd * d0; }
    double ybar2(double p0, double p1) const {
        return a * a * x0 + a * bp * p0 + bp * p1 + bd * (a * d0 + d1);
    }
    // Margins; m is the model-error feedback gain entry (zero without feedback).
    double s0(double qc) const { return std::sqrt(sv) * qc; }
    double s1(double qc) const { return std::sqrt(sv + sw) * qc; }
    double s2(double qc, double m) const {
        return std::sqrt(sv + sw * (1 + a * a) + bp * bp * m * m * sv) * qc;
    }
    double sp1(double qt, double m) const { return std::abs(m) * std::sqrt(sv) * qt; }

    double violation(double y, double lo, double hi) const {
        return std::max(0.0, y - hi) + std::max(0.0, lo - y);
    }

    // Objective of a candidate (p0, p1) under margins for gain m.
    double objective(double p0, double p1, double m, bool with_margins) const {
        double qc = with_margins ? gaussian_quantile(1 - eps_c) : 0.0;
        double v = violation(ybar0(), tmin + s0(qc) * (with_margins ? 1 : 0),
                             tmax - s0(qc) * (with_margins ? 1 : 0)) +
                   violation(ybar1(p0), tmin + s1(qc) * (with_margins ? 1 : 0),
                             tmax - s1(qc) * (with_margins ? 1 : 0)) +
                   violation(ybar2(p0, p1), tmin + s2(qc, m) * (with_margins ? 1 : 0),
                             tmax - s2(qc, m) * (with_margins ? 1 : 0));
        return w0 * p0 + w1 * p1 - lambda * v;
    }

    StateSpaceModel model() const {
        StateSpaceModel m;
        m.A = Mat::Constant(1, 1, a);
        m.B_d = Mat::Constant(1, 1, bd);
        m.B_p = Mat::Constant(1, 1, bp);
        m.C = Mat::Constant(1, 1, 1.0);
        m.D_d = Mat::Zero(1, 1);
        m.D_p = Mat::Zero(1, 1);
        return m;
    }
    NoiseSpec noise() const {
        NoiseSpec n;
        n.Sigma_w = Mat::Constant(1, 1, sw);
        n.Sigma_v = Mat::Constant(1, 1, sv);
        return n;
    }
    WeatherErrorModel weather_err() const {
        WeatherErrorModel w;
        w.phi = Mat::Constant(1, 1, 0.9);
        w.Sigma_d = Mat::Zero(1, 1);
        w.Sigma_d0 = Mat::Zero(1, 1);
        return w;
    }
    EnvelopeInputs inputs(const StateSpaceModel& m, const PredictionOperator& op) const {
        EnvelopeInputs in;
        in.model = &m;
        in.op = &op;
        in.x0 = Vec::Constant(1, x0);
        in.weather = Mat(3, 1);
        in.weather << d0, d1, d1;
        in.comfort.t_min = Vec::Constant(1, tmin);
        in.comfort.t_max = Vec::Constant(1, tmax);
        in.comfort.eps_c = eps_c;
        in.comfort.eps_t = eps_t;
        in.limits.p_min = Vec::Zero(1);
        in.limits.p_max = Vec::Constant(1, pmax);
        in.spec.lambda_slack = lambda;
        return in;
    }
};

} // namespace

TEST_CASE("toy UI envelope matches the grid-search oracle") {
    Toy t;
    auto m = t.model();
    PredictionOperator op(m, 1);
    auto in = t.inputs(m, op);

    double step = 0.01 * t.pmax;
    double best = -1e100;
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j)
            best = std::max(best, t.objective(i * step, j * step, 0.0, false));

    auto env = envelope_ui(in);
    CHECK(env.objective_up >= best - 1e-7);
    CHECK(env.objective_up <= best + 2.5 * step);
    // Terminal power is pinned to zero.
    CHECK(env.p_up(2, 0) == 0.0);
    CHECK(env.p_down(2, 0) == 0.0);
}

TEST_CASE("toy UA envelope matches the grid-search oracle") {
    Toy t;
    auto m = t.model();
    PredictionOperator op(m, 1);
    auto basis = build_stacked_basis(op, t.noise(), t.weather_err());
    auto in = t.inputs(m, op);

    // Cross-check the closed-form margins first.
    double qc = gaussian_quantile(1 - t.eps_c);
    CHECK(margin_no_feedback(basis, 0, t.eps_c)[0] == doctest::Approx(t.s0(qc)).epsilon(1e-10));
    CHECK(margin_no_feedback(basis, 1, t.eps_c)[0] == doctest::Approx(t.s1(qc)).epsilon(1e-10));
    CHECK(margin_no_feedback(basis, 2, t.eps_c)[0] ==
          doctest::Approx(t.s2(qc, 0.0)).epsilon(1e-10));

    double step = 0.01 * t.pmax;
    double best = -1e100;
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j)
            best = std::max(best, t.objective(i * step, j * step, 0.0, true));

    auto env = envelope_ua(in, basis);
    CHECK(env.objective_up >= best - 1e-7);
    CHECK(env.objective_up <= best + 2.5 * step);
}

TEST_CASE("toy optimal-feedback envelope matches the (p, M) grid oracle") {
    Toy t;
    auto m = t.model();
    PredictionOperator op(m, 1);
    auto basis = build_stacked_basis(op, t.noise(), t.weather_err());
    auto in = t.inputs(m, op);

    double qt = gaussian_quantile(1 - t.eps_t);
    double step = 0.01 * t.pmax;
    double best = -1e100;
    for (int mi = -200; mi <= 200; ++mi) {
        double mg = mi * 0.01;
        double sp = t.sp1(qt, mg);
        if (sp > 0.5 * t.pmax) continue;  // power band infeasible for this gain
        for (int i = 0; i <= 100; ++i) {
            double p0 = i * step;
            for (int j = 0; j <= 100; ++j) {
                double p1 = j * step;
                if (p1 < sp || p1 > t.pmax - sp) continue;
                best = std::max(best, t.objective(p0, p1, mg, true));
            }
        }
    }

    auto res = envelope_uaf_opt(in, basis);
    CHECK(res.envelope.objective_up >= best - 1e-7);
    CHECK(res.envelope.objective_up <= best + 3.0 * step);
    REQUIRE(res.gains_up.size() == 1);
    CHECK(res.gains_up[0].rows() == 1);
    CHECK(res.gains_up[0].cols() == 2);
}

TEST_CASE("toy fixed-feedback envelope equals the oracle at a pinned gain") {
    Toy t;
    auto m = t.model();
    PredictionOperator op(m, 1);
    auto basis = build_stacked_basis(op, t.noise(), t.weather_err());
    auto in = t.inputs(m, op);

    double mg = 0.5;
    std::vector<Mat> gains(1, Mat::Zero(1, 2));
    gains[0](0, 1) = mg;  // model-error channel

    double qt = gaussian_quantile(1 - t.eps_t);
    double sp = t.sp1(qt, mg);
    double step = 0.01 * t.pmax;
    double best = -1e100;
    for (int i = 0; i <= 100; ++i) {
        double p0 = i * step;
        for (int j = 0; j <= 100; ++j) {
            double p1 = j * step;
            if (p1 < sp || p1 > t.pmax - sp) continue;
            best = std::max(best, t.objective(p0, p1, mg, true));
        }
    }
    auto env = envelope_uaf_fixed(in, basis, gains, gains);
    CHECK(env.objective_up >= best - 1e-7);
    CHECK(env.objective_up <= best + 2.5 * step);
}

TEST_CASE("degenerate power band forces a zero envelope") {
    Instance inst(3, 6);
    inst.in.limits.p_max.setZero();
    auto env = envelope_ui(inst.in);
    CHECK(env.e_up.cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(env.e_down.cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("huge comfort band saturates the power limits") {
    Instance inst(4, 6);
    inst.in.comfort.t_min = Vec::Constant(3, -1e4);
    inst.in.comfort.t_max = Vec::Constant(3, 1e4);
    auto env = envelope_ui(inst.in);
    for (int k = 0; k <= 6; ++k) {
        for (int a = 0; a < 3; ++a) {
            CHECK(env.p_up(k, a) == doctest::Approx(5.0 / 3.0).epsilon(1e-5));
            CHECK(std::abs(env.p_down(k, a)) <= 1e-6);
        }
    }
    CHECK(env.p_up.row(7).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("formulation nesting and reduction identities") {
    for (std::uint64_t seed : {11u, 12u}) {
        Instance inst(seed, 8);
        auto ui = envelope_ui(inst.in);
        auto ua = envelope_ua(inst.in, inst.basis);
        auto opt = envelope_uaf_opt(inst.in, inst.basis);

        CHECK(ua.objective_up <= ui.objective_up + 1e-7);
        CHECK(opt.envelope.objective_up >= ua.objective_up - 1e-7);
        CHECK(opt.envelope.objective_up <= ui.objective_up + 1e-6);
        // Lower bounds are minimizations; inequalities reverse.
        CHECK(ua.objective_down >= ui.objective_down - 1e-7);
        CHECK(opt.envelope.objective_down <= ua.objective_down + 1e-7);

        // Fixed policy at zero equals the plain uncertainty-aware envelope.
        std::vector<Mat> zeros(8, Mat::Zero(3, 5));
        auto fixed0 = envelope_uaf_fixed(inst.in, inst.basis, zeros, zeros);
        CHECK(fixed0.objective_up == doctest::Approx(ua.objective_up).epsilon(1e-8));
        CHECK(fixed0.objective_down == doctest::Approx(ua.objective_down).epsilon(1e-8));
        CHECK(fixed0.power_infeasible.empty());

        // Fixed policy at the optimal gains reproduces the optimal objective.
        // Interior-point gain extraction is accurate to roughly the square
        // root of the gap tolerance, so the match is looser than the LP ones.
        auto fixed_opt =
            envelope_uaf_fixed(inst.in, inst.basis, opt.gains_up, opt.gains_down);
        CHECK(fixed_opt.objective_up == doctest::Approx(opt.envelope.objective_up).epsilon(5e-5));

        // Structural invariants.
        for (int k = 0; k < 8; ++k) {
            CHECK(ua.e_up[k] >= ua.e_down[k] - 1e-7);
            if (k > 0) {
                CHECK(ua.e_up[k] >= ua.e_up[k - 1] - 1e-9);
                CHECK(ua.e_down[k] >= ua.e_down[k - 1] - 1e-9);
            }
        }
        CHECK(compute_fea(ua) <= compute_fea(ui) + 1e-6);
        CHECK(ua.slack_up.maxCoeff() <= 1e-6);  // feasible instance, big penalty
    }
}

TEST_CASE("zero noise or eps = 0.5 collapses UA onto UI") {
    Instance inst(5, 6);
    auto ui = envelope_ui(inst.in);

    NoiseSpec zero;
    zero.Sigma_w = Mat::Zero(4, 4);
    zero.Sigma_v = Mat::Zero(3, 3);
    WeatherErrorModel wz;
    wz.phi = inst.wem.phi;
    wz.Sigma_d = Mat::Zero(2, 2);
    wz.Sigma_d0 = Mat::Zero(2, 2);
    auto basis0 = build_stacked_basis(inst.op, zero, wz);
    auto ua0 = envelope_ua(inst.in, basis0);
    CHECK(ua0.objective_up ==
          doctest::Approx(ui.objective_up).epsilon(1e-8));

    EnvelopeInputs half = inst.in;
    half.comfort.eps_c = 0.5;
    half.comfort.eps_t = 0.5;
    auto ua_half = envelope_ua(half, inst.basis);
    auto ui_half = envelope_ui(half);
    CHECK(ua_half.objective_up == doctest::Approx(ui_half.objective_up).epsilon(1e-8));
}

TEST_CASE("margins beyond the half band force slack from that step on") {
    // Scale noise up until UA margins cross half the band inside the horizon.
    Instance inst(6, 10, 1.0, 0.1, 3.0);
    int kstar = -1;
    for (int k = 0; k <= 10; ++k) {
        Vec s = margin_no_feedback(inst.basis, k, 0.1);
        if (2.0 * s.maxCoeff() >= 1.0) {
            kstar = k;
            break;
        }
    }
    REQUIRE(kstar >= 0);
    auto ua = envelope_ua(inst.in, inst.basis);
    for (int k = kstar; k <= 10; ++k) {
        Vec s = margin_no_feedback(inst.basis, k, 0.1);
        bool some_room_infeasible = 2.0 * s.maxCoeff() >= 1.0;
        if (some_room_infeasible) CHECK(ua.slack_up.row(k).sum() > 1e-6);
    }
}

TEST_CASE("oversized fixed gains are detected as power-infeasible bands") {
    Instance inst(7, 6);
    std::vector<Mat> big(6, Mat::Constant(3, 5, 50.0));
    auto env = envelope_uaf_fixed(inst.in, inst.basis, big, big);
    CHECK(!env.power_infeasible.empty());
}

TEST_CASE("compute_fea arithmetic") {
    FlexibilityEnvelope env;
    env.dt = 1.0;
    env.horizon = 24;
    env.e_up = Vec::LinSpaced(24, 3.0, 3.0 + 23.0);
    env.e_down = env.e_up;
    CHECK(compute_fea(env) == doctest::Approx(0.0));
    env.e_down = env.e_up - Vec::Constant(24, 2.0);
    CHECK(compute_fea(env) == doctest::Approx(48.0));
}

TEST_CASE("MFPH: zero noise gives N, crafted crossing gives the prior step") {
    Instance inst(8, 24);
    NoiseSpec zero;
    zero.Sigma_w = Mat::Zero(4, 4);
    zero.Sigma_v = Mat::Zero(3, 3);
    WeatherErrorModel wz;
    wz.phi = inst.wem.phi;
    wz.Sigma_d = Mat::Zero(2, 2);
    wz.Sigma_d0 = Mat::Zero(2, 2);
    auto basis0 = build_stacked_basis(inst.op, zero, wz);
    CHECK(compute_mfph(basis0, inst.op, inst.in.comfort, {}) == 24);

    // Pick a band width between 2*s(15) and 2*s(16): the first infeasible
    // step is then 16 and the provision horizon 15.
    Vec s15 = margin_no_feedback(inst.basis, 15, inst.in.comfort.eps_c);
    Vec s16 = margin_no_feedback(inst.basis, 16, inst.in.comfort.eps_c);
    double smax15 = s15.maxCoeff(), smax16 = s16.maxCoeff();
    REQUIRE(smax16 > smax15);
    double width = smax15 + smax16;
    ComfortSpec c = inst.in.comfort;
    c.t_min = Vec::Constant(3, 21.0 - width / 2);
    c.t_max = Vec::Constant(3, 21.0 + width / 2);
    CHECK(compute_mfph(inst.basis, inst.op, c, {}) == 15);
}

TEST_CASE("MFPH with the optimal policy is at least the plain one") {
    Instance inst(9, 8, 1.2, 0.1, 2.0);
    auto opt = envelope_uaf_opt(inst.in, inst.basis);
    int plain = compute_mfph(inst.basis, inst.op, inst.in.comfort, {});
    int with_fb = compute_mfph(inst.basis, inst.op, inst.in.comfort, opt.gains_up);
    CHECK(with_fb >= plain);
}

TEST_CASE("envelope CSV has the documented columns") {
    Instance inst(10, 4);
    auto env = envelope_ui(inst.in);
    std::ostringstream os;
    write_envelope_csv(os, env);
    std::string head = os.str().substr(0, os.str().find('\n'));
    CHECK(head ==
          "k,e_up_kwh,e_down_kwh,p_up_1_kw,p_up_2_kw,p_up_3_kw,p_down_1_kw,p_down_2_kw,"
          "p_down_3_kw,slack_up_c,slack_down_c");
}
