#include "flex/envelope.hpp"

#include <cmath>

#include "flex/errors.hpp"

namespace flex {

void ComfortSpec::validate(int ny) const {
    if (t_min.size() != ny || t_max.size() != ny)
        throw DimensionMismatch("comfort bounds must have one entry per room");
    if (((t_max - t_min).array() <= 0.0).any())
        throw DomainError("comfort band must have positive width");
    if (!(eps_c > 0.0 && eps_c < 1.0) || !(eps_t > 0.0 && eps_t < 1.0))
        throw DomainError("risk levels must be in (0,1)");
}

void PowerLimits::validate(int np) const {
    if (p_min.size() != np || p_max.size() != np)
        throw DimensionMismatch("power limits must have one entry per input");
    if ((p_min.array() < 0.0).any() || ((p_max - p_min).array() < 0.0).any())
        throw DomainError("power limits must satisfy p_max >= p_min >= 0");
}

const char* to_string(Formulation f) {
    switch (f) {
        case Formulation::UI: return "ui";
        case Formulation::UA: return "ua";
        case Formulation::UafOpt: return "uaf_opt";
        case Formulation::UafFixed: return "uaf_fixed";
    }
    return "?";
}

namespace {

struct HalfResult {
    Mat p;      // (N+2) x np
    Mat slack;  // (N+2) x ny
    double objective = 0.0;
    Vec energy;  // N
};

struct Layout {
    int n = 0, np = 0, ny = 0;
    int p(int k, int a) const { return k * np + a; }
    int gp(int k, int j) const { return (n + 1) * np + k * ny + j; }
    int gm(int k, int j) const { return (n + 1) * np + (n + 2) * ny + k * ny + j; }
    int count() const { return (n + 1) * np + 2 * (n + 2) * ny; }
};

void check_inputs(const EnvelopeInputs& in) {
    const auto& m = *in.model;
    in.comfort.validate(m.ny());
    in.limits.validate(m.np());
    if (in.weather.rows() != in.op->steps() || in.weather.cols() != m.nd())
        throw LengthMismatch("weather forecast must be (N+2) x nd");
    if (in.x0.size() != m.nx()) throw LengthMismatch("x0 size != nx");
}

Mat free_response(const EnvelopeInputs& in) {
    return predict_nominal(*in.op, in.x0, in.weather,
                           Mat::Zero(in.op->steps(), in.model->np()));
}

// Adds the comfort rows for one step k given a constant margin; the power
// part of ybar enters through the prediction maps.
void add_comfort_rows(ConicProgram& prog, const EnvelopeInputs& in, const Layout& L,
                      const Mat& ybar0, int k, const Vec& margin) {
    const auto& op = *in.op;
    const int kb = std::min(k, L.n);
    for (int j = 0; j < L.ny; ++j) {
        double up_rhs = in.comfort.t_max[j] - margin[j] - ybar0(k, j);
        double lo_rhs = in.comfort.t_min[j] + margin[j] - ybar0(k, j);
        int up = prog.add_row(-kInf, up_rhs);
        int lo = prog.add_row(lo_rhs, kInf);
        for (int i = 0; i <= kb; ++i) {
            Mat lam = op.power_map(k, i);
            for (int a = 0; a < L.np; ++a) {
                prog.add_coeff(up, L.p(i, a), lam(j, a));
                prog.add_coeff(lo, L.p(i, a), lam(j, a));
            }
        }
        prog.add_coeff(up, L.gp(k, j), -1.0);
        prog.add_coeff(lo, L.gm(k, j), 1.0);
    }
}

HalfResult extract_half(const EnvelopeInputs& in, const Layout& L, const Vec& x,
                        double objective) {
    HalfResult h;
    h.objective = objective;
    h.p = Mat::Zero(L.n + 2, L.np);
    h.slack = Mat::Zero(L.n + 2, L.ny);
    for (int k = 0; k <= L.n; ++k)
        for (int a = 0; a < L.np; ++a) h.p(k, a) = x[L.p(k, a)];
    for (int k = 0; k <= L.n + 1; ++k)
        for (int j = 0; j < L.ny; ++j) h.slack(k, j) = x[L.gp(k, j)] + x[L.gm(k, j)];
    h.energy = Vec::Zero(L.n);
    double acc = 0.0;
    for (int k = 1; k <= L.n; ++k) {
        acc += h.p.row(k).sum() * in.model->dt;
        h.energy[k - 1] = acc;
    }
    return h;
}

// Envelope bound with margins that do not depend on the decision variables.
HalfResult solve_fixed_margin_half(const EnvelopeInputs& in, const SafetyMargins& margins,
                                   bool upper,
                                   std::vector<std::pair<int, int>>* infeasible_bands) {
    Layout L{in.op->horizon(), in.model->np(), in.model->ny()};
    Mat ybar0 = free_response(in);
    ConicProgram prog;
    prog.sense = upper ? Sense::Maximize : Sense::Minimize;
    double slack_sign = upper ? -1.0 : 1.0;

    for (int k = 0; k <= L.n; ++k) {
        double w = in.spec.omega(k, L.n);
        for (int a = 0; a < L.np; ++a) {
            double lo = in.limits.p_min[a] + margins.power[k][a];
            double hi = in.limits.p_max[a] - margins.power[k][a];
            if (lo > hi) {
                if (infeasible_bands) infeasible_bands->emplace_back(k, a);
                lo = hi = 0.5 * (in.limits.p_min[a] + in.limits.p_max[a]);
            }
            prog.add_var(lo, hi, w);
        }
    }
    for (int k = 0; k <= L.n + 1; ++k)
        for (int j = 0; j < L.ny; ++j)
            prog.add_var(0.0, kInf, slack_sign * in.spec.lambda_slack);
    for (int k = 0; k <= L.n + 1; ++k)
        for (int j = 0; j < L.ny; ++j)
            prog.add_var(0.0, kInf, slack_sign * in.spec.lambda_slack);
    for (int k = 0; k <= L.n + 1; ++k)
        add_comfort_rows(prog, in, L, ybar0, k, margins.comfort[k]);

    Solution sol = solve_or_throw(prog, std::string("envelope ") + (upper ? "upper" : "lower"));
    return extract_half(in, L, sol.x, sol.objective);
}

SafetyMargins zero_margins(const EnvelopeInputs& in) {
    SafetyMargins sm;
    sm.comfort.assign(in.op->horizon() + 2, Vec::Zero(in.model->ny()));
    sm.power.assign(in.op->horizon() + 1, Vec::Zero(in.model->np()));
    return sm;
}

FlexibilityEnvelope assemble(const EnvelopeInputs& in, Formulation f, const HalfResult& up,
                             const HalfResult& down) {
    FlexibilityEnvelope env;
    env.formulation = f;
    env.dt = in.model->dt;
    env.horizon = in.op->horizon();
    env.e_up = up.energy;
    env.e_down = down.energy;
    env.p_up = up.p;
    env.p_down = down.p;
    env.slack_up = up.slack;
    env.slack_down = down.slack;
    env.objective_up = up.objective;
    env.objective_down = down.objective;
    return env;
}

} // namespace

FlexibilityEnvelope envelope_ui(const EnvelopeInputs& in) {
    check_inputs(in);
    SafetyMargins none = zero_margins(in);
    HalfResult up = solve_fixed_margin_half(in, none, true, nullptr);
    HalfResult down = solve_fixed_margin_half(in, none, false, nullptr);
    return assemble(in, Formulation::UI, up, down);
}

FlexibilityEnvelope envelope_ua(const EnvelopeInputs& in, const StackedNoiseBasis& basis) {
    check_inputs(in);
    SafetyMargins m = compute_margins(basis, *in.op, {}, in.comfort.eps_c, in.comfort.eps_t);
    HalfResult up = solve_fixed_margin_half(in, m, true, nullptr);
    HalfResult down = solve_fixed_margin_half(in, m, false, nullptr);
    return assemble(in, Formulation::UA, up, down);
}

FlexibilityEnvelope envelope_uaf_fixed(const EnvelopeInputs& in, const StackedNoiseBasis& basis,
                                       const std::vector<Mat>& gains_up,
                                       const std::vector<Mat>& gains_down) {
    check_inputs(in);
    SafetyMargins mu = compute_margins(basis, *in.op, gains_up, in.comfort.eps_c, in.comfort.eps_t);
    SafetyMargins md =
        compute_margins(basis, *in.op, gains_down, in.comfort.eps_c, in.comfort.eps_t);
    std::vector<std::pair<int, int>> bands;
    HalfResult up = solve_fixed_margin_half(in, mu, true, &bands);
    HalfResult down = solve_fixed_margin_half(in, md, false, &bands);
    FlexibilityEnvelope env = assemble(in, Formulation::UafFixed, up, down);
    std::sort(bands.begin(), bands.end());
    bands.erase(std::unique(bands.begin(), bands.end()), bands.end());
    env.power_infeasible = std::move(bands);
    return env;
}

namespace {

// Variable layout extension for the optimal-feedback program.
struct OptLayout : Layout {
    int nr = 0;  // nd + ny
    int m0 = 0, mp0 = 0, mc0 = 0;
    int mvar(int i, int a, int b) const {  // i = 1..N
        return m0 + ((i - 1) * np + a) * nr + b;
    }
    int mp(int k, int a) const { return mp0 + (k - 1) * np + a; }      // k = 1..N
    int mc(int k, int j) const { return mc0 + (k - 1) * ny + j; }      // k = 1..N+1
};

struct OptHalf {
    HalfResult half;
    std::vector<Mat> gains;
};

OptHalf solve_opt_half(const EnvelopeInputs& in, const StackedNoiseBasis& basis, bool upper) {
    const auto& op = *in.op;
    OptLayout L;
    L.n = op.horizon();
    L.np = in.model->np();
    L.ny = in.model->ny();
    L.nr = in.model->nd() + in.model->ny();
    const int n = L.n;

    double q_c = std::max(gaussian_quantile(1.0 - in.comfort.eps_c), 0.0);
    double q_t = std::max(gaussian_quantile(1.0 - in.comfort.eps_t), 0.0);
    Mat ybar0 = free_response(in);

    ConicProgram prog;
    prog.sense = upper ? Sense::Maximize : Sense::Minimize;
    double slack_sign = upper ? -1.0 : 1.0;
    for (int k = 0; k <= n; ++k) {
        double w = in.spec.omega(k, n);
        for (int a = 0; a < L.np; ++a) prog.add_var(in.limits.p_min[a], in.limits.p_max[a], w);
    }
    for (int k = 0; k <= n + 1; ++k)
        for (int j = 0; j < L.ny; ++j) prog.add_var(0.0, kInf, slack_sign * in.spec.lambda_slack);
    for (int k = 0; k <= n + 1; ++k)
        for (int j = 0; j < L.ny; ++j) prog.add_var(0.0, kInf, slack_sign * in.spec.lambda_slack);
    L.m0 = prog.num_vars();
    for (int i = 1; i <= n; ++i)
        for (int a = 0; a < L.np; ++a)
            for (int b = 0; b < L.nr; ++b) prog.add_var(-kInf, kInf, 0.0);
    L.mp0 = prog.num_vars();
    for (int k = 1; k <= n; ++k)
        for (int a = 0; a < L.np; ++a) prog.add_var(0.0, kInf, 0.0);
    L.mc0 = prog.num_vars();
    for (int k = 1; k <= n + 1; ++k)
        for (int j = 0; j < L.ny; ++j) prog.add_var(0.0, kInf, 0.0);

    // Comfort rows; step 0 margin is a constant (no feedback acts yet).
    add_comfort_rows(prog, in, L, ybar0, 0, margin_no_feedback(basis, 0, in.comfort.eps_c));
    for (int k = 1; k <= n + 1; ++k) {
        const int kb = std::min(k, n);
        for (int j = 0; j < L.ny; ++j) {
            int up = prog.add_row(-kInf, in.comfort.t_max[j] - ybar0(k, j));
            int lo = prog.add_row(in.comfort.t_min[j] - ybar0(k, j), kInf);
            for (int i = 0; i <= kb; ++i) {
                Mat lam = op.power_map(k, i);
                for (int a = 0; a < L.np; ++a) {
                    prog.add_coeff(up, L.p(i, a), lam(j, a));
                    prog.add_coeff(lo, L.p(i, a), lam(j, a));
                }
            }
            prog.add_coeff(up, L.gp(k, j), -1.0);
            prog.add_coeff(lo, L.gm(k, j), 1.0);
            prog.add_coeff(up, L.mc(k, j), q_c);
            prog.add_coeff(lo, L.mc(k, j), -q_c);
        }
    }

    // Power margin rows for k = 1..N (step 0 has no feedback).
    for (int k = 1; k <= n; ++k) {
        for (int a = 0; a < L.np; ++a) {
            int up = prog.add_row(-kInf, in.limits.p_max[a]);
            prog.add_coeff(up, L.p(k, a), 1.0);
            prog.add_coeff(up, L.mp(k, a), q_t);
            int lo = prog.add_row(in.limits.p_min[a], kInf);
            prog.add_coeff(lo, L.p(k, a), 1.0);
            prog.add_coeff(lo, L.mp(k, a), -q_t);
        }
    }

    // Power-margin cones: || S_k' M_k(a,:) || <= mp[k][a], with S_k S_k' the
    // Gram of the scaled disturbance map observed at step k-1.
    std::vector<Mat> s_factor(n + 1);
    for (int k = 1; k <= n; ++k) {
        const Mat& rh = basis.r_map_half[k - 1];
        s_factor[k] = psd_sqrt(rh * rh.transpose());
    }
    for (int k = 1; k <= n; ++k) {
        const Mat& s = s_factor[k];
        for (int a = 0; a < L.np; ++a) {
            int cone = prog.add_cone(L.nr);
            for (int r = 0; r < L.nr; ++r)
                for (int b = 0; b < L.nr; ++b)
                    prog.cone_vector_entry(cone, r, L.mvar(k, a, b), s(b, r));
            prog.cone_scalar_entry(cone, L.mp(k, a), 1.0);
        }
    }

    // Comfort cones: the noise-space columns active at step k are the block
    // prefixes of the stacked layout; entries couple M_i through the power
    // response maps.
    std::vector<std::vector<int>> r_support(n);
    for (int i = 0; i < n; ++i) {
        const Mat& rh = basis.r_map_half[i];
        for (int c = 0; c < basis.dim; ++c)
            if (rh.col(c).cwiseAbs().maxCoeff() > 0.0) r_support[i].push_back(c);
    }
    std::vector<int> colpos(basis.dim, -1);
    for (int k = 1; k <= n + 1; ++k) {
        const int kb = std::min(k, n);
        std::vector<int> cols;
        for (int c = 0; c < basis.nd * (1 + std::min(k, n)); ++c) cols.push_back(c);
        for (int c = 0; c < basis.nx * std::min(k, n + 1); ++c) cols.push_back(basis.off_w + c);
        for (int c = 0; c < basis.ny * (std::min(k, basis.horizon + 1) + 1); ++c)
            cols.push_back(basis.off_v + c);
        const int dim = static_cast<int>(cols.size());
        for (int r = 0; r < dim; ++r) colpos[cols[r]] = r;

        std::vector<Mat> lam(kb + 1);
        for (int i = 1; i <= kb; ++i) lam[i] = op.power_map(k, i);

        for (int j = 0; j < L.ny; ++j) {
            int cone = prog.add_cone(dim);
            for (int r = 0; r < dim; ++r)
                prog.cone_vector_offset(cone, r, basis.y_map_half[k](j, cols[r]));
            for (int i = 1; i <= kb; ++i) {
                const Mat& rh = basis.r_map_half[i - 1];
                for (int a = 0; a < L.np; ++a) {
                    double la = lam[i](j, a);
                    if (la == 0.0) continue;
                    for (int b = 0; b < L.nr; ++b) {
                        int var = L.mvar(i, a, b);
                        for (int c : r_support[i - 1])
                            prog.cone_vector_entry(cone, colpos[c], var, la * rh(b, c));
                    }
                }
            }
            prog.cone_scalar_entry(cone, L.mc(k, j), 1.0);
        }
        for (int c : cols) colpos[c] = -1;
    }

    Solution sol =
        solve_or_throw(prog, std::string("envelope with feedback ") + (upper ? "upper" : "lower"));
    OptHalf out;
    out.half = extract_half(in, L, sol.x, sol.objective);
    out.gains.resize(n);
    for (int i = 1; i <= n; ++i) {
        Mat g(L.np, L.nr);
        for (int a = 0; a < L.np; ++a)
            for (int b = 0; b < L.nr; ++b) g(a, b) = sol.x[L.mvar(i, a, b)];
        out.gains[i - 1] = g;
    }
    return out;
}

} // namespace

UafOptResult envelope_uaf_opt(const EnvelopeInputs& in, const StackedNoiseBasis& basis) {
    check_inputs(in);
    OptHalf up = solve_opt_half(in, basis, true);
    OptHalf down = solve_opt_half(in, basis, false);
    UafOptResult res;
    res.envelope = assemble(in, Formulation::UafOpt, up.half, down.half);
    res.gains_up = std::move(up.gains);
    res.gains_down = std::move(down.gains);
    return res;
}

double compute_fea(const FlexibilityEnvelope& env) {
    return (env.e_up - env.e_down).sum() * env.dt;
}

int compute_mfph(const StackedNoiseBasis& basis, const PredictionOperator& op,
                 const ComfortSpec& comfort, const std::vector<Mat>& gains) {
    const int n = basis.horizon;
    for (int k = 0; k <= n; ++k) {
        Vec s = gains.empty() ? margin_no_feedback(basis, k, comfort.eps_c)
                              : margin_output_with_feedback(basis, op, gains, k, comfort.eps_c);
        for (int j = 0; j < s.size(); ++j) {
            if (!(comfort.t_max[j] - s[j] > comfort.t_min[j] + s[j])) return k - 1;
        }
    }
    return n;
}

void write_envelope_csv(std::ostream& os, const FlexibilityEnvelope& env) {
    const int np = static_cast<int>(env.p_up.cols());
    os << "k,e_up_kwh,e_down_kwh";
    for (int a = 0; a < np; ++a) os << ",p_up_" << a + 1 << "_kw";
    for (int a = 0; a < np; ++a) os << ",p_down_" << a + 1 << "_kw";
    os << ",slack_up_c,slack_down_c\n";
    char buf[64];
    auto num = [&](double v) {
        snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    for (int k = 0; k < env.p_up.rows(); ++k) {
        double eu = 0.0, ed = 0.0;
        if (k >= 1) {
            int idx = std::min(k, env.horizon) - 1;
            eu = env.e_up[idx];
            ed = env.e_down[idx];
        }
        os << k << "," << num(eu) << "," << num(ed);
        for (int a = 0; a < np; ++a) os << "," << num(env.p_up(k, a));
        for (int a = 0; a < np; ++a) os << "," << num(env.p_down(k, a));
        os << "," << num(env.slack_up.row(k).sum()) << "," << num(env.slack_down.row(k).sum())
           << "\n";
    }
}

} // namespace flex
