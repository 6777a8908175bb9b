#include <chrono>
#include <cmath>
#include <vector>

#include "flex/conic.hpp"
#include "flex/errors.hpp"

// Primal-dual interior-point method for the self-dual embedding of
//   min c'x  s.t.  A x = b,  G x + s = h,  s in K,
// with K a product of a nonnegative orthant and second-order cones and
// Nesterov-Todd scaling. Each iteration factors the normal-equation matrix
// H = G' W^-2 G once; per-cone Gram matrices are precomputed so the scaled
// assembly costs one rank-2 update per cone.

namespace flex {

namespace {

struct SparseRow {
    std::vector<int> cols;
    std::vector<double> vals;
};

struct ConeBlock {
    int offset = 0;  // row offset within the full slack vector
    int dim = 0;     // 1 + vector dimension
    std::vector<int> cols;  // active variable indices
    Mat block;              // dim x cols.size(), rows of G
    Vec h;                  // dim
    Mat gram;               // block' * block

    // NT scaling state
    double eta = 1.0;  // sqrt(s'Js / z'Jz)
    Vec v;             // scaling point w, with w'Jw = 1
    Vec g0t;           // first row of the block, transposed
};

struct Standard {
    int n = 0;      // active variables (fixed ones are substituted out)
    int n_user = 0;
    int m_lin = 0;  // orthant rows
    int m = 0;      // total slack dimension
    Vec c;
    double c0 = 0.0;
    double obj_sign = 1.0;      // +1 minimize, -1 maximize
    Vec var_lo, var_hi;         // active-variable bounds, for solution clean-up
    std::vector<int> to_user;   // active index -> user index
    Vec fixed_values;           // user-sized; meaningful where fixed
    std::vector<bool> is_fixed;
    std::vector<SparseRow> lin_rows;  // orthant part of G
    Vec h_lin;
    std::vector<ConeBlock> cones;
    std::vector<SparseRow> eq_rows;  // A
    Vec b;
    double data_inf = 1.0;  // max |entry| across A, G
};

double sqr(double x) { return x * x; }

// ---------------------------------------------------------------------------
// Conversion to standard form
// ---------------------------------------------------------------------------

Standard to_standard(const ConicProgram& p) {
    p.validate();
    Standard sf;
    sf.n_user = p.num_vars();
    sf.obj_sign = p.sense == Sense::Minimize ? 1.0 : -1.0;
    sf.c0 = p.objective_constant();

    // Presolve: variables pinned by lo == hi are substituted out.
    sf.is_fixed.assign(sf.n_user, false);
    sf.fixed_values = Vec::Zero(sf.n_user);
    std::vector<int> to_active(sf.n_user, -1);
    for (int i = 0; i < sf.n_user; ++i) {
        if (p.lower()[i] == p.upper()[i]) {
            sf.is_fixed[i] = true;
            sf.fixed_values[i] = p.lower()[i];
        } else {
            to_active[i] = static_cast<int>(sf.to_user.size());
            sf.to_user.push_back(i);
        }
    }
    sf.n = static_cast<int>(sf.to_user.size());
    sf.c = Vec::Zero(sf.n);
    sf.var_lo = Vec::Zero(sf.n);
    sf.var_hi = Vec::Zero(sf.n);
    for (int i = 0; i < sf.n_user; ++i) {
        double ci = sf.obj_sign * p.objective()[i];
        if (sf.is_fixed[i]) {
            sf.c0 += p.objective()[i] * sf.fixed_values[i];
        } else {
            sf.c[to_active[i]] = ci;
            sf.var_lo[to_active[i]] = p.lower()[i];
            sf.var_hi[to_active[i]] = p.upper()[i];
        }
    }

    // Group the user's linear triplets by row, substituting fixed variables.
    std::vector<SparseRow> user(p.num_rows());
    std::vector<double> row_shift(p.num_rows(), 0.0);
    for (const auto& t : p.row_coeffs()) {
        if (sf.is_fixed[t.col()]) {
            row_shift[t.row()] += t.value() * sf.fixed_values[t.col()];
        } else {
            user[t.row()].cols.push_back(to_active[t.col()]);
            user[t.row()].vals.push_back(t.value());
        }
    }

    std::vector<double> h_lin;
    auto push_le = [&](const SparseRow& row, double sign, double rhs) {
        SparseRow r = row;
        for (auto& v : r.vals) v *= sign;
        sf.lin_rows.push_back(std::move(r));
        h_lin.push_back(rhs);
    };

    std::vector<double> b;
    for (int r = 0; r < p.num_rows(); ++r) {
        double lo = p.row_lower()[r], hi = p.row_upper()[r];
        if (lo > -kInf) lo -= row_shift[r];
        if (hi < kInf) hi -= row_shift[r];
        if (p.row_lower()[r] == p.row_upper()[r]) {
            sf.eq_rows.push_back(user[r]);
            b.push_back(hi);
            continue;
        }
        if (hi < kInf) push_le(user[r], 1.0, hi);     // a'x <= hi
        if (lo > -kInf) push_le(user[r], -1.0, -lo);  // -a'x <= -lo
    }
    for (int i = 0; i < sf.n; ++i) {
        if (sf.var_hi[i] < kInf) {
            SparseRow r;
            r.cols.push_back(i);
            r.vals.push_back(1.0);
            sf.lin_rows.push_back(std::move(r));
            h_lin.push_back(sf.var_hi[i]);
        }
        if (sf.var_lo[i] > -kInf) {
            SparseRow r;
            r.cols.push_back(i);
            r.vals.push_back(-1.0);
            sf.lin_rows.push_back(std::move(r));
            h_lin.push_back(-sf.var_lo[i]);
        }
    }
    sf.m_lin = static_cast<int>(sf.lin_rows.size());
    sf.h_lin = Eigen::Map<Vec>(h_lin.data(), h_lin.size());
    sf.b = Eigen::Map<Vec>(b.data(), b.size());

    int offset = sf.m_lin;
    for (const auto& cone : p.cones()) {
        ConeBlock cb;
        cb.offset = offset;
        cb.dim = cone.vec_dim + 1;
        offset += cb.dim;

        // Active columns: union of scalar and vector entries.
        std::vector<int> mark;
        for (const auto& [var, coeff] : cone.c)
            if (!sf.is_fixed[var]) mark.push_back(to_active[var]);
        for (const auto& t : cone.f)
            if (!sf.is_fixed[t.col()]) mark.push_back(to_active[t.col()]);
        std::sort(mark.begin(), mark.end());
        mark.erase(std::unique(mark.begin(), mark.end()), mark.end());
        cb.cols = mark;
        std::vector<int> pos(sf.n, -1);
        for (std::size_t i = 0; i < mark.size(); ++i) pos[mark[i]] = static_cast<int>(i);

        cb.block = Mat::Zero(cb.dim, static_cast<int>(mark.size()));
        cb.h = Vec::Zero(cb.dim);
        cb.h[0] = cone.d;
        cb.h.tail(cone.vec_dim) = cone.g;
        for (const auto& [var, coeff] : cone.c) {
            if (sf.is_fixed[var]) cb.h[0] += coeff * sf.fixed_values[var];
            else cb.block(0, pos[to_active[var]]) -= coeff;
        }
        for (const auto& t : cone.f) {
            if (sf.is_fixed[t.col()])
                cb.h[t.row() + 1] += t.value() * sf.fixed_values[t.col()];
            else cb.block(t.row() + 1, pos[to_active[t.col()]]) -= t.value();
        }
        cb.gram.noalias() = cb.block.transpose() * cb.block;
        cb.g0t = cb.block.row(0).transpose();
        sf.cones.push_back(std::move(cb));
    }
    sf.m = offset;

    double dinf = 1.0;
    for (const auto& r : sf.lin_rows)
        for (double v : r.vals) dinf = std::max(dinf, std::abs(v));
    for (const auto& r : sf.eq_rows)
        for (double v : r.vals) dinf = std::max(dinf, std::abs(v));
    for (const auto& cb : sf.cones) dinf = std::max(dinf, cb.block.cwiseAbs().maxCoeff());
    sf.data_inf = dinf;
    return sf;
}

// ---------------------------------------------------------------------------
// Cone/scaling helpers
// ---------------------------------------------------------------------------

struct Scaling {
    bool identity = true;
    Vec w2_lin;     // orthant W^2 diagonal = s/z
    // per-cone state lives in Standard::cones (beta2, v)
};

// Jordan product u o w for one SOC block.
void soc_circ(const Vec& u, const Vec& w, Vec& out) {
    out[0] = u.dot(w);
    out.tail(out.size() - 1) =
        u[0] * w.tail(w.size() - 1) + w[0] * u.tail(u.size() - 1);
}

// Solve lambda o u = d for one SOC block.
void soc_div(const Vec& lam, const Vec& d, Vec& out) {
    const auto l1 = lam.tail(lam.size() - 1);
    const auto d1 = d.tail(d.size() - 1);
    double det = sqr(lam[0]) - l1.squaredNorm();
    double u0 = (lam[0] * d[0] - l1.dot(d1)) / det;
    out[0] = u0;
    out.tail(out.size() - 1) = (d1 - u0 * l1) / lam[0];
}

// The NT scaling for one SOC block is W = sqrt(eta) * Wbar with
//   Wbar = [w0 w1'; w1 I + w1 w1'/(1+w0)],  w'Jw = 1,
// so that Wbar^2 = 2ww' - J and Wbar J Wbar = J (hence Wbar^-1 = J Wbar J).

void soc_wbar(const Vec& w, const Vec& u, Vec& out) {
    const auto w1 = w.tail(w.size() - 1);
    const auto u1 = u.tail(u.size() - 1);
    double t = w1.dot(u1);
    out[0] = w[0] * u[0] + t;
    out.tail(out.size() - 1) = u[0] * w1 + u1 + (t / (1.0 + w[0])) * w1;
}

void soc_apply_w(double eta, const Vec& w, const Vec& u, Vec& out) {
    soc_wbar(w, u, out);
    out *= std::sqrt(eta);
}

// W^-1 u = eta^-1/2 J Wbar (J u)
void soc_apply_winv(double eta, const Vec& w, const Vec& u, Vec& out) {
    Vec ju = u;
    ju.tail(ju.size() - 1) = -ju.tail(ju.size() - 1);
    soc_wbar(w, ju, out);
    out.tail(out.size() - 1) = -out.tail(out.size() - 1);
    out /= std::sqrt(eta);
}

// W^2 u = eta (2 w (w'u) - J u)
void soc_apply_w2(double eta, const Vec& w, const Vec& u, Vec& out) {
    double t = w.dot(u);
    out = 2.0 * t * w;
    out[0] -= u[0];
    out.tail(out.size() - 1) += u.tail(u.size() - 1);
    out *= eta;
}

// W^-2 u = eta^-1 (2 (Jw) (Jw)'u - J u)
void soc_apply_w2inv(double eta, const Vec& w, const Vec& u, Vec& out) {
    Vec jw = w;
    jw.tail(jw.size() - 1) = -jw.tail(jw.size() - 1);
    double t = jw.dot(u);
    out = 2.0 * t * jw;
    out[0] -= u[0];
    out.tail(out.size() - 1) += u.tail(u.size() - 1);
    out /= eta;
}

// ---------------------------------------------------------------------------
// Workspace
// ---------------------------------------------------------------------------

class Ipm {
public:
    Ipm(Standard sf, const SolveOptions& opts) : sf_(std::move(sf)), opts_(opts) {
        n_ = sf_.n;
        me_ = static_cast<int>(sf_.eq_rows.size());
        m_ = sf_.m;
        nu_ = sf_.m_lin + static_cast<int>(sf_.cones.size());
        h_.resize(n_, n_);
        if (me_ > 0) {
            a_dense_ = Mat::Zero(me_, n_);
            for (int r = 0; r < me_; ++r)
                for (std::size_t i = 0; i < sf_.eq_rows[r].cols.size(); ++i)
                    a_dense_(r, sf_.eq_rows[r].cols[i]) = sf_.eq_rows[r].vals[i];
        }
        scal_.w2_lin = Vec::Ones(sf_.m_lin);
    }

    Solution run();

private:
    // --- G and A products ---
    Vec g_mul(const Vec& x) const {
        Vec out(m_);
        for (int r = 0; r < sf_.m_lin; ++r) {
            double acc = 0.0;
            const auto& row = sf_.lin_rows[r];
            for (std::size_t i = 0; i < row.cols.size(); ++i)
                acc += row.vals[i] * x[row.cols[i]];
            out[r] = acc;
        }
        for (const auto& cb : sf_.cones) {
            Vec xa(cb.cols.size());
            for (std::size_t i = 0; i < cb.cols.size(); ++i) xa[i] = x[cb.cols[i]];
            out.segment(cb.offset, cb.dim).noalias() = cb.block * xa;
        }
        return out;
    }

    Vec gt_mul(const Vec& z) const {
        Vec out = Vec::Zero(n_);
        for (int r = 0; r < sf_.m_lin; ++r) {
            const auto& row = sf_.lin_rows[r];
            for (std::size_t i = 0; i < row.cols.size(); ++i)
                out[row.cols[i]] += row.vals[i] * z[r];
        }
        for (const auto& cb : sf_.cones) {
            Vec za = cb.block.transpose() * z.segment(cb.offset, cb.dim);
            for (std::size_t i = 0; i < cb.cols.size(); ++i) out[cb.cols[i]] += za[i];
        }
        return out;
    }

    Vec a_mul(const Vec& x) const {
        Vec out(me_);
        for (int r = 0; r < me_; ++r) {
            double acc = 0.0;
            for (std::size_t i = 0; i < sf_.eq_rows[r].cols.size(); ++i)
                acc += sf_.eq_rows[r].vals[i] * x[sf_.eq_rows[r].cols[i]];
            out[r] = acc;
        }
        return out;
    }

    Vec at_mul(const Vec& y) const {
        Vec out = Vec::Zero(n_);
        for (int r = 0; r < me_; ++r)
            for (std::size_t i = 0; i < sf_.eq_rows[r].cols.size(); ++i)
                out[sf_.eq_rows[r].cols[i]] += sf_.eq_rows[r].vals[i] * y[r];
        return out;
    }

    Vec h_full() const {
        Vec h(m_);
        h.head(sf_.m_lin) = sf_.h_lin;
        for (const auto& cb : sf_.cones) h.segment(cb.offset, cb.dim) = cb.h;
        return h;
    }

    // --- scaled cone operations over the full slack vector ---
    void update_scaling(const Vec& s, const Vec& z) {
        scal_.identity = false;
        for (int r = 0; r < sf_.m_lin; ++r) scal_.w2_lin[r] = s[r] / z[r];
        for (auto& cb : sf_.cones) {
            Vec sb = s.segment(cb.offset, cb.dim);
            Vec zb = z.segment(cb.offset, cb.dim);
            double sres = sqr(sb[0]) - sb.tail(cb.dim - 1).squaredNorm();
            double zres = sqr(zb[0]) - zb.tail(cb.dim - 1).squaredNorm();
            sres = std::max(sres, 1e-300);
            zres = std::max(zres, 1e-300);
            Vec sbar = sb / std::sqrt(sres);
            Vec zbar = zb / std::sqrt(zres);
            double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
            Vec jzbar = zbar;
            jzbar.tail(cb.dim - 1) = -jzbar.tail(cb.dim - 1);
            cb.v = (sbar + jzbar) / (2.0 * gamma);
            cb.eta = std::sqrt(sres / zres);
        }
    }

    void set_identity_scaling() {
        scal_.identity = true;
        scal_.w2_lin.setOnes();
        for (auto& cb : sf_.cones) {
            cb.eta = 1.0;
            cb.v = Vec::Zero(cb.dim);
            cb.v[0] = 1.0;  // W = identity
        }
    }

    Vec apply_w(const Vec& u) const {
        Vec out(m_);
        for (int r = 0; r < sf_.m_lin; ++r) out[r] = std::sqrt(scal_.w2_lin[r]) * u[r];
        for (const auto& cb : sf_.cones) {
            Vec o(cb.dim);
            soc_apply_w(cb.eta, cb.v, u.segment(cb.offset, cb.dim), o);
            out.segment(cb.offset, cb.dim) = o;
        }
        return out;
    }

    Vec apply_winv(const Vec& u) const {
        Vec out(m_);
        for (int r = 0; r < sf_.m_lin; ++r) out[r] = u[r] / std::sqrt(scal_.w2_lin[r]);
        for (const auto& cb : sf_.cones) {
            Vec o(cb.dim);
            soc_apply_winv(cb.eta, cb.v, u.segment(cb.offset, cb.dim), o);
            out.segment(cb.offset, cb.dim) = o;
        }
        return out;
    }

    Vec apply_w2(const Vec& u) const {
        Vec out(m_);
        for (int r = 0; r < sf_.m_lin; ++r) out[r] = scal_.w2_lin[r] * u[r];
        for (const auto& cb : sf_.cones) {
            Vec o(cb.dim);
            soc_apply_w2(cb.eta, cb.v, u.segment(cb.offset, cb.dim), o);
            out.segment(cb.offset, cb.dim) = o;
        }
        return out;
    }

    Vec apply_w2inv(const Vec& u) const {
        Vec out(m_);
        for (int r = 0; r < sf_.m_lin; ++r) out[r] = u[r] / scal_.w2_lin[r];
        for (const auto& cb : sf_.cones) {
            Vec o(cb.dim);
            soc_apply_w2inv(cb.eta, cb.v, u.segment(cb.offset, cb.dim), o);
            out.segment(cb.offset, cb.dim) = o;
        }
        return out;
    }

    // lambda = W z (scaled point)
    Vec scaled_point(const Vec& z) const { return apply_w(z); }

    Vec circ(const Vec& u, const Vec& w) const {
        Vec out(m_);
        for (int r = 0; r < sf_.m_lin; ++r) out[r] = u[r] * w[r];
        for (const auto& cb : sf_.cones) {
            Vec o(cb.dim);
            soc_circ(u.segment(cb.offset, cb.dim), w.segment(cb.offset, cb.dim), o);
            out.segment(cb.offset, cb.dim) = o;
        }
        return out;
    }

    Vec jordan_div(const Vec& lam, const Vec& d) const {
        Vec out(m_);
        for (int r = 0; r < sf_.m_lin; ++r) out[r] = d[r] / lam[r];
        for (const auto& cb : sf_.cones) {
            Vec o(cb.dim);
            soc_div(lam.segment(cb.offset, cb.dim), d.segment(cb.offset, cb.dim), o);
            out.segment(cb.offset, cb.dim) = o;
        }
        return out;
    }

    Vec unit_e() const {
        Vec e = Vec::Zero(m_);
        e.head(sf_.m_lin).setOnes();
        for (const auto& cb : sf_.cones) e[cb.offset] = 1.0;
        return e;
    }

    // Largest step alpha keeping u + alpha du in the cone (cap given).
    double max_step(const Vec& u, const Vec& du, double cap) const {
        double alpha = cap;
        for (int r = 0; r < sf_.m_lin; ++r) {
            if (du[r] < 0.0) alpha = std::min(alpha, -u[r] / du[r]);
        }
        for (const auto& cb : sf_.cones) {
            auto ub = u.segment(cb.offset, cb.dim);
            auto db = du.segment(cb.offset, cb.dim);
            double a = sqr(db[0]) - db.tail(cb.dim - 1).squaredNorm();
            double bq = ub[0] * db[0] - ub.tail(cb.dim - 1).dot(db.tail(cb.dim - 1));
            double c0 = sqr(ub[0]) - ub.tail(cb.dim - 1).squaredNorm();
            c0 = std::max(c0, 0.0);
            double bound = cap;
            double disc = bq * bq - a * c0;
            if (a < 0.0) {
                bound = (bq + std::sqrt(std::max(disc, 0.0))) / (-a);
            } else if (a == 0.0) {
                if (bq < 0.0) bound = -c0 / (2.0 * bq);
            } else if (disc >= 0.0 && bq < 0.0) {
                // convex with two positive roots; the smaller one, in the
                // cancellation-free companion form
                bound = c0 / (-bq + std::sqrt(disc));
            }
            if (db[0] < 0.0) bound = std::min(bound, -ub[0] / db[0]);
            alpha = std::min(alpha, bound);
        }
        return std::max(alpha, 0.0);
    }

    // --- KKT ---
    void factor() {
        h_.setZero();
        for (int r = 0; r < sf_.m_lin; ++r) {
            const auto& row = sf_.lin_rows[r];
            double w2inv = 1.0 / scal_.w2_lin[r];
            for (std::size_t i = 0; i < row.cols.size(); ++i) {
                double wv = w2inv * row.vals[i];
                for (std::size_t j = 0; j < row.cols.size(); ++j)
                    h_(row.cols[i], row.cols[j]) += wv * row.vals[j];
            }
        }
        for (const auto& cb : sf_.cones) {
            const int nc = static_cast<int>(cb.cols.size());
            double einv = 1.0 / cb.eta;
            Vec jw = cb.v;
            jw.tail(cb.dim - 1) = -jw.tail(cb.dim - 1);
            Vec a = cb.block.transpose() * jw;  // G_c' (Jw)
            // G_c' W^-2 G_c = einv * (gram + 2 a a' - 2 g0 g0')
            for (int i = 0; i < nc; ++i) {
                const int gi = cb.cols[i];
                for (int j = 0; j < nc; ++j) {
                    h_(gi, cb.cols[j]) += einv * (cb.gram(i, j) + 2.0 * a[i] * a[j] -
                                                  2.0 * cb.g0t[i] * cb.g0t[j]);
                }
            }
        }
        double delta = 1e-10 * std::max(1.0, h_.diagonal().maxCoeff());
        delta_ = delta;
        h_.diagonal().array() += delta;
        h_llt_.compute(h_);
        if (me_ > 0) {
            hinv_at_ = h_llt_.solve(a_dense_.transpose());
            schur_.noalias() = a_dense_ * hinv_at_;
            schur_.diagonal().array() += delta;
            schur_llt_.compute(schur_);
        }
    }

    // Solve [0 A' G'; A 0 0; G 0 -W^2] (dx,dy,dz) = (bx,by,bz).
    void kkt_solve(const Vec& bx, const Vec& by, const Vec& bz, Vec& dx, Vec& dy,
                   Vec& dz) const {
        auto single = [&](const Vec& rx, const Vec& ry, const Vec& rz, Vec& ox, Vec& oy,
                          Vec& oz) {
            Vec f = rx + gt_mul(apply_w2inv(rz));
            if (me_ > 0) {
                Vec hf = h_llt_.solve(f);
                Vec rhs = a_mul(hf) - ry;
                oy = schur_llt_.solve(rhs);
                ox = hf - hinv_at_ * oy;
            } else {
                oy = Vec::Zero(0);
                ox = h_llt_.solve(f);
            }
            oz = apply_w2inv(g_mul(ox) - rz);
        };
        single(bx, by, bz, dx, dy, dz);
        // One iterative refinement pass against the unregularized system.
        Vec rx = bx - (at_mul(dy) + gt_mul(dz));
        Vec ry = me_ > 0 ? Vec(by - a_mul(dx)) : Vec::Zero(0);
        Vec rz = bz - (g_mul(dx) - apply_w2(dz));
        Vec ex, ey, ez;
        single(rx, ry, rz, ex, ey, ez);
        dx += ex;
        if (me_ > 0) dy += ey;
        dz += ez;
    }

    Standard sf_;
    SolveOptions opts_;
    int n_ = 0, me_ = 0, m_ = 0, nu_ = 0;
    Scaling scal_;
    Mat h_;
    Eigen::LLT<Mat> h_llt_;
    Mat a_dense_;
    Mat hinv_at_;
    Mat schur_;
    Eigen::LLT<Mat> schur_llt_;
    double delta_ = 0.0;
};

Solution Ipm::run() {
    auto t0 = std::chrono::steady_clock::now();
    Solution sol;
    const Vec h = h_full();
    const Vec& b = sf_.b;
    const Vec& c = sf_.c;

    auto finish = [&](SolveStatus st, const Vec& x, double pobj, SolveStats stats) {
        sol.status = st;
        sol.stats = stats;
        sol.stats.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (st == SolveStatus::Optimal) {
            sol.x = sf_.fixed_values;
            for (int i = 0; i < n_; ++i)
                sol.x[sf_.to_user[i]] = std::clamp(x[i], sf_.var_lo[i], sf_.var_hi[i]);
            sol.objective = sf_.obj_sign * pobj + sf_.c0;
        }
        return sol;
    };

    if (n_ == 0) {
        // Everything fixed by presolve; check the remaining constant rows.
        double viol = 0.0;
        for (int r = 0; r < sf_.m_lin; ++r) viol = std::max(viol, -h[r]);
        for (const auto& cb : sf_.cones)
            viol = std::max(viol, cb.h.tail(cb.dim - 1).norm() - cb.h[0]);
        for (int r = 0; r < me_; ++r) viol = std::max(viol, std::abs(b[r]));
        if (viol > opts_.accept_tol) return finish(SolveStatus::Infeasible, {}, 0.0, {});
        return finish(SolveStatus::Optimal, Vec::Zero(0), 0.0, {});
    }
    if (m_ == 0 && me_ == 0) {
        if (c.norm() == 0.0)
            return finish(SolveStatus::Optimal, Vec::Zero(n_), 0.0, {});
        return finish(SolveStatus::Unbounded, {}, 0.0, {});
    }

    // Least-squares initial point with identity scaling, shifted into the cone.
    set_identity_scaling();
    factor();
    Vec x, y, z, s, dx, dy, dz;
    kkt_solve(Vec::Zero(n_), b, h, x, y, z);
    s = -z;
    {
        double mint = kInf;
        for (int r = 0; r < sf_.m_lin; ++r) mint = std::min(mint, s[r]);
        for (const auto& cb : sf_.cones)
            mint = std::min(mint, s[cb.offset] - s.segment(cb.offset + 1, cb.dim - 1).norm());
        if (mint <= 0.0) s += (1.0 - mint) * unit_e();
    }
    kkt_solve(-c, Vec::Zero(me_), Vec::Zero(m_), dx, dy, dz);
    y = dy;
    z = dz;
    {
        double mint = kInf;
        for (int r = 0; r < sf_.m_lin; ++r) mint = std::min(mint, z[r]);
        for (const auto& cb : sf_.cones)
            mint = std::min(mint, z[cb.offset] - z.segment(cb.offset + 1, cb.dim - 1).norm());
        if (mint <= 0.0) z += (1.0 - mint) * unit_e();
    }
    double tau = 1.0, kappa = 1.0;

    const double norm_b = std::max(1.0, b.size() ? b.norm() : 0.0);
    const double norm_h = std::max(1.0, h.norm());
    const double norm_c = std::max(1.0, c.norm());

    SolveStats best_stats;
    Vec best_x;
    double best_pobj = 0.0;
    double best_score = kInf;

    SolveStats stats;
    for (int iter = 0; iter < opts_.max_iter; ++iter) {
        stats.iterations = iter;
        // Residuals of the embedding.
        Vec rx = at_mul(y) + gt_mul(z) + c * tau;
        Vec ry = me_ > 0 ? Vec(a_mul(x) - b * tau) : Vec::Zero(0);
        Vec rz = g_mul(x) + s - h * tau;
        double rt = kappa + c.dot(x) + (me_ > 0 ? b.dot(y) : 0.0) + h.dot(z);

        double mu = (s.dot(z) + tau * kappa) / (nu_ + 1);

        // Convergence on the scaled point.
        Vec xs = x / tau, ss = s / tau, ys = y / tau, zs = z / tau;
        double pres = std::max((me_ > 0 ? (a_mul(xs) - b).norm() / norm_b : 0.0),
                               (g_mul(xs) + ss - h).norm() / norm_h);
        double dres = (at_mul(ys) + gt_mul(zs) + c).norm() / norm_c;
        double pobj = c.dot(xs);
        double dobj = -(me_ > 0 ? b.dot(ys) : 0.0) - h.dot(zs);
        double absgap = ss.dot(zs);
        double relgap = absgap / std::max(1.0, std::abs(pobj));
        double gapgap = std::abs(pobj - dobj) / std::max(1.0, std::abs(pobj));

        stats.primal_residual = pres;
        stats.dual_residual = dres;
        stats.gap = relgap;

        double score = std::max({pres, dres, std::min(relgap, gapgap)});
        if (score < best_score) {
            best_score = score;
            best_stats = stats;
            best_x = xs;
            best_pobj = pobj;
        }

        if (pres <= opts_.feas_tol && dres <= opts_.feas_tol &&
            (relgap <= opts_.gap_tol || gapgap <= opts_.gap_tol)) {
            return finish(SolveStatus::Optimal, xs, pobj, stats);
        }

        if (opts_.verbose)
            printf("it %3d tau %9.3g kappa %9.3g mu %9.3g pres %9.3g dres %9.3g gap %9.3g\n",
                   iter, tau, kappa, mu, pres, dres, relgap);

        // Certificates of infeasibility / unboundedness, only once the
        // embedding has entered the tau -> 0 regime.
        if (tau <= 1e-2 * std::min(1.0, kappa)) {
            double byhz = (me_ > 0 ? b.dot(y) : 0.0) + h.dot(z);
            if (byhz < 0.0) {
                double cert = (at_mul(y) + gt_mul(z)).lpNorm<Eigen::Infinity>() / (-byhz) *
                              std::max(1.0, norm_c);
                if (cert <= opts_.feas_tol * 100.0)
                    return finish(SolveStatus::Infeasible, {}, 0.0, stats);
            }
            double cx = c.dot(x);
            if (cx < 0.0) {
                double cert = std::max((me_ > 0 ? a_mul(x).lpNorm<Eigen::Infinity>() : 0.0),
                                       (g_mul(x) + s).lpNorm<Eigen::Infinity>()) /
                              (-cx) * std::max({1.0, norm_b, norm_h});
                if (cert <= opts_.feas_tol * 100.0)
                    return finish(SolveStatus::Unbounded, {}, 0.0, stats);
            }
        }

        update_scaling(s, z);
        Vec lambda = scaled_point(z);
        factor();

        Vec u1x, u1y, u1z;
        kkt_solve(-c, b, h, u1x, u1y, u1z);
        double den = c.dot(u1x) + (me_ > 0 ? b.dot(u1y) : 0.0) + h.dot(u1z) - kappa / tau;
        if (!std::isfinite(den) || std::abs(den) < 1e-300) break;

        auto direction = [&](double sigma, const Vec& ds, double dkap, Vec& ox, Vec& oy,
                             Vec& oz, Vec& os, double& otau, double& okap) {
            double om = 1.0 - sigma;
            Vec dst = jordan_div(lambda, ds);
            Vec bz = -om * rz + apply_w(dst);
            Vec u2x, u2y, u2z;
            kkt_solve(-om * rx, -om * ry, bz, u2x, u2y, u2z);
            double num = -om * rt + dkap / tau -
                         (c.dot(u2x) + (me_ > 0 ? b.dot(u2y) : 0.0) + h.dot(u2z));
            otau = num / den;
            ox = u2x + otau * u1x;
            if (me_ > 0) oy = u2y + otau * u1y; else oy = Vec::Zero(0);
            oz = u2z + otau * u1z;
            os = -apply_w(dst + apply_w(oz));
            okap = -(dkap + kappa * otau) / tau;
        };

        // Predictor.
        Vec ds_a = circ(lambda, lambda);
        Vec ax, ay, az, as;
        double atau, akap;
        direction(0.0, ds_a, tau * kappa, ax, ay, az, as, atau, akap);
        double alpha_a = max_step(s, as, 1.0);
        alpha_a = std::min(alpha_a, max_step(z, az, 1.0));
        if (atau < 0.0) alpha_a = std::min(alpha_a, -tau / atau);
        if (akap < 0.0) alpha_a = std::min(alpha_a, -kappa / akap);
        alpha_a = std::min(alpha_a, 1.0);

        double mu_a = ((s + alpha_a * as).dot(z + alpha_a * az) +
                       (tau + alpha_a * atau) * (kappa + alpha_a * akap)) /
                      (nu_ + 1);
        double sigma = std::pow(std::clamp(mu_a / mu, 0.0, 1.0), 3.0);

        // Corrector.
        Vec corr = circ(apply_winv(as), apply_w(az));
        Vec ds = ds_a + corr - sigma * mu * unit_e();
        double dkap = tau * kappa + atau * akap - sigma * mu;
        Vec cxd, cyd, czd, csd;
        double ctau, ckap;
        direction(sigma, ds, dkap, cxd, cyd, czd, csd, ctau, ckap);

        double alpha = max_step(s, csd, 10.0);
        alpha = std::min(alpha, max_step(z, czd, 10.0));
        if (ctau < 0.0) alpha = std::min(alpha, -tau / ctau);
        if (ckap < 0.0) alpha = std::min(alpha, -kappa / ckap);
        alpha = std::min(0.99 * alpha, 1.0);

        if (!(alpha > 1e-11) || !std::isfinite(alpha)) break;

        x += alpha * cxd;
        if (me_ > 0) y += alpha * cyd;
        z += alpha * czd;
        s += alpha * csd;
        tau += alpha * ctau;
        kappa += alpha * ckap;
        if (!(tau > 1e-12) || !std::isfinite(tau)) break;
    }

    // Accept the best iterate at the relaxed level, otherwise report failure.
    if (best_score <= opts_.accept_tol)
        return finish(SolveStatus::Optimal, best_x, best_pobj, best_stats);
    return finish(SolveStatus::NumericalFailure, {}, 0.0, best_stats);
}

} // namespace

Solution solve(const ConicProgram& prog, const SolveOptions& opts) {
    Ipm ipm(to_standard(prog), opts);
    return ipm.run();
}

Solution solve_or_throw(const ConicProgram& prog, const std::string& what) {
    Solution sol = solve(prog);
    if (sol.status == SolveStatus::NumericalFailure) {
        SolveOptions relaxed;
        relaxed.feas_tol = 1e-4;
        relaxed.gap_tol = 1e-4;
        relaxed.accept_tol = 1e-4;
        sol = solve(prog, relaxed);
    }
    if (sol.status != SolveStatus::Optimal)
        throw SolverFailure(what + ": " + to_string(sol.status));
    return sol;
}

} // namespace flex
