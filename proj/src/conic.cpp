#include "flex/conic.hpp"

#include <cmath>

#include "flex/errors.hpp"

namespace flex {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

int ConicProgram::add_var(double lo, double hi, double obj) {
    int idx = num_vars();
    obj_.conservativeResize(idx + 1);
    lo_.conservativeResize(idx + 1);
    hi_.conservativeResize(idx + 1);
    obj_[idx] = obj;
    lo_[idx] = lo;
    hi_[idx] = hi;
    return idx;
}

void ConicProgram::set_bounds(int var, double lo, double hi) {
    lo_[var] = lo;
    hi_[var] = hi;
}

int ConicProgram::add_row(double lo, double hi) {
    row_lo_.push_back(lo);
    row_hi_.push_back(hi);
    return static_cast<int>(row_lo_.size()) - 1;
}

void ConicProgram::add_coeff(int row, int var, double coeff) {
    if (coeff != 0.0) lin_.emplace_back(row, var, coeff);
}

int ConicProgram::add_cone(int vec_dim) {
    Cone c;
    c.vec_dim = vec_dim;
    c.g = Vec::Zero(vec_dim);
    cones_.push_back(std::move(c));
    return static_cast<int>(cones_.size()) - 1;
}

void ConicProgram::cone_vector_entry(int cone, int row, int var, double coeff) {
    if (coeff != 0.0) cones_[cone].f.emplace_back(row, var, coeff);
}

void ConicProgram::cone_vector_offset(int cone, int row, double value) {
    cones_[cone].g[row] = value;
}

void ConicProgram::cone_scalar_entry(int cone, int var, double coeff) {
    if (coeff != 0.0) cones_[cone].c.emplace_back(var, coeff);
}

void ConicProgram::cone_scalar_offset(int cone, double value) {
    cones_[cone].d = value;
}

void ConicProgram::validate() const {
    const int n = num_vars();
    for (const auto& t : lin_) {
        if (t.col() < 0 || t.col() >= n) throw DimensionMismatch("linear coeff var index");
        if (t.row() < 0 || t.row() >= num_rows()) throw DimensionMismatch("linear coeff row index");
        if (!std::isfinite(t.value())) throw DimensionMismatch("non-finite linear coefficient");
    }
    for (int r = 0; r < num_rows(); ++r) {
        if (row_lo_[r] > row_hi_[r]) throw DimensionMismatch("row lower bound above upper");
    }
    for (const auto& c : cones_) {
        if (c.vec_dim <= 0) throw DimensionMismatch("cone with empty vector");
        for (const auto& t : c.f) {
            if (t.col() < 0 || t.col() >= n) throw DimensionMismatch("cone coeff var index");
            if (t.row() < 0 || t.row() >= c.vec_dim) throw DimensionMismatch("cone coeff row index");
        }
        for (const auto& [var, coeff] : c.c) {
            if (var < 0 || var >= n) throw DimensionMismatch("cone scalar var index");
            if (!std::isfinite(coeff)) throw DimensionMismatch("non-finite cone coefficient");
        }
    }
    for (int i = 0; i < n; ++i) {
        if (lo_[i] > hi_[i]) throw DimensionMismatch("variable lower bound above upper");
        if (!std::isfinite(obj_[i])) throw DimensionMismatch("non-finite objective coefficient");
    }
}

void ConicProgram::dump_lp(std::ostream& os, const std::string& name) const {
    os << "\\ " << name << "\n";
    os << (sense == Sense::Minimize ? "Minimize\n obj:" : "Maximize\n obj:");
    for (int i = 0; i < num_vars(); ++i) {
        if (obj_[i] != 0.0)
            os << (obj_[i] >= 0 ? " +" : " ") << obj_[i] << " x" << i;
    }
    os << "\nSubject To\n";
    std::vector<std::string> rows(num_rows());
    for (const auto& t : lin_) {
        rows[t.row()] += (t.value() >= 0 ? " +" : " ") + std::to_string(t.value()) +
                         " x" + std::to_string(t.col());
    }
    for (int r = 0; r < num_rows(); ++r) {
        if (row_lo_[r] == row_hi_[r]) {
            os << " c" << r << ":" << rows[r] << " = " << row_hi_[r] << "\n";
        } else {
            if (row_hi_[r] < kInf) os << " c" << r << "u:" << rows[r] << " <= " << row_hi_[r] << "\n";
            if (row_lo_[r] > -kInf) os << " c" << r << "l:" << rows[r] << " >= " << row_lo_[r] << "\n";
        }
    }
    for (std::size_t ci = 0; ci < cones_.size(); ++ci) {
        const auto& c = cones_[ci];
        os << "\\ soc q" << ci << ": ||F x + g|| <= c'x + d, dim " << c.vec_dim << ", d = " << c.d
           << "\n";
    }
    os << "Bounds\n";
    for (int i = 0; i < num_vars(); ++i) {
        os << " " << (lo_[i] <= -kInf ? std::string("-inf") : std::to_string(lo_[i])) << " <= x"
           << i << " <= " << (hi_[i] >= kInf ? std::string("+inf") : std::to_string(hi_[i]))
           << "\n";
    }
    os << "End\n";
}

} // namespace flex
