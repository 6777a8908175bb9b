#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "flex/linalg.hpp"

namespace flex {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(SolveStatus s);

/// Linear/second-order-cone program container. Linear rows are two-sided
/// (lo == hi makes an equality); cones read "norm of an affine vector
/// expression bounded by an affine scalar expression".
class ConicProgram {
public:
    struct Cone {
        // vector rows: F x + g, given as triplets (row-in-cone, var, coeff)
        std::vector<Eigen::Triplet<double>> f;
        Vec g;
        // scalar side: c'x + d
        std::vector<std::pair<int, double>> c;
        double d = 0.0;
        int vec_dim = 0;
    };

    Sense sense = Sense::Minimize;

    int add_var(double lo = -kInf, double hi = kInf, double obj = 0.0);
    int num_vars() const { return static_cast<int>(obj_.size()); }

    void set_objective(int var, double coeff) { obj_[var] = coeff; }
    void add_objective_constant(double c) { obj_const_ += c; }
    void set_bounds(int var, double lo, double hi);

    /// Adds a two-sided linear row; fill coefficients with add_coeff.
    int add_row(double lo, double hi);
    void add_coeff(int row, int var, double coeff);

    /// Starts a cone with the given vector dimension; returns its index.
    int add_cone(int vec_dim);
    void cone_vector_entry(int cone, int row, int var, double coeff);
    void cone_vector_offset(int cone, int row, double value);
    void cone_scalar_entry(int cone, int var, double coeff);
    void cone_scalar_offset(int cone, double value);

    const Vec& objective() const { return obj_; }
    double objective_constant() const { return obj_const_; }
    const Vec& lower() const { return lo_; }
    const Vec& upper() const { return hi_; }
    int num_rows() const { return static_cast<int>(row_lo_.size()); }
    const std::vector<double>& row_lower() const { return row_lo_; }
    const std::vector<double>& row_upper() const { return row_hi_; }
    const std::vector<Eigen::Triplet<double>>& row_coeffs() const { return lin_; }
    const std::vector<Cone>& cones() const { return cones_; }

    /// Throws DimensionMismatch on malformed contents.
    void validate() const;

    /// Debug dump in LP-format style text; cones are written as comment
    /// blocks since the format has no conic section.
    void dump_lp(std::ostream& os, const std::string& name = "program") const;

private:
    Vec obj_ = Vec::Zero(0);
    double obj_const_ = 0.0;
    Vec lo_ = Vec::Zero(0), hi_ = Vec::Zero(0);
    std::vector<double> row_lo_, row_hi_;
    std::vector<Eigen::Triplet<double>> lin_;
    std::vector<Cone> cones_;
};

struct SolveStats {
    int iterations = 0;
    double wall_time_s = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
};

struct Solution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Vec x;  // present iff Optimal
    double objective = std::numeric_limits<double>::quiet_NaN();
    SolveStats stats;
};

struct SolveOptions {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    double accept_tol = 1e-6;  // weakest residual level still reported Optimal
    int max_iter = 120;
    bool verbose = false;
};

Solution solve(const ConicProgram& prog, const SolveOptions& opts = {});

/// One tight attempt, then a single retry at relaxed (1e-4) tolerance.
/// Throws SolverFailure if both fail or the program is infeasible/unbounded.
Solution solve_or_throw(const ConicProgram& prog, const std::string& what);

} // namespace flex
