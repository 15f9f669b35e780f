#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwalk {

class LpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();
/// Absolute feasibility tolerance for constraints and bounds.
inline constexpr double kFeasTol = 1e-7;
/// Smallest tableau entry accepted as a pivot.
inline constexpr double kPivotTol = 1e-9;

enum class Sense { LessEqual, Equal, GreaterEqual };

struct Term {
    std::size_t var;
    double coef;
};

struct LpRow {
    std::vector<Term> terms;
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
};

/// max c.x + offset  s.t.  rows,  lower <= x <= upper.
struct LpModel {
    std::vector<double> objective;
    double objective_offset = 0.0;
    std::vector<LpRow> rows;
    std::vector<double> lower;
    std::vector<double> upper;

    LpModel() = default;
    explicit LpModel(std::size_t n, double lo = 0.0, double hi = kInf)
        : objective(n, 0.0), lower(n, lo), upper(n, hi) {}

    std::size_t var_count() const { return objective.size(); }
    std::size_t row_count() const { return rows.size(); }

    std::size_t add_variable(double lo, double hi, double cost = 0.0);
    void add_row(std::vector<Term> terms, Sense sense, double rhs);

    /// Throws LpError when a row references a missing variable, a value is
    /// non-finite where it must be finite, or a bound pair is inverted.
    void validate() const;

    bool operator==(const LpModel&) const = default;
};

inline bool operator==(const Term& a, const Term& b) { return a.var == b.var && a.coef == b.coef; }
inline bool operator==(const LpRow& a, const LpRow& b) {
    return a.terms == b.terms && a.sense == b.sense && a.rhs == b.rhs;
}

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(LpStatus s);

struct LpOutcome {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;   // set when Optimal
    double objective = 0.0;  // c.x + offset when Optimal
    std::size_t pivots = 0;

    bool optimal() const { return status == LpStatus::Optimal; }
};

/// Row-elimination kernel used by the tableau pivot.
enum class PivotKernel { Parallel, Serial };

struct LpLimits {
    /// 0 selects the default budget of 50 * (columns + rows) of the standard form.
    std::size_t max_pivots = 0;
    PivotKernel kernel = PivotKernel::Parallel;
};

/// Dense two-phase primal simplex with Bland's rule.
LpOutcome solve_lp(const LpModel& model, const LpLimits& limits = {});

struct SolutionCheck {
    bool feasible = false;
    double max_violation = 0.0;
    double objective = 0.0;
};

SolutionCheck verify_solution(const LpModel& model, std::span<const double> x,
                              double tol = kFeasTol);

/// Fixed-column MPS text (ROWS / COLUMNS / RHS / BOUNDS). Variables are named
/// C<j>, rows R<i>, the objective OBJ; OBJSENSE MAX is emitted since the
/// model maximizes. The objective offset is written as an RHS on OBJ with
/// negated sign, following the common convention.
void write_mps(const LpModel& model, std::ostream& out, const std::string& name = "RWALK");

}  // namespace rwalk
