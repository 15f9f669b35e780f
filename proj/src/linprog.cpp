#include "rwalk/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <omp.h>

namespace rwalk {

std::size_t LpModel::add_variable(double lo, double hi, double cost) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return objective.size() - 1;
}

void LpModel::add_row(std::vector<Term> terms, Sense sense, double rhs) {
    rows.push_back(LpRow{std::move(terms), sense, rhs});
}

void LpModel::validate() const {
    const std::size_t n = var_count();
    if (n == 0) throw LpError("lp: model has no variables");
    if (lower.size() != n || upper.size() != n) throw LpError("lp: bound vectors do not match variable count");
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(objective[j])) throw LpError("lp: non-finite objective coefficient");
        if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == kInf || upper[j] == -kInf)
            throw LpError("lp: invalid bound on variable " + std::to_string(j));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!std::isfinite(rows[i].rhs)) throw LpError("lp: non-finite rhs in row " + std::to_string(i));
        for (const Term& t : rows[i].terms) {
            if (t.var >= n) throw LpError("lp: row " + std::to_string(i) + " references missing variable");
            if (!std::isfinite(t.coef)) throw LpError("lp: non-finite coefficient in row " + std::to_string(i));
        }
    }
}

std::string to_string(LpStatus s) {
    switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterationLimit: return "IterationLimit";
    }
    return "?";
}

namespace {

// How an original variable maps onto nonnegative standard-form columns.
enum class VarKind { Fixed, Lower, Upper, Free };

struct VarMap {
    VarKind kind;
    double offset;        // lo for Lower, hi for Upper, value for Fixed
    std::size_t col = 0;  // first standard column
};

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols, PivotKernel kernel)
        : m_(rows), n_(cols), active_cols_(cols), a_(rows * cols, 0.0), b_(rows, 0.0),
          basis_(rows, 0), kernel_(kernel) {}

    double& at(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }

    std::vector<double>& rhs() { return b_; }
    std::vector<std::size_t>& basis() { return basis_; }
    void restrict_columns(std::size_t c) { active_cols_ = c; }
    std::size_t active_columns() const { return active_cols_; }

    void pivot(std::size_t r, std::size_t e, std::vector<double>& cost, double& value) {
        const std::size_t nc = active_cols_;
        double* prow = &a_[r * n_];
        const double inv = 1.0 / prow[e];
        for (std::size_t j = 0; j < nc; ++j) prow[j] *= inv;
        prow[e] = 1.0;
        b_[r] *= inv;
        nz_.clear();
        for (std::size_t j = 0; j < nc; ++j)
            if (prow[j] != 0.0) nz_.push_back(j);

        if (kernel_ == PivotKernel::Parallel)
            eliminate_parallel(r, e);
        else
            eliminate_serial(r, e);

        const double f = cost[e];
        if (f != 0.0) {
            for (std::size_t j : nz_) cost[j] -= f * prow[j];
            cost[e] = 0.0;
            value -= f * b_[r];
        }
        basis_[r] = e;
    }

private:
    // Only the pivot row's nonzero columns change.
    void eliminate_row(std::size_t i, std::size_t r, std::size_t e) {
        double* row = &a_[i * n_];
        const double f = row[e];
        if (f == 0.0) return;
        const double* prow = &a_[r * n_];
        for (std::size_t j : nz_) row[j] -= f * prow[j];
        row[e] = 0.0;
        b_[i] -= f * b_[r];
    }

    void eliminate_serial(std::size_t r, std::size_t e) {
        for (std::size_t i = 0; i < m_; ++i)
            if (i != r) eliminate_row(i, r, e);
    }

    void eliminate_parallel(std::size_t r, std::size_t e) {
        const auto m = static_cast<std::int64_t>(m_);
#pragma omp parallel for schedule(static) if (m_ * nz_.size() > 40000)
        for (std::int64_t i = 0; i < m; ++i)
            if (static_cast<std::size_t>(i) != r) eliminate_row(static_cast<std::size_t>(i), r, e);
    }

    std::size_t m_, n_, active_cols_;
    std::vector<double> a_;
    std::vector<double> b_;
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> nz_;
    PivotKernel kernel_;
};

enum class PhaseResult { Optimal, Unbounded, IterationLimit };

// Maximizes the objective encoded in `cost` (reduced costs; negative entries
// improve) over columns [0, enter_limit). Bland's rule on both choices.
PhaseResult run_phase(Tableau& tab, std::vector<double>& cost, double& value,
                      std::size_t enter_limit, std::size_t& pivots, std::size_t max_pivots) {
    auto& b = tab.rhs();
    auto& basis = tab.basis();
    while (true) {
        std::size_t enter = enter_limit;
        for (std::size_t j = 0; j < enter_limit; ++j) {
            if (cost[j] < -kPivotTol) {
                enter = j;
                break;
            }
        }
        if (enter == enter_limit) return PhaseResult::Optimal;
        if (pivots >= max_pivots) return PhaseResult::IterationLimit;

        std::size_t leave = tab.rows();
        double best = kInf;
        for (std::size_t i = 0; i < tab.rows(); ++i) {
            const double a = tab.at(i, enter);
            if (a <= kPivotTol) continue;
            const double ratio = std::max(0.0, b[i]) / a;
            if (leave == tab.rows() || ratio < best - 1e-12 * (1.0 + best)) {
                best = ratio;
                leave = i;
            } else if (ratio <= best + 1e-12 * (1.0 + best) && basis[i] < basis[leave]) {
                leave = i;
                best = std::min(best, ratio);
            }
        }
        if (leave == tab.rows()) return PhaseResult::Unbounded;
        tab.pivot(leave, enter, cost, value);
        ++pivots;
    }
}

}  // namespace

LpOutcome solve_lp(const LpModel& model, const LpLimits& limits) {
    model.validate();
    const std::size_t n = model.var_count();

    // Map original variables onto nonnegative columns.
    std::vector<VarMap> vars(n);
    std::size_t cols = 0;
    std::size_t bound_rows = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = model.lower[j], hi = model.upper[j];
        if (lo > hi) {
            LpOutcome out;
            out.status = LpStatus::Infeasible;
            return out;
        }
        if (std::isfinite(lo) && lo == hi) {
            vars[j] = {VarKind::Fixed, lo, 0};
        } else if (std::isfinite(lo)) {
            vars[j] = {VarKind::Lower, lo, cols++};
            if (std::isfinite(hi)) ++bound_rows;
        } else if (std::isfinite(hi)) {
            vars[j] = {VarKind::Upper, hi, cols++};
        } else {
            vars[j] = {VarKind::Free, 0.0, cols};
            cols += 2;
        }
    }
    const std::size_t structural = cols;

    // Standard-form rows: original rows then upper-bound rows.
    struct StdRow {
        std::vector<Term> terms;  // over structural columns
        Sense sense;
        double rhs;
    };
    std::vector<StdRow> rows;
    rows.reserve(model.row_count() + bound_rows);
    for (const LpRow& row : model.rows) {
        StdRow sr{{}, row.sense, row.rhs};
        for (const Term& t : row.terms) {
            const VarMap& v = vars[t.var];
            switch (v.kind) {
            case VarKind::Fixed: sr.rhs -= t.coef * v.offset; break;
            case VarKind::Lower:
                sr.rhs -= t.coef * v.offset;
                sr.terms.push_back({v.col, t.coef});
                break;
            case VarKind::Upper:
                sr.rhs -= t.coef * v.offset;
                sr.terms.push_back({v.col, -t.coef});
                break;
            case VarKind::Free:
                sr.terms.push_back({v.col, t.coef});
                sr.terms.push_back({v.col + 1, -t.coef});
                break;
            }
        }
        if (sr.rhs < 0.0) {
            sr.rhs = -sr.rhs;
            for (Term& t : sr.terms) t.coef = -t.coef;
            if (sr.sense == Sense::LessEqual)
                sr.sense = Sense::GreaterEqual;
            else if (sr.sense == Sense::GreaterEqual)
                sr.sense = Sense::LessEqual;
        }
        rows.push_back(std::move(sr));
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (vars[j].kind == VarKind::Lower && std::isfinite(model.upper[j]))
            rows.push_back({{{vars[j].col, 1.0}}, Sense::LessEqual, model.upper[j] - model.lower[j]});
    }

    // Slack/surplus columns, then artificials.
    std::size_t slack_cols = 0, art_cols = 0;
    for (const StdRow& r : rows) {
        if (r.sense != Sense::Equal) ++slack_cols;
        if (r.sense != Sense::LessEqual) ++art_cols;
    }
    const std::size_t first_art = structural + slack_cols;
    const std::size_t total = first_art + art_cols;
    const std::size_t m = rows.size();

    LpOutcome out;

    Tableau tab(m, std::max<std::size_t>(total, 1), limits.kernel);
    std::size_t next_slack = structural, next_art = first_art;
    for (std::size_t i = 0; i < m; ++i) {
        const StdRow& r = rows[i];
        for (const Term& t : r.terms) tab.at(i, t.var) += t.coef;
        tab.rhs()[i] = r.rhs;
        if (r.sense == Sense::LessEqual) {
            tab.at(i, next_slack) = 1.0;
            tab.basis()[i] = next_slack++;
        } else {
            if (r.sense == Sense::GreaterEqual) tab.at(i, next_slack++) = -1.0;
            tab.at(i, next_art) = 1.0;
            tab.basis()[i] = next_art++;
        }
    }

    const std::size_t max_pivots = limits.max_pivots ? limits.max_pivots : 50 * (total + m);
    std::size_t pivots = 0;

    // Phase 1: maximize -sum(artificials).
    if (art_cols > 0) {
        std::vector<double> cost(total, 0.0);
        double value = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (tab.basis()[i] < first_art) continue;
            for (std::size_t j = 0; j < first_art; ++j) cost[j] -= tab.at(i, j);
            value -= tab.rhs()[i];
        }
        const PhaseResult pr = run_phase(tab, cost, value, first_art, pivots, max_pivots);
        out.pivots = pivots;
        if (pr == PhaseResult::IterationLimit) {
            out.status = LpStatus::IterationLimit;
            return out;
        }
        if (value < -kFeasTol) {
            out.status = LpStatus::Infeasible;
            return out;
        }
        // Drive remaining zero-level artificials out of the basis; rows with no
        // usable entry are redundant and keep their artificial at zero.
        for (std::size_t i = 0; i < m; ++i) {
            if (tab.basis()[i] < first_art) continue;
            for (std::size_t j = 0; j < first_art; ++j) {
                if (std::abs(tab.at(i, j)) > kPivotTol) {
                    tab.pivot(i, j, cost, value);
                    ++pivots;
                    break;
                }
            }
        }
        tab.restrict_columns(first_art);
    }

    // Phase 2: the model objective over standard columns.
    std::vector<double> cost(total, 0.0);
    double value = model.objective_offset;
    for (std::size_t j = 0; j < n; ++j) {
        const double c = model.objective[j];
        const VarMap& v = vars[j];
        switch (v.kind) {
        case VarKind::Fixed: value += c * v.offset; break;
        case VarKind::Lower:
            value += c * v.offset;
            cost[v.col] = -c;
            break;
        case VarKind::Upper:
            value += c * v.offset;
            cost[v.col] = c;
            break;
        case VarKind::Free:
            cost[v.col] = -c;
            cost[v.col + 1] = c;
            break;
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t bcol = tab.basis()[i];
        const double f = cost[bcol];
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < first_art; ++j) cost[j] -= f * tab.at(i, j);
        cost[bcol] = 0.0;
        value -= f * tab.rhs()[i];
    }
    const PhaseResult pr = run_phase(tab, cost, value, first_art, pivots, max_pivots);
    out.pivots = pivots;
    if (pr == PhaseResult::IterationLimit) {
        out.status = LpStatus::IterationLimit;
        return out;
    }
    if (pr == PhaseResult::Unbounded) {
        out.status = LpStatus::Unbounded;
        return out;
    }

    std::vector<double> s(total, 0.0);
    for (std::size_t i = 0; i < m; ++i) s[tab.basis()[i]] = std::max(0.0, tab.rhs()[i]);
    out.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const VarMap& v = vars[j];
        switch (v.kind) {
        case VarKind::Fixed: out.x[j] = v.offset; break;
        case VarKind::Lower: out.x[j] = v.offset + s[v.col]; break;
        case VarKind::Upper: out.x[j] = v.offset - s[v.col]; break;
        case VarKind::Free: out.x[j] = s[v.col] - s[v.col + 1]; break;
        }
    }
    out.status = LpStatus::Optimal;
    out.objective = model.objective_offset;
    for (std::size_t j = 0; j < n; ++j) out.objective += model.objective[j] * out.x[j];
    return out;
}

SolutionCheck verify_solution(const LpModel& model, std::span<const double> x, double tol) {
    if (x.size() != model.var_count())
        throw LpError("verify_solution: point has " + std::to_string(x.size()) + " entries, model has " +
                      std::to_string(model.var_count()) + " variables");
    SolutionCheck check;
    double worst = 0.0;
    check.objective = model.objective_offset;
    for (std::size_t j = 0; j < x.size(); ++j) {
        check.objective += model.objective[j] * x[j];
        worst = std::max({worst, model.lower[j] - x[j], x[j] - model.upper[j]});
    }
    for (const LpRow& row : model.rows) {
        double lhs = 0.0;
        for (const Term& t : row.terms) lhs += t.coef * x[t.var];
        const double diff = lhs - row.rhs;
        switch (row.sense) {
        case Sense::LessEqual: worst = std::max(worst, diff); break;
        case Sense::GreaterEqual: worst = std::max(worst, -diff); break;
        case Sense::Equal: worst = std::max(worst, std::abs(diff)); break;
        }
    }
    check.max_violation = worst;
    check.feasible = worst <= tol;
    return check;
}

void write_mps(const LpModel& model, std::ostream& out, const std::string& name) {
    auto num = [](double v) {
        std::ostringstream ss;
        ss << std::setprecision(17) << v;
        return ss.str();
    };
    out << "NAME          " << name << "\n";
    out << "OBJSENSE\n    MAX\n";
    out << "ROWS\n N  OBJ\n";
    for (std::size_t i = 0; i < model.row_count(); ++i) {
        const char* s = model.rows[i].sense == Sense::LessEqual ? "L"
                        : model.rows[i].sense == Sense::Equal   ? "E"
                                                                : "G";
        out << " " << s << "  R" << i << "\n";
    }
    // Column-major view of the rows.
    std::vector<std::vector<std::pair<std::size_t, double>>> by_col(model.var_count());
    for (std::size_t i = 0; i < model.row_count(); ++i)
        for (const Term& t : model.rows[i].terms) by_col[t.var].push_back({i, t.coef});
    out << "COLUMNS\n";
    for (std::size_t j = 0; j < model.var_count(); ++j) {
        const std::string col = "C" + std::to_string(j);
        if (model.objective[j] != 0.0)
            out << "    " << std::left << std::setw(10) << col << "OBJ       " << num(model.objective[j]) << "\n";
        for (const auto& [i, v] : by_col[j])
            out << "    " << std::left << std::setw(10) << col << std::setw(10) << ("R" + std::to_string(i))
                << num(v) << "\n";
        if (model.objective[j] == 0.0 && by_col[j].empty())
            out << "    " << std::left << std::setw(10) << col << "OBJ       0\n";
    }
    out << "RHS\n";
    if (model.objective_offset != 0.0)
        out << "    RHS       OBJ       " << num(-model.objective_offset) << "\n";
    for (std::size_t i = 0; i < model.row_count(); ++i)
        if (model.rows[i].rhs != 0.0)
            out << "    RHS       " << std::left << std::setw(10) << ("R" + std::to_string(i))
                << num(model.rows[i].rhs) << "\n";
    out << "BOUNDS\n";
    for (std::size_t j = 0; j < model.var_count(); ++j) {
        const std::string col = "C" + std::to_string(j);
        const double lo = model.lower[j], hi = model.upper[j];
        if (lo == hi) {
            out << " FX BND       " << std::left << std::setw(10) << col << num(lo) << "\n";
            continue;
        }
        if (lo == -kInf && hi == kInf) {
            out << " FR BND       " << col << "\n";
            continue;
        }
        if (lo == -kInf)
            out << " MI BND       " << col << "\n";
        else if (lo != 0.0)
            out << " LO BND       " << std::left << std::setw(10) << col << num(lo) << "\n";
        if (hi != kInf) out << " UP BND       " << std::left << std::setw(10) << col << num(hi) << "\n";
    }
    out << "ENDATA\n";
}

}  // namespace rwalk
