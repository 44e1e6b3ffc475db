#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mmot::lp {

// Standard-form linear program: minimize c^T x subject to A x = b, x >= 0.
// A is stored column-wise (compressed sparse columns).
class Problem {
public:
    explicit Problem(std::vector<double> rhs) : rhs_(std::move(rhs)) { col_ptr_.push_back(0); }

    std::size_t add_column(double cost, std::initializer_list<std::pair<int, double>> entries) {
        return add_column(cost, entries.begin(), entries.end());
    }

    template <class It>
    std::size_t add_column(double cost, It first, It last) {
        for (; first != last; ++first) {
            const auto [row, value] = *first;
            if (row < 0 || static_cast<std::size_t>(row) >= rhs_.size()) {
                throw std::out_of_range("lp::Problem: row index out of range");
            }
            row_.push_back(row);
            value_.push_back(value);
        }
        col_ptr_.push_back(row_.size());
        cost_.push_back(cost);
        return cost_.size() - 1;
    }

    std::size_t rows() const { return rhs_.size(); }
    std::size_t cols() const { return cost_.size(); }
    const std::vector<double>& rhs() const { return rhs_; }
    const std::vector<double>& cost() const { return cost_; }

    template <class F>
    void for_each_entry(std::size_t j, F&& f) const {
        for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) f(row_[k], value_[k]);
    }

    double column_dot(std::size_t j, const Eigen::VectorXd& y) const {
        double s = 0.0;
        for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) s += value_[k] * y(row_[k]);
        return s;
    }

private:
    std::vector<double> rhs_;
    std::vector<double> cost_;
    std::vector<std::size_t> col_ptr_;
    std::vector<int> row_;
    std::vector<double> value_;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit, singular_basis };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::iteration_limit: return "iteration_limit";
        case Status::singular_basis: return "singular_basis";
    }
    return "unknown";
}

struct Options {
    double optimality_tolerance = 1e-10;  // relative to max |c|
    double feasibility_tolerance = 1e-9;
    double pivot_tolerance = 1e-9;
    std::size_t max_iterations = 0;  // 0: 50 * (rows + cols)
    std::size_t refactor_interval = 64;
};

// Optimal x together with the dual certificate y (A^T y <= c, b^T y = c^T x).
struct Solution {
    Status status = Status::singular_basis;
    std::vector<double> x;
    std::vector<double> y;
    double objective = 0.0;
    double dual_objective = 0.0;
    double max_dual_violation = 0.0;   // max_j (A_j^T y - c_j)^+
    double max_primal_residual = 0.0;  // ||A x - b||_inf
    std::size_t iterations = 0;

    double duality_gap() const { return std::abs(objective - dual_objective); }
};

// Two-phase revised simplex with a dense basis inverse, Dantzig partial pricing and a
// Bland fallback after long degenerate runs. Rows with negative right-hand side are
// sign-flipped internally; duals are reported for the original rows.
class RevisedSimplex {
public:
    explicit RevisedSimplex(const Problem& problem, Options options = {})
        : p_(problem), opt_(options), m_(problem.rows()), n_(problem.cols()) {}

    Solution solve() {
        Solution out;
        sign_.assign(m_, 1.0);
        b_ = Eigen::VectorXd(static_cast<Eigen::Index>(m_));
        for (std::size_t i = 0; i < m_; ++i) {
            if (p_.rhs()[i] < 0) sign_[i] = -1.0;
            b_(idx(i)) = sign_[i] * p_.rhs()[i];
        }
        cost_scale_ = 1.0;
        for (double c : p_.cost()) cost_scale_ = std::max(cost_scale_, std::abs(c));
        const std::size_t limit = opt_.max_iterations ? opt_.max_iterations : 50 * (m_ + n_) + 1000;

        // Artificial j = n_ + i is the unit column of row i.
        basis_.resize(m_);
        is_basic_.assign(n_ + m_, false);
        for (std::size_t i = 0; i < m_; ++i) {
            basis_[i] = n_ + i;
            is_basic_[n_ + i] = true;
        }
        binv_ = Eigen::MatrixXd::Identity(idx(m_), idx(m_));
        xb_ = b_;

        phase_ = 1;
        Status s = iterate(limit, out.iterations);
        if (s != Status::optimal) return finish(out, s);
        double infeas = 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_) infeas += xb_(idx(i));
        double bscale = 1.0;
        for (std::size_t i = 0; i < m_; ++i) bscale = std::max(bscale, std::abs(b_(idx(i))));
        if (infeas > opt_.feasibility_tolerance * bscale) return finish(out, Status::infeasible);
        drive_out_artificials();

        phase_ = 2;
        s = iterate(limit, out.iterations);
        return finish(out, s);
    }

private:
    static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

    double phase_cost(std::size_t j) const {
        if (phase_ == 1) return j >= n_ ? 1.0 : 0.0;
        return j >= n_ ? 0.0 : p_.cost()[j];
    }

    // Column j of the sign-adjusted constraint matrix.
    Eigen::VectorXd column(std::size_t j) const {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(idx(m_));
        if (j >= n_) {
            a(idx(j - n_)) = 1.0;
        } else {
            p_.for_each_entry(j, [&](int r, double v) { a(r) += sign_[static_cast<std::size_t>(r)] * v; });
        }
        return a;
    }

    double reduced_cost(std::size_t j, const Eigen::VectorXd& y) const {
        if (j >= n_) return phase_cost(j) - y(idx(j - n_));
        double s = 0.0;
        p_.for_each_entry(j, [&](int r, double v) { s += sign_[static_cast<std::size_t>(r)] * v * y(r); });
        return phase_cost(j) - s;
    }

    Eigen::VectorXd duals() const {
        Eigen::VectorXd cb(idx(m_));
        for (std::size_t i = 0; i < m_; ++i) cb(idx(i)) = phase_cost(basis_[i]);
        return binv_.transpose() * cb;
    }

    bool refactor() {
        Eigen::MatrixXd B(idx(m_), idx(m_));
        for (std::size_t i = 0; i < m_; ++i) B.col(idx(i)) = column(basis_[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        const double det = std::abs(lu.determinant());
        if (!(det > 0.0) || !std::isfinite(det)) return false;
        binv_ = lu.inverse();
        xb_ = binv_ * b_;
        // One step of iterative refinement.
        xb_ += binv_ * (b_ - B * xb_);
        for (std::size_t i = 0; i < m_; ++i)
            if (xb_(idx(i)) < 0.0 && xb_(idx(i)) > -opt_.feasibility_tolerance) xb_(idx(i)) = 0.0;
        since_refactor_ = 0;
        return binv_.allFinite();
    }

    // Entering column (or npos) by partial Dantzig pricing, or smallest index under Bland.
    std::size_t price(const Eigen::VectorXd& y, bool bland) {
        const double tol = opt_.optimality_tolerance * cost_scale_;
        const std::size_t total = phase_ == 1 ? n_ + m_ : n_;
        if (bland) {
            for (std::size_t j = 0; j < total; ++j)
                if (!is_basic_[j] && reduced_cost(j, y) < -tol) return j;
            return npos;
        }
        const std::size_t block = std::max<std::size_t>(2000, total / 8);
        std::size_t best = npos;
        double best_val = -tol;
        std::size_t scanned = 0;
        std::size_t j = price_start_ % total;
        while (scanned < total) {
            const std::size_t end = std::min(scanned + block, total);
            for (; scanned < end; ++scanned, j = (j + 1 == total ? 0 : j + 1)) {
                if (is_basic_[j]) continue;
                const double d = reduced_cost(j, y);
                if (d < best_val) {
                    best_val = d;
                    best = j;
                }
            }
            if (best != npos) break;
        }
        price_start_ = j;
        return best;
    }

    void pivot(std::size_t row, std::size_t entering, const Eigen::VectorXd& w) {
        const double theta = xb_(idx(row)) / w(idx(row));
        xb_ -= theta * w;
        xb_(idx(row)) = theta;
        const Eigen::RowVectorXd prow = binv_.row(idx(row)) / w(idx(row));
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == row) continue;
            const double f = w(idx(i));
            if (f != 0.0) binv_.row(idx(i)) -= f * prow;
        }
        binv_.row(idx(row)) = prow;
        is_basic_[basis_[row]] = false;
        basis_[row] = entering;
        is_basic_[entering] = true;
        ++since_refactor_;
    }

    Status iterate(std::size_t limit, std::size_t& iterations) {
        std::size_t degenerate_run = 0;
        bool bland = false;
        while (true) {
            if (iterations >= limit) return Status::iteration_limit;
            if (since_refactor_ >= opt_.refactor_interval && !refactor()) return Status::singular_basis;
            const Eigen::VectorXd y = duals();
            const std::size_t q = price(y, bland);
            if (q == npos) {
                if (since_refactor_ > 0) {
                    // Confirm optimality on a fresh factorization.
                    if (!refactor()) return Status::singular_basis;
                    if (price(duals(), true) != npos) continue;
                }
                return Status::optimal;
            }
            const Eigen::VectorXd w = binv_ * column(q);
            std::size_t row = npos;
            double best_ratio = std::numeric_limits<double>::infinity();
            double best_pivot = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double wi = w(idx(i));
                // Artificials stuck in redundant rows must stay at zero in phase 2.
                if (phase_ == 2 && basis_[i] >= n_ && std::abs(wi) > opt_.pivot_tolerance) {
                    if (row == npos || best_ratio > 0.0 || std::abs(wi) > best_pivot) {
                        row = i;
                        best_ratio = 0.0;
                        best_pivot = std::abs(wi);
                    }
                    continue;
                }
                if (wi <= opt_.pivot_tolerance) continue;
                const double ratio = std::max(0.0, xb_(idx(i))) / wi;
                const bool better =
                    ratio < best_ratio - 1e-12 ||
                    (ratio <= best_ratio + 1e-12 &&
                     (bland ? (row == npos || basis_[i] < basis_[row]) : wi > best_pivot));
                if (better) {
                    row = i;
                    best_ratio = ratio;
                    best_pivot = std::abs(wi);
                }
            }
            if (row == npos) return Status::unbounded;
            if (basis_[row] >= n_ && phase_ == 2) xb_(idx(row)) = 0.0;
            if (best_ratio <= 1e-14) {
                if (++degenerate_run > 50) bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }
            if (xb_(idx(row)) < 0.0) xb_(idx(row)) = 0.0;
            pivot(row, q, w);
            ++iterations;
        }
    }

    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            const Eigen::RowVectorXd r = binv_.row(idx(i));
            for (std::size_t j = 0; j < n_; ++j) {
                if (is_basic_[j]) continue;
                const double v = r * column(j);
                if (std::abs(v) > 1e-7) {
                    const Eigen::VectorXd w = binv_ * column(j);
                    xb_(idx(i)) = 0.0;
                    pivot(i, j, w);
                    break;
                }
            }
        }
        refactor();
    }

    Solution& finish(Solution& out, Status s) {
        out.status = s;
        if (s != Status::optimal) return out;
        out.x.assign(n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) out.x[basis_[i]] = std::max(0.0, xb_(idx(i)));
        }
        const Eigen::VectorXd y = duals();
        out.y.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) out.y[i] = sign_[i] * y(idx(i));

        long double obj = 0.0L, dual = 0.0L;
        for (std::size_t j = 0; j < n_; ++j) obj += static_cast<long double>(p_.cost()[j]) * out.x[j];
        for (std::size_t i = 0; i < m_; ++i) dual += static_cast<long double>(p_.rhs()[i]) * out.y[i];
        out.objective = static_cast<double>(obj);
        out.dual_objective = static_cast<double>(dual);

        Eigen::VectorXd yv(idx(m_));
        for (std::size_t i = 0; i < m_; ++i) yv(idx(i)) = out.y[i];
        std::vector<double> ax(m_, 0.0);
        double viol = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            viol = std::max(viol, p_.column_dot(j, yv) - p_.cost()[j]);
            p_.for_each_entry(j, [&](int r, double v) { ax[static_cast<std::size_t>(r)] += v * out.x[j]; });
        }
        out.max_dual_violation = viol;
        double res = 0.0;
        for (std::size_t i = 0; i < m_; ++i) res = std::max(res, std::abs(ax[i] - p_.rhs()[i]));
        out.max_primal_residual = res;
        return out;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    const Problem& p_;
    Options opt_;
    std::size_t m_;
    std::size_t n_;
    int phase_ = 1;
    double cost_scale_ = 1.0;
    std::vector<double> sign_;
    Eigen::VectorXd b_;
    Eigen::VectorXd xb_;
    Eigen::MatrixXd binv_;
    std::vector<std::size_t> basis_;
    std::vector<bool> is_basic_;
    std::size_t since_refactor_ = 0;
    std::size_t price_start_ = 0;
};

inline Solution solve(const Problem& problem, Options options = {}) {
    return RevisedSimplex(problem, options).solve();
}

}  // namespace mmot::lp
