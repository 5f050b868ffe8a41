#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sgw/errors.hpp"
#include "sgw/matrix.hpp"

namespace sgw {

inline constexpr double kMarginalTol = 1e-9;

// Transport plan: n x m nonnegative matrix with prescribed marginals.
class Coupling {
 public:
  Coupling(Matrix plan, std::vector<double> row_marginal, std::vector<double> col_marginal)
      : plan_(std::move(plan)),
        row_marginal_(std::move(row_marginal)),
        col_marginal_(std::move(col_marginal)) {
    if (plan_.rows() != row_marginal_.size() || plan_.cols() != col_marginal_.size())
      throw ShapeMismatch("Coupling: marginal lengths do not match plan shape");
    double total = 0.0;
    for (std::size_t i = 0; i < plan_.rows(); ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < plan_.cols(); ++j) {
        const double v = plan_(i, j);
        if (!(v >= 0.0)) throw InvalidArgument("Coupling: negative or non-finite entry");
        rs += v;
      }
      if (std::abs(rs - row_marginal_[i]) > kMarginalTol)
        throw InvalidArgument("Coupling: row sum deviates from row marginal");
      total += rs;
    }
    for (std::size_t j = 0; j < plan_.cols(); ++j) {
      double cs = 0.0;
      for (std::size_t i = 0; i < plan_.rows(); ++i) cs += plan_(i, j);
      if (std::abs(cs - col_marginal_[j]) > kMarginalTol)
        throw InvalidArgument("Coupling: column sum deviates from column marginal");
    }
    if (std::abs(total - 1.0) > kMarginalTol)
      throw InvalidArgument("Coupling: total mass is not 1");
  }

  std::size_t rows() const { return plan_.rows(); }
  std::size_t cols() const { return plan_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return plan_(i, j); }
  const Matrix& plan() const { return plan_; }
  const std::vector<double>& row_marginal() const { return row_marginal_; }
  const std::vector<double>& col_marginal() const { return col_marginal_; }

  // Uniform-marginal permutation coupling: plan[i][perm[i]] = 1/n.
  static Coupling permutation(const std::vector<std::size_t>& perm) {
    const std::size_t n = perm.size();
    Matrix plan(n, n);
    for (std::size_t i = 0; i < n; ++i) plan(i, perm[i]) = 1.0 / static_cast<double>(n);
    std::vector<double> marg(n, 1.0 / static_cast<double>(n));
    return Coupling(std::move(plan), marg, marg);
  }

  // Product coupling p q^T of two uniform marginals.
  static Coupling independent(std::size_t n, std::size_t m) {
    Matrix plan(n, m, 1.0 / static_cast<double>(n * m));
    std::vector<double> p(n, 1.0 / static_cast<double>(n));
    std::vector<double> q(m, 1.0 / static_cast<double>(m));
    return Coupling(std::move(plan), std::move(p), std::move(q));
  }

 private:
  Matrix plan_;
  std::vector<double> row_marginal_;
  std::vector<double> col_marginal_;
};

}  // namespace sgw
