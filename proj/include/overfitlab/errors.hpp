#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace overfitlab {

// Invalid configuration or preconditions violated by caller input.
// The CLI maps this family to exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computed result failed an internal consistency guard.
// The CLI maps this family to exit code 3.
class numeric_integrity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ODE state became non-finite; remembers how far the integration got.
class integration_divergence_error : public numeric_integrity_error {
 public:
  explicit integration_divergence_error(std::size_t steps)
      : numeric_integrity_error("integration reached a non-finite state after " +
                                std::to_string(steps) + " steps"),
        steps_(steps) {}
  std::size_t steps_reached() const noexcept { return steps_; }

 private:
  std::size_t steps_;
};

// Requested more parameters than training points.
class underdetermined_fit_error : public config_error {
 public:
  underdetermined_fit_error(int degree, std::size_t n)
      : config_error("degree " + std::to_string(degree) + " needs " +
                     std::to_string(degree + 1) + " parameters but the sample has only " +
                     std::to_string(n) + " points") {}
};

// Design matrix lost rank after pivoting; carries the numerical rank.
class rank_deficient_error : public numeric_integrity_error {
 public:
  rank_deficient_error(int degree, long rank)
      : numeric_integrity_error("rank-deficient design at degree " + std::to_string(degree) +
                                ": numerical rank " + std::to_string(rank) + " < " +
                                std::to_string(degree + 1)),
        rank_(rank) {}
  long numerical_rank() const noexcept { return rank_; }

 private:
  long rank_;
};

// A criterion needed log(train_mse) but the fit interpolated the data.
class degenerate_fit_error : public config_error {
 public:
  explicit degenerate_fit_error(int degree)
      : config_error("train_mse is 0 at degree " + std::to_string(degree) +
                     "; restrict the degree range below the interpolation point") {}
};

}  // namespace overfitlab
