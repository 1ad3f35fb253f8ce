#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bfln::linalg {

struct SymmetricEigen {
  std::size_t n = 0;
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // row-major n x n, column j pairs with values[j]
  std::size_t sweeps = 0;
  bool converged = false;

  double vector(std::size_t row, std::size_t col) const { return vectors[row * n + col]; }
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// `tolerance` or `max_sweeps` full sweeps have run. Input is row-major and
// must be symmetric. Equal eigenvalues keep their diagonal order.
SymmetricEigen jacobi_eigen(std::span<const double> matrix, std::size_t n, double tolerance = 1e-10,
                            std::size_t max_sweeps = 100);

}  // namespace bfln::linalg
