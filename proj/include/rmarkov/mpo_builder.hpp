#pragma once

#include <utility>
#include <vector>

#include "rmarkov/mps.hpp"

namespace rmarkov {

/// coefficient * (product of local operators), identity on unlisted sites.
struct OperatorTerm {
  Complex coefficient{1.0, 0.0};
  std::vector<std::pair<std::size_t, DenseTensor>> ops;
};

/// Finite-state-machine MPO for a sum of product terms on an open chain.
///
/// Bond states are "nothing placed yet", "term finished", and one state per
/// distinct remaining suffix (site, operator) of a partially placed term.
/// Terms that share a suffix share the state, so translation-invariant local
/// terms cost O(range) bond states and a periodic wrap term costs one string
/// state per bond it crosses. Coefficients are applied at a term's first site.
MatrixProductOperator build_mpo(std::size_t length, std::size_t phys_dim, std::vector<OperatorTerm> terms);

/// Single-site Pauli matrices as 2 x 2 tensors.
namespace pauli {
DenseTensor identity();
DenseTensor x();
DenseTensor y();
DenseTensor z();
}  // namespace pauli

}  // namespace rmarkov
