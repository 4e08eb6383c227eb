#include "rmarkov/mpo_builder.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace rmarkov {

namespace {

using Suffix = std::vector<std::pair<std::size_t, std::size_t>>;  // (site, op id)

struct Term {
  Complex coefficient;
  Suffix ops;
  std::size_t first() const { return ops.front().first; }
  std::size_t last() const { return ops.back().first; }
};

bool same_entries(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

// State labels on one bond: N = nothing placed, F = finished, else a suffix.
struct BondStates {
  bool has_start = false;
  bool has_done = false;
  std::map<Suffix, std::size_t> suffix_index;
  std::size_t start = 0, done = 0, count = 0;

  void finalize() {
    std::size_t next = 0;
    if (has_start) start = next++;
    for (auto& [key, idx] : suffix_index) idx = next++;
    if (has_done) done = next++;
    count = next;
  }
};

}  // namespace

MatrixProductOperator build_mpo(std::size_t length, std::size_t phys_dim, std::vector<OperatorTerm> terms) {
  if (length == 0 || phys_dim == 0) throw std::invalid_argument("build_mpo: empty chain");
  if (terms.empty()) throw std::invalid_argument("build_mpo: no terms");

  std::vector<DenseTensor> op_table;
  auto op_id = [&](const DenseTensor& op) {
    for (std::size_t i = 0; i < op_table.size(); ++i)
      if (same_entries(op_table[i], op)) return i;
    op_table.push_back(op);
    return op_table.size() - 1;
  };

  std::vector<Term> parsed;
  for (auto& t : terms) {
    if (t.ops.empty()) throw std::invalid_argument("build_mpo: term without operators");
    std::sort(t.ops.begin(), t.ops.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Term term{t.coefficient, {}};
    for (std::size_t i = 0; i < t.ops.size(); ++i) {
      const auto& [site, op] = t.ops[i];
      if (site >= length) throw std::out_of_range("build_mpo: operator site out of range");
      if (i > 0 && t.ops[i - 1].first == site) throw std::invalid_argument("build_mpo: repeated site in term");
      if (op.rank() != 2 || op.extent(0) != phys_dim || op.extent(1) != phys_dim)
        throw std::invalid_argument("build_mpo: operator dimension mismatch");
      term.ops.emplace_back(site, op_id(op));
    }
    parsed.push_back(std::move(term));
  }

  // bonds[b] sits to the left of site b; bonds[length] is the right boundary.
  std::vector<BondStates> bonds(length + 1);
  bonds[0].has_start = true;
  bonds[length].has_done = true;
  for (std::size_t b = 1; b < length; ++b) {
    auto& bond = bonds[b];
    for (const auto& t : parsed) {
      if (t.first() >= b) bond.has_start = true;
      if (t.last() < b) bond.has_done = true;
      if (t.first() < b && t.last() >= b) {
        Suffix rest;
        for (const auto& e : t.ops)
          if (e.first >= b) rest.push_back(e);
        bond.suffix_index.emplace(std::move(rest), 0);
      }
    }
  }
  for (auto& b : bonds) b.finalize();

  const DenseTensor id = DenseTensor::identity(phys_dim);
  MatrixProductOperator mpo;
  mpo.phys_dim = phys_dim;
  for (std::size_t j = 0; j < length; ++j) {
    const BondStates& left = bonds[j];
    const BondStates& right = bonds[j + 1];
    DenseTensor w({left.count, phys_dim, phys_dim, right.count});
    auto add = [&](std::size_t from, std::size_t to, const DenseTensor& op, Complex coef) {
      for (std::size_t o = 0; o < phys_dim; ++o)
        for (std::size_t i = 0; i < phys_dim; ++i) w(from, o, i, to) += coef * op(o, i);
    };
    auto route = [&](const Suffix& rest) {
      if (rest.empty()) return right.done;
      return right.suffix_index.at(rest);
    };

    if (left.has_start) {
      if (right.has_start) add(left.start, right.start, id, 1.0);
      for (const auto& t : parsed) {
        if (t.first() != j) continue;
        Suffix rest(t.ops.begin() + 1, t.ops.end());
        add(left.start, route(rest), op_table[t.ops.front().second], t.coefficient);
      }
    }
    if (left.has_done) add(left.done, right.done, id, 1.0);
    for (const auto& [suffix, idx] : left.suffix_index) {
      if (suffix.front().first == j) {
        Suffix rest(suffix.begin() + 1, suffix.end());
        add(idx, route(rest), op_table[suffix.front().second], 1.0);
      } else {
        add(idx, right.suffix_index.at(suffix), id, 1.0);
      }
    }
    mpo.sites.push_back(std::move(w));
  }
  mpo.validate();
  return mpo;
}

namespace pauli {

DenseTensor identity() { return DenseTensor::identity(2); }

DenseTensor x() {
  DenseTensor t({2, 2});
  t(0, 1) = 1.0;
  t(1, 0) = 1.0;
  return t;
}

DenseTensor y() {
  DenseTensor t({2, 2});
  t(0, 1) = Complex{0.0, -1.0};
  t(1, 0) = Complex{0.0, 1.0};
  return t;
}

DenseTensor z() {
  DenseTensor t({2, 2});
  t(0, 0) = 1.0;
  t(1, 1) = -1.0;
  return t;
}

}  // namespace pauli

}  // namespace rmarkov
