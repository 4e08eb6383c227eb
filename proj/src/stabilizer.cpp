#include "rmarkov/stabilizer.hpp"

#include <algorithm>
#include <bit>
#include <numbers>
#include <stdexcept>

namespace rmarkov {

namespace {

std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

void set_bit(std::vector<std::uint64_t>& v, std::size_t q, bool on) {
  const std::uint64_t mask = std::uint64_t{1} << (q % 64);
  if (on)
    v[q / 64] |= mask;
  else
    v[q / 64] &= ~mask;
}

bool get_bit(const std::vector<std::uint64_t>& v, std::size_t q) { return (v[q / 64] >> (q % 64)) & 1u; }

// Exponent of i picked up when multiplying single-qubit Paulis (x1,z1)(x2,z2).
int phase_exponent(bool x1, bool z1, bool x2, bool z2) {
  if (!x1 && !z1) return 0;
  if (x1 && z1) return static_cast<int>(z2) - static_cast<int>(x2);
  if (x1) return static_cast<int>(z2) * (2 * static_cast<int>(x2) - 1);
  return static_cast<int>(x2) * (1 - 2 * static_cast<int>(z2));
}

std::vector<std::size_t> sorted_sites(std::span<const std::size_t> x, std::size_t n) {
  std::vector<std::size_t> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("repeated site");
  if (!s.empty() && s.back() >= n) throw std::out_of_range("site out of range");
  return s;
}

}  // namespace

PauliString::PauliString(std::size_t qubits)
    : n_(qubits), x_(words_for(qubits), 0), z_(words_for(qubits), 0) {}

PauliString PauliString::parse(const std::string& text) {
  std::size_t start = 0;
  unsigned phase = 0;
  if (!text.empty() && (text[0] == '+' || text[0] == '-')) {
    phase = text[0] == '-' ? 2 : 0;
    start = 1;
  }
  PauliString p(text.size() - start);
  p.phase_ = phase;
  for (std::size_t q = 0; q < p.n_; ++q) {
    switch (text[start + q]) {
      case 'I': case '_': break;
      case 'X': p.set_x(q, true); break;
      case 'Z': p.set_z(q, true); break;
      case 'Y': p.set_x(q, true); p.set_z(q, true); break;
      default: throw std::invalid_argument("invalid Pauli character in '" + text + "'");
    }
  }
  return p;
}

void PauliString::set_x(std::size_t q, bool on) { set_bit(x_, q, on); }
void PauliString::set_z(std::size_t q, bool on) { set_bit(z_, q, on); }

bool PauliString::is_identity() const {
  return std::all_of(x_.begin(), x_.end(), [](auto w) { return w == 0; }) &&
         std::all_of(z_.begin(), z_.end(), [](auto w) { return w == 0; });
}

bool PauliString::supported_in(std::span<const std::size_t> sites) const {
  for (std::size_t q = 0; q < n_; ++q)
    if ((x(q) || z(q)) && !std::binary_search(sites.begin(), sites.end(), q)) return false;
  return true;
}

bool PauliString::commutes_with(const PauliString& other) const {
  if (other.n_ != n_) throw std::invalid_argument("Pauli strings of different length");
  unsigned parity = 0;
  for (std::size_t w = 0; w < x_.size(); ++w)
    parity ^= std::popcount((x_[w] & other.z_[w]) ^ (z_[w] & other.x_[w])) & 1u;
  return parity == 0;
}

PauliString& PauliString::operator*=(const PauliString& other) {
  if (other.n_ != n_) throw std::invalid_argument("Pauli strings of different length");
  int exponent = static_cast<int>(phase_) + static_cast<int>(other.phase_);
  for (std::size_t q = 0; q < n_; ++q) exponent += phase_exponent(x(q), z(q), other.x(q), other.z(q));
  for (std::size_t w = 0; w < x_.size(); ++w) {
    x_[w] ^= other.x_[w];
    z_[w] ^= other.z_[w];
  }
  phase_ = static_cast<unsigned>(((exponent % 4) + 4) % 4);
  return *this;
}

std::string PauliString::to_string() const {
  static constexpr const char* kPhase[] = {"+", "+i", "-", "-i"};
  std::string out = kPhase[phase_];
  for (std::size_t q = 0; q < n_; ++q) out += x(q) ? (z(q) ? 'Y' : 'X') : (z(q) ? 'Z' : 'I');
  return out;
}

std::size_t gf2_rank(std::vector<std::vector<std::uint64_t>> rows, std::size_t columns) {
  std::size_t rank = 0;
  for (std::size_t col = 0; col < columns && rank < rows.size(); ++col) {
    std::size_t pivot = rank;
    while (pivot < rows.size() && !get_bit(rows[pivot], col)) ++pivot;
    if (pivot == rows.size()) continue;
    std::swap(rows[rank], rows[pivot]);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == rank || !get_bit(rows[r], col)) continue;
      for (std::size_t w = 0; w < rows[r].size(); ++w) rows[r][w] ^= rows[rank][w];
    }
    ++rank;
  }
  return rank;
}

StabilizerGroup::StabilizerGroup(std::size_t qubits, std::vector<PauliString> generators)
    : n_(qubits), generators_(std::move(generators)) {
  if (generators_.size() > n_) throw std::invalid_argument("more generators than qubits");
  for (const auto& g : generators_)
    if (g.size() != n_) throw std::invalid_argument("generator length does not match qubit count");
  for (std::size_t a = 0; a < generators_.size(); ++a)
    for (std::size_t b = a + 1; b < generators_.size(); ++b)
      if (!generators_[a].commutes_with(generators_[b])) throw std::invalid_argument("generators do not commute");
  std::vector<std::vector<std::uint64_t>> rows;
  for (const auto& g : generators_) {
    std::vector<std::uint64_t> row(words_for(2 * n_), 0);
    for (std::size_t q = 0; q < n_; ++q) {
      set_bit(row, q, g.x(q));
      set_bit(row, n_ + q, g.z(q));
    }
    rows.push_back(std::move(row));
  }
  if (gf2_rank(std::move(rows), 2 * n_) != generators_.size())
    throw std::invalid_argument("generators are not independent");
}

StabilizerGroup StabilizerGroup::parse(const std::vector<std::string>& generators) {
  if (generators.empty()) throw std::invalid_argument("no generators");
  std::vector<PauliString> g;
  for (const auto& s : generators) g.push_back(PauliString::parse(s));
  const std::size_t n = g.front().size();
  return StabilizerGroup(n, std::move(g));
}

std::size_t restricted_subgroup_dimension(const StabilizerGroup& group, std::span<const std::size_t> x) {
  const std::size_t n = group.qubits();
  const auto kept = sorted_sites(x, n);
  std::vector<std::size_t> outside;
  for (std::size_t q = 0; q < n; ++q)
    if (!std::binary_search(kept.begin(), kept.end(), q)) outside.push_back(q);
  const std::size_t m = outside.size();
  std::vector<std::vector<std::uint64_t>> rows;
  for (const auto& g : group.generators()) {
    std::vector<std::uint64_t> row(words_for(2 * m), 0);
    for (std::size_t c = 0; c < m; ++c) {
      set_bit(row, c, g.x(outside[c]));
      set_bit(row, m + c, g.z(outside[c]));
    }
    rows.push_back(std::move(row));
  }
  return group.rank() - gf2_rank(std::move(rows), 2 * m);
}

std::size_t enumerated_subgroup_dimension(const StabilizerGroup& group, std::span<const std::size_t> x) {
  const std::size_t k = group.rank();
  if (k > 20) throw std::invalid_argument("enumeration limited to 20 generators");
  const auto kept = sorted_sites(x, group.qubits());
  std::size_t count = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    PauliString element(group.qubits());
    for (std::size_t g = 0; g < k; ++g)
      if ((mask >> g) & 1u) element *= group.generators()[g];
    if (element.supported_in(kept)) ++count;
  }
  return static_cast<std::size_t>(std::countr_zero(count));
}

double stabilizer_renyi_entropy(const StabilizerGroup& group, std::span<const std::size_t> x) {
  const std::size_t s = restricted_subgroup_dimension(group, x);
  return static_cast<double>(x.size() - s) * std::numbers::ln2;
}

long stabilizer_cmi_bits(const StabilizerGroup& group, const Tripartition& part) {
  part.validate();
  if (group.qubits() != part.length()) throw std::invalid_argument("stabilizer_cmi: length mismatch");
  auto bits = [&](const SiteSet& x) {
    return static_cast<long>(x.size()) - static_cast<long>(restricted_subgroup_dimension(group, x));
  };
  return bits(part.ab()) + bits(part.bc()) - bits(part.b()) - bits(part.abc());
}

double stabilizer_cmi(const StabilizerGroup& group, const Tripartition& part) {
  return static_cast<double>(stabilizer_cmi_bits(group, part)) * std::numbers::ln2;
}

StabilizerGroup cluster_group(std::size_t length) {
  if (length < 3) throw std::invalid_argument("cluster_group needs at least 3 qubits");
  std::vector<PauliString> g;
  for (std::size_t j = 0; j < length; ++j) {
    PauliString p(length);
    p.set_z((j + length - 1) % length, true);
    p.set_x(j, true);
    p.set_z((j + 1) % length, true);
    g.push_back(std::move(p));
  }
  return StabilizerGroup(length, std::move(g));
}

StabilizerGroup swssb_group(std::size_t length) {
  if (length < 3) throw std::invalid_argument("swssb_group needs at least 3 qubits");
  PauliString p(length);
  for (std::size_t j = 0; j < length; ++j) p.set_x(j, true);
  return StabilizerGroup(length, {p});
}

StabilizerGroup product_group(std::size_t length) {
  if (length == 0) throw std::invalid_argument("product_group needs at least one qubit");
  std::vector<PauliString> g;
  for (std::size_t j = 0; j < length; ++j) {
    PauliString p(length);
    p.set_z(j, true);
    g.push_back(std::move(p));
  }
  return StabilizerGroup(length, std::move(g));
}

}  // namespace rmarkov
