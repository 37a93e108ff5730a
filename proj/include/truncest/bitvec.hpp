#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "truncest/errors.hpp"

namespace truncest {

inline constexpr int kMaxDimension = 63;

// A point of the Boolean hypercube, packed into one machine word. Bit i of
// `word()` is coordinate i. The textual form writes coordinate 0 first, so
// "110" has x_0 = 1, x_1 = 1, x_2 = 0.
class BitVector {
 public:
  BitVector() = default;
  BitVector(int dim, std::uint64_t word) : word_(word & mask(dim)), dim_(dim) {
    check_dim(dim);
  }
  static BitVector zeros(int dim) { return BitVector(dim, 0); }
  static BitVector ones(int dim) { return BitVector(dim, mask(dim)); }
  static BitVector parse(std::string_view text);

  int dim() const { return dim_; }
  std::uint64_t word() const { return word_; }

  bool operator[](int i) const { return (word_ >> i) & 1u; }
  BitVector with(int i, bool value) const {
    return BitVector(dim_, value ? (word_ | (1ull << i)) : (word_ & ~(1ull << i)));
  }
  BitVector flipped(int i) const { return BitVector(dim_, word_ ^ (1ull << i)); }
  BitVector operator^(const BitVector& other) const {
    return BitVector(dim_, word_ ^ other.word_);
  }
  int popcount() const { return std::popcount(word_); }

  // x^T z.
  double dot(std::span<const double> z) const {
    double s = 0.0;
    for (std::uint64_t w = word_; w; w &= w - 1) s += z[std::countr_zero(w)];
    return s;
  }

  std::string to_string() const;

  friend bool operator==(const BitVector&, const BitVector&) = default;
  friend auto operator<=>(const BitVector& a, const BitVector& b) {
    return a.word_ <=> b.word_;
  }

  static std::uint64_t mask(int dim) {
    return dim >= 64 ? ~0ull : ((1ull << dim) - 1ull);
  }
  static void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDimension)
      throw CapabilityError("dimension " + std::to_string(dim) + " outside [1, " +
                            std::to_string(kMaxDimension) + "]");
  }

 private:
  std::uint64_t word_ = 0;
  int dim_ = 0;
};

inline void require_same_dim(int expected, int actual) {
  if (expected != actual) throw DimensionMismatch(expected, actual);
}

}  // namespace truncest
