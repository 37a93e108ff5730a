#include "truncest/bitvec.hpp"

namespace truncest {

BitVector BitVector::parse(std::string_view text) {
  const int d = static_cast<int>(text.size());
  check_dim(d);
  std::uint64_t w = 0;
  for (int i = 0; i < d; ++i) {
    if (text[i] == '1')
      w |= 1ull << i;
    else if (text[i] != '0')
      throw DomainError("bit-string '" + std::string(text) + "' has a character other than 0/1");
  }
  return BitVector(d, w);
}

std::string BitVector::to_string() const {
  std::string s(dim_, '0');
  for (int i = 0; i < dim_; ++i)
    if ((*this)[i]) s[i] = '1';
  return s;
}

}  // namespace truncest
