#include "nlspn/csv.hpp"

#include <array>
#include <charconv>

namespace nlspn {

std::string format_real(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 9);
  return {buf.data(), res.ptr};
}

}  // namespace nlspn
