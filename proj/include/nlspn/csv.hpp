#pragma once

#include <string>

namespace nlspn {

/// Locale-independent, 9 significant digits ("%.9g" semantics).
std::string format_real(double value);

}  // namespace nlspn
