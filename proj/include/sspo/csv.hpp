#pragma once

#include <string>

#include <fmt/format.h>

namespace sspo {

/// Every CSV number goes through here: 9 significant digits.
inline std::string format_real(double x) { return fmt::format("{:.9g}", x); }

}  // namespace sspo
