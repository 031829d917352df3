#pragma once

#include <string>

namespace rrm {

/// Shortest decimal string that parses back to exactly `x` ("nan", "inf", "-inf" otherwise).
std::string format_double(double x);

}  // namespace rrm
