#pragma once

#include <string>

namespace cvcov {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a whole string; returns false on trailing garbage.
bool parse_double(const std::string& text, double& out);

}  // namespace cvcov
