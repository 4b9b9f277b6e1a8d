#include "cvcov/format.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace cvcov {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

bool parse_double(const std::string& text, double& out) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && (text[begin] == ' ' || text[begin] == '\t')) ++begin;
    while (end > begin && (text[end - 1] == ' ' || text[end - 1] == '\t' || text[end - 1] == '\r')) {
        --end;
    }
    if (begin == end) return false;
    const char* first = text.data() + begin;
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, text.data() + end, out);
    return ec == std::errc() && ptr == text.data() + end;
}

}  // namespace cvcov
