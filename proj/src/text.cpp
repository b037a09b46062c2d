#include "pitchrl/text.hpp"

#include <array>
#include <charconv>
#include <stdexcept>
#include <string>

namespace pitchrl::text {

std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::string format_fixed(double x, int decimals) {
    std::array<char, 64> buf{};
    const auto res =
        std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::fixed, decimals);
    return std::string(buf.data(), res.ptr);
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    }
    return v;
}

long long parse_int(std::string_view s) {
    s = trim(s);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<double> parse_double_list(std::string_view s) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    for (const auto& tok : split(s, ',')) out.push_back(parse_double(tok));
    return out;
}

std::vector<long long> parse_int_list(std::string_view s) {
    std::vector<long long> out;
    if (trim(s).empty()) return out;
    for (const auto& tok : split(s, ',')) out.push_back(parse_int(tok));
    return out;
}

}  // namespace pitchrl::text
