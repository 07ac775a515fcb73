#include "pbit/precision.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "pbit/error.hpp"

namespace pbit {

PrecisionSpec PrecisionSpec::fixed(int int_bits, int frac_bits) {
    if (int_bits < 1 || frac_bits < 0 || int_bits + frac_bits > 52)
        throw ConfigError("fixed-point precision needs int_bits >= 1, frac_bits >= 0");
    return {Mode::fixed, int_bits, frac_bits};
}

PrecisionSpec PrecisionSpec::parse(const std::string& text) {
    if (text == "float64") return float64();
    static const std::regex pattern(R"(s\{(\d+)\}\{(\d+)\})");
    std::smatch m;
    if (!std::regex_match(text, m, pattern))
        throw ConfigError("precision must be 'float64' or 's{i}{f}', got '" + text + "'");
    return fixed(std::stoi(m[1]), std::stoi(m[2]));
}

double PrecisionSpec::resolution() const {
    return is_fixed() ? std::ldexp(1.0, -frac_bits) : 0.0;
}

double PrecisionSpec::max_value() const {
    return is_fixed() ? std::ldexp(1.0, int_bits) - resolution() : HUGE_VAL;
}

std::string PrecisionSpec::to_string() const {
    if (!is_fixed()) return "float64";
    return "s{" + std::to_string(int_bits) + "}{" + std::to_string(frac_bits) + "}";
}

double quantize(double x, const PrecisionSpec& spec) {
    if (!spec.is_fixed()) return x;
    const double limit = spec.max_value();
    if (std::isnan(x)) return 0.0;
    if (x >= limit) return limit;
    if (x <= -limit) return -limit;
    // nearbyint honours the default round-to-nearest-even mode.
    const double q = std::ldexp(std::nearbyint(std::ldexp(x, spec.frac_bits)), -spec.frac_bits);
    return std::clamp(q, -limit, limit);
}

}  // namespace pbit
