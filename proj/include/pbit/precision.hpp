#pragma once

#include <string>

namespace pbit {

/// Weight precision. Fixed mode is s{i}{f}: one sign bit, `int_bits` integer
/// bits and `frac_bits` fraction bits, saturating at +-(2^i - 2^-f).
struct PrecisionSpec {
    enum class Mode { float64, fixed };

    Mode mode = Mode::float64;
    int int_bits = 0;
    int frac_bits = 0;

    static PrecisionSpec float64() { return {}; }
    static PrecisionSpec fixed(int int_bits, int frac_bits);

    /// Accepts "float64" or "s{i}{f}".
    static PrecisionSpec parse(const std::string& text);

    [[nodiscard]] bool is_fixed() const noexcept { return mode == Mode::fixed; }
    [[nodiscard]] double resolution() const;
    [[nodiscard]] double max_value() const;
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const PrecisionSpec&, const PrecisionSpec&) = default;
};

/// Rounds to the nearest multiple of 2^-f (ties to even) and saturates.
/// Identity in float64 mode.
double quantize(double x, const PrecisionSpec& spec);

}  // namespace pbit
