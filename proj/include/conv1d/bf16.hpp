#pragma once

#include <cstdint>
#include <cstring>

namespace conv1d {

// Brain floating point: the upper half of an IEEE-754 binary32 value
// (1 sign, 8 exponent, 7 mantissa bits). Stored narrow, computed in FP32.
struct Bf16 {
    std::uint16_t bits = 0;

    Bf16() = default;
    constexpr explicit Bf16(std::uint16_t raw) : bits(raw) {}

    friend bool operator==(Bf16 a, Bf16 b) { return a.bits == b.bits; }
};

// Widening is exact: append 16 zero bits.
inline float bf16_to_fp32(Bf16 b) {
    const std::uint32_t u = static_cast<std::uint32_t>(b.bits) << 16;
    float f;
    std::memcpy(&f, &u, sizeof(f));
    return f;
}

// Round to nearest, ties to even, on the low 16 bits. NaN becomes a quiet
// BF16 NaN; infinities and signed zeros pass through.
inline Bf16 fp32_to_bf16(float x) {
    std::uint32_t u;
    std::memcpy(&u, &x, sizeof(u));
    if ((u & 0x7f800000u) == 0x7f800000u) {
        if ((u & 0x007fffffu) != 0) {
            return Bf16(static_cast<std::uint16_t>((u >> 16) | 0x0040u)); // quiet NaN
        }
        return Bf16(static_cast<std::uint16_t>(u >> 16)); // +-inf
    }
    u += 0x7fffu + ((u >> 16) & 1u);
    return Bf16(static_cast<std::uint16_t>(u >> 16));
}

inline float round_bf16(float x) { return bf16_to_fp32(fp32_to_bf16(x)); }

} // namespace conv1d
