#include "mkv/rng.hpp"

#include <cmath>
#include <numbers>

namespace mkv {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t a, std::uint32_t b) {
    std::uint64_t x = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
    return (static_cast<double>(x) + 0.5) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kW0;
            k[1] += kW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

void NoiseStream::normals(std::uint64_t particle, std::uint64_t step, int dim, double* out) const {
    const PhiloxKey key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    for (int j = 0; j < dim; j += 2) {
        PhiloxCounter ctr{static_cast<std::uint32_t>(j / 2) & 0x7fffffffu,
                          static_cast<std::uint32_t>(step),
                          static_cast<std::uint32_t>(particle),
                          static_cast<std::uint32_t>(particle >> 32)};
        PhiloxCounter r = philox4x32_10(ctr, key);
        double u1 = to_unit(r[0], r[1]);
        double u2 = to_unit(r[2], r[3]);
        double rad = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * std::numbers::pi * u2;
        out[j] = rad * std::cos(ang);
        if (j + 1 < dim) out[j + 1] = rad * std::sin(ang);
    }
}

double NoiseStream::uniform(std::uint64_t stream, std::uint64_t index) const {
    const PhiloxKey key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    PhiloxCounter ctr{0x80000000u | (static_cast<std::uint32_t>(stream) & 0x7fffffffu),
                      static_cast<std::uint32_t>(index >> 32), static_cast<std::uint32_t>(index), 0u};
    PhiloxCounter r = philox4x32_10(ctr, key);
    return to_unit(r[0], r[1]);
}

}  // namespace mkv
