#pragma once

#include <array>
#include <cstdint>

namespace mkv {

// Philox4x32-10 (Salmon et al. 2011), counter-based: the output is a pure
// function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

// Standard normal increments indexed by (seed, particle, step, coordinate).
// Changing anything in the mapping below must bump kVersion.
class NoiseStream {
public:
    static constexpr const char* kName = "philox4x32-10/box-muller";
    static constexpr int kVersion = 1;

    explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Writes `dim` independent N(0,1) draws for (particle, step).
    void normals(std::uint64_t particle, std::uint64_t step, int dim, double* out) const;

    double normal(std::uint64_t particle, std::uint64_t step) const {
        double z;
        normals(particle, step, 1, &z);
        return z;
    }

    // Uniform on (0,1) for (stream, index); used for sampling initial laws.
    double uniform(std::uint64_t stream, std::uint64_t index) const;

private:
    std::uint64_t seed_;
};

}  // namespace mkv
