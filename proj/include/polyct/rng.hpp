#pragma once

#include <array>
#include <cstdint>

namespace polyct {

// Philox4x32-10 counter-based generator. A (seed, stream) pair names an
// independent sequence; every draw advances a 64-bit block counter, so a
// given pair always reproduces the same numbers.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform on the open interval (0, 1).
    double uniform();
    double normal();

    // Poisson draw. Inversion for mean < 30, PTRS transformed rejection above.
    std::uint64_t poisson(double mean);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace polyct
