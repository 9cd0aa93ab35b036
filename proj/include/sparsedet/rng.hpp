#pragma once

#include <array>
#include <cstdint>

namespace sparsedet {

// ============================================================================
// Counter-based random numbers.
//
// Every variate is a pure function of (seed, replication index, address),
// so Monte Carlo results are bit-identical for any worker count or fill
// order. The block cipher is Philox4x64-10; outputs match numpy's
// reference implementation word for word.
// ============================================================================

using philox_ctr = std::array<std::uint64_t, 4>;
using philox_key = std::array<std::uint64_t, 2>;

// One 10-round Philox4x64 block.
philox_ctr philox4x64(philox_ctr ctr, philox_key key);

// Map a 64-bit word to the open interval (0, 1), 53-bit resolution.
double u64_to_unit_open(std::uint64_t w);

// Inverse standard normal CDF (Wichura's PPND16 rational approximations,
// |error| < 1e-15 over (0,1)).
double inverse_normal_cdf(double p);

// Standard normal CDF, exact wrapper over erfc.
double normal_cdf(double x);

// Address domains keep unrelated variate families on disjoint counters.
enum class RngDomain : std::uint64_t {
    Noise = 0,       // observation noise, null side, addressed by (k, j)
    Prior = 1,       // per-replication prior draws, sequential
    Scratch = 2,     // free-standing sampling in tests/tools
    AltNoise = 3,    // observation noise, alternative side
};

// Noise field: entry-addressed standard normals. The (k, j) pair is the
// counter, so any two runs agree on shared entries regardless of matrix
// shape.
class NoiseField {
public:
    NoiseField(std::uint64_t seed, std::uint64_t rep,
               RngDomain domain = RngDomain::Noise)
        : key_{seed, 0x7f4a7c15f39cc060ull},
          rep_(rep),
          domain_(static_cast<std::uint64_t>(domain)) {}

    // 1-based row/column address.
    double normal(std::uint64_t k, std::uint64_t j) const {
        philox_ctr out = philox4x64({k, j, rep_, domain_}, key_);
        return inverse_normal_cdf(u64_to_unit_open(out[0]));
    }

private:
    philox_key key_;
    std::uint64_t rep_;
    std::uint64_t domain_;
};

// Sequential stream for draws without a natural (k, j) address. Buffers one
// Philox block (4 words) at a time.
class SubStream {
public:
    SubStream(std::uint64_t seed, std::uint64_t rep, RngDomain domain)
        : key_{seed, 0x7f4a7c15f39cc060ull},
          base_{0, 0, rep, static_cast<std::uint64_t>(domain)} {}

    std::uint64_t next_u64() {
        if (have_ == 0) {
            buf_ = philox4x64(base_, key_);
            base_[0]++;  // 2^64 blocks per stream before touching word 1
            if (base_[0] == 0) base_[1]++;
            have_ = 4;
        }
        return buf_[4 - have_--];
    }

    double uniform01() { return u64_to_unit_open(next_u64()); }
    double normal() { return inverse_normal_cdf(uniform01()); }

    // Uniform integer in [0, bound) by rejection; bound >= 1.
    std::uint64_t uniform_below(std::uint64_t bound);

    // true with probability 1/2.
    bool coin() { return (next_u64() & 1ull) != 0; }

private:
    philox_key key_;
    philox_ctr base_;
    philox_ctr buf_{};
    int have_ = 0;
};

}  // namespace sparsedet
