#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace ionlab {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11 constants).
// One stream per (seed, stream id): key = 64-bit seed, counter words 2..3 hold
// the stream id and words 0..1 the block index. Streams are independent and
// cheap to construct, so every shot owns a private one; results never depend
// on evaluation order or thread count.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint32_t next_u32() {
        if (idx_ == 4) refill();
        return out_[idx_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (-1, 1)
    double uniform_sym() { return 2.0 * uniform() - 1.0 + 0x1.0p-53; }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

    bool bernoulli(double p) { return uniform() < p; }

    // Raw block for known-answer tests.
    static std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t stream,
                                              std::uint64_t block_index) {
        std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block_index),
                                         static_cast<std::uint32_t>(block_index >> 32),
                                         static_cast<std::uint32_t>(stream),
                                         static_cast<std::uint32_t>(stream >> 32)};
        std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed),
                                         static_cast<std::uint32_t>(seed >> 32)};
        return run(ctr, key);
    }

    static std::array<std::uint32_t, 4> run(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
        round(ctr, key);
        for (int i = 0; i < 9; ++i) {
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
            round(ctr, key);
        }
        return ctr;
    }

private:
    static void round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
        std::uint64_t p0 = 0xD2511F53ull * c[0];
        std::uint64_t p1 = 0xCD9E8D57ull * c[2];
        std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    void refill() {
        out_ = run({static_cast<std::uint32_t>(block_),
                    static_cast<std::uint32_t>(block_ >> 32), stream_lo_, stream_hi_},
                   key_);
        ++block_;
        idx_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> out_{};
    int idx_ = 4;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Reserved run-level stream ids; shot streams use the shot index directly.
namespace stream_id {
inline constexpr std::uint64_t field_chain = 0x4000000000000000ull;
inline constexpr std::uint64_t plan_shuffle = 0x4000000000000001ull;
}  // namespace stream_id

}  // namespace ionlab
