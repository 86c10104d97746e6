#pragma once

#include <array>
#include <cstdint>

namespace perpetua {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    static constexpr Counter block(Counter c, Key k) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += kWeylA;
                k[1] += kWeylB;
            }
            const std::uint64_t p0 = std::uint64_t{kMulA} * c[0];
            const std::uint64_t p1 = std::uint64_t{kMulB} * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
        }
        return c;
    }
};

// One reproducible stream per (seed, stream id); the stream id occupies the
// upper half of the counter and the block index the lower half.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          id_lo_(static_cast<std::uint32_t>(stream_id)),
          id_hi_(static_cast<std::uint32_t>(stream_id >> 32)) {}

    std::uint32_t next_u32() {
        if (used_ == 4) refill();
        return buffer_[used_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::uint64_t blocks_used() const noexcept { return block_; }

private:
    void refill() {
        buffer_ = Philox4x32::block({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                     id_lo_, id_hi_},
                                    key_);
        ++block_;
        used_ = 0;
    }

    Philox4x32::Key key_;
    std::uint32_t id_lo_;
    std::uint32_t id_hi_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
};

} // namespace perpetua
