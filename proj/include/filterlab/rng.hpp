#pragma once

// Counter-based random streams. Every draw is a pure function of
// (master seed, stream id, draw index), so a particle's noise does not depend
// on how many particles were simulated before it or on which worker ran it.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace filterlab {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// What a stream is used for. Distinct purposes never share draws.
enum class Purpose : std::uint32_t {
    initial_state = 1,
    signal_noise,
    observation_noise,
    observation_q,
    limit_noise,
    cluster_noise,
    cluster_cluster,
    cluster_assignment,
    bootstrap,
    probe,
};

/// Particle index reserved for the hidden signal of a physical-measure draw.
inline constexpr std::uint32_t hidden_signal = 0xffffffffu;

struct StreamId {
    Purpose purpose = Purpose::signal_noise;
    std::uint32_t particle = 0;
    std::uint32_t replicate = 0;

    friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Sequential view of one counter-based stream.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, StreamId id) noexcept
        : seed_(master_seed), id_(id)
    {
        const std::uint64_t k =
            splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(id.purpose)));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    std::uint64_t master_seed() const noexcept { return seed_; }
    StreamId id() const noexcept { return id_; }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept
    {
        if (buffered_ == 0) refill();
        return buffer_[--buffered_];
    }

    /// Standard normal variate (Marsaglia polar method; pairs are cached).
    /// Avoids sin/cos, whose fused sincos form is not bit-identical across
    /// inlining contexts.
    double gaussian() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double v1 = 0.0, v2 = 0.0, s = 0.0;
        do {
            v1 = 2.0 * uniform() - 1.0;
            v2 = 2.0 * uniform() - 1.0;
            s = v1 * v1 + v2 * v2;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v2 * f;
        has_spare_ = true;
        return v1 * f;
    }

    double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept
    {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    void refill() noexcept
    {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_),
                                      static_cast<std::uint32_t>(block_ >> 32), id_.particle,
                                      id_.replicate};
        ++block_;
        const auto out = Philox4x32::block(ctr, key_);
        const std::uint64_t a = (std::uint64_t{out[0]} << 32) | out[1];
        const std::uint64_t b = (std::uint64_t{out[2]} << 32) | out[3];
        constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
        // Stored in reverse so draws come out in (a, b) order.
        buffer_[1] = (static_cast<double>(a >> 11) + 0.5) * scale;
        buffer_[0] = (static_cast<double>(b >> 11) + 0.5) * scale;
        buffered_ = 2;
    }

    std::uint64_t seed_;
    StreamId id_;
    Philox4x32::Key key_{};
    std::uint64_t block_ = 0;
    std::array<double, 2> buffer_{};
    int buffered_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace filterlab
