// Counter-based random streams (Philox4x32-10) plus the samplers the Monte
// Carlo code needs. A stream is keyed by (seed, stream id); draws are a pure
// function of the key and a 64-bit counter, so replicas are bitwise
// reproducible no matter how they are scheduled across threads.
#pragma once

#include <cmath>
#include <cstdint>

namespace latgas {

namespace detail {

inline void philox_round(uint32_t& c0, uint32_t& c1, uint32_t& c2, uint32_t& c3,
                         uint32_t k0, uint32_t k1) {
    constexpr uint64_t kMul0 = 0xD2511F53ull;
    constexpr uint64_t kMul1 = 0xCD9E8D57ull;
    uint64_t p0 = kMul0 * c0;
    uint64_t p1 = kMul1 * c2;
    uint32_t h0 = uint32_t(p0 >> 32), l0 = uint32_t(p0);
    uint32_t h1 = uint32_t(p1 >> 32), l1 = uint32_t(p1);
    uint32_t n0 = h1 ^ c1 ^ k0;
    uint32_t n1 = l1;
    uint32_t n2 = h0 ^ c3 ^ k1;
    uint32_t n3 = l0;
    c0 = n0; c1 = n1; c2 = n2; c3 = n3;
}

}  // namespace detail

// Philox4x32 with 10 rounds: 128 output bits per counter value.
struct Philox4x32 {
    uint32_t key0 = 0, key1 = 0;

    Philox4x32() = default;
    Philox4x32(uint64_t seed, uint64_t stream) {
        key0 = uint32_t(seed);
        key1 = uint32_t(seed >> 32) ^ uint32_t(stream) ^ uint32_t(stream >> 32) * 0x9E3779B9u;
        // fold the full stream id into the counter prefix as well
        hi_ = stream;
    }

    void generate(uint64_t counter, uint32_t out[4]) const {
        constexpr uint32_t kW0 = 0x9E3779B9u;
        constexpr uint32_t kW1 = 0xBB67AE85u;
        uint32_t c0 = uint32_t(counter), c1 = uint32_t(counter >> 32);
        uint32_t c2 = uint32_t(hi_), c3 = uint32_t(hi_ >> 32);
        uint32_t k0 = key0, k1 = key1;
        for (int r = 0; r < 10; ++r) {
            detail::philox_round(c0, c1, c2, c3, k0, k1);
            k0 += kW0;
            k1 += kW1;
        }
        out[0] = c0; out[1] = c1; out[2] = c2; out[3] = c3;
    }

  private:
    uint64_t hi_ = 0;
};

// Sequential view over a Philox stream: hands out 32-bit words, bumping the
// counter every four words.
class RngStream {
  public:
    RngStream() : gen_(0, 0) { refill(); }
    RngStream(uint64_t seed, uint64_t stream) : gen_(seed, stream) { refill(); }

    uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    uint64_t next_u64() {
        uint64_t lo = next_u32();
        uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // uniform in [0,1), 53-bit resolution
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0,1], safe as a log() argument
    double next_double_pos() { return (double(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(next_double_pos()) / rate; }

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n) {
        // Lemire's multiply-shift with rejection of the biased slice
        uint64_t x = next_u64();
        __uint128_t m = __uint128_t(x) * n;
        uint64_t lo = uint64_t(m);
        if (lo < n) {
            uint64_t threshold = (0ull - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = __uint128_t(x) * n;
                lo = uint64_t(m);
            }
        }
        return uint64_t(m >> 64);
    }

    double normal() {
        // Box-Muller; the partner variate is dropped to keep the stream simple
        double u = next_double_pos();
        double v = next_double();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
    }

    // Exact Poisson sampling. Knuth's product method below mean 12, the PTRD
    // transformed-rejection sampler (Hoermann) above it; both are exact.
    int64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 12.0) {
            double limit = std::exp(-mean);
            int64_t k = 0;
            double prod = next_double();
            while (prod > limit) {
                ++k;
                prod *= next_double();
            }
            return k;
        }
        return poisson_ptrd(mean);
    }

  private:
    int64_t poisson_ptrd(double mu) {
        const double smu = std::sqrt(mu);
        const double b = 0.931 + 2.53 * smu;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mu = std::log(mu);
        for (;;) {
            double u = next_double() - 0.5;
            double v = next_double();
            double us = 0.5 - std::abs(u);
            double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
            if (us >= 0.07 && v <= v_r) return int64_t(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            double k = kf;
            double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
            double rhs = k * log_mu - mu - std::lgamma(k + 1.0);
            if (lhs <= rhs) return int64_t(kf);
        }
    }

    Philox4x32 gen_;
    uint64_t counter_ = 0;
    uint32_t buf_[4] = {0, 0, 0, 0};
    int pos_ = 4;

    void refill() {
        gen_.generate(counter_++, buf_);
        pos_ = 0;
    }
};

}  // namespace latgas
