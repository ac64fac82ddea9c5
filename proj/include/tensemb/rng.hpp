#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string_view>

namespace tensemb {

uint64_t fnv1a64(std::string_view bytes);
uint64_t splitmix64(uint64_t x);

// Stable per-component seed derived from the run seed and a stream name,
// so adding a new consumer of randomness never shifts existing streams.
uint64_t substream_seed(uint64_t seed, std::string_view name);

// mt19937_64 with hand-rolled draw algorithms. std::*_distribution output is
// implementation-defined; fixing the algorithms keeps artifacts byte-identical
// across standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, n). n must be nonzero.
    uint64_t uniform_below(uint64_t n);

    // [0, 1) with 53-bit resolution.
    double uniform_real();

    // Standard normal via the Marsaglia polar method.
    double gaussian();

    void save(std::ostream& os) const;
    static Rng restore(std::istream& is);

    bool operator==(const Rng& other) const = default;

  private:
    std::mt19937_64 engine_;
    double cached_gauss_ = 0.0;
    bool has_cached_gauss_ = false;
};

}  // namespace tensemb
