#include "tensemb/rng.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>

#include "tensemb/error.hpp"

namespace tensemb {

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t substream_seed(uint64_t seed, std::string_view name) {
    return splitmix64(seed ^ fnv1a64(name));
}

uint64_t Rng::uniform_below(uint64_t n) {
    if (n == 0) throw usage_error("uniform_below: range must be nonzero");
    // Reject the partial cycle at the top of the 64-bit range.
    uint64_t threshold = (0 - n) % n;
    for (;;) {
        uint64_t x = next_u64();
        if (x >= threshold) return x % n;
    }
}

double Rng::uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    for (;;) {
        double u = 2.0 * uniform_real() - 1.0;
        double v = 2.0 * uniform_real() - 1.0;
        double s = u * u + v * v;
        if (s >= 1.0 || s == 0.0) continue;
        double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_gauss_ = v * f;
        has_cached_gauss_ = true;
        return u * f;
    }
}

void Rng::save(std::ostream& os) const {
    os << engine_ << '\n';
    os << (has_cached_gauss_ ? 1 : 0) << ' ' << std::bit_cast<uint64_t>(cached_gauss_) << '\n';
}

Rng Rng::restore(std::istream& is) {
    Rng rng(0);
    is >> rng.engine_;
    int flag = 0;
    uint64_t bits = 0;
    is >> flag >> bits;
    if (!is) throw data_error("malformed RNG state");
    rng.has_cached_gauss_ = flag != 0;
    rng.cached_gauss_ = std::bit_cast<double>(bits);
    return rng;
}

}  // namespace tensemb
