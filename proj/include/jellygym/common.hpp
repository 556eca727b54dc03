#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace jg {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct MoveError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct UnplayableBoardError : Error { using Error::Error; };
struct LifecycleError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct ModeError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct ParameterError : Error { using Error::Error; };
struct NoMoveError : Error { using Error::Error; };
struct BatchError : Error { using Error::Error; };
struct CheckpointError : Error { using Error::Error; };
struct FileError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };

// Deterministic 64-bit PRNG (splitmix64). We avoid std::uniform_*_distribution
// and std::shuffle on purpose: their output is implementation-defined, and
// reports/checkpoints must be byte-identical for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    // Independent stream derived from (seed, stream id).
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed + 0x9e3779b97f4a7c15ULL * (stream + 1));
        r.next();
        return r;
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n). Modulo bias is < n / 2^64, irrelevant here.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

    // Uniform double in [0, 1) with 53 bits of entropy.
    double real01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double real(double lo, double hi) { return lo + (hi - lo) * real01(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace jg
