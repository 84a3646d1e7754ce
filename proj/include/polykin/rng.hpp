#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace polykin {

/// Samples per independently seeded block; streams are partitioned by sample index.
inline constexpr std::int64_t kSampleBlock = 4096;

/// splitmix64 finalizer, used to derive well separated block seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of block `block` of stream `tag` under the run seed `seed`.
std::uint64_t block_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t block);

/// Thin wrapper over mt19937_64 with the distributions used by the samplers.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return uniform_(engine_); }
    double normal() { return normal_(engine_); }
    /// Gamma variate with the given shape and unit scale.
    double gamma(double shape);
    /// Beta(a, b) variate.
    double beta(double a, double b);
    /// Uniform point on the unit sphere.
    Eigen::Vector3d unit_vector();
    Eigen::Vector3d normal3() { return {normal(), normal(), normal()}; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/**
 * Run `body(stream, begin, end)` over consecutive sample blocks.
 *
 * Each block owns a stream seeded from (seed, tag, block index), so the
 * samples do not depend on how blocks are scheduled.
 */
template <class Body>
void for_each_block(std::int64_t n, std::uint64_t seed, std::uint64_t tag, Body&& body)
{
    const std::int64_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
    for (std::int64_t b = 0; b < blocks; ++b) {
        RandomStream stream(block_seed(seed, tag, static_cast<std::uint64_t>(b)));
        const std::int64_t begin = b * kSampleBlock;
        const std::int64_t end = std::min(n, begin + kSampleBlock);
        body(stream, begin, end);
    }
}

/// Running mean / variance accumulator (Welford).
struct MeanAccumulator {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x)
    {
        ++n;
        const double d = x - mean;
        mean += d / double(n);
        m2 += d * (x - mean);
    }
    double variance() const { return n > 1 ? m2 / double(n - 1) : 0.0; }
    double std_error() const { return n > 1 ? std::sqrt(variance() / double(n)) : 0.0; }
};

} // namespace polykin
