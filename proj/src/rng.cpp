#include "polykin/rng.hpp"

#include <cmath>

namespace polykin {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t block_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t block)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ tag) + block);
}

double RandomStream::gamma(double shape)
{
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(engine_);
}

double RandomStream::beta(double a, double b)
{
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
}

Eigen::Vector3d RandomStream::unit_vector()
{
    const double z = 2.0 * uniform() - 1.0;
    const double phi = 2.0 * M_PI * uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

} // namespace polykin
