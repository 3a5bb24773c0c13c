#include "treeduce/bench.hpp"

#include <cmath>

namespace treeduce::bench {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
}

std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next()
{
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double SplitMix64::uniform()
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t file_stream_key(std::uint64_t seed, std::uint64_t file_index)
{
    return mix64(seed ^ (0xD1B54A32D192ED03ull * (file_index + 1)));
}

int poisson_inverse_cdf(double u, double mean)
{
    double p = std::exp(-mean);
    double cdf = p;
    int k = 0;
    while (u >= cdf && k < 1000) {
        ++k;
        p *= mean / k;
        cdf += p;
        if (p == 0.0)
            break;
    }
    return k;
}

}  // namespace treeduce::bench
