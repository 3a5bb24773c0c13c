#include "treeduce/xrdlite.hpp"

#include <algorithm>
#include <cmath>

namespace treeduce::xrdl {

TokenBucket::TokenBucket(std::uint64_t bytes_per_second)
    : rate_(bytes_per_second),
      per_tick_(static_cast<double>(bytes_per_second) * std::chrono::duration<double>(kTick).count()),
      burst_(std::max(2.0 * per_tick_, 1.0)),
      tokens_(per_tick_),
      last_tick_(Clock::now())
{
}

std::uint64_t TokenBucket::chunk_limit() const
{
    if (unlimited())
        return UINT64_MAX;
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(per_tick_)));
}

void TokenBucket::refill(Clock::time_point now)
{
    auto ticks = (now - last_tick_) / kTick;
    if (ticks <= 0)
        return;
    tokens_ = std::min(burst_, tokens_ + static_cast<double>(ticks) * per_tick_);
    last_tick_ += ticks * kTick;
}

void TokenBucket::acquire(std::uint64_t n)
{
    if (unlimited() || n == 0)
        return;
    const auto need = static_cast<double>(n);
    for (;;) {
        Clock::time_point wake;
        {
            std::lock_guard lock(mu_);
            refill(Clock::now());
            if (tokens_ >= need) {
                tokens_ -= need;
                return;
            }
            auto missing_ticks = static_cast<long>(std::ceil((need - tokens_) / per_tick_));
            wake = last_tick_ + std::max(1L, missing_ticks) * kTick;
        }
        std::this_thread::sleep_until(wake);
    }
}

}  // namespace treeduce::xrdl
