#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rsacr {

/// A seeded random stream keyed by a tuple of integers, e.g.
/// (global_seed, sample_id) or (seed, epoch, sample_id, noise_index).
/// Equal keys always reproduce the same sequence.
class RandomStream {
public:
    RandomStream(std::initializer_list<std::uint64_t> key);

    double uniform() { return uniform_(engine_); }
    double normal() { return normal_(engine_); }
    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace rsacr
