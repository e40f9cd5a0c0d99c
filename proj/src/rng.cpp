#include "rsacr/rng.hpp"

#include <vector>

namespace rsacr {

RandomStream::RandomStream(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * key.size() + 1);
    words.push_back(static_cast<std::uint32_t>(key.size()));
    for (std::uint64_t k : key) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
}

}  // namespace rsacr
