#include "ganids/rng.hpp"

#include <numeric>

namespace ganids {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, Rng& rng,
                                        bool* with_replacement) {
    if (n == 0) throw ContractError("sample_indices: empty population");
    std::vector<std::size_t> out(count);
    if (count <= n) {
        // Partial Fisher-Yates over an index pool.
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + rng.uniform_index(n - i);
            std::swap(pool[i], pool[j]);
            out[i] = pool[i];
        }
        if (with_replacement) *with_replacement = false;
    } else {
        for (std::size_t i = 0; i < count; ++i) out[i] = rng.uniform_index(n);
        if (with_replacement) *with_replacement = true;
    }
    return out;
}

}  // namespace ganids
