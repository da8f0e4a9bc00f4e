#include "orbsde/detail/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace orbsde::detail {

int worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0)
        hw = 1;
    if (const char* env = std::getenv("OBLIQUE_RBSDE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<int>(std::min<long>(v, 256));
    }
    return static_cast<int>(hw);
}

int parallel_chunks(std::uint64_t n,
                    const std::function<void(std::uint64_t, std::uint64_t, int)>& fn) {
    if (n == 0)
        return 0;
    const int workers =
        static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(worker_count()), n));
    if (workers <= 1) {
        fn(0, n, 0);
        return 1;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint64_t chunk = (n + workers - 1) / workers;
    for (int slot = 0; slot < workers; ++slot) {
        const std::uint64_t b = chunk * static_cast<std::uint64_t>(slot);
        const std::uint64_t e = std::min(n, b + chunk);
        if (b >= e)
            break;
        pool.emplace_back(fn, b, e, slot);
    }
    for (auto& t : pool)
        t.join();
    return static_cast<int>(pool.size());
}

} // namespace orbsde::detail
