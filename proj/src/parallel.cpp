#include "keyhole/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace keyhole {

namespace {
int g_threads = 0;
thread_local bool t_in_parallel = false;

int default_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp<unsigned>(hw, 1, 8));
}
} // namespace

void set_thread_count(int n) { g_threads = std::max(0, n); }

int thread_count() { return g_threads > 0 ? g_threads : default_threads(); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    // Nested calls run inline on the calling worker; spawning threads from
    // inside a parallel region would oversubscribe without bound.
    if (t_in_parallel) {
        fn(0, n);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), n));
    // Chunk layout is a function of n alone.
    const std::int64_t chunks = std::min<std::int64_t>(n, 32);
    const std::int64_t chunk_size = (n + chunks - 1) / chunks;

    if (workers <= 1) {
        for (std::int64_t c = 0; c < chunks; ++c) {
            const std::int64_t lo = c * chunk_size;
            const std::int64_t hi = std::min(n, lo + chunk_size);
            if (lo < hi) fn(lo, hi);
        }
        return;
    }

    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        t_in_parallel = true;
        for (;;) {
            const std::int64_t c = next.fetch_add(1);
            if (c >= chunks) break;
            const std::int64_t lo = c * chunk_size;
            const std::int64_t hi = std::min(n, lo + chunk_size);
            if (lo >= hi) continue;
            try {
                fn(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                break;
            }
        }
        t_in_parallel = false;
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers - 1));
    for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace keyhole
