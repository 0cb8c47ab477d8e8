#include "e2e/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace e2e {

namespace {
std::atomic<int> g_workers{0};
}

void set_worker_count(int workers) { g_workers.store(workers < 0 ? 0 : workers); }

int worker_count() {
    int w = g_workers.load();
    if (w == 0) {
        unsigned hc = std::thread::hardware_concurrency();
        w = hc == 0 ? 1 : static_cast<int>(hc);
    }
    return w;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = static_cast<std::size_t>(worker_count());
    workers = std::min(workers, n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = w * chunk;
        std::size_t end = std::min(begin + chunk, n);
        if (begin >= end) break;
        threads.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : threads) t.join();
}

} // namespace e2e
