#include "cydistill/common.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

namespace cyd {

double Stream::normal() noexcept {
    // Box-Muller on (0, 1] x [0, 1)
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned n) noexcept { g_threads.store(n); }

unsigned thread_count() noexcept {
    const unsigned n = g_threads.load();
    if (n != 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t chunks = chunk_count(n, chunk);
    const std::size_t workers = std::min<std::size_t>(thread_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) body(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (std::size_t c = next++; c < chunks && !failed.load(); c = next++) {
            try {
                body(c * chunk, std::min(n, (c + 1) * chunk));
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace cyd
