#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace stochemb {

/// Worker count from STOCHEMB_WORKERS, or 1 when unset or invalid.
inline int default_workers() {
    if (const char* env = std::getenv("STOCHEMB_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (...) {
        }
    }
    return 1;
}

/// Runs body(begin, end) over contiguous chunks of [0, n) on `workers` threads.
///
/// Chunk boundaries only affect scheduling. Callers write results into
/// per-index slots, so outputs are independent of the worker count.
template <class Body>
void parallel_for_chunks(std::size_t n, int workers, Body&& body) {
    if (n == 0) return;
    const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : workers, 1, n);
    if (w == 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t k = 0; k < w; ++k) {
        const std::size_t begin = k * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace stochemb
