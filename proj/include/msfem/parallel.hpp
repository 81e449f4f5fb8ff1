#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace msfem {

/// Runs body(i) for i in [0, count) on `workers` threads with a static
/// interleaved schedule. Results must be written to per-index slots so the
/// outcome does not depend on the worker count. If any call throws, the
/// exception of the lowest failing index is rethrown after all threads join.
template <class Body>
void parallel_for(std::size_t count, int workers, Body&& body)
{
    const auto nthreads = static_cast<std::size_t>(std::clamp<long>(workers, 1, static_cast<long>(std::max<std::size_t>(count, 1))));
    std::vector<std::exception_ptr> failures(count);

    auto run = [&](std::size_t first) {
        for (std::size_t i = first; i < count; i += nthreads) {
            try {
                body(i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };

    if (nthreads == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back(run, t);
    }

    for (auto& f : failures)
        if (f)
            std::rethrow_exception(f);
}

} // namespace msfem
