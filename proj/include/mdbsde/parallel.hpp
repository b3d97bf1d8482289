#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mdbsde {

/// Runs body(begin, end) over [0, count) split into contiguous chunks.
/// Bodies must only write per-index results; reductions stay with the caller.
template <class Body>
void parallel_for(Eigen::Index count, int threads, Body&& body) {
    const Eigen::Index workers = std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(count, 1));
    if (workers <= 1) {
        body(Eigen::Index{0}, count);
        return;
    }
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const Eigen::Index chunk = (count + workers - 1) / workers;
    for (Eigen::Index w = 0; w < workers; ++w) {
        const Eigen::Index begin = w * chunk;
        const Eigen::Index end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(guard);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and standard error, summed serially in index order.
inline Estimate estimate(const Eigen::Ref<const Eigen::ArrayXd>& x) {
    const Eigen::Index m = x.size();
    if (m == 0) return {};
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) sum += x[j];
    const double mean = sum / static_cast<double>(m);
    if (m == 1) return {mean, 0.0};
    double ss = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        const double d = x[j] - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m))};
}

}  // namespace mdbsde
