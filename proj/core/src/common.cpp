#include "auki/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace auki {

Rng make_stream(std::uint64_t master_seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

Vector standard_normal(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

std::string_view to_string(EvalCategory c) {
    switch (c) {
    case EvalCategory::offline: return "offline";
    case EvalCategory::uki: return "uki";
    case EvalCategory::anchor_scan: return "anchor_scan";
    case EvalCategory::adaptive_sample: return "adaptive_sample";
    case EvalCategory::diagnostic: return "diagnostic";
    case EvalCategory::other: return "other";
    }
    return "unknown";
}

EvaluationLedger::EvaluationLedger(const EvaluationLedger& other) { *this = other; }

EvaluationLedger& EvaluationLedger::operator=(const EvaluationLedger& other) {
    for (std::size_t i = 0; i < kEvalCategoryCount; ++i) counts_[i].store(other.counts_[i].load());
    total_.store(other.total_.load());
    return *this;
}

void EvaluationLedger::record(EvalCategory c, std::size_t n) noexcept {
    counts_[static_cast<std::size_t>(c)].fetch_add(n);
    total_.fetch_add(n);
}

std::size_t EvaluationLedger::count(EvalCategory c) const noexcept {
    return counts_[static_cast<std::size_t>(c)].load();
}

std::size_t EvaluationLedger::category_sum() const noexcept {
    std::size_t s = 0;
    for (const auto& c : counts_) s += c.load();
    return s;
}

void EvaluationLedger::reset() noexcept {
    for (auto& c : counts_) c.store(0);
    total_.store(0);
}

int default_workers() {
    if (const char* env = std::getenv("AUKI_WORKERS")) {
        int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 1;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
    if (nw <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(nw);
        for (std::size_t w = 0; w < nw; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace auki
