#pragma once

#include <cstdint>

namespace lfb::flops {

// Multiply-add counter wired into the forward kernels. Disabled (null) by
// default; tests enable it to cross-check estimate_flops against the work a
// forward pass actually performs. Counts 2 per multiply-add, 1 per lone
// add/divide, matching the accounting rules of estimate_flops.
class Counter {
public:
    void add(std::uint64_t n) { total_ += n; }
    std::uint64_t total() const { return total_; }
    void reset() { total_ = 0; }

private:
    std::uint64_t total_ = 0;
};

inline thread_local Counter* active = nullptr;

inline void tally(std::uint64_t n) {
    if (active) active->add(n);
}

// RAII scope that routes kernel tallies into a counter.
class Scope {
public:
    explicit Scope(Counter& c) : prev_(active) { active = &c; }
    ~Scope() { active = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

private:
    Counter* prev_;
};

}  // namespace lfb::flops
