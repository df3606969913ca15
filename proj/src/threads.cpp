#include "latencut/threads.hpp"

#include <atomic>
#include <cstdlib>

namespace latencut {

namespace {

int read_env_threads() {
    const char* s = std::getenv("LATENCUT_THREADS");
    if (!s || !*s) return 1;
    int n = std::atoi(s);
    return n < 1 ? 1 : n;
}

std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{read_env_threads()};
    return cap;
}

} // namespace

int kernel_threads() { return thread_cap().load(std::memory_order_relaxed); }

void set_kernel_threads(int n) { thread_cap().store(n < 1 ? 1 : n, std::memory_order_relaxed); }

} // namespace latencut
