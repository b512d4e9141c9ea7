#include "twmx/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

namespace twmx {

namespace {

int env_threads() {
    const char* value = std::getenv("TWMX_THREADS");
    int requested = 0;
    if (value != nullptr) {
        try {
            requested = std::stoi(value);
        } catch (...) {
            requested = 0;
        }
    }
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& budget() {
    static std::atomic<int> threads{env_threads()};
    return threads;
}

} // namespace

int thread_count() { return budget().load(std::memory_order_relaxed); }

void set_thread_count(int threads) { budget().store(threads > 0 ? threads : env_threads()); }

} // namespace twmx
