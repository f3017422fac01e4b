#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wmsr {

/// Fixed-size worker pool used by the kernels. Work is always partitioned
/// over independent output ranges, so results do not depend on the thread
/// count; the deterministic flag additionally forces serial execution.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool(default_threads());
        return pool;
    }

    static std::size_t default_threads() {
        std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("WMSR_THREADS")) {
            try {
                long cap = std::stol(env);
                if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
            } catch (...) {
            }
        }
        return n;
    }

    explicit ThreadPool(std::size_t threads) : size_(std::max<std::size_t>(1, threads)) {
        for (std::size_t i = 1; i < size_; ++i) workers_.emplace_back([this] { loop(); });
    }

    ~ThreadPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    std::size_t size() const { return size_; }

    void set_deterministic(bool on) { deterministic_ = on; }
    bool deterministic() const { return deterministic_; }

    /// Runs fn(begin, end) over [0, count) split into contiguous chunks.
    void run(std::size_t count, std::size_t grain, const std::function<void(std::size_t, std::size_t)>& fn) {
        if (count == 0) return;
        grain = std::max<std::size_t>(1, grain);
        std::size_t chunks = (count + grain - 1) / grain;
        if (deterministic_ || size_ == 1 || chunks == 1 || in_worker()) {
            fn(0, count);
            return;
        }
        std::unique_lock call_lock(call_mutex_);
        std::atomic<std::size_t> next{0};
        std::atomic<std::size_t> done{0};
        auto task = [&] {
            for (;;) {
                std::size_t c = next.fetch_add(1);
                if (c >= chunks) break;
                std::size_t b = c * grain;
                fn(b, std::min(count, b + grain));
                done.fetch_add(1);
            }
        };
        {
            std::lock_guard lock(mutex_);
            job_ = task;
            ++generation_;
        }
        cv_.notify_all();
        in_worker() = true;
        task();
        in_worker() = false;
        while (done.load() < chunks) std::this_thread::yield();
        {
            std::lock_guard lock(mutex_);
            job_ = nullptr;
        }
        // Workers still inside task() reference this frame.
        while (active_.load() != 0) std::this_thread::yield();
    }

private:
    static bool& in_worker() {
        thread_local bool flag = false;
        return flag;
    }

    void loop() {
        in_worker() = true;
        std::size_t seen = 0;
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return stop_ || (generation_ != seen && job_); });
                if (stop_) return;
                seen = generation_;
                job = job_;
                active_.fetch_add(1);
            }
            job();
            active_.fetch_sub(1);
        }
    }

    std::size_t size_;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::mutex call_mutex_;
    std::condition_variable cv_;
    std::function<void()> job_;
    std::size_t generation_ = 0;
    bool stop_ = false;
    std::atomic<std::size_t> active_{0};
    std::atomic<bool> deterministic_{false};
};

inline void parallel_for(std::size_t count, std::size_t grain,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
    ThreadPool::instance().run(count, grain, fn);
}

inline void set_deterministic(bool on) { ThreadPool::instance().set_deterministic(on); }

}  // namespace wmsr
