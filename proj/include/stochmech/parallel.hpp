#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace stochmech {

/// Persistent worker pool for repeated parallel regions (grid sweeps run
/// thousands of regions per second; spawning threads per region would cost
/// more than the work).
///
/// Chunks are claimed under the mutex: chunks are deliberately coarse, so the
/// lock adds nothing measurable, and claiming stays unambiguous across
/// back-to-back regions (a lock-free counter lets a straggler from the
/// previous region steal an index from the next one).
class ThreadPool {
public:
    explicit ThreadPool(unsigned threads) {
        if (threads == 0) threads = std::thread::hardware_concurrency();
        if (threads == 0) threads = 1;
        const unsigned workers = threads > 1 ? threads - 1 : 0;
        for (unsigned w = 0; w < workers; ++w)
            workers_.emplace_back([this] { worker_loop(); });
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        wake_.notify_all();
        for (auto& t : workers_) t.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    unsigned size() const { return static_cast<unsigned>(workers_.size()) + 1; }

    /// Runs fn(chunk_index) for every chunk in [0, n_chunks), also on the
    /// calling thread, and blocks until all chunks finished. Work items must
    /// not depend on which thread executes them. Not reentrant: one region at
    /// a time, driven from one thread.
    void run(std::size_t n_chunks, const std::function<void(std::size_t)>& fn) {
        if (n_chunks == 0) return;
        if (workers_.empty() || n_chunks == 1) {
            for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
            return;
        }
        std::unique_lock<std::mutex> lock(mutex_);
        job_ = &fn;
        total_ = n_chunks;
        next_ = 0;
        pending_ = n_chunks;
        lock.unlock();
        wake_.notify_all();

        lock.lock();
        work(lock);
        done_.wait(lock, [this] { return pending_ == 0; });
        job_ = nullptr;
        std::exception_ptr e = error_;
        error_ = nullptr;
        lock.unlock();
        if (e) std::rethrow_exception(e);
    }

private:
    /// Claims and executes chunks until the current region is exhausted.
    /// Expects `lock` held; returns with it held.
    void work(std::unique_lock<std::mutex>& lock) {
        while (next_ < total_) {
            const std::size_t c = next_++;
            const auto* job = job_;
            lock.unlock();
            try {
                (*job)(c);
            } catch (...) {
                lock.lock();
                if (!error_) error_ = std::current_exception();
                lock.unlock();
            }
            lock.lock();
            if (--pending_ == 0) done_.notify_all();
        }
    }

    void worker_loop() {
        std::unique_lock<std::mutex> lock(mutex_);
        for (;;) {
            wake_.wait(lock, [this] { return stop_ || next_ < total_; });
            if (stop_) return;
            work(lock);
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable wake_, done_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t next_ = 0;
    std::size_t total_ = 0;
    std::size_t pending_ = 0;
    bool stop_ = false;
    std::exception_ptr error_;
};

/// Runs fn(chunk_index, begin, end) over [0, total) split into fixed-size
/// chunks. Chunk geometry depends only on (total, chunk_size), never on the
/// worker count, so callers that store per-chunk partial results and reduce
/// them in chunk order get bitwise-identical answers for any thread count.
inline void parallel_chunks(ThreadPool* pool, std::size_t total, std::size_t chunk_size,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (total == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t n_chunks = (total + chunk_size - 1) / chunk_size;
    auto run_chunk = [&](std::size_t c) {
        const std::size_t begin = c * chunk_size;
        const std::size_t end = std::min(total, begin + chunk_size);
        fn(c, begin, end);
    };
    if (!pool) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
        return;
    }
    pool->run(n_chunks, run_chunk);
}

} // namespace stochmech
