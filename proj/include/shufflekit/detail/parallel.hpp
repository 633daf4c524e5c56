/*
 * Copyright 2026 The shufflekit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SHUFFLEKIT_DETAIL_PARALLEL_HPP
#define SHUFFLEKIT_DETAIL_PARALLEL_HPP

#include <chrono>
#include <cstdint>
#include <exception>
#include <mutex>

namespace shufflekit::detail {

// Exceptions cannot cross an OpenMP region boundary; tasks park the first
// one here and the caller rethrows after the join.
class ExceptionSink {
public:
    void capture() noexcept {
        std::lock_guard lock(mutex_);
        if (!first_) first_ = std::current_exception();
    }

    void rethrow() {
        if (first_) std::rethrow_exception(first_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr first_;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}

    uint64_t elapsed_ns() const {
        auto d = std::chrono::steady_clock::now() - start_;
        return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(d).count());
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace shufflekit::detail

#endif // SHUFFLEKIT_DETAIL_PARALLEL_HPP
