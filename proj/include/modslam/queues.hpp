#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>

namespace modslam {

/// Lossless FIFO: push blocks while full, pop blocks while empty. close()
/// wakes everyone; pop then drains what is left and returns nullopt.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("queue capacity must be >= 1");
  }

  /// Returns the depth right after insertion, or 0 when the queue was
  /// closed before the item fit.
  std::size_t push(T item) {
    std::unique_lock lock(m_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return 0;
    items_.push_back(std::move(item));
    const std::size_t depth = items_.size();
    max_depth_ = std::max(max_depth_, depth);
    not_empty_.notify_one();
    return depth;
  }

  std::optional<T> pop() {
    std::unique_lock lock(m_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(m_);
      closed_ = true;
    }
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t max_depth() const {
    std::lock_guard lock(m_);
    return max_depth_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex m_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  std::size_t max_depth_ = 0;
  bool closed_ = false;
};

/// Lossy FIFO: push never blocks; when full the oldest item is discarded to
/// make room for the newest and counted as dropped.
template <typename T>
class NewestWinsQueue {
 public:
  explicit NewestWinsQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("queue capacity must be >= 1");
  }

  void push(T item) {
    {
      std::lock_guard lock(m_);
      if (closed_) return;
      if (items_.size() == capacity_) {
        items_.pop_front();
        ++dropped_;
      }
      items_.push_back(std::move(item));
    }
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(m_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(m_);
      closed_ = true;
    }
    not_empty_.notify_all();
  }

  std::size_t dropped() const {
    std::lock_guard lock(m_);
    return dropped_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex m_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

}  // namespace modslam
