#pragma once

#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

namespace dexmouse {

/// Fixed-capacity MPMC queue; producers never block, a full queue rejects.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool try_push(T value) {
    std::lock_guard lock(mu_);
    if (items_.size() >= capacity_) {
      ++rejected_;
      return false;
    }
    items_.push_back(std::move(value));
    return true;
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(mu_);
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t rejected() const {
    std::lock_guard lock(mu_);
    return rejected_;
  }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<T> items_;
  std::size_t rejected_ = 0;
};

}  // namespace dexmouse
