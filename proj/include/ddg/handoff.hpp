#pragma once

#include <condition_variable>
#include <mutex>
#include <optional>
#include <utility>

#include "ddg/error.hpp"

namespace ddg {

/// Thrown out of put/take once a slot has been closed.
class ChannelClosed : public Error {
 public:
  ChannelClosed() : Error("handoff slot closed") {}
  const char* category() const noexcept override { return "closed"; }
};

/// Single-slot blocking buffer between one producer and one consumer.
/// put() waits while the slot is full, take() waits while it is empty.
template <typename T>
class HandoffSlot {
 public:
  void put(T value) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return closed_ || !value_.has_value(); });
    if (closed_) throw ChannelClosed();
    value_ = std::move(value);
    cv_.notify_all();
  }

  T take() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return closed_ || value_.has_value(); });
    if (closed_) throw ChannelClosed();
    T out = std::move(*value_);
    value_.reset();
    cv_.notify_all();
    return out;
  }

  bool full() const {
    std::lock_guard lock(mutex_);
    return value_.has_value();
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    cv_.notify_all();
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::optional<T> value_;
  bool closed_ = false;
};

}  // namespace ddg
