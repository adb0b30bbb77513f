/* Copyright 2026 The T3 Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


// Head-pruning sessions. A session holds only a HeadMask over a checkpoint;
// weights stay shared.

#pragma once

#include <chrono>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "t3/error.hpp"
#include "t3/model.hpp"

namespace t3::api {

using Clock = std::chrono::steady_clock;

struct SessionState {
  std::string id;
  std::string run_id;
  std::size_t epoch = 0;
  HeadMask mask;
};

class Session {
 public:
  Session(std::string id, std::string run_id, std::size_t epoch, const ModelConfig& cfg)
      : state_{std::move(id), std::move(run_id), epoch, HeadMask::all_active(cfg)} {}

  SessionState snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  /// Applies `f` to the mask under the session lock and returns the result.
  template <typename F>
  SessionState mutate(F&& f) {
    std::lock_guard lock(mu_);
    f(state_.mask);
    return state_;
  }

 private:
  mutable std::mutex mu_;
  SessionState state_;
};

/// Sessions with an idle timeout and an LRU cap. Ids of expired or evicted
/// sessions are remembered so lookups can report "gone" rather than "unknown".
class SessionStore {
 public:
  using Now = std::function<Clock::time_point()>;

  SessionStore(std::chrono::seconds idle_timeout, std::size_t max_sessions, Now now = Clock::now)
      : idle_timeout_(idle_timeout), max_sessions_(max_sessions), now_(std::move(now)),
        rng_(std::random_device{}()) {}

  std::shared_ptr<Session> create(const std::string& run_id, std::size_t epoch, const ModelConfig& cfg) {
    std::lock_guard lock(mu_);
    expire_locked();
    while (max_sessions_ > 0 && entries_.size() >= max_sessions_) retire_locked(lru_.back());
    std::string id;
    do {
      id = fresh_id_locked();
    } while (entries_.count(id) || gone_.count(id));
    auto s = std::make_shared<Session>(id, run_id, epoch, cfg);
    lru_.push_front(id);
    entries_.emplace(id, Entry{s, now_(), lru_.begin()});
    return s;
  }

  /// Looks a session up and refreshes its idle clock.
  std::shared_ptr<Session> get(const std::string& id) {
    std::lock_guard lock(mu_);
    expire_locked();
    const auto it = entries_.find(id);
    if (it == entries_.end()) {
      require(!gone_.count(id), ErrorKind::kGone, "session '" + id + "' has expired");
      fail(ErrorKind::kNotFound, "unknown session '" + id + "'");
    }
    it->second.last_access = now_();
    lru_.splice(lru_.begin(), lru_, it->second.position);
    return it->second.session;
  }

  void remove(const std::string& id) {
    std::lock_guard lock(mu_);
    const auto it = entries_.find(id);
    require(it != entries_.end(), ErrorKind::kNotFound, "unknown session '" + id + "'");
    retire_locked(id);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  struct Entry {
    std::shared_ptr<Session> session;
    Clock::time_point last_access;
    std::list<std::string>::iterator position;
  };

  std::string fresh_id_locked() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
      auto v = rng_();
      for (int k = 0; k < 16; ++k, v >>= 4) id.push_back(kHex[v & 0xF]);
    }
    return id;
  }

  void retire_locked(std::string id) {  // by value: callers pass list elements
    const auto it = entries_.find(id);
    if (it == entries_.end()) return;
    lru_.erase(it->second.position);
    entries_.erase(it);
    gone_.insert(id);
  }

  void expire_locked() {
    const auto now = now_();
    while (!lru_.empty()) {
      const auto& oldest = entries_.at(lru_.back());
      if (now - oldest.last_access < idle_timeout_) break;
      retire_locked(lru_.back());
    }
  }

  const std::chrono::seconds idle_timeout_;
  const std::size_t max_sessions_;
  Now now_;
  std::mt19937_64 rng_;
  mutable std::mutex mu_;
  std::list<std::string> lru_;  // most recently used first
  std::unordered_map<std::string, Entry> entries_;
  std::unordered_set<std::string> gone_;
};

}  // namespace t3::api
