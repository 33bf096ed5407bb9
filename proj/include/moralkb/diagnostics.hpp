#pragma once

#include <mutex>
#include <string>
#include <vector>

namespace moralkb {

/// Thread-safe sink for non-fatal problems (skipped entities, dropped spans).
class Diagnostics {
 public:
  void add(std::string message) {
    std::lock_guard lock(mu_);
    messages_.push_back(std::move(message));
  }

  std::vector<std::string> messages() const {
    std::lock_guard lock(mu_);
    return messages_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return messages_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> messages_;
};

inline void note(Diagnostics* diag, std::string message) {
  if (diag) diag->add(std::move(message));
}

}  // namespace moralkb
