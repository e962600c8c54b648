#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace bandmix {

/// Base class for every error raised by the library. Callers that only care
/// about "something went wrong in bandmix" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates an operation's precondition (bad shape, bad config, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// On-disk data (WAV, checkpoint, config) is malformed or inconsistent.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename E = InvalidArgument, typename... Args>
inline void require(bool cond, Args&&... msg) {
  if (!cond) throw E(detail::concat(std::forward<Args>(msg)...));
}

template <typename It>
bool all_finite(It first, It last) {
  for (; first != last; ++first) {
    if (!std::isfinite(static_cast<double>(*first))) return false;
  }
  return true;
}

/// Worker-thread cap, read from BANDMIX_NUM_THREADS. Defaults to 1 so that
/// every run is single-threaded and deterministic unless asked otherwise.
inline std::size_t num_threads() {
  if (const char* env = std::getenv("BANDMIX_NUM_THREADS")) {
    try {
      long n = std::stol(env);
      if (n >= 1) return static_cast<std::size_t>(n);
    } catch (...) {
    }
  }
  return 1;
}

}  // namespace bandmix
