#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace layerprobe {

// Bad files, schemas, ids or arguments. The CLI maps these to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver failures and degenerate data (constant series, non-SPD systems).
// The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningSink = std::function<void(std::string_view)>;

namespace detail {
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
inline WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}
}  // namespace detail

// Replaces the process-wide warning sink; returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(detail::warning_mutex());
  std::swap(detail::warning_sink(), sink);
  return sink;
}

inline void warn(std::string_view msg) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

// Rethrows `e` with `prefix` prepended, preserving its category.
[[noreturn]] inline void rethrow_with_context(const std::exception& e, const std::string& prefix) {
  if (dynamic_cast<const NumericalError*>(&e)) throw NumericalError(prefix + e.what());
  throw InputError(prefix + e.what());
}

}  // namespace layerprobe
