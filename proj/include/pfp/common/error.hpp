// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <fmt/format.h>

namespace pfp {

// Error with a stable machine-readable code ("module.kind") alongside the
// human-readable message. The CLI prints the code as a single-line prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

template <typename... Args>
[[noreturn]] void fail(std::string code, fmt::format_string<Args...> f, Args&&... args) {
  throw Error(std::move(code), fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace pfp
