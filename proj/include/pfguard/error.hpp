// Copyright 2026 The PFGuard Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PFGUARD_ERROR_HPP_
#define PFGUARD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pfguard {

// Precondition or domain violation inside a library call.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent experiment configuration. The CLI maps this to
// exit code 2; every other Error maps to 3.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

#define PFGUARD_CHECK(cond, msg)                                   \
  do {                                                             \
    if (!(cond)) throw ::pfguard::Error(std::string(msg));         \
  } while (false)

}  // namespace pfguard

#endif  // PFGUARD_ERROR_HPP_
