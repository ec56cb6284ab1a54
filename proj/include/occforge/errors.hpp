// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace occforge {

/// Bad user input: malformed config, unreadable file, unknown key.
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A runtime contract the pipeline enforces on itself was violated.
/// The CLI maps this to exit code 3.
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvariantError(what);
}

}  // namespace occforge
