/*
 * Copyright 2026 The TPFL Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TPFL_ERROR_HPP_
#define TPFL_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <vector>

namespace tpfl {

// Base class for every error raised by the simulator. `kind()` is a stable
// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error("domain", message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error("numerical", message) {}
};

class DataFormatError : public Error {
 public:
  explicit DataFormatError(const std::string& message)
      : Error("data_format", message) {}
};

class PartitionError : public Error {
 public:
  explicit PartitionError(const std::string& message)
      : Error("partition", message) {}
};

// Carries every problem found while validating a configuration, not just the
// first one.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error("config", join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace tpfl

#endif  // TPFL_ERROR_HPP_
