// Copyright 2026 The mlforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MLFORGE_ERROR_H_
#define MLFORGE_ERROR_H_

#include <stdexcept>
#include <string>
#include <utility>

namespace mlforge {

// Coarse error classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kUsage,      // bad invocation or bad argument to an operation
  kData,       // malformed input file, failed validation
  kNumerical,  // non-finite values during training
};

// All library failures are reported as mlforge::Error. `module` and `code`
// are short machine-readable tokens rendered as `E:<module>:<code>`.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, std::string code,
        const std::string& message)
      : std::runtime_error(message),
        kind_(kind),
        module_(std::move(module)),
        code_(std::move(code)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& module() const { return module_; }
  const std::string& code() const { return code_; }

  // "E:<module>:<code> <message>"
  std::string Tagged() const {
    return "E:" + module_ + ":" + code_ + " " + what();
  }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string code_;
};

inline Error DataError(std::string module, std::string code,
                       const std::string& message) {
  return Error(ErrorKind::kData, std::move(module), std::move(code), message);
}

inline Error UsageError(std::string module, std::string code,
                        const std::string& message) {
  return Error(ErrorKind::kUsage, std::move(module), std::move(code), message);
}

inline Error NumericalError(std::string module, std::string code,
                            const std::string& message) {
  return Error(ErrorKind::kNumerical, std::move(module), std::move(code),
               message);
}

}  // namespace mlforge

#endif  // MLFORGE_ERROR_H_
