// Copyright 2026 The nbest-search Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nbest {

// Base for every user/input error raised by the library. The CLI maps these
// to exit code 2; anything else escaping is an internal failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnknownToken : public Error {
 public:
  UnknownToken(std::string token, std::size_t position)
      : Error("unknown token '" + token + "' at position " +
              std::to_string(position)),
        token_(std::move(token)),
        position_(position) {}

  const std::string& token() const noexcept { return token_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string token_;
  std::size_t position_;
};

class PrefixComplete : public Error {
 public:
  PrefixComplete() : Error("prefix already ends with the end-of-sentence token") {}
};

class IncompleteSequence : public Error {
 public:
  IncompleteSequence()
      : Error("sequence does not end with exactly one end-of-sentence token") {}
};

class InvalidSeed : public Error {
 public:
  using Error::Error;
};

class SpaceTooLarge : public Error {
 public:
  using Error::Error;
};

class TooFewReferences : public Error {
 public:
  explicit TooFewReferences(std::size_t n)
      : Error("uncertainty needs at least 2 references, got " +
              std::to_string(n)) {}
};

class AllEmptyReferences : public Error {
 public:
  AllEmptyReferences() : Error("all references are empty") {}
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class IdMismatch : public Error {
 public:
  explicit IdMismatch(std::string id)
      : Error("id mismatch at '" + id + "'"), id_(std::move(id)) {}

  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class UnterminatedExact : public Error {
 public:
  explicit UnterminatedExact(const std::string& id)
      : Error("exact search did not terminate for '" + id + "'") {}
};

class ModelValidationError : public Error {
 public:
  explicit ModelValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept {
    return violations_;
  }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "model failed validation (" + std::to_string(v.size()) +
                      " violation(s))";
    for (const auto& s : v) out += "\n  " + s;
    return out;
  }

  std::vector<std::string> violations_;
};

// Malformed input file; line is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + (line ? ":" + std::to_string(line) : std::string()) +
              ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace nbest
