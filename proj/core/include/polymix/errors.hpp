/*
 * Copyright 2026 The Polymix Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef POLYMIX_ERRORS_HPP_
#define POLYMIX_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace polymix {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A file is structurally malformed (bad header, truncated chunk, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file is well-formed but uses an encoding we do not decode.
class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

/// An all-zero clip cannot be level-normalized.
class SilentClipError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an API precondition (rate/length/shape mismatch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A persisted store failed validation on read.
class CorruptStoreError : public Error {
 public:
  using Error::Error;
};

/// A manifest line failed validation; carries the 1-based line number.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// No periodicity found in the onset envelope (silence or flat input).
class NoTempoError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument is outside its legal range.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// A model description cannot be realized (pooling chain exhausts the
/// input, layer applied to the wrong rank, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation produced non-finite values; carries the location.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A class has too few samples to split into the requested fold count.
class StratificationError : public Error {
 public:
  using Error::Error;
};

/// A track is too short to produce even one analysis segment.
class TooShortError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value was produced where the pipeline requires finite math.
class ComputeError : public Error {
 public:
  using Error::Error;
};

}  // namespace polymix

#endif  // POLYMIX_ERRORS_HPP_
