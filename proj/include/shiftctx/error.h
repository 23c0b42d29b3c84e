// shiftctx/error.h

// Copyright 2026  The shiftctx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SHIFTCTX_ERROR_H_
#define SHIFTCTX_ERROR_H_

#include <stdexcept>
#include <string>

namespace shiftctx {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid layout or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Length that is not a multiple of the chunk, subsampling factor, etc.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong stream state (e.g. after finish).
class LifecycleError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (corpus, trace, weight file).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace shiftctx

#endif  // SHIFTCTX_ERROR_H_
