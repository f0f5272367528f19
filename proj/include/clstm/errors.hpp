// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace clstm {

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file was readable but its contents are not in the expected format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frames within one video disagree on their dimensions.
class DimensionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace clstm
