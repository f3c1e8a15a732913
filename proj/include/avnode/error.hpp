#pragma once

#include <stdexcept>
#include <string>

namespace avnode {

/// Bad or insufficient input data (malformed files, empty series, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ABC sampler could not fill an acceptance slot within its proposal budget.
class AbcStall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace avnode
