#pragma once

#include <stdexcept>
#include <string>

namespace skelgrasp {

/// Bad or unusable input data (unreadable files, malformed meshes, bad configs).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An algorithm could not produce a result for otherwise valid input.
class AlgorithmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skelgrasp
