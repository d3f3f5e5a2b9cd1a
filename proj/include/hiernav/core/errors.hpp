#pragma once

#include <stdexcept>
#include <string>

namespace hiernav {

// Exit-code classes used by the CLI: 1 usage, 2 data/format, 3 numerical.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scene generation could not satisfy its invariants; indicates a bug.
class GenerationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace hiernav
