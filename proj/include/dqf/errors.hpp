#pragma once

#include <stdexcept>
#include <string>

namespace dqf {

// Argument outside the support or parameter outside its valid range.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Sample with zero dispersion; no scale can be estimated from it.
class DegenerateSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter vector outside the allowable region of the model.
class RegionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed input files, missing calendar coverage, bad configuration.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dqf
