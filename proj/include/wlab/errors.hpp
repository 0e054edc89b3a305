#pragma once

#include <stdexcept>
#include <string>

namespace wlab {

struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PoleError : std::domain_error {
  using std::domain_error::domain_error;
};

struct OutOfTubeError : std::domain_error {
  using std::domain_error::domain_error;
};

struct UnderDeterminedFitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateImageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InconsistentCurvatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SelfIntersectingInputError : InvalidInputError {
  using InvalidInputError::InvalidInputError;
};

}  // namespace wlab
