#pragma once

#include <stdexcept>
#include <string>

namespace curstat {

// Error taxonomy shared by all estimators. Each condition has its own type so
// callers can distinguish bad input from numerical degeneracy.

struct EmptySample : std::runtime_error {
  explicit EmptySample(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidDatum : std::runtime_error {
  explicit InvalidDatum(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateDiagram : std::runtime_error {
  explicit DegenerateDiagram(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidBandwidth : std::runtime_error {
  explicit InvalidBandwidth(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularDesign : std::runtime_error {
  explicit SingularDesign(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when every bootstrap replicate at some grid point has (numerically)
// zero variance, so the Studentized pivot is undefined there.
struct DegenerateWindow : std::runtime_error {
  explicit DegenerateWindow(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidSubsample : std::runtime_error {
  explicit InvalidSubsample(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnstableFit : std::runtime_error {
  explicit UnstableFit(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace curstat
