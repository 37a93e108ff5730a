#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace truncest {

// Every failure the library raises derives from Error, so callers can catch
// one type. The CLI maps each family to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(int expected, int actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  int expected() const { return expected_; }
  int actual() const { return actual_; }

 private:
  int expected_;
  int actual_;
};

// Raised when an exact (enumeration) routine is asked for a dimension above
// the configured ceiling.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Rejection sampling ran out of attempts before hitting the truncation set.
class RejectionBudgetError : public Error {
 public:
  explicit RejectionBudgetError(std::uint64_t attempts)
      : Error("rejection budget exhausted after " + std::to_string(attempts) +
              " attempts (truncation mass too small?)"),
        attempts_(attempts) {}
  std::uint64_t attempts() const { return attempts_; }

 private:
  std::uint64_t attempts_;
};

// The fat sampler could not fill some coordinates within its budget.
class FatnessDeficitError : public Error {
 public:
  FatnessDeficitError(std::vector<int> stuck, std::uint64_t samples_consumed)
      : Error(describe(stuck, samples_consumed)),
        stuck_(std::move(stuck)),
        samples_consumed_(samples_consumed) {}
  const std::vector<int>& stuck_coordinates() const { return stuck_; }
  std::uint64_t samples_consumed() const { return samples_consumed_; }

 private:
  static std::string describe(const std::vector<int>& stuck, std::uint64_t used) {
    std::string s = "fatness deficit: coordinates {";
    for (std::size_t k = 0; k < stuck.size(); ++k) {
      if (k) s += ",";
      s += std::to_string(stuck[k]);
    }
    return s + "} never became flippable inside S after " + std::to_string(used) +
           " truncated samples";
  }
  std::vector<int> stuck_;
  std::uint64_t samples_consumed_;
};

// Fewer than d linearly independent support vectors.
class IdentifiabilityError : public Error {
 public:
  IdentifiabilityError(std::string what, int rank, int dim)
      : Error(std::move(what)), rank_(rank), dim_(dim) {}
  int rank() const { return rank_; }
  int dim() const { return dim_; }

 private:
  int rank_;
  int dim_;
};

// The anchor used to normalize a linear system has zero mass.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

class IllConditionedError : public Error {
 public:
  explicit IllConditionedError(double kappa)
      : Error("identifiability system is ill-conditioned (condition number " +
              std::to_string(kappa) + "); the truncated law is concentrated near a hyperplane"),
        kappa_(kappa) {}
  double condition_number() const { return kappa_; }

 private:
  double kappa_;
};

// A sample-count budget (not a rejection budget) ran out, e.g. the ranking
// tournament never formed a total order.
class SampleBudgetError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace truncest
