#pragma once

#include <stdexcept>
#include <string>

namespace saddle {

/// A distribution with E[h^2] = 0 was passed where a second moment is divided by.
class DegenerateDistributionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Exact batch enumeration would exceed the multiset cap.
class EnumerationLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// A sufficient condition was evaluated outside the regime where it holds.
class InapplicableConditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A simulation produced a non-finite loss or iterate.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace saddle
