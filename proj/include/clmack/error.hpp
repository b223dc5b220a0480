#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clmack {

/// Malformed input: bad shapes, out-of-range parameters, unparsable files.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An estimator cannot be evaluated on the given data (zero denominators,
/// zero cells inside ratio sums). Carries the offending 1-based cell; a
/// column-only failure leaves `row` at 0.
class EstimationError : public std::runtime_error {
public:
  EstimationError(const std::string& what, std::size_t row, std::size_t col)
      : std::runtime_error(what), row_(row), col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

private:
  std::size_t row_;
  std::size_t col_;
};

/// A closed form is requested for a model outside its domain of validity
/// (e.g. the estimation-error scale for dependent delay/size laws).
class UnsupportedModel : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

} // namespace clmack
