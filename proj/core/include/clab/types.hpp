#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace clab {

// Conserved-variable vectors never exceed four components here, so the
// storage is inline and nothing in the hot loops touches the heap.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using State = Vec;

enum class ErrorKind {
  Parameter,     // bad argument or configuration value
  Domain,        // state outside the admissible set
  Hyperbolicity, // complex characteristic speeds
  Continuation,  // Newton failure along a shock curve
  DomainExit,    // shock curve left the admissible set
  Sampling,      // no usable samples
  Positivity,    // solver produced an inadmissible cell
  Reference,     // reference solution lost its discontinuity
  Extension,     // lookup outside a grid
  WeightTooLarge,
  Hypothesis,    // a structural shock-curve condition fails
  Envelope,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

inline Vec make_state(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace clab
