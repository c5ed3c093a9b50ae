#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eve {

using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A horizon x dims block of actions, stored time-major: row t occupies
// values[t * dims, (t + 1) * dims).
struct ActionChunk {
  int horizon = 0;
  int dims = 0;
  Vector values;

  ActionChunk() = default;
  ActionChunk(int h, int d) : horizon(h), dims(d), values(Vector::Zero(h * d)) {
    if (h < 0 || d < 0) throw Error("ActionChunk: negative shape");
  }
  ActionChunk(int h, int d, Vector flat) : horizon(h), dims(d), values(std::move(flat)) {
    if (values.size() != static_cast<Eigen::Index>(h) * d) {
      throw Error("ActionChunk: flat length " + std::to_string(values.size()) +
                  " does not match " + std::to_string(h) + "x" + std::to_string(d));
    }
  }

  double& at(int t, int j) { return values[t * dims + j]; }
  double at(int t, int j) const { return values[t * dims + j]; }

  Vector row(int t) const { return values.segment(t * dims, dims); }

  // Rows [begin, begin + length) as a flat time-major vector.
  Vector window(int begin, int length) const {
    if (begin < 0 || length < 0 || begin + length > horizon) {
      throw Error("ActionChunk::window out of range");
    }
    return values.segment(begin * dims, length * dims);
  }

  bool finite() const { return values.allFinite(); }

  bool same_shape(const ActionChunk& other) const {
    return horizon == other.horizon && dims == other.dims;
  }

  friend bool operator==(const ActionChunk& a, const ActionChunk& b) {
    return a.same_shape(b) && a.values == b.values;
  }
};

// Per-action-dimension boolean mask, broadcast over every timestep.
using DimMask = std::vector<bool>;

// The fused reference trajectory handed to the guided incorporators.
struct AggregatedFeedback {
  ActionChunk reference;
  DimMask mask;
  std::vector<double> weights_used;

  bool governs(int dim) const { return dim < static_cast<int>(mask.size()) && mask[dim]; }
};

}  // namespace eve
