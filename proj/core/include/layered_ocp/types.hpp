#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace layered_ocp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorSeq = std::vector<Vector>;
using MatrixSeq = std::vector<Matrix>;

/// Paired state (N+1) and input (N) sequences.
struct Trajectory {
  VectorSeq states;
  VectorSeq inputs;

  std::size_t horizon() const { return inputs.size(); }
  Eigen::Index state_dim() const { return states.empty() ? 0 : states.front().size(); }
  Eigen::Index input_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

  /// Throws InvalidArgument when the length or dimension invariants fail.
  void validate() const;
};

/// Stacks a sequence of equally sized vectors into one column.
Vector stack(const VectorSeq &seq);

/// Euclidean norm of the stacked sequence difference a - b.
double stacked_distance(const VectorSeq &a, const VectorSeq &b);

bool all_finite(const Vector &v);

}  // namespace layered_ocp
