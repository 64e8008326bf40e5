#include "layered_ocp/types.hpp"

#include <cmath>

#include "layered_ocp/errors.hpp"

namespace layered_ocp {

void Trajectory::validate() const {
  if (states.size() != inputs.size() + 1) {
    throw InvalidArgument("trajectory must hold one more state than inputs");
  }
  const Eigen::Index n = states.front().size();
  for (const auto &x : states) {
    if (x.size() != n) throw InvalidArgument("trajectory state dimensions differ");
  }
  if (!inputs.empty()) {
    const Eigen::Index m = inputs.front().size();
    for (const auto &u : inputs) {
      if (u.size() != m) throw InvalidArgument("trajectory input dimensions differ");
    }
  }
}

Vector stack(const VectorSeq &seq) {
  Eigen::Index total = 0;
  for (const auto &v : seq) total += v.size();
  Vector out(total);
  Eigen::Index offset = 0;
  for (const auto &v : seq) {
    out.segment(offset, v.size()) = v;
    offset += v.size();
  }
  return out;
}

double stacked_distance(const VectorSeq &a, const VectorSeq &b) {
  if (a.size() != b.size()) throw InvalidArgument("sequence lengths differ");
  double sq = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != b[t].size()) throw InvalidArgument("sequence dimensions differ");
    sq += (a[t] - b[t]).squaredNorm();
  }
  return std::sqrt(sq);
}

bool all_finite(const Vector &v) { return v.allFinite(); }

}  // namespace layered_ocp
