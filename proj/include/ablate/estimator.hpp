#pragma once

// Reductions of a DeltaMatrix: the importance point estimate and the two
// sample sequences behind the random-variable and fixed-data intervals.

#include <cstddef>
#include <string_view>
#include <vector>

#include "ablate/ablation.hpp"

namespace ablate {

enum class Formulation { rv, fd };

inline std::string_view to_string(Formulation f) { return f == Formulation::rv ? "rv" : "fd"; }

struct SampleSequence {
  std::vector<double> values;
  Formulation formulation = Formulation::rv;
};

/// Grand mean of all N*K deltas, accumulated over k then j.
inline double point_estimate(const DeltaMatrix& deltas) {
  if (deltas.deltas.empty()) throw InvalidArgument("empty delta matrix");
  double sum = 0.0;
  for (const double d : deltas.deltas) sum += d;
  return sum / static_cast<double>(deltas.deltas.size());
}

/// Every delta as its own sample, in flat s = k*N + j order. Length N*K.
inline SampleSequence rv_samples(const DeltaMatrix& deltas) {
  return {deltas.deltas, Formulation::rv};
}

/// One sample per replicate: the mean over rows of column k. Length K.
/// K = 1 is representable here; interval construction rejects it.
inline SampleSequence fd_samples(const DeltaMatrix& deltas) {
  SampleSequence out{std::vector<double>(deltas.replicates), Formulation::fd};
  for (std::size_t k = 0; k < deltas.replicates; ++k) {
    double sum = 0.0;
    for (const double d : deltas.replicate(k)) sum += d;
    out.values[k] = sum / static_cast<double>(deltas.rows);
  }
  return out;
}

inline SampleSequence samples_for(const DeltaMatrix& deltas, Formulation f) {
  return f == Formulation::rv ? rv_samples(deltas) : fd_samples(deltas);
}

}  // namespace ablate
