#ifndef GROUPEMO_CNN_EVIDENCE_HPP
#define GROUPEMO_CNN_EVIDENCE_HPP

#include <array>

#include "groupemo/emotion.hpp"

namespace groupemo::fusion {

/// Conditional table of the extra network node: table[k][y] is the
/// probability the face classifier predicts k when the true class is y.
/// Each column (fixed y) sums to one.
struct CnnEvidenceCpt {
  std::array<std::array<double, kNumClasses>, kNumClasses> table{};

  void validate() const;
  friend bool operator==(const CnnEvidenceCpt&, const CnnEvidenceCpt&) = default;
};

}  // namespace groupemo::fusion

#endif  // GROUPEMO_CNN_EVIDENCE_HPP
