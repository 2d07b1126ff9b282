#ifndef GROUPEMO_FUSION_HPP
#define GROUPEMO_FUSION_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "groupemo/bottom_up.hpp"
#include "groupemo/cnn_evidence.hpp"
#include "groupemo/top_down.hpp"

namespace groupemo::fusion {

/// Rows are true classes, columns predicted classes.
using ConfusionCounts = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

/// P(cnn = k | y) = (count[y][k] + alpha) / (row_total[y] + 3 alpha).
/// A true class with no samples is an InputError unless alpha > 0.
CnnEvidenceCpt build_cnn_cpt(const ConfusionCounts& confusion, double alpha = 0.0);

struct FusionMode {
  enum class Kind { redirection, mean, weighted_mean };

  Kind kind = Kind::redirection;
  double weight = 0.5;  // weight of the bottom-up side, weighted_mean only

  static FusionMode redirection() { return {Kind::redirection, 0.5}; }
  static FusionMode mean() { return {Kind::mean, 0.5}; }
  static FusionMode weighted_mean(double w);

  void validate() const;
  friend bool operator==(const FusionMode&, const FusionMode&) = default;
};

/// "redirection", "mean" or "weighted:W".
FusionMode parse_mode(std::string_view text);
std::string format_mode(const FusionMode& mode);

struct FusedPrediction {
  ClassProbs posterior{};
  std::optional<int> predicted;
  ClassProbs top_down{};             // descriptor-only posterior
  std::vector<std::string> unknown;  // descriptors outside the vocabulary
};

/// Combines the group's bottom-up output with the scene network.
///  redirection: the bottom-up class becomes evidence on the classifier node.
///  mean: elementwise mean of the bottom-up and top-down posteriors.
///  weighted_mean: w * bottom-up + (1 - w) * top-down.
/// Without a bottom-up prediction every mode returns the top-down posterior.
FusedPrediction fuse(const FusionMode& mode, const bottom_up::GroupPrediction& bottom,
                     const top_down::ScenePosteriorModel& model, std::span<const std::string> descriptors);

}  // namespace groupemo::fusion

#endif  // GROUPEMO_FUSION_HPP
