#include "groupemo/fusion.hpp"

#include <charconv>
#include <cmath>

#include "groupemo/error.hpp"

namespace groupemo::fusion {

void CnnEvidenceCpt::validate() const {
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    double column = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const double p = table[k][y];
      if (!(p >= 0.0 && p <= 1.0)) throw InputError("classifier CPT entry outside [0, 1]");
      column += p;
    }
    if (std::abs(column - 1.0) > 1e-9) {
      throw InputError("classifier CPT column for '" + std::string(class_name(static_cast<int>(y))) +
                       "' does not sum to 1");
    }
  }
}

CnnEvidenceCpt build_cnn_cpt(const ConfusionCounts& confusion, double alpha) {
  if (!(alpha >= 0.0)) throw InputError("smoothing alpha must be non-negative");
  CnnEvidenceCpt cpt;
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    std::size_t row = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) row += confusion[y][k];
    const double denom = static_cast<double>(row) + 3.0 * alpha;
    if (denom == 0.0) {
      throw InputError("no validation samples for class '" + std::string(class_name(static_cast<int>(y))) +
                       "' and alpha is 0");
    }
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      cpt.table[k][y] = (static_cast<double>(confusion[y][k]) + alpha) / denom;
    }
  }
  cpt.validate();
  return cpt;
}

FusionMode FusionMode::weighted_mean(double w) {
  FusionMode m{Kind::weighted_mean, w};
  m.validate();
  return m;
}

void FusionMode::validate() const {
  if (kind == Kind::weighted_mean && !(weight >= 0.0 && weight <= 1.0)) {
    throw InputError("weighted_mean weight must lie in [0, 1]");
  }
}

FusionMode parse_mode(std::string_view text) {
  if (text == "redirection") return FusionMode::redirection();
  if (text == "mean") return FusionMode::mean();
  constexpr std::string_view prefix = "weighted:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string_view num = text.substr(prefix.size());
    double w = 0.0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), w);
    if (ec != std::errc() || ptr != num.data() + num.size() || num.empty()) {
      throw InputError("bad fusion weight in '" + std::string(text) + "'");
    }
    return FusionMode::weighted_mean(w);
  }
  throw InputError("unknown fusion mode '" + std::string(text) + "' (redirection, mean or weighted:W)");
}

std::string format_mode(const FusionMode& mode) {
  switch (mode.kind) {
    case FusionMode::Kind::redirection:
      return "redirection";
    case FusionMode::Kind::mean:
      return "mean";
    case FusionMode::Kind::weighted_mean: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, mode.weight);
      return "weighted:" + std::string(buf, res.ptr);
    }
  }
  return "redirection";
}

FusedPrediction fuse(const FusionMode& mode, const bottom_up::GroupPrediction& bottom,
                     const top_down::ScenePosteriorModel& model, std::span<const std::string> descriptors) {
  mode.validate();
  if (mode.kind == FusionMode::Kind::redirection && !model.cnn_cpt) {
    throw InputError("redirection fusion needs a classifier CPT in the BN file (run calibrate)");
  }
  top_down::Evidence ev = top_down::set_evidence(model, descriptors);
  FusedPrediction out;
  out.top_down = top_down::infer_posterior(model, ev);
  out.unknown = ev.unknown;

  if (!bottom.predicted || !bottom.mean_probs) {
    out.posterior = out.top_down;
  } else if (mode.kind == FusionMode::Kind::redirection) {
    ev.cnn_class = *bottom.predicted;
    out.posterior = top_down::infer_posterior(model, ev);
  } else {
    const double w = mode.kind == FusionMode::Kind::mean ? 0.5 : mode.weight;
    const ClassProbs& b = *bottom.mean_probs;
    for (std::size_t y = 0; y < kNumClasses; ++y) {
      out.posterior[y] = w * b[y] + (1.0 - w) * out.top_down[y];
    }
  }
  out.predicted = argmax(out.posterior);
  return out;
}

}  // namespace groupemo::fusion
