#include "groupemo/emotion.hpp"

#include "groupemo/error.hpp"

namespace groupemo {

namespace {
constexpr std::array<std::string_view, kNumClasses> kNames{"positive", "neutral", "negative"};
}

std::string_view class_name(int index) {
  if (index < 0 || index >= static_cast<int>(kNumClasses)) {
    throw Error("class index out of range: " + std::to_string(index));
  }
  return kNames[static_cast<std::size_t>(index)];
}

std::optional<int> parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

int argmax(const ClassProbs& probs) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(kNumClasses); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return best;
}

double sum(const ClassProbs& probs) {
  return probs[0] + probs[1] + probs[2];
}

}  // namespace groupemo
