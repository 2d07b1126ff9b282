#ifndef GROUPEMO_EMOTION_HPP
#define GROUPEMO_EMOTION_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace groupemo {

inline constexpr std::size_t kNumClasses = 3;

/// Class indices are fixed: 0 positive, 1 neutral, 2 negative.
enum class Emotion : int { positive = 0, neutral = 1, negative = 2 };

using ClassProbs = std::array<double, kNumClasses>;

std::string_view class_name(int index);
/// Parses "positive" / "neutral" / "negative"; nullopt otherwise.
std::optional<int> parse_class(std::string_view name);

/// Index of the largest entry; ties go to the lowest index.
int argmax(const ClassProbs& probs);

double sum(const ClassProbs& probs);

}  // namespace groupemo

#endif  // GROUPEMO_EMOTION_HPP
