#ifndef GROUPEMO_EVALUATION_HPP
#define GROUPEMO_EVALUATION_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "groupemo/emotion.hpp"

namespace groupemo::evaluation {

inline constexpr std::size_t kNoneColumn = kNumClasses;

struct EvalReport {
  double accuracy = 0.0;
  // Rows are true classes; columns positive, neutral, negative, None.
  std::array<std::array<std::size_t, kNumClasses + 1>, kNumClasses> confusion{};
  ClassProbs per_class_recall{};  // 0 for classes without samples
  std::size_t n_samples = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// (true label, predicted class or nullopt for "None"). A None prediction
/// stays in the denominator and counts as wrong.
using LabeledPrediction = std::pair<int, std::optional<int>>;

EvalReport evaluate(std::span<const LabeledPrediction> predictions);

std::string report_to_json(const EvalReport& report);
/// Header "true,positive,neutral,negative,None", one row per true class.
std::string confusion_to_csv(const EvalReport& report);

struct SearchSpace {
  double learning_rate_min = 1e-4;  // sampled log-uniformly
  double learning_rate_max = 1e-2;
  std::vector<std::size_t> batch_sizes{32, 64, 128};
  double dropout_min = 0.3;
  double dropout_max = 0.6;
  std::vector<std::size_t> fc1_units{256, 512, 1024};
  std::vector<std::size_t> fc2_units{256, 512, 1024};
  std::size_t trials = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Keys as in SearchSpace; missing keys keep their defaults.
SearchSpace search_space_from_json(const std::string& text);

struct TrialConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 128;
  double dropout = 0.5;
  std::size_t fc1 = 1024;
  std::size_t fc2 = 512;

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  TrialConfig config;
  double score = 0.0;
};

struct SearchResult {
  std::size_t best_index = 0;
  std::vector<TrialRecord> trials;

  const TrialRecord& best() const { return trials.at(best_index); }
};

/// Config and seed of trial `index`; a pure function of (space.seed, index).
TrialRecord sample_trial(const SearchSpace& space, std::size_t index);

/// Objective: (config, trial seed) -> validation accuracy.
using Objective = std::function<double(const TrialConfig&, std::uint64_t)>;

/// Runs every trial in index order; the best score wins, ties to the earliest.
SearchResult random_search(const SearchSpace& space, const Objective& objective);

std::string trials_to_csv(const SearchResult& result);
std::string trial_config_to_json(const TrialRecord& trial);

}  // namespace groupemo::evaluation

#endif  // GROUPEMO_EVALUATION_HPP
