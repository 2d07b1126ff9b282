#ifndef GROUPEMO_TOP_DOWN_HPP
#define GROUPEMO_TOP_DOWN_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groupemo/cnn_evidence.hpp"
#include "groupemo/emotion.hpp"
#include "groupemo/preprocess/manifest.hpp"

namespace groupemo::top_down {

using ClassCounts = std::array<std::size_t, kNumClasses>;

/// Per-class presence histogram of scene descriptors.
struct DescriptorCounts {
  std::vector<std::string> vocabulary;  // sorted, unique
  std::vector<ClassCounts> n_true;      // images of class y listing the descriptor
  std::vector<ClassCounts> n_false;     // images of class y not listing it
  ClassCounts class_counts{};           // images per class

  /// n_true + n_false == class_counts for every descriptor and class.
  void validate() const;
};

/// Star-shaped network: the emotion node y is the root, every vocabulary
/// descriptor is a Bernoulli child, and an optional child carries the face
/// classifier's prediction.
struct ScenePosteriorModel {
  ClassProbs prior{};
  double alpha = 1.0;
  std::vector<std::string> vocabulary;  // sorted, unique
  std::vector<ClassProbs> p_true;       // P(x_i = true | y), parallel to vocabulary
  std::optional<fusion::CnnEvidenceCpt> cnn_cpt;

  double p_false(std::size_t i, std::size_t y) const { return 1.0 - p_true[i][y]; }
  std::optional<std::size_t> index_of(std::string_view descriptor) const;
  void validate() const;

  friend bool operator==(const ScenePosteriorModel&, const ScenePosteriorModel&) = default;
};

/// Observed-true descriptor nodes; every other node stays unobserved.
struct Evidence {
  std::vector<std::size_t> observed;  // vocabulary indices, sorted, unique
  std::vector<std::string> unknown;   // inputs outside the vocabulary, first-seen order
  std::optional<int> cnn_class;       // value of the classifier node, if set
};

DescriptorCounts count_from_manifest(std::span<const preprocess::ImageRecord> records);

/// P(true | y) = (n_true + alpha) / (n_true + n_false + 2 alpha);
/// prior = class_counts normalized. Every class needs at least one image.
ScenePosteriorModel fit(const DescriptorCounts& counts, double alpha = 1.0);

Evidence set_evidence(const ScenePosteriorModel& model, std::span<const std::string> descriptors);

/// Exact posterior by variable elimination on the star graph: unobserved
/// leaves sum to one, leaving P(y) times the observed likelihoods.
/// Accumulated in log space. Throws ZeroLikelihoodError if every class
/// receives zero mass.
ClassProbs infer_posterior(const ScenePosteriorModel& model, const Evidence& evidence);

/// Reference posterior by enumerating the full joint over every descriptor
/// (and the classifier node). Vocabulary limited to 20 descriptors.
ClassProbs brute_force_joint(const ScenePosteriorModel& model, const Evidence& evidence);

inline constexpr std::size_t kBruteForceLimit = 20;

}  // namespace groupemo::top_down

#endif  // GROUPEMO_TOP_DOWN_HPP
