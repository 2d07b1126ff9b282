#ifndef GROUPEMO_BOTTOM_UP_HPP
#define GROUPEMO_BOTTOM_UP_HPP

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "groupemo/emotion.hpp"
#include "groupemo/nn/model.hpp"

namespace groupemo::bottom_up {

/// Anything that maps a normalized 64x64x3 face to three class probabilities.
class FaceClassifier {
 public:
  virtual ~FaceClassifier() = default;
  virtual ClassProbs classify(const Tensor<float>& face) const = 0;
  virtual std::vector<ClassProbs> classify_batch(std::span<const Tensor<float>> faces) const;
};

/// Adapts a trained network. Safe to share between threads.
class NetworkClassifier final : public FaceClassifier {
 public:
  explicit NetworkClassifier(nn::Network<float> net);
  ClassProbs classify(const Tensor<float>& face) const override;
  std::vector<ClassProbs> classify_batch(std::span<const Tensor<float>> faces) const override;

  const nn::Network<float>& network() const { return net_; }

 private:
  nn::Network<float> net_;
};

struct FacePrediction {
  ClassProbs probs{};  // positive, neutral, negative
  std::size_t source_face = 0;
};

struct GroupPrediction {
  std::optional<ClassProbs> mean_probs;
  std::optional<int> predicted;  // nullopt == "None": no faces
  std::size_t n_faces = 0;
};

/// Unweighted mean of the members' probability vectors. Renormalized only if
/// the mean drifts from a unit sum by more than 1e-6.
ClassProbs ensemble_probs(std::span<const ClassProbs> member_outputs);

FacePrediction ensemble_predict(std::span<const FaceClassifier* const> models, const Tensor<float>& face,
                                std::size_t source_face = 0);

std::vector<FacePrediction> ensemble_predict_batch(std::span<const FaceClassifier* const> models,
                                                   std::span<const Tensor<float>> faces);

/// Group decision: argmax of the mean face probabilities (ties to the lower
/// class index). No faces gives predicted == nullopt. With `weights`
/// (e.g. box areas) the mean is weighted instead.
GroupPrediction group_average(std::span<const FacePrediction> faces,
                              std::span<const double> weights = {});

}  // namespace groupemo::bottom_up

#endif  // GROUPEMO_BOTTOM_UP_HPP
