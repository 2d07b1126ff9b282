#include "groupemo/bottom_up.hpp"

#include <cmath>

#include "groupemo/nn/trainer.hpp"

namespace groupemo::bottom_up {

std::vector<ClassProbs> FaceClassifier::classify_batch(std::span<const Tensor<float>> faces) const {
  std::vector<ClassProbs> out;
  out.reserve(faces.size());
  for (const auto& f : faces) out.push_back(classify(f));
  return out;
}

NetworkClassifier::NetworkClassifier(nn::Network<float> net) : net_(std::move(net)) {
  net_.spec().validate();
  if (net_.spec().num_classes != kNumClasses) throw InputError("face classifier must emit three classes");
}

ClassProbs NetworkClassifier::classify(const Tensor<float>& face) const {
  const std::array<Tensor<float>, 1> one{face};
  return classify_batch(one).front();
}

std::vector<ClassProbs> NetworkClassifier::classify_batch(std::span<const Tensor<float>> faces) const {
  return nn::predict_images(net_, std::vector<Tensor<float>>(faces.begin(), faces.end()));
}

ClassProbs ensemble_probs(std::span<const ClassProbs> member_outputs) {
  if (member_outputs.empty()) throw InputError("ensemble needs at least one model");
  ClassProbs mean{};
  for (const auto& p : member_outputs)
    for (std::size_t k = 0; k < kNumClasses; ++k) mean[k] += p[k];
  const double n = static_cast<double>(member_outputs.size());
  for (auto& v : mean) v /= n;
  const double total = sum(mean);
  if (std::abs(total - 1.0) > 1e-6) {
    for (auto& v : mean) v /= total;
  }
  return mean;
}

FacePrediction ensemble_predict(std::span<const FaceClassifier* const> models, const Tensor<float>& face,
                                std::size_t source_face) {
  if (models.empty()) throw InputError("ensemble needs at least one model");
  std::vector<ClassProbs> outputs;
  outputs.reserve(models.size());
  for (const auto* m : models) outputs.push_back(m->classify(face));
  return {ensemble_probs(outputs), source_face};
}

std::vector<FacePrediction> ensemble_predict_batch(std::span<const FaceClassifier* const> models,
                                                   std::span<const Tensor<float>> faces) {
  if (models.empty()) throw InputError("ensemble needs at least one model");
  std::vector<std::vector<ClassProbs>> per_model;
  per_model.reserve(models.size());
  for (const auto* m : models) per_model.push_back(m->classify_batch(faces));
  std::vector<FacePrediction> out;
  out.reserve(faces.size());
  std::vector<ClassProbs> members(models.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (std::size_t m = 0; m < models.size(); ++m) members[m] = per_model[m][f];
    out.push_back({ensemble_probs(members), f});
  }
  return out;
}

GroupPrediction group_average(std::span<const FacePrediction> faces, std::span<const double> weights) {
  GroupPrediction g;
  g.n_faces = faces.size();
  if (faces.empty()) return g;
  if (!weights.empty() && weights.size() != faces.size()) {
    throw InputError("group_average: one weight per face required");
  }
  ClassProbs mean{};
  double total_weight = 0.0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0)) throw InputError("group_average: weights must be non-negative");
    for (std::size_t k = 0; k < kNumClasses; ++k) mean[k] += w * faces[i].probs[k];
    total_weight += w;
  }
  if (!(total_weight > 0.0)) throw InputError("group_average: weights sum to zero");
  for (auto& v : mean) v /= total_weight;
  g.mean_probs = mean;
  g.predicted = argmax(mean);
  return g;
}

}  // namespace groupemo::bottom_up
