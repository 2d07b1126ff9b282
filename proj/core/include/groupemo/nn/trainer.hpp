#ifndef GROUPEMO_NN_TRAINER_HPP
#define GROUPEMO_NN_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "groupemo/emotion.hpp"
#include "groupemo/nn/augment.hpp"
#include "groupemo/nn/model.hpp"

namespace groupemo::nn {

/// Images (height x width x channels, values in [0, 1]) with class labels.
template <typename T>
struct LabeledImages {
  std::vector<Tensor<T>> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  void push_back(Tensor<T> image, int label) {
    images.push_back(std::move(image));
    labels.push_back(label);
  }
};

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 20;
  std::size_t early_stop_patience = 5;
  std::uint64_t seed = 0;
  double learning_rate = 0.001;
  AugmentConfig augmentation;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct FitResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Tracks the minimum validation loss; asks to stop once `patience`
/// consecutive epochs fail to set a new minimum.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  /// Feed the next epoch's validation loss. Returns true when training should stop.
  bool update(double val_loss);
  bool improved() const { return improved_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

/// Mini-batch Adam on categorical cross-entropy. Training batches are shuffled
/// and augmented per epoch from streams forked off cfg.seed. On return `net`
/// holds the parameters from the epoch with the lowest validation loss.
template <typename T>
FitResult fit(Network<T>& net, const LabeledImages<T>& train, const LabeledImages<T>& val, const TrainConfig& cfg);

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Inference-mode loss and accuracy over a labelled set.
template <typename T>
EvalStats evaluate_images(const Network<T>& net, const LabeledImages<T>& data, std::size_t batch_size = 64);

/// Softmax outputs for each image, in order.
template <typename T>
std::vector<ClassProbs> predict_images(const Network<T>& net, const std::vector<Tensor<T>>& images,
                                       std::size_t batch_size = 64);

}  // namespace groupemo::nn

#endif  // GROUPEMO_NN_TRAINER_HPP
