#include "groupemo/nn/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "groupemo/nn/adam.hpp"
#include "groupemo/nn/loss.hpp"

namespace groupemo::nn {

namespace {

enum Stream : std::uint64_t { kShuffle = 1, kAugment = 2, kDropout = 3 };

template <typename T>
Tensor<T> gather_batch(const std::vector<Tensor<T>>& images, std::span<const std::size_t> indices) {
  std::vector<const Tensor<T>*> ptrs;
  ptrs.reserve(indices.size());
  for (auto i : indices) ptrs.push_back(&images[i]);
  return stack<T>(ptrs);
}

template <typename T>
std::size_t count_correct(const Tensor<T>& probs, std::span<const int> labels) {
  const std::size_t k = probs.dim(1);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const T* row = probs.data() + s * k;
    const auto best = static_cast<int>(std::max_element(row, row + k) - row);
    if (best == labels[s]) ++correct;
  }
  return correct;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InputError("batch_size must be at least 1");
  if (max_epochs < 1) throw InputError("max_epochs must be at least 1");
  if (early_stop_patience < 1) throw InputError("early_stop_patience must be positive");
  if (!(learning_rate >= 0.0)) throw InputError("learning_rate must be non-negative");
  augmentation.validate();
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw InputError("early stopping patience must be positive");
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  improved_ = val_loss < best_loss_;
  if (improved_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return stale_ >= patience_;
}

template <typename T>
EvalStats evaluate_images(const Network<T>& net, const LabeledImages<T>& data, std::size_t batch_size) {
  if (data.empty()) throw InputError("cannot evaluate on an empty set");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, data.size() - start);
    std::span<const std::size_t> idx(order.data() + start, n);
    std::span<const int> labels(data.labels.data() + start, n);
    const Tensor<T> probs = net.predict(gather_batch(data.images, idx));
    loss_sum += cross_entropy(probs, labels).loss * static_cast<double>(n);
    correct += count_correct(probs, labels);
  }
  const double total = static_cast<double>(data.size());
  return {loss_sum / total, static_cast<double>(correct) / total};
}

template <typename T>
std::vector<ClassProbs> predict_images(const Network<T>& net, const std::vector<Tensor<T>>& images,
                                       std::size_t batch_size) {
  std::vector<ClassProbs> out;
  out.reserve(images.size());
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, images.size() - start);
    const Tensor<T> probs = net.predict(gather_batch(images, std::span<const std::size_t>(order.data() + start, n)));
    if (probs.dim(1) != kNumClasses) throw ShapeError("classifier output", {n, kNumClasses}, probs.shape());
    for (std::size_t s = 0; s < n; ++s) {
      ClassProbs p{};
      for (std::size_t k = 0; k < kNumClasses; ++k) p[k] = static_cast<double>(probs[s * kNumClasses + k]);
      out.push_back(p);
    }
  }
  return out;
}

template <typename T>
FitResult fit(Network<T>& net, const LabeledImages<T>& train, const LabeledImages<T>& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw InputError("training set is empty");
  if (val.empty()) throw InputError("validation set is empty");
  if (train.labels.size() != train.images.size() || val.labels.size() != val.images.size()) {
    throw InputError("every image needs exactly one label");
  }
  const auto& layers = net.spec().layers;
  if (layers.empty() || layers.back().kind != LayerKind::softmax) {
    throw InputError("fit needs a network that ends in softmax");
  }

  const Rng master(cfg.seed);
  AdamState<T> adam = AdamState<T>::for_params(net.params(), cfg.learning_rate);
  EarlyStopping stopper(cfg.early_stop_patience);
  ParamStore<T> best = net.params();
  FitResult result;

  std::vector<std::size_t> order(train.size());
  std::vector<ForwardCache<T>> caches;
  std::vector<Tensor<T>> batch_images;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = master.fork(kShuffle, epoch);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    const Rng augment_rng = master.fork(kAugment, epoch);
    const Rng dropout_rng = master.fork(kDropout, epoch);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch_images.clear();
      batch_labels.clear();
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = order[start + j];
        if (cfg.augmentation.enabled) {
          Rng r = augment_rng.fork(start + j);
          batch_images.push_back(augment(train.images[idx], cfg.augmentation, r));
        } else {
          batch_images.push_back(train.images[idx]);
        }
        batch_labels.push_back(train.labels[idx]);
      }
      std::vector<const Tensor<T>*> ptrs;
      for (const auto& im : batch_images) ptrs.push_back(&im);
      const Tensor<T> batch = stack<T>(ptrs);

      Rng drop = dropout_rng.fork(batch_index);
      const Tensor<T> probs = net.forward_train(batch, drop, caches);
      const auto loss = cross_entropy(probs, std::span<const int>(batch_labels));
      loss_sum += loss.loss * static_cast<double>(n);
      correct += count_correct(probs, std::span<const int>(batch_labels));

      // Combined softmax + cross-entropy gradient enters below the softmax layer.
      const ParamStore<T> grads = net.backward(caches, loss.grad_logits, layers.size() - 1);
      adam_step(adam, net.mutable_params(), grads);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    const EvalStats v = evaluate_images(net, val);
    stats.val_loss = v.loss;
    stats.val_acc = v.accuracy;
    result.history.push_back(stats);

    const bool stop = stopper.update(v.loss);
    if (stopper.improved()) best = net.params();
    if (stop) {
      result.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }

  result.best_epoch = stopper.best_epoch();
  net.mutable_params() = std::move(best);
  return result;
}

template FitResult fit(Network<float>&, const LabeledImages<float>&, const LabeledImages<float>&, const TrainConfig&);
template FitResult fit(Network<double>&, const LabeledImages<double>&, const LabeledImages<double>&,
                       const TrainConfig&);
template EvalStats evaluate_images(const Network<float>&, const LabeledImages<float>&, std::size_t);
template EvalStats evaluate_images(const Network<double>&, const LabeledImages<double>&, std::size_t);
template std::vector<ClassProbs> predict_images(const Network<float>&, const std::vector<Tensor<float>>&, std::size_t);
template std::vector<ClassProbs> predict_images(const Network<double>&, const std::vector<Tensor<double>>&,
                                                std::size_t);

}  // namespace groupemo::nn
