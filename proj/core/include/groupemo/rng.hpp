#ifndef GROUPEMO_RNG_HPP
#define GROUPEMO_RNG_HPP

#include <cstdint>
#include <span>
#include <utility>

namespace groupemo {

/// Counter-based generator: the i-th draw is a pure function of (key, i).
/// Independent streams are derived with fork(), so every random decision in
/// a run is reproducible from the single master seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); unbiased.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  Rng fork(std::uint64_t stream) const;
  Rng fork(std::uint64_t stream, std::uint64_t sub) const { return fork(stream).fork(sub); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace groupemo

#endif  // GROUPEMO_RNG_HPP
