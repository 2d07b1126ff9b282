#include "groupemo/top_down.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "groupemo/error.hpp"

namespace groupemo::top_down {

namespace {

ClassProbs normalize_logs(const ClassProbs& logs) {
  const double mx = *std::max_element(logs.begin(), logs.end());
  if (mx == -std::numeric_limits<double>::infinity()) {
    throw ZeroLikelihoodError("zero-likelihood evidence: every class has probability zero under the observations");
  }
  ClassProbs out{};
  double total = 0.0;
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    out[y] = std::exp(logs[y] - mx);
    total += out[y];
  }
  for (auto& v : out) v /= total;
  return out;
}

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void DescriptorCounts::validate() const {
  if (n_true.size() != vocabulary.size() || n_false.size() != vocabulary.size()) {
    throw InputError("descriptor counts do not cover the vocabulary");
  }
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    for (std::size_t y = 0; y < kNumClasses; ++y) {
      if (n_true[i][y] + n_false[i][y] != class_counts[y]) {
        throw InputError("counts for '" + vocabulary[i] + "' do not add up to the class total");
      }
    }
  }
}

std::optional<std::size_t> ScenePosteriorModel::index_of(std::string_view descriptor) const {
  const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), descriptor);
  if (it == vocabulary.end() || *it != descriptor) return std::nullopt;
  return static_cast<std::size_t>(it - vocabulary.begin());
}

void ScenePosteriorModel::validate() const {
  if (std::abs(sum(prior) - 1.0) > 1e-9) throw InputError("prior does not sum to 1");
  for (double p : prior) {
    if (!in_unit(p)) throw InputError("prior entry outside [0, 1]");
  }
  if (!(alpha >= 0.0)) throw InputError("smoothing alpha must be non-negative");
  if (p_true.size() != vocabulary.size()) throw InputError("CPT count does not match the vocabulary");
  for (std::size_t i = 1; i < vocabulary.size(); ++i) {
    if (!(vocabulary[i - 1] < vocabulary[i])) throw InputError("vocabulary must be sorted and unique");
  }
  for (const auto& row : p_true) {
    for (double p : row) {
      if (!in_unit(p)) throw InputError("CPT entry outside [0, 1]");
    }
  }
  if (cnn_cpt) cnn_cpt->validate();
}

DescriptorCounts count_from_manifest(std::span<const preprocess::ImageRecord> records) {
  std::map<std::string, ClassCounts> present;
  DescriptorCounts counts;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (!rec.label) throw InputError("record " + std::to_string(r) + " (" + rec.image + ") has no label");
    const auto y = static_cast<std::size_t>(*rec.label);
    ++counts.class_counts[y];
    const std::set<std::string> unique(rec.descriptors.begin(), rec.descriptors.end());
    for (const auto& d : unique) ++present[d][y];
  }
  for (const auto& [word, n] : present) {
    counts.vocabulary.push_back(word);
    counts.n_true.push_back(n);
    ClassCounts f{};
    for (std::size_t y = 0; y < kNumClasses; ++y) f[y] = counts.class_counts[y] - n[y];
    counts.n_false.push_back(f);
  }
  return counts;
}

ScenePosteriorModel fit(const DescriptorCounts& counts, double alpha) {
  if (!(alpha >= 0.0)) throw InputError("smoothing alpha must be non-negative");
  counts.validate();
  std::size_t total = 0;
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    if (counts.class_counts[y] == 0) {
      throw InputError(std::string("no training images for class '") + std::string(class_name(static_cast<int>(y))) +
                       "'");
    }
    total += counts.class_counts[y];
  }
  ScenePosteriorModel model;
  model.alpha = alpha;
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    model.prior[y] = static_cast<double>(counts.class_counts[y]) / static_cast<double>(total);
  }
  model.vocabulary = counts.vocabulary;
  model.p_true.reserve(counts.vocabulary.size());
  for (std::size_t i = 0; i < counts.vocabulary.size(); ++i) {
    ClassProbs row{};
    for (std::size_t y = 0; y < kNumClasses; ++y) {
      const double t = static_cast<double>(counts.n_true[i][y]);
      const double f = static_cast<double>(counts.n_false[i][y]);
      row[y] = (t + alpha) / (t + f + 2.0 * alpha);
    }
    model.p_true.push_back(row);
  }
  model.validate();
  return model;
}

Evidence set_evidence(const ScenePosteriorModel& model, std::span<const std::string> descriptors) {
  Evidence ev;
  for (const auto& raw : descriptors) {
    const std::string d = preprocess::normalize_descriptor(raw);
    if (d.empty()) continue;
    if (const auto idx = model.index_of(d)) {
      ev.observed.push_back(*idx);
    } else if (std::find(ev.unknown.begin(), ev.unknown.end(), d) == ev.unknown.end()) {
      ev.unknown.push_back(d);
    }
  }
  std::sort(ev.observed.begin(), ev.observed.end());
  ev.observed.erase(std::unique(ev.observed.begin(), ev.observed.end()), ev.observed.end());
  return ev;
}

ClassProbs infer_posterior(const ScenePosteriorModel& model, const Evidence& evidence) {
  ClassProbs logs{};
  for (std::size_t y = 0; y < kNumClasses; ++y) logs[y] = std::log(model.prior[y]);
  // Summing out an unobserved leaf contributes P(true|y) + P(false|y) = 1,
  // so only observed leaves enter the product.
  for (std::size_t i : evidence.observed) {
    if (i >= model.p_true.size()) throw InputError("evidence refers to a descriptor outside the vocabulary");
    for (std::size_t y = 0; y < kNumClasses; ++y) logs[y] += std::log(model.p_true[i][y]);
  }
  if (evidence.cnn_class) {
    if (!model.cnn_cpt) throw InputError("classifier evidence set but the model has no classifier CPT");
    const int k = *evidence.cnn_class;
    if (k < 0 || k >= static_cast<int>(kNumClasses)) throw InputError("classifier evidence out of range");
    for (std::size_t y = 0; y < kNumClasses; ++y) logs[y] += std::log(model.cnn_cpt->table[k][y]);
  }
  return normalize_logs(logs);
}

ClassProbs brute_force_joint(const ScenePosteriorModel& model, const Evidence& evidence) {
  const std::size_t n = model.vocabulary.size();
  if (n > kBruteForceLimit) {
    throw InputError("brute_force_joint: vocabulary of " + std::to_string(n) + " exceeds the enumeration limit");
  }
  if (evidence.cnn_class && !model.cnn_cpt) throw InputError("classifier evidence set but the model has no classifier CPT");
  std::vector<bool> forced_true(n, false);
  for (std::size_t i : evidence.observed) forced_true.at(i) = true;

  ClassProbs joint{};
  for (std::uint64_t assignment = 0; assignment < (std::uint64_t{1} << n); ++assignment) {
    bool consistent = true;
    for (std::size_t i = 0; i < n && consistent; ++i) {
      if (forced_true[i] && !((assignment >> i) & 1u)) consistent = false;
    }
    if (!consistent) continue;
    for (std::size_t y = 0; y < kNumClasses; ++y) {
      double p = model.prior[y];
      for (std::size_t i = 0; i < n; ++i) p *= ((assignment >> i) & 1u) ? model.p_true[i][y] : model.p_false(i, y);
      if (model.cnn_cpt) {
        // The classifier node is a leaf too: observed fixes its value,
        // otherwise all three values are summed.
        double leaf = 0.0;
        for (int k = 0; k < static_cast<int>(kNumClasses); ++k) {
          if (!evidence.cnn_class || *evidence.cnn_class == k) leaf += model.cnn_cpt->table[k][y];
        }
        p *= leaf;
      }
      joint[y] += p;
    }
  }
  const double total = sum(joint);
  if (!(total > 0.0)) throw ZeroLikelihoodError("zero-likelihood evidence: joint probability of the evidence is zero");
  for (auto& v : joint) v /= total;
  return joint;
}

}  // namespace groupemo::top_down
