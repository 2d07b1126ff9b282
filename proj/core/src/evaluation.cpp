#include "groupemo/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "groupemo/error.hpp"
#include "groupemo/rng.hpp"

namespace groupemo::evaluation {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

EvalReport evaluate(std::span<const LabeledPrediction> predictions) {
  if (predictions.empty()) throw InputError("evaluate: no predictions");
  EvalReport r;
  r.n_samples = predictions.size();
  for (const auto& [truth, pred] : predictions) {
    if (truth < 0 || truth >= static_cast<int>(kNumClasses)) throw InputError("evaluate: true label out of range");
    std::size_t col = kNoneColumn;
    if (pred) {
      if (*pred < 0 || *pred >= static_cast<int>(kNumClasses)) throw InputError("evaluate: prediction out of range");
      col = static_cast<std::size_t>(*pred);
    }
    ++r.confusion[static_cast<std::size_t>(truth)][col];
  }
  std::size_t correct = 0;
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    correct += r.confusion[y][y];
    std::size_t row = 0;
    for (std::size_t v : r.confusion[y]) row += v;
    r.per_class_recall[y] = row == 0 ? 0.0 : static_cast<double>(r.confusion[y][y]) / static_cast<double>(row);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_samples);
  return r;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["n_samples"] = report.n_samples;
  j["accuracy"] = report.accuracy;
  ordered_json recall = ordered_json::object();
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    recall[std::string(class_name(static_cast<int>(y)))] = report.per_class_recall[y];
  }
  j["per_class_recall"] = std::move(recall);
  j["columns"] = {"positive", "neutral", "negative", "None"};
  ordered_json rows = ordered_json::object();
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    rows[std::string(class_name(static_cast<int>(y)))] = report.confusion[y];
  }
  j["confusion"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string confusion_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "true,positive,neutral,negative,None\n";
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    out << class_name(static_cast<int>(y));
    for (std::size_t v : report.confusion[y]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

void SearchSpace::validate() const {
  if (!(learning_rate_min > 0.0 && learning_rate_min <= learning_rate_max)) {
    throw InputError("search space: need 0 < learning_rate_min <= learning_rate_max");
  }
  if (!(dropout_min >= 0.0 && dropout_min <= dropout_max && dropout_max < 1.0)) {
    throw InputError("search space: need 0 <= dropout_min <= dropout_max < 1");
  }
  if (batch_sizes.empty() || fc1_units.empty() || fc2_units.empty()) {
    throw InputError("search space: choice lists must be non-empty");
  }
  for (const auto* list : {&batch_sizes, &fc1_units, &fc2_units}) {
    for (std::size_t v : *list) {
      if (v == 0) throw InputError("search space: choices must be positive");
    }
  }
  if (trials == 0) throw InputError("search space: trials must be at least 1");
}

SearchSpace search_space_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("search space: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("search space: top level must be an object");
  SearchSpace s;
  try {
    s.learning_rate_min = j.value("learning_rate_min", s.learning_rate_min);
    s.learning_rate_max = j.value("learning_rate_max", s.learning_rate_max);
    s.batch_sizes = j.value("batch_sizes", s.batch_sizes);
    s.dropout_min = j.value("dropout_min", s.dropout_min);
    s.dropout_max = j.value("dropout_max", s.dropout_max);
    s.fc1_units = j.value("fc1_units", s.fc1_units);
    s.fc2_units = j.value("fc2_units", s.fc2_units);
    s.trials = j.value("trials", s.trials);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw FormatError(std::string("search space: ") + e.what());
  }
  s.validate();
  return s;
}

TrialRecord sample_trial(const SearchSpace& space, std::size_t index) {
  Rng rng = Rng(space.seed).fork(index);
  TrialRecord t;
  t.index = index;
  t.seed = rng.next_u64();
  const double lo = std::log(space.learning_rate_min);
  const double hi = std::log(space.learning_rate_max);
  t.config.learning_rate = std::clamp(std::exp(rng.uniform(lo, hi)), space.learning_rate_min, space.learning_rate_max);
  t.config.batch_size = space.batch_sizes[rng.below(space.batch_sizes.size())];
  t.config.dropout = rng.uniform(space.dropout_min, space.dropout_max);
  t.config.fc1 = space.fc1_units[rng.below(space.fc1_units.size())];
  t.config.fc2 = space.fc2_units[rng.below(space.fc2_units.size())];
  return t;
}

SearchResult random_search(const SearchSpace& space, const Objective& objective) {
  space.validate();
  SearchResult result;
  for (std::size_t i = 0; i < space.trials; ++i) {
    TrialRecord t = sample_trial(space, i);
    t.score = objective(t.config, t.seed);
    result.trials.push_back(t);
    if (t.score > result.trials[result.best_index].score) result.best_index = i;
  }
  return result;
}

std::string trials_to_csv(const SearchResult& result) {
  std::ostringstream out;
  out << "trial,seed,learning_rate,batch_size,dropout,fc1,fc2,val_acc\n";
  for (const auto& t : result.trials) {
    out << t.index << ',' << t.seed << ',' << num(t.config.learning_rate) << ',' << t.config.batch_size << ','
        << num(t.config.dropout) << ',' << t.config.fc1 << ',' << t.config.fc2 << ',' << num(t.score) << '\n';
  }
  return out.str();
}

std::string trial_config_to_json(const TrialRecord& trial) {
  ordered_json j;
  j["trial"] = trial.index;
  j["seed"] = trial.seed;
  j["learning_rate"] = trial.config.learning_rate;
  j["batch_size"] = trial.config.batch_size;
  j["dropout"] = trial.config.dropout;
  j["fc1"] = trial.config.fc1;
  j["fc2"] = trial.config.fc2;
  j["val_acc"] = trial.score;
  return j.dump(2) + "\n";
}

}  // namespace groupemo::evaluation
