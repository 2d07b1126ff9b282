#include "groupemo/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "groupemo/bn_file.hpp"
#include "groupemo/bottom_up.hpp"
#include "groupemo/error.hpp"
#include "groupemo/evaluation.hpp"
#include "groupemo/fusion.hpp"
#include "groupemo/nn/model_io.hpp"
#include "groupemo/nn/trainer.hpp"
#include "groupemo/preprocess/face_archive.hpp"
#include "groupemo/preprocess/faces.hpp"
#include "groupemo/top_down.hpp"

namespace groupemo::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct Options {
  std::string manifest;
  std::string archive;
  std::string val_archive;
  std::string bn;
  std::string out;
  std::string config;
  std::string space;
  std::vector<std::string> models;
  std::string mode = "redirection";
  std::string arch = "reference";
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  std::size_t patience = 5;
  std::size_t fc1 = 1024;
  std::size_t fc2 = 512;
  double lr = 0.001;
  double dropout = 0.5;
  double val_fraction = 0.2;
  bool no_augment = false;
};

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T json_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw InputError("config: bad value for \"" + key + "\"");
  }
}

// Values from --config replace whatever the command line said.
void apply_config(Options& o) {
  if (o.config.empty()) return;
  std::ifstream in(o.config, std::ios::binary);
  if (!in) throw InputError("cannot open config file " + o.config);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("config " + o.config + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError("config " + o.config + ": top level must be an object");

  using Setter = std::function<void(const json&, const std::string&)>;
  auto str = [](std::string& f) -> Setter { return [&f](const json& v, const std::string& k) { f = json_as<std::string>(v, k); }; };
  auto real = [](double& f) -> Setter { return [&f](const json& v, const std::string& k) { f = json_as<double>(v, k); }; };
  auto count = [](std::size_t& f) -> Setter { return [&f](const json& v, const std::string& k) { f = json_as<std::size_t>(v, k); }; };
  const std::map<std::string, Setter> setters{
      {"manifest", str(o.manifest)},
      {"archive", str(o.archive)},
      {"val-archive", str(o.val_archive)},
      {"bn", str(o.bn)},
      {"out", str(o.out)},
      {"space", str(o.space)},
      {"mode", str(o.mode)},
      {"arch", str(o.arch)},
      {"alpha", real(o.alpha)},
      {"lr", real(o.lr)},
      {"dropout", real(o.dropout)},
      {"val-fraction", real(o.val_fraction)},
      {"epochs", count(o.epochs)},
      {"batch-size", count(o.batch_size)},
      {"patience", count(o.patience)},
      {"fc1", count(o.fc1)},
      {"fc2", count(o.fc2)},
      {"seed", [&o](const json& v, const std::string& k) { o.seed = json_as<std::uint64_t>(v, k); }},
      {"no-augment", [&o](const json& v, const std::string& k) { o.no_augment = json_as<bool>(v, k); }},
      {"model",
       [&o](const json& v, const std::string& k) {
         o.models = v.is_string() ? std::vector<std::string>{v.get<std::string>()}
                                  : json_as<std::vector<std::string>>(v, k);
       }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw InputError("config " + o.config + ": unknown key \"" + key + "\"");
    it->second(value, key);
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw InputError(std::string("missing required option --") + flag);
}

void require_path(const std::string& value, const char* flag) {
  require(value, flag);
  if (!fs::exists(value)) throw InputError(std::string("--") + flag + ": path not found: " + value);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

ordered_json probs_json(const std::optional<ClassProbs>& p) {
  ordered_json j;
  if (p) {
    j["probs"] = *p;
    j["class"] = std::string(class_name(argmax(*p)));
  } else {
    j["probs"] = nullptr;
    j["class"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------- pipeline

class Ensemble {
 public:
  explicit Ensemble(const std::vector<std::string>& dirs) {
    if (dirs.empty()) throw InputError("at least one --model is required");
    for (const auto& d : dirs) {
      nn::LoadedModel m = nn::load_model(d);
      members_.push_back(std::make_unique<bottom_up::NetworkClassifier>(
          nn::Network<float>(std::move(m.spec), std::move(m.params))));
      ptrs_.push_back(members_.back().get());
    }
  }
  std::span<const bottom_up::FaceClassifier* const> members() const { return ptrs_; }

 private:
  std::vector<std::unique_ptr<bottom_up::NetworkClassifier>> members_;
  std::vector<const bottom_up::FaceClassifier*> ptrs_;
};

struct BottomUpResult {
  std::vector<ClassProbs> faces;
  bottom_up::GroupPrediction group;
};

BottomUpResult run_bottom_up(const Ensemble& ensemble, const preprocess::Manifest& manifest, std::size_t index,
                             std::ostream& err) {
  const auto& rec = manifest.records[index];
  const preprocess::Image image = preprocess::load_image(manifest.resolve(rec));
  const preprocess::RecordFaces rf = preprocess::extract_faces(image, rec, index);
  for (const auto& r : rf.rejected) err << "warning: " << rec.image << ": box " << r.box << ": " << r.reason << "\n";
  BottomUpResult out;
  if (!rf.faces.empty()) {
    const auto preds = bottom_up::ensemble_predict_batch(ensemble.members(), rf.faces);
    for (const auto& p : preds) out.faces.push_back(p.probs);
    out.group = bottom_up::group_average(preds);
  }
  return out;
}

struct Split {
  nn::LabeledImages<float> train;
  nn::LabeledImages<float> val;
};

// Faces from one group image always land on the same side.
Split split_by_record(const preprocess::FaceArchive& archive, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("--val-fraction must lie in (0, 1)");
  const std::set<std::size_t> unique_records = [&] {
    std::set<std::size_t> s;
    for (const auto& p : archive.provenance) s.insert(p.record);
    return s;
  }();
  std::vector<std::size_t> records(unique_records.begin(), unique_records.end());
  if (records.size() < 2) throw InputError("need faces from at least two images to split off a validation set");
  Rng rng = Rng(seed).fork(3);
  rng.shuffle(std::span<std::size_t>(records));
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(fraction * static_cast<double>(records.size()))), 1, records.size() - 1);
  const std::set<std::size_t> val_records(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_val));
  Split s;
  for (std::size_t i = 0; i < archive.faces.size(); ++i) {
    auto& dst = val_records.count(archive.provenance[i].record) ? s.val : s.train;
    dst.push_back(archive.faces.images[i], archive.faces.labels[i]);
  }
  return s;
}

Split load_training_data(const Options& o) {
  require_path(o.archive, "archive");
  const preprocess::FaceArchive archive = preprocess::read_face_archive(o.archive);
  if (!o.val_archive.empty()) {
    require_path(o.val_archive, "val-archive");
    return {archive.faces, preprocess::read_face_archive(o.val_archive).faces};
  }
  return split_by_record(archive, o.val_fraction, o.seed);
}

nn::ModelSpec architecture(const Options& o, std::size_t fc1, std::size_t fc2, double dropout) {
  const nn::ArchitectureOptions a{fc1, fc2, dropout};
  if (o.arch == "reference") return nn::reference_architecture(a);
  if (o.arch == "compact") return nn::compact_architecture(a);
  throw InputError("--arch must be reference or compact, got '" + o.arch + "'");
}

nn::TrainConfig train_config(const Options& o, std::size_t batch_size, double lr, std::uint64_t seed) {
  nn::TrainConfig cfg;
  cfg.batch_size = batch_size;
  cfg.max_epochs = o.epochs;
  cfg.early_stop_patience = o.patience;
  cfg.learning_rate = lr;
  cfg.seed = seed;
  cfg.augmentation.enabled = !o.no_augment;
  cfg.validate();
  return cfg;
}

std::string history_csv(const nn::FitResult& r) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : r.history) {
    out << e.epoch << ',' << num(e.train_loss) << ',' << num(e.train_acc) << ',' << num(e.val_loss) << ','
        << num(e.val_acc) << '\n';
  }
  return out.str();
}

preprocess::Manifest load_labelled_manifest(const Options& o) {
  require_path(o.manifest, "manifest");
  preprocess::Manifest m = preprocess::read_manifest(o.manifest);
  if (m.records.empty()) throw InputError("manifest " + o.manifest + " has no records");
  for (const auto& r : m.records) {
    if (!r.label) throw InputError("manifest " + o.manifest + ": record " + r.image + " has no label");
  }
  return m;
}

// ---------------------------------------------------------------- commands

int cmd_prepare(const Options& o, std::ostream& out, std::ostream& err) {
  require_path(o.manifest, "manifest");
  require(o.out, "out");
  const preprocess::Manifest m = preprocess::read_manifest(o.manifest);
  const preprocess::IsolatedFaces faces = preprocess::build_isolated_dataset(m);
  for (const auto& s : faces.skipped) err << "warning: record " << s.record << ": " << s.reason << "\n";
  preprocess::write_face_archive(faces, m, o.out);
  const auto counts = faces.class_counts();
  out << "faces " << faces.faces.size() << "\n";
  for (std::size_t y = 0; y < kNumClasses; ++y) out << class_name(static_cast<int>(y)) << ' ' << counts[y] << "\n";
  out << "skipped_records " << faces.skipped.size() << "\nrejected_boxes " << faces.rejected.size() << "\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream&) {
  require(o.out, "out");
  const Split data = load_training_data(o);
  const nn::ModelSpec spec = architecture(o, o.fc1, o.fc2, o.dropout);
  const Rng master(o.seed);
  nn::Network<float> net(spec, nn::init_params<float>(spec, master.fork(1)));
  const nn::TrainConfig cfg = train_config(o, o.batch_size, o.lr, master.fork(2).next_u64());
  const nn::FitResult r = nn::fit(net, data.train, data.val, cfg);
  nn::save_model(net.spec(), net.params(), o.out);
  write_text(fs::path(o.out) / "history.csv", history_csv(r));
  const auto& best = r.history.at(r.best_epoch - 1);
  out << "epochs " << r.history.size() << (r.stopped_early ? " (stopped early)" : "") << "\n"
      << "best_epoch " << r.best_epoch << "\nval_loss " << num(best.val_loss) << "\nval_acc " << num(best.val_acc)
      << "\n";
  return 0;
}

int cmd_fit_bn(const Options& o, std::ostream& out, std::ostream&) {
  require(o.out, "out");
  const preprocess::Manifest m = load_labelled_manifest(o);
  const top_down::ScenePosteriorModel model = top_down::fit(top_down::count_from_manifest(m.records), o.alpha);
  top_down::save_bn(model, o.out);
  out << "descriptors " << model.vocabulary.size() << "\nprior";
  for (double p : model.prior) out << ' ' << num(p);
  out << "\n";
  return 0;
}

int cmd_calibrate(const Options& o, std::ostream& out, std::ostream& err) {
  require_path(o.bn, "bn");
  const preprocess::Manifest m = load_labelled_manifest(o);
  const Ensemble ensemble(o.models);
  top_down::ScenePosteriorModel model = top_down::load_bn(o.bn);
  fusion::ConfusionCounts counts{};
  std::size_t none = 0;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const BottomUpResult r = run_bottom_up(ensemble, m, i, err);
    if (!r.group.predicted) {
      ++none;
      continue;
    }
    ++counts[static_cast<std::size_t>(*m.records[i].label)][static_cast<std::size_t>(*r.group.predicted)];
  }
  model.cnn_cpt = fusion::build_cnn_cpt(counts, o.alpha);
  top_down::save_bn(model, o.out.empty() ? o.bn : o.out);
  out << "confusion (true x predicted)\n";
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    out << class_name(static_cast<int>(y));
    for (std::size_t k = 0; k < kNumClasses; ++k) out << ' ' << counts[y][k];
    out << "\n";
  }
  out << "no_faces " << none << "\n";
  return 0;
}

struct PipelineRecord {
  BottomUpResult bottom;
  fusion::FusedPrediction fused;
};

PipelineRecord run_pipeline(const Ensemble& ensemble, const top_down::ScenePosteriorModel& model,
                            const fusion::FusionMode& mode, const preprocess::Manifest& m, std::size_t i,
                            std::ostream& err) {
  const auto& rec = m.records[i];
  PipelineRecord r{run_bottom_up(ensemble, m, i, err), {}};
  r.fused = fusion::fuse(mode, r.bottom.group, model, rec.descriptors);
  for (const auto& u : r.fused.unknown) err << "warning: " << rec.image << ": unknown descriptor '" << u << "'\n";
  if (!r.bottom.group.predicted && rec.descriptors.empty()) {
    err << "warning: " << rec.image << ": no faces and no descriptors, reporting the prior\n";
  }
  return r;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  require_path(o.manifest, "manifest");
  require_path(o.bn, "bn");
  const preprocess::Manifest m = preprocess::read_manifest(o.manifest);
  const Ensemble ensemble(o.models);
  const top_down::ScenePosteriorModel model = top_down::load_bn(o.bn);
  const fusion::FusionMode mode = fusion::parse_mode(o.mode);
  std::ostringstream lines;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const PipelineRecord r = run_pipeline(ensemble, model, mode, m, i, err);
    ordered_json j;
    j["image"] = m.records[i].image;
    j["mode"] = fusion::format_mode(mode);
    j["bottom_up"] = probs_json(r.bottom.group.mean_probs);
    j["top_down"] = probs_json(r.fused.top_down);
    j["fused"] = probs_json(r.fused.posterior);
    j["faces"] = r.bottom.faces;
    j["unknown_descriptors"] = r.fused.unknown;
    lines << j.dump() << "\n";
  }
  if (o.out.empty()) {
    out << lines.str();
  } else {
    write_text(o.out, lines.str());
  }
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.out, "out");
  require_path(o.bn, "bn");
  const preprocess::Manifest m = load_labelled_manifest(o);
  const Ensemble ensemble(o.models);
  const top_down::ScenePosteriorModel model = top_down::load_bn(o.bn);
  const fusion::FusionMode mode = fusion::parse_mode(o.mode);
  std::vector<evaluation::LabeledPrediction> bu, td, fu;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const PipelineRecord r = run_pipeline(ensemble, model, mode, m, i, err);
    const int y = *m.records[i].label;
    bu.emplace_back(y, r.bottom.group.predicted);
    td.emplace_back(y, argmax(r.fused.top_down));
    fu.emplace_back(y, r.fused.predicted);
  }
  const std::pair<const char*, evaluation::EvalReport> reports[] = {
      {"bottom_up", evaluation::evaluate(bu)},
      {"top_down", evaluation::evaluate(td)},
      {"fused", evaluation::evaluate(fu)},
  };
  ordered_json j;
  j["mode"] = fusion::format_mode(mode);
  for (const auto& [name, rep] : reports) {
    j[name] = ordered_json::parse(evaluation::report_to_json(rep));
    write_text(fs::path(o.out) / (std::string("confusion_") + name + ".csv"), evaluation::confusion_to_csv(rep));
    out << name << " accuracy " << num(rep.accuracy) << "\n";
  }
  write_text(fs::path(o.out) / "report.json", j.dump(2) + "\n");
  return 0;
}

int cmd_search(const Options& o, std::ostream& out, std::ostream&) {
  require_path(o.space, "space");
  require(o.out, "out");
  std::ifstream in(o.space, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  evaluation::SearchSpace space = evaluation::search_space_from_json(text.str());
  const Split data = load_training_data(o);
  const auto objective = [&](const evaluation::TrialConfig& c, std::uint64_t seed) {
    const nn::ModelSpec spec = architecture(o, c.fc1, c.fc2, c.dropout);
    const Rng rng(seed);
    nn::Network<float> net(spec, nn::init_params<float>(spec, rng.fork(1)));
    nn::fit(net, data.train, data.val, train_config(o, c.batch_size, c.learning_rate, rng.fork(2).next_u64()));
    return nn::evaluate_images(net, data.val).accuracy;
  };
  const evaluation::SearchResult result = evaluation::random_search(space, objective);
  write_text(fs::path(o.out) / "trials.csv", evaluation::trials_to_csv(result));
  write_text(fs::path(o.out) / "best_config.json", evaluation::trial_config_to_json(result.best()));
  out << "best_trial " << result.best().index << "\nval_acc " << num(result.best().score) << "\n";
  return 0;
}

// ---------------------------------------------------------------- parsing

void add_seed_config(CLI::App* sub, Options& o) {
  sub->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  sub->add_option("--config", o.config, "JSON file whose keys override command-line flags");
}

void add_train_flags(CLI::App* sub, Options& o) {
  sub->add_option("--archive", o.archive, "Face archive written by prepare");
  sub->add_option("--val-archive", o.val_archive, "Separate validation archive (default: split --archive)");
  sub->add_option("--val-fraction", o.val_fraction, "Share of group images held out for validation")
      ->capture_default_str();
  sub->add_option("--arch", o.arch, "reference or compact")->capture_default_str();
  sub->add_option("--epochs", o.epochs)->capture_default_str();
  sub->add_option("--batch-size", o.batch_size)->capture_default_str();
  sub->add_option("--patience", o.patience, "Early-stopping patience in epochs")->capture_default_str();
  sub->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  sub->add_flag("--no-augment", o.no_augment, "Disable rotation/zoom/flip augmentation");
}

void add_pipeline_flags(CLI::App* sub, Options& o) {
  sub->add_option("--manifest", o.manifest, "JSON Lines manifest");
  sub->add_option("--model", o.models, "Model directory; repeat for an ensemble");
  sub->add_option("--bn", o.bn, "BN parameter file");
  sub->add_option("--mode", o.mode, "redirection, mean or weighted:W")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Group emotion recognition: face CNN, scene-descriptor network and their fusion", "groupemo"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* prepare = app.add_subcommand("prepare", "Build the isolated-faces archive from a manifest");
  prepare->add_option("--manifest", o.manifest, "JSON Lines manifest");
  prepare->add_option("--out", o.out, "Archive directory");
  add_seed_config(prepare, o);

  auto* train = app.add_subcommand("train", "Train a face classifier on an archive");
  add_train_flags(train, o);
  train->add_option("--fc1", o.fc1)->capture_default_str();
  train->add_option("--fc2", o.fc2)->capture_default_str();
  train->add_option("--dropout", o.dropout)->capture_default_str();
  train->add_option("--out", o.out, "Model directory");
  add_seed_config(train, o);

  auto* fit_bn = app.add_subcommand("fit-bn", "Fit the scene-descriptor network from a labelled manifest");
  fit_bn->add_option("--manifest", o.manifest, "JSON Lines manifest");
  fit_bn->add_option("--alpha", o.alpha, "Laplace smoothing")->capture_default_str();
  fit_bn->add_option("--out", o.out, "BN parameter file");
  add_seed_config(fit_bn, o);

  auto* calibrate = app.add_subcommand("calibrate", "Add the classifier confusion CPT to a BN file");
  calibrate->add_option("--manifest", o.manifest, "Labelled validation manifest");
  calibrate->add_option("--model", o.models, "Model directory; repeat for an ensemble");
  calibrate->add_option("--bn", o.bn, "BN parameter file (updated in place unless --out is given)");
  calibrate->add_option("--alpha", o.alpha, "Smoothing of the confusion counts")->capture_default_str();
  calibrate->add_option("--out", o.out, "Write the calibrated file here instead");
  add_seed_config(calibrate, o);

  auto* predict = app.add_subcommand("predict", "Run the full pipeline and emit one JSON line per image");
  add_pipeline_flags(predict, o);
  predict->add_option("--out", o.out, "Output file (default: stdout)");
  add_seed_config(predict, o);

  auto* eval = app.add_subcommand("eval", "Accuracy and confusion matrices of all three predictors");
  add_pipeline_flags(eval, o);
  eval->add_option("--out", o.out, "Report directory");
  add_seed_config(eval, o);

  auto* search = app.add_subcommand("search", "Random hyperparameter search");
  search->add_option("--space", o.space, "JSON search space");
  add_train_flags(search, o);
  search->add_option("--out", o.out, "Output directory");
  add_seed_config(search, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_config(o);
    if (prepare->parsed()) return cmd_prepare(o, out, err);
    if (train->parsed()) return cmd_train(o, out, err);
    if (fit_bn->parsed()) return cmd_fit_bn(o, out, err);
    if (calibrate->parsed()) return cmd_calibrate(o, out, err);
    if (predict->parsed()) return cmd_predict(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out, err);
    if (search->parsed()) return cmd_search(o, out, err);
    return 2;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace groupemo::cli
