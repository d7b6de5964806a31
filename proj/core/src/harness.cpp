#include "skelclip/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "skelclip/error.hpp"
#include "skelclip/keyvalue.hpp"
#include "skelclip/rng.hpp"

namespace skelclip {
namespace {

std::optional<int> protocol_id(const ManifestRecord& r, ProtocolKind kind) {
  return kind == ProtocolKind::cross_subject ? r.subject_id : r.camera_id;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  SplitMix64 rng(seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL));
  return rng.next();
}

std::string join_doubles(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::vector<double> parse_doubles(std::string_view s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(parse_double(item));
  return out;
}

[[noreturn]] void stage_failure(std::string_view stage, const std::exception& e) {
  throw Error("[" + std::string(stage) + "] " + e.what());
}

}  // namespace

// ---- splits ----

ProtocolKind parse_protocol(std::string_view s) {
  if (s == "cross-subject") return ProtocolKind::cross_subject;
  if (s == "cross-view") return ProtocolKind::cross_view;
  if (s == "k-fold") return ProtocolKind::k_fold;
  if (s == "train-on-test") return ProtocolKind::train_on_test;
  throw ConfigError("unknown protocol '" + std::string(s) + "'");
}

std::string_view to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::cross_subject: return "cross-subject";
    case ProtocolKind::cross_view: return "cross-view";
    case ProtocolKind::k_fold: return "k-fold";
    case ProtocolKind::train_on_test: return "train-on-test";
  }
  return "?";
}

std::vector<Split> make_splits(const DatasetManifest& manifest, const SplitProtocol& protocol, std::uint64_t seed) {
  const std::size_t n = manifest.records.size();
  if (n == 0) throw ConfigError("cannot split an empty manifest");
  std::vector<Split> splits;

  switch (protocol.kind) {
    case ProtocolKind::cross_subject:
    case ProtocolKind::cross_view: {
      const char* what = protocol.kind == ProtocolKind::cross_subject ? "subject_id" : "camera_id";
      const std::set<int> train_ids(protocol.train_ids.begin(), protocol.train_ids.end());
      if (train_ids.empty()) throw ConfigError(std::string("protocol needs train ids (") + what + ")");
      Split s;
      for (std::size_t i = 0; i < n; ++i) {
        const auto id = protocol_id(manifest.records[i], protocol.kind);
        if (!id) throw ConfigError("record '" + manifest.records[i].path + "' has no " + what);
        (train_ids.count(*id) ? s.train : s.test).push_back(i);
      }
      splits.push_back(std::move(s));
      break;
    }
    case ProtocolKind::k_fold: {
      const std::size_t k = protocol.fold_count;
      if (k < 2) throw ConfigError("k-fold needs at least 2 folds");
      const bool external = std::all_of(manifest.records.begin(), manifest.records.end(),
                                        [](const ManifestRecord& r) { return r.fold.has_value(); });
      std::vector<std::size_t> fold_of(n);
      if (external) {
        for (std::size_t i = 0; i < n; ++i) {
          const int f = *manifest.records[i].fold;
          if (f < 0 || static_cast<std::size_t>(f) >= k)
            throw ConfigError("record '" + manifest.records[i].path + "' has fold id outside 0..k-1");
          fold_of[i] = static_cast<std::size_t>(f);
        }
      } else {
        if (n < k) throw ConfigError("fewer records than folds");
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        SplitMix64 rng(seed);
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t f = 0; f < k; ++f)
          for (std::size_t pos = f * n / k; pos < (f + 1) * n / k; ++pos) fold_of[order[pos]] = f;
      }
      for (std::size_t f = 0; f < k; ++f) {
        Split s;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? s.test : s.train).push_back(i);
        splits.push_back(std::move(s));
      }
      break;
    }
    case ProtocolKind::train_on_test: {
      Split s;
      s.train.resize(n);
      std::iota(s.train.begin(), s.train.end(), std::size_t{0});
      s.test = s.train;
      splits.push_back(std::move(s));
      break;
    }
  }
  for (const auto& s : splits)
    if (s.train.empty() || s.test.empty()) throw ConfigError("split leaves one side empty");
  return splits;
}

DatasetManifest subset(const DatasetManifest& manifest, std::span<const std::size_t> indices) {
  DatasetManifest out;
  out.class_count = manifest.class_count;
  out.layout = manifest.layout;
  for (auto i : indices) out.records.push_back(manifest.records.at(i));
  return out;
}

// ---- synthetic data ----

void validate(const SynthConfig& cfg) {
  if (cfg.n_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (cfg.t_min < 2 || cfg.t_max < cfg.t_min) throw ConfigError("synthetic frame range must satisfy 2 <= t_min <= t_max");
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) throw ConfigError("sigma must be >= 0");
  if (cfg.samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  validate(cfg.layout);
}

SynthConfig parse_synth_config(std::string_view text) {
  const auto doc = KeyValueDoc::parse(text);
  static const std::set<std::string> known = {"n_classes", "layout", "t_min", "t_max", "sigma", "samples_per_class", "seed"};
  for (const auto& k : doc.keys())
    if (!known.count(k)) throw ConfigError("unknown synthetic config key '" + k + "'");
  SynthConfig cfg;
  cfg.n_classes = static_cast<int>(doc.get_int("n_classes", cfg.n_classes));
  if (auto layout = doc.find("layout")) cfg.layout = resolve_layout(*layout);
  cfg.t_min = static_cast<std::size_t>(doc.get_int("t_min", static_cast<long long>(cfg.t_min)));
  cfg.t_max = static_cast<std::size_t>(doc.get_int("t_max", static_cast<long long>(cfg.t_max)));
  cfg.sigma = doc.get_double("sigma", cfg.sigma);
  cfg.samples_per_class = static_cast<std::size_t>(doc.get_int("samples_per_class", static_cast<long long>(cfg.samples_per_class)));
  cfg.seed = doc.get_u64("seed", cfg.seed);
  validate(cfg);
  return cfg;
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  const std::size_t m = cfg.layout.joint_count;
  const auto classes = static_cast<std::size_t>(cfg.n_classes);
  SplitMix64 table_rng(mix_seed(cfg.seed, 1));

  std::vector<Vec3> base(m);
  for (auto& b : base) b = {table_rng.uniform(-0.4, 0.4), table_rng.uniform(-0.4, 0.4), table_rng.uniform(0.0, 1.8)};

  std::vector<bool> is_reference(m, false);
  for (auto r : cfg.layout.reference_joints) is_reference[r] = true;

  struct ClassTable {
    double frequency = 1.0;
    std::vector<Vec3> amplitude;
    std::vector<Vec3> phase;
  };
  std::vector<ClassTable> tables(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    tables[c].frequency = 0.5 + 0.5 * static_cast<double>(c);
    for (std::size_t j = 0; j < m; ++j) {
      const bool active = !is_reference[j] && table_rng.uniform() < 0.5;
      const double scale = is_reference[j] ? 0.02 : active ? 0.6 : 0.05;
      tables[c].amplitude.push_back({scale * table_rng.uniform(0.5, 1.0), scale * table_rng.uniform(0.5, 1.0),
                                     scale * table_rng.uniform(0.5, 1.0)});
      const double two_pi = 2.0 * std::numbers::pi;
      tables[c].phase.push_back({two_pi * table_rng.uniform(), two_pi * table_rng.uniform(), two_pi * table_rng.uniform()});
    }
  }

  Dataset data;
  data.manifest.class_count = cfg.n_classes;
  data.manifest.layout = cfg.layout;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < cfg.samples_per_class; ++i) {
      SplitMix64 rng(mix_seed(cfg.seed, 2 + c, i));
      SkeletonSequence seq;
      seq.layout = cfg.layout;
      seq.frame_count = cfg.t_min + static_cast<std::size_t>(rng.below(cfg.t_max - cfg.t_min + 1));
      seq.label = static_cast<int>(c);
      seq.subject_id = static_cast<int>(i % 40) + 1;
      seq.camera_id = static_cast<int>(i % 3) + 1;
      seq.positions.resize(seq.frame_count * m);
      const auto& tab = tables[c];
      for (std::size_t f = 0; f < seq.frame_count; ++f) {
        const double tau = static_cast<double>(f) / static_cast<double>(seq.frame_count - 1);
        const double arg = two_pi * tab.frequency * tau;
        for (std::size_t j = 0; j < m; ++j) {
          const Vec3& a = tab.amplitude[j];
          const Vec3& ph = tab.phase[j];
          Vec3 p{base[j].x + a.x * std::sin(arg + ph.x), base[j].y + a.y * std::sin(arg + ph.y),
                 base[j].z + a.z * std::sin(arg + ph.z)};
          if (cfg.sigma > 0.0) {
            p.x += cfg.sigma * rng.normal();
            p.y += cfg.sigma * rng.normal();
            p.z += cfg.sigma * rng.normal();
          }
          seq.at(f, j) = p;
        }
      }
      ManifestRecord rec;
      rec.path = "synth/c" + std::to_string(c) + "_" + std::to_string(i) + ".json";
      rec.label = static_cast<int>(c);
      rec.subject_id = seq.subject_id;
      rec.camera_id = seq.camera_id;
      data.manifest.records.push_back(std::move(rec));
      data.samples.push_back({std::move(seq)});
    }
  }
  return data;
}

Dataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& base_dir) {
  validate(manifest);
  Dataset data;
  data.manifest = manifest;
  for (const auto& r : manifest.records) data.samples.push_back(load_record(r, manifest.layout, base_dir));
  return data;
}

// ---- pipeline ----

PipelineConfig parse_pipeline_config(std::string_view text) {
  const auto doc = KeyValueDoc::parse(text);
  static const std::set<std::string> known = {
      "coords", "scale", "size", "extractor", "channels", "stage_widths", "extractor_seed", "color_clip",
      "augment_crops", "test_crop_average", "augment_seed", "hidden", "output_gain", "lr", "batch", "epochs", "train_seed",
      "protocol", "train_ids", "folds", "split_seed", "threads", "modes"};
  for (const auto& k : doc.keys())
    if (!known.count(k)) throw ConfigError("unknown experiment config key '" + k + "'");

  PipelineConfig cfg;
  cfg.clips.coords = parse_coordinate_system(doc.get_string("coords", "cylindrical"));
  cfg.clips.scope = parse_scale_scope(doc.get_string("scale", "frame"));
  cfg.clips.size = static_cast<std::size_t>(doc.get_int("size", 224));
  cfg.extractor.kind = parse_extractor_kind(doc.get_string("extractor", "builtin"));
  if (cfg.extractor.kind != ExtractorKind::builtin)
    throw ConfigError("experiments need the builtin extractor; precomputed features go through the CLI");
  if (auto widths = doc.find("stage_widths")) cfg.extractor.stage_widths = parse_index_list(*widths);
  else cfg.extractor.stage_widths.back() = static_cast<std::size_t>(doc.get_int("channels", 64));
  cfg.extractor.seed = doc.get_u64("extractor_seed", 0);
  cfg.color_clip = doc.get_bool("color_clip", false);
  cfg.extractor.input_channels = cfg.color_clip ? kChannelCount : 1;
  cfg.augment_crops = static_cast<std::size_t>(doc.get_int("augment_crops", 0));
  cfg.test_crop_average = doc.get_bool("test_crop_average", false);
  cfg.augment_seed = doc.get_u64("augment_seed", 0);
  cfg.train.hidden = static_cast<std::size_t>(doc.get_int("hidden", 512));
  cfg.train.output_gain = doc.get_double("output_gain", kDefaultOutputGain);
  cfg.train.learning_rate = doc.get_double("lr", 0.001);
  cfg.train.batch_size = static_cast<std::size_t>(doc.get_int("batch", 100));
  cfg.train.epochs = static_cast<std::size_t>(doc.get_int("epochs", 35));
  cfg.train.seed = doc.get_u64("train_seed", 0);
  cfg.protocol.kind = parse_protocol(doc.get_string("protocol", "k-fold"));
  for (auto id : parse_index_list(doc.get_string("train_ids", ""))) cfg.protocol.train_ids.push_back(static_cast<int>(id));
  cfg.protocol.fold_count = static_cast<std::size_t>(doc.get_int("folds", 5));
  cfg.split_seed = doc.get_u64("split_seed", 0);
  cfg.threads = static_cast<std::size_t>(doc.get_int("threads", 0));
  validate(cfg.train);
  if (cfg.test_crop_average && cfg.augment_crops == 0) throw ConfigError("test_crop_average needs augment_crops > 0");
  return cfg;
}

std::string write_pipeline_config(const PipelineConfig& cfg) {
  KeyValueDoc doc;
  doc.set("coords", std::string(to_string(cfg.clips.coords)));
  doc.set("scale", std::string(to_string(cfg.clips.scope)));
  doc.set("size", std::to_string(cfg.clips.size));
  doc.set("extractor", "builtin");
  std::string widths;
  for (auto w : cfg.extractor.stage_widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  doc.set("stage_widths", widths);
  doc.set("extractor_seed", std::to_string(cfg.extractor.seed));
  doc.set("color_clip", cfg.color_clip ? "true" : "false");
  doc.set("augment_crops", std::to_string(cfg.augment_crops));
  doc.set("test_crop_average", cfg.test_crop_average ? "true" : "false");
  doc.set("augment_seed", std::to_string(cfg.augment_seed));
  doc.set("hidden", std::to_string(cfg.train.hidden));
  doc.set("output_gain", format_double(cfg.train.output_gain));
  doc.set("lr", format_double(cfg.train.learning_rate));
  doc.set("batch", std::to_string(cfg.train.batch_size));
  doc.set("epochs", std::to_string(cfg.train.epochs));
  doc.set("train_seed", std::to_string(cfg.train.seed));
  doc.set("protocol", std::string(to_string(cfg.protocol.kind)));
  std::string ids;
  for (auto id : cfg.protocol.train_ids) ids += (ids.empty() ? "" : ",") + std::to_string(id);
  doc.set("train_ids", ids);
  doc.set("folds", std::to_string(cfg.protocol.fold_count));
  doc.set("split_seed", std::to_string(cfg.split_seed));
  doc.set("threads", std::to_string(cfg.threads));
  return doc.render();
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<RecordFeatures> extract_dataset_features(const Dataset& data, const PipelineConfig& cfg) {
  if (data.samples.size() != data.manifest.records.size()) throw DimensionError("dataset samples do not match manifest");
  ExtractorSpec spec = cfg.extractor;
  spec.input_channels = cfg.color_clip ? kChannelCount : 1;
  const FrozenExtractor extractor(spec);

  auto features_of = [&](const ClipSet& cs) {
    if (!cfg.color_clip) return build_time_step_features(cs, extractor);
    const auto pooled = build_color_clip_features(cs, extractor);
    SampleFeatures f;
    for (std::size_t r = 0; r < kReferenceJointCount; ++r) {
      f[r].time_step = r;
      f[r].values = pooled[r].values;
    }
    return f;
  };

  std::vector<RecordFeatures> out(data.samples.size());
  parallel_for(data.samples.size(), cfg.threads, [&](std::size_t idx) {
    RecordFeatures& rf = out[idx];
    const auto& samples = data.samples[idx];
    if (samples.empty()) throw ConfigError("record '" + data.manifest.records[idx].path + "' has no samples");
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const ClipSet cs = generate_clips(samples[s], cfg.clips);
      if (cfg.augment_crops == 0) {
        rf.train_views.push_back(features_of(cs));
        continue;
      }
      const auto crops = augment_crops(cs, cfg.augment_crops, mix_seed(cfg.augment_seed, idx, s));
      for (const auto& crop_set : crops) rf.train_views.push_back(features_of(crop_set));
      if (cfg.test_crop_average)
        rf.test_views.insert(rf.test_views.end(), rf.train_views.end() - static_cast<std::ptrdiff_t>(crops.size()),
                             rf.train_views.end());
      else
        rf.test_views.push_back(features_of(center_crop(cs)));
    }
    if (cfg.augment_crops == 0) rf.test_views = rf.train_views;
  });
  return out;
}

// ---- evaluation ----

FoldResult evaluate_split(std::span<const RecordFeatures> features, std::span<const int> labels, std::size_t classes,
                          const Split& split, Mode mode, const TrainConfig& train_cfg, std::vector<Model>* models) {
  const std::size_t heads = mode == Mode::single_frame ? kReferenceJointCount : 1;
  FoldResult fold;
  fold.confusion.assign(classes, std::vector<long long>(classes, 0));
  Model model;
  model.mode = mode;
  model.seed = train_cfg.seed;

  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t head = 0; head < heads; ++head) {
    std::vector<TrainSample> train_set;
    for (auto idx : split.train)
      for (const auto& view : features[idx].train_views)
        train_set.push_back({make_task_inputs(mode, view, head), static_cast<std::size_t>(labels[idx])});
    TrainConfig cfg = train_cfg;
    cfg.mode = mode;
    auto result = train(train_set, classes, cfg);

    std::size_t head_correct = 0;
    for (auto idx : split.test) {
      std::vector<TaskInputs> views;
      for (const auto& view : features[idx].test_views) views.push_back(make_task_inputs(mode, view, head));
      const auto pred = predict_multi_sample(result.params, views);
      const auto truth = static_cast<std::size_t>(labels[idx]);
      ++fold.confusion[truth][pred.label];
      if (pred.label == truth) ++head_correct;
    }
    correct += head_correct;
    total += split.test.size();
    fold.head_accuracies.push_back(static_cast<double>(head_correct) / static_cast<double>(split.test.size()));

    fold.initial_loss += result.initial_loss / static_cast<double>(heads);
    if (fold.loss_curve.empty()) fold.loss_curve.assign(result.epoch_losses.size(), 0.0);
    for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
      fold.loss_curve[e] += result.epoch_losses[e] / static_cast<double>(heads);
    model.heads.push_back(std::move(result.params));
  }
  fold.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  if (mode != Mode::single_frame) fold.head_accuracies.clear();
  if (models) models->push_back(std::move(model));
  return fold;
}

EvalReport run_experiment(const Dataset& data, const PipelineConfig& cfg, std::span<const Mode> modes,
                          const ExperimentOptions& options) {
  if (modes.empty()) throw ConfigError("no modes requested");
  std::vector<Split> splits;
  try {
    validate(data.manifest);
    splits = make_splits(data.manifest, cfg.protocol, cfg.split_seed);
  } catch (const std::exception& e) {
    stage_failure("split", e);
  }

  std::vector<RecordFeatures> features;
  try {
    if (options.verbose) std::cerr << "extracting features for " << data.samples.size() << " records\n";
    features = extract_dataset_features(data, cfg);
  } catch (const std::exception& e) {
    stage_failure("features", e);
  }

  std::vector<int> labels;
  for (const auto& r : data.manifest.records) labels.push_back(r.label);
  const auto classes = static_cast<std::size_t>(data.manifest.class_count);

  if (!options.artifact_dir.empty()) {
    try {
      const auto dir = options.artifact_dir / "features";
      std::filesystem::create_directories(dir);
      for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& views = features[i].train_views;
        for (std::size_t v = 0; v < views.size(); ++v) {
          char name[64];
          std::snprintf(name, sizeof name, "r%05zu_v%03zu.sktf", i, v);
          save_tensor(dir / name, sample_features_to_tensor(views[v]));
        }
      }
    } catch (const std::exception& e) {
      stage_failure("artifacts", e);
    }
  }

  EvalReport report;
  report.classes = classes;
  report.protocol = cfg.protocol.kind;
  for (Mode mode : modes) {
    ModeResult mr;
    mr.mode = mode;
    for (std::size_t f = 0; f < splits.size(); ++f) {
      std::vector<Model> models;
      try {
        mr.folds.push_back(evaluate_split(features, labels, classes, splits[f], mode, cfg.train, &models));
      } catch (const std::exception& e) {
        stage_failure("train/" + std::string(to_string(mode)), e);
      }
      if (options.verbose)
        std::cerr << to_string(mode) << " fold " << f << ": " << format_percent(mr.folds.back().accuracy) << '\n';
      if (!options.artifact_dir.empty()) {
        const auto dir = options.artifact_dir / "models";
        std::filesystem::create_directories(dir);
        save_model(models.front(), dir / (std::string(to_string(mode)) + "_fold" + std::to_string(f) + ".sktc"));
      }
    }
    double sum = 0.0;
    for (const auto& fold : mr.folds) sum += fold.accuracy;
    mr.accuracy = sum / static_cast<double>(mr.folds.size());
    report.modes.push_back(std::move(mr));
  }
  return report;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

std::string render_table(const EvalReport& report) {
  if (report.modes.empty()) throw ConfigError("report has no modes");
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s %6s\n", "Mode", "Accuracy", "Folds");
  out << line;
  for (const auto& m : report.modes) {
    std::snprintf(line, sizeof line, "%-10s %10s %6zu\n", std::string(to_string(m.mode)).c_str(),
                  format_percent(m.accuracy).c_str(), m.folds.size());
    out << line;
  }
  return out.str();
}

std::string write_results(const EvalReport& report) {
  if (report.modes.empty()) throw ConfigError("report has no modes");
  KeyValueDoc doc;
  doc.set("classes", std::to_string(report.classes));
  doc.set("protocol", std::string(to_string(report.protocol)));
  std::string modes;
  for (const auto& m : report.modes) modes += (modes.empty() ? "" : ",") + std::string(to_string(m.mode));
  doc.set("modes", modes);
  for (const auto& m : report.modes) {
    const std::string prefix(to_string(m.mode));
    doc.set(prefix + ".accuracy", format_double(m.accuracy));
    doc.set(prefix + ".folds", std::to_string(m.folds.size()));
    for (std::size_t f = 0; f < m.folds.size(); ++f) {
      const auto& fold = m.folds[f];
      const std::string fp = prefix + ".fold" + std::to_string(f);
      doc.set(fp + ".accuracy", format_double(fold.accuracy));
      doc.set(fp + ".initial_loss", format_double(fold.initial_loss));
      doc.set(fp + ".loss_curve", join_doubles(fold.loss_curve));
      doc.set(fp + ".head_accuracies", join_doubles(fold.head_accuracies));
      std::string cells;
      for (const auto& row : fold.confusion)
        for (auto v : row) cells += (cells.empty() ? "" : ",") + std::to_string(v);
      doc.set(fp + ".confusion", cells);
    }
  }
  return doc.render();
}

EvalReport parse_results(std::string_view text) {
  const auto doc = KeyValueDoc::parse(text);
  EvalReport report;
  report.classes = static_cast<std::size_t>(doc.get_int("classes"));
  report.protocol = parse_protocol(doc.get("protocol"));
  for (const auto& name : split(doc.get("modes"), ',')) {
    ModeResult m;
    m.mode = parse_mode(name);
    m.accuracy = doc.get_double(name + ".accuracy");
    const auto folds = static_cast<std::size_t>(doc.get_int(name + ".folds"));
    for (std::size_t f = 0; f < folds; ++f) {
      const std::string fp = name + ".fold" + std::to_string(f);
      FoldResult fold;
      fold.accuracy = doc.get_double(fp + ".accuracy");
      fold.initial_loss = doc.get_double(fp + ".initial_loss");
      fold.loss_curve = parse_doubles(doc.get(fp + ".loss_curve"));
      fold.head_accuracies = parse_doubles(doc.get(fp + ".head_accuracies"));
      const auto cells = parse_index_list(doc.get(fp + ".confusion"));
      if (cells.size() != report.classes * report.classes) throw ParseError(doc.line_of(fp + ".confusion"), "confusion matrix has the wrong size");
      fold.confusion.assign(report.classes, std::vector<long long>(report.classes));
      for (std::size_t i = 0; i < cells.size(); ++i)
        fold.confusion[i / report.classes][i % report.classes] = static_cast<long long>(cells[i]);
      m.folds.push_back(std::move(fold));
    }
    report.modes.push_back(std::move(m));
  }
  if (report.modes.empty()) throw ConfigError("results file lists no modes");
  return report;
}

}  // namespace skelclip
