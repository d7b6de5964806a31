// skelclip command-line tool.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skelclip/error.hpp"
#include "skelclip/harness.hpp"
#include "skelclip/keyvalue.hpp"
#include "skelclip/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace skelclip;

namespace {

// One line of index.txt: sample name, label (-1 if unknown), group. Samples
// of the same group (bodies of one recording) are scored together.
struct IndexEntry {
  std::string name;
  int label = -1;
  std::string group;
};

std::vector<IndexEntry> read_index(const fs::path& dir) {
  const std::string text = read_file(dir / "index.txt");
  std::vector<IndexEntry> out;
  std::size_t line_no = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto parts = split(line, ',');
    if (parts.size() != 3) throw ParseError(line_no, "index entries are name,label,group");
    out.push_back({std::string(trim(parts[0])), static_cast<int>(parse_int(parts[1])), std::string(trim(parts[2]))});
  }
  if (out.empty()) throw FormatError((dir / "index.txt").string() + " lists no samples");
  return out;
}

void write_index(const fs::path& dir, const std::vector<IndexEntry>& entries) {
  std::string text = "# name,label,group\n";
  for (const auto& e : entries) text += e.name + "," + std::to_string(e.label) + "," + e.group + "\n";
  write_file(dir / "index.txt", text);
}

struct LoadedSequences {
  std::string stem;
  int label = -1;
  std::vector<SkeletonSequence> bodies;
};

LoadedSequences load_input(const fs::path& path, const JointLayout& layout) {
  LoadedSequences out;
  out.stem = path.stem().string();
  if (path.extension() == ".skeleton") {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    out.bodies = parse_ntu_skeleton(in, layout);
    if (auto info = parse_ntu_filename(path.filename().string())) out.label = info->action - 1;
  } else {
    out.bodies.push_back(parse_canonical(read_file(path)));
    if (out.bodies[0].label) out.label = *out.bodies[0].label;
  }
  return out;
}

std::vector<Mode> parse_modes(const std::string& list) {
  std::vector<Mode> modes;
  for (const auto& m : split(list, ',')) modes.push_back(parse_mode(trim(m)));
  return modes;
}

struct FeatureSet {
  std::vector<IndexEntry> entries;
  std::vector<SampleFeatures> features;
};

FeatureSet load_features(const fs::path& dir) {
  FeatureSet fs_;
  fs_.entries = read_index(dir);
  for (const auto& e : fs_.entries) fs_.features.push_back(sample_features_from_tensor(load_tensor(dir / (e.name + ".sktf"))));
  return fs_;
}

// ---- subcommands ----

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
  SynthConfig cfg = a.config.empty() ? SynthConfig{} : parse_synth_config(read_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  const Dataset data = generate_synthetic(cfg);
  fs::create_directories(fs::path(a.out) / "synth");
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    write_file(fs::path(a.out) / data.manifest.records[i].path, write_canonical(data.samples[i][0]));
  DatasetManifest manifest = data.manifest;
  write_file(fs::path(a.out) / "manifest.txt", write_manifest(manifest));
  std::cout << "wrote " << data.samples.size() << " sequences to " << a.out << "\n";
}

struct GenClipsArgs {
  std::string input;
  std::string manifest;
  std::string layout = "ntu-25";
  std::string coords = "cylindrical";
  std::string scale = "frame";
  std::size_t size = 224;
  std::string out;
  bool pgm = false;
};

void run_gen_clips(const GenClipsArgs& a) {
  ClipOptions opts;
  opts.coords = parse_coordinate_system(a.coords);
  opts.scope = parse_scale_scope(a.scale);
  opts.size = a.size;

  std::vector<LoadedSequences> inputs;
  if (!a.manifest.empty()) {
    const DatasetManifest manifest = parse_manifest(read_file(a.manifest));
    const fs::path base = fs::path(a.manifest).parent_path();
    for (const auto& r : manifest.records) {
      LoadedSequences ls;
      ls.stem = fs::path(std::string(trim(split(r.path, '|').front()))).stem().string();
      ls.label = r.label;
      ls.bodies = load_record(r, manifest.layout, base);
      inputs.push_back(std::move(ls));
    }
  } else {
    inputs.push_back(load_input(a.input, resolve_layout(a.layout)));
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  std::vector<IndexEntry> index;
  for (const auto& in : inputs) {
    for (std::size_t b = 0; b < in.bodies.size(); ++b) {
      const std::string name = in.bodies.size() == 1 ? in.stem : in.stem + "_b" + std::to_string(b);
      const ClipSet cs = generate_clips(in.bodies[b], opts);
      save_tensor(out / (name + ".sktf"), clipset_to_tensor(cs));
      if (a.pgm) {
        for (std::size_t c = 0; c < kChannelCount; ++c)
          for (std::size_t r = 0; r < kReferenceJointCount; ++r)
            write_file(out / (name + "_" + std::string(to_string(static_cast<Channel>(c))) + "_r" + std::to_string(r) + ".pgm"),
                       encode_pgm(cs.clips[c][r]));
      }
      index.push_back({name, in.label, in.stem});
    }
  }
  write_index(out, index);
  std::cout << "wrote " << index.size() << " clip sets to " << a.out << "\n";
}

struct ExtractArgs {
  std::string clips;
  std::string extractor = "builtin";
  std::size_t channels = 64;
  std::uint64_t seed = 0;
  std::string out;
  bool color = false;
};

void run_extract(const ExtractArgs& a) {
  const fs::path in(a.clips);
  const fs::path out(a.out);
  const auto index = read_index(in);
  fs::create_directories(out);
  const ExtractorKind kind = parse_extractor_kind(a.extractor);

  std::optional<FrozenExtractor> extractor;
  if (kind == ExtractorKind::builtin)
    extractor.emplace(default_extractor_spec(a.channels, a.seed, a.color ? kChannelCount : 1));
  else if (a.color)
    throw ConfigError("--color needs the builtin extractor");

  for (const auto& e : index) {
    SampleFeatures f;
    if (kind == ExtractorKind::builtin) {
      const ClipSet cs = clipset_from_tensor(load_tensor(in / (e.name + ".sktf")));
      if (a.color) {
        const auto pooled = build_color_clip_features(cs, *extractor);
        for (std::size_t r = 0; r < kReferenceJointCount; ++r) f[r] = {r, pooled[r].values};
      } else {
        f = build_time_step_features(cs, *extractor);
      }
    } else {
      ClipFeatureMaps maps;
      const fs::path dir = in / (e.name + ".maps");
      for (std::size_t c = 0; c < kChannelCount; ++c)
        for (std::size_t r = 0; r < kReferenceJointCount; ++r)
          maps[c][r] = load_feature_maps(dir / (std::string(to_string(static_cast<Channel>(c))) + "_r" +
                                                std::to_string(r) + ".sktf"));
      f = build_time_step_features(maps);
    }
    save_tensor(out / (e.name + ".sktf"), sample_features_to_tensor(f));
  }
  write_index(out, index);
  std::cout << "wrote features for " << index.size() << " samples to " << a.out << "\n";
}

struct TrainArgs {
  std::string features;
  std::string mode = "mtln";
  TrainConfig cfg;
  int classes = 0;
  std::string out;
};

void run_train(TrainArgs a) {
  a.cfg.mode = parse_mode(a.mode);
  validate(a.cfg);
  const FeatureSet set = load_features(a.features);
  int classes = a.classes;
  for (const auto& e : set.entries) {
    if (e.label < 0) throw ConfigError("sample '" + e.name + "' has no label");
    classes = std::max(classes, e.label + 1);
  }
  if (a.classes > 0 && classes > a.classes) throw ConfigError("a label exceeds --classes");

  Model model;
  model.mode = a.cfg.mode;
  model.seed = a.cfg.seed;
  const std::size_t heads = a.cfg.mode == Mode::single_frame ? kReferenceJointCount : 1;
  for (std::size_t head = 0; head < heads; ++head) {
    std::vector<TrainSample> data;
    for (std::size_t i = 0; i < set.entries.size(); ++i)
      data.push_back({make_task_inputs(a.cfg.mode, set.features[i], head), static_cast<std::size_t>(set.entries[i].label)});
    auto result = train(data, static_cast<std::size_t>(classes), a.cfg);
    std::cout << "head " << head << ": initial loss " << result.initial_loss << ", final loss "
              << result.epoch_losses.back() << "\n";
    model.heads.push_back(std::move(result.params));
  }
  save_model(model, a.out);
  std::cout << "saved " << to_string(model.mode) << " model to " << a.out << "\n";
}

struct PredictArgs {
  std::string model;
  std::string features;
  std::size_t frame = 0;
};

void run_predict(const PredictArgs& a) {
  const Model model = load_model(a.model);
  if (a.frame >= model.heads.size()) throw ConfigError("--frame must be below the number of heads");
  const MtlnParams& params = model.heads[model.mode == Mode::single_frame ? a.frame : 0];
  const FeatureSet set = load_features(a.features);

  std::vector<std::string> groups;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    auto& m = members[set.entries[i].group];
    if (m.empty()) groups.push_back(set.entries[i].group);
    m.push_back(i);
  }

  std::size_t correct = 0;
  std::size_t labelled = 0;
  for (const auto& g : groups) {
    std::vector<TaskInputs> samples;
    for (auto i : members[g]) samples.push_back(make_task_inputs(model.mode, set.features[i], a.frame));
    const Prediction p = predict_multi_sample(params, samples);
    const int label = set.entries[members[g].front()].label;
    std::cout << g << "," << p.label;
    if (label >= 0) {
      std::cout << "," << label;
      ++labelled;
      if (p.label == static_cast<std::size_t>(label)) ++correct;
    }
    std::cout << "\n";
  }
  if (labelled > 0)
    std::cout << "accuracy " << format_percent(static_cast<double>(correct) / static_cast<double>(labelled)) << " ("
              << correct << "/" << labelled << ")\n";
}

struct EvalArgs {
  std::string config;
  std::string manifest;
  std::string synth;
  std::string modes;
  std::string report;
  std::string artifacts;
  bool verbose = false;
};

void run_eval(const EvalArgs& a) {
  std::string cfg_text = a.config.empty() ? std::string() : read_file(a.config);
  const PipelineConfig cfg = parse_pipeline_config(cfg_text);
  std::string modes_text = a.modes;
  if (modes_text.empty()) modes_text = KeyValueDoc::parse(cfg_text).get_string("modes", "mtln,frame,concat,maxpool");
  const auto modes = parse_modes(modes_text);

  Dataset data;
  if (!a.manifest.empty()) {
    data = load_dataset(parse_manifest(read_file(a.manifest)), fs::path(a.manifest).parent_path());
  } else {
    data = generate_synthetic(a.synth.empty() ? SynthConfig{} : parse_synth_config(read_file(a.synth)));
  }

  ExperimentOptions opts;
  opts.artifact_dir = a.artifacts;
  opts.verbose = a.verbose;
  const EvalReport report = run_experiment(data, cfg, modes, opts);
  std::cout << render_table(report);
  if (!a.report.empty()) write_file(a.report, write_results(report));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton clips, frozen conv features and multi-task classification"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  c_synth->add_option("--config", synth.config, "Synthetic data config (key = value)");
  c_synth->add_option("--seed", synth.seed, "Override the config seed");
  c_synth->add_option("--out", synth.out, "Output directory")->required();

  GenClipsArgs gen;
  auto* c_gen = app.add_subcommand("gen-clips", "Turn skeleton sequences into clip tensors");
  auto* in_opt = c_gen->add_option("--input", gen.input, "A .skeleton or canonical .json file");
  auto* man_opt = c_gen->add_option("--manifest", gen.manifest, "Dataset manifest");
  in_opt->excludes(man_opt);
  c_gen->add_option("--layout", gen.layout, "Layout name or file for .skeleton input")->capture_default_str();
  c_gen->add_option("--coords", gen.coords, "cylindrical | cartesian")->capture_default_str();
  c_gen->add_option("--scale", gen.scale, "frame | clip")->capture_default_str();
  c_gen->add_option("--size", gen.size, "Frame size")->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_flag("--pgm", gen.pgm, "Also write every frame as PGM");

  ExtractArgs ext;
  auto* c_ext = app.add_subcommand("extract", "Compute time-step features from clip tensors");
  c_ext->add_option("--clips", ext.clips, "Directory written by gen-clips")->required();
  c_ext->add_option("--extractor", ext.extractor, "builtin | precomputed")->capture_default_str();
  c_ext->add_option("--channels", ext.channels, "Output channels of the last stage")->capture_default_str();
  c_ext->add_option("--seed", ext.seed, "Extractor weight seed")->capture_default_str();
  c_ext->add_option("--out", ext.out, "Output directory")->required();
  c_ext->add_flag("--color", ext.color, "Stack the three channels into one colour input");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a classifier on extracted features");
  c_train->add_option("--features", tr.features, "Directory written by extract")->required();
  c_train->add_option("--mode", tr.mode, "mtln | frame | concat | maxpool")->capture_default_str();
  c_train->add_option("--lr", tr.cfg.learning_rate, "Learning rate")->capture_default_str();
  c_train->add_option("--batch", tr.cfg.batch_size, "Batch size")->capture_default_str();
  c_train->add_option("--epochs", tr.cfg.epochs, "Epochs")->capture_default_str();
  c_train->add_option("--seed", tr.cfg.seed, "Training seed")->capture_default_str();
  c_train->add_option("--hidden", tr.cfg.hidden, "Hidden units")->capture_default_str();
  c_train->add_option("--classes", tr.classes, "Class count (default: largest label + 1)");
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Classify extracted features");
  c_pred->add_option("--model", pr.model, "Checkpoint")->required();
  c_pred->add_option("--features", pr.features, "Directory written by extract")->required();
  c_pred->add_option("--frame", pr.frame, "Time-step used by a frame model")->capture_default_str();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Run a full experiment and report accuracies");
  c_eval->add_option("--config", ev.config, "Experiment config (key = value)");
  auto* ev_man = c_eval->add_option("--manifest", ev.manifest, "Dataset manifest");
  auto* ev_syn = c_eval->add_option("--synth", ev.synth, "Synthetic data config");
  ev_man->excludes(ev_syn);
  c_eval->add_option("--modes", ev.modes, "Comma-separated modes");
  c_eval->add_option("--report", ev.report, "Write the results file here");
  c_eval->add_option("--artifacts", ev.artifacts, "Write features and checkpoints here");
  c_eval->add_flag("-v,--verbose", ev.verbose, "Progress on stderr");

  CLI11_PARSE(app, argc, argv);

  std::string stage;
  try {
    if (c_synth->parsed()) {
      stage = "synth";
      run_synth(synth);
    } else if (c_gen->parsed()) {
      stage = "gen-clips";
      if (gen.input.empty() && gen.manifest.empty()) throw ConfigError("give --input or --manifest");
      run_gen_clips(gen);
    } else if (c_ext->parsed()) {
      stage = "extract";
      run_extract(ext);
    } else if (c_train->parsed()) {
      stage = "train";
      run_train(tr);
    } else if (c_pred->parsed()) {
      stage = "predict";
      run_predict(pr);
    } else if (c_eval->parsed()) {
      stage = "eval";
      run_eval(ev);
    }
  } catch (const std::exception& e) {
    std::cerr << "skelclip " << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
