#include "skelclip/mtln.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "skelclip/error.hpp"
#include "skelclip/keyvalue.hpp"
#include "skelclip/rng.hpp"
#include "skelclip/tensor_io.hpp"

namespace skelclip {
namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void check_inputs(const MtlnParams& p, std::span<const FeatureVector> tasks) {
  if (tasks.empty()) throw DimensionError("no task inputs");
  for (const auto& f : tasks)
    if (f.size() != p.input_dim)
      throw DimensionError("task input has length " + std::to_string(f.size()) + ", classifier expects " +
                           std::to_string(p.input_dim));
}

// Hidden pre-activations of one task input.
void hidden_pre(const MtlnParams& p, const FeatureVector& f, std::vector<double>& pre) {
  pre.assign(p.b1.begin(), p.b1.end());
  for (std::size_t i = 0; i < p.input_dim; ++i)
    if (f[i] != 0.0) axpy(f[i], p.w1.data() + i * p.hidden, pre.data(), p.hidden);
}

void output_logits(const MtlnParams& p, const std::vector<double>& pre, double* z) {
  std::copy(p.b2.begin(), p.b2.end(), z);
  for (std::size_t j = 0; j < p.hidden; ++j)
    if (pre[j] > 0.0) axpy(pre[j], p.w2.data() + j * p.classes, z, p.classes);
}

std::size_t onehot_label(std::span<const double> y) {
  std::size_t label = y.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0 && label == y.size()) label = i;
    else if (y[i] != 0.0) throw ConfigError("label vector is not one-hot");
  }
  if (label == y.size()) throw ConfigError("label vector is not one-hot");
  return label;
}

constexpr std::size_t kTile = 16;

// Adds the gradient of the loss of every input (one task input each, with its
// label) into `grad` and returns the per-input losses. Inputs are processed in
// tiles so W1 is streamed once per tile; every gradient element still
// accumulates its contributions in input order.
std::vector<double> accumulate_batch(const MtlnParams& p, std::span<const double* const> inputs,
                                     std::span<const std::size_t> labels, MtlnParams& grad) {
  const std::size_t n = inputs.size();
  const std::size_t h = p.hidden;
  std::vector<double> pre(n * h);
  std::vector<double> dpre(n * h);
  std::vector<double> losses(n);
  std::vector<double> z(p.classes);

  for (std::size_t v = 0; v < n; ++v) std::copy(p.b1.begin(), p.b1.end(), pre.begin() + static_cast<std::ptrdiff_t>(v * h));
  for (std::size_t t0 = 0; t0 < n; t0 += kTile) {
    const std::size_t t1 = std::min(n, t0 + kTile);
    for (std::size_t i = 0; i < p.input_dim; ++i) {
      const double* w = p.w1.data() + i * h;
      for (std::size_t v = t0; v < t1; ++v)
        if (inputs[v][i] != 0.0) axpy(inputs[v][i], w, pre.data() + v * h, h);
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    const double* pv = pre.data() + v * h;
    double* dv = dpre.data() + v * h;
    std::copy(p.b2.begin(), p.b2.end(), z.begin());
    for (std::size_t j = 0; j < h; ++j)
      if (pv[j] > 0.0) axpy(pv[j], p.w2.data() + j * p.classes, z.data(), p.classes);
    losses[v] = task_loss(z, labels[v]);
    auto delta = softmax(z);
    delta[labels[v]] -= 1.0;

    axpy(1.0, delta.data(), grad.b2.data(), p.classes);
    for (std::size_t j = 0; j < h; ++j) {
      if (pv[j] > 0.0) {
        axpy(pv[j], delta.data(), grad.w2.data() + j * p.classes, p.classes);
        const double* w2j = p.w2.data() + j * p.classes;
        double dh = 0.0;
        for (std::size_t c = 0; c < p.classes; ++c) dh += w2j[c] * delta[c];
        dv[j] = dh;
      } else {
        dv[j] = 0.0;
      }
    }
    axpy(1.0, dv, grad.b1.data(), h);
  }

  for (std::size_t t0 = 0; t0 < n; t0 += kTile) {
    const std::size_t t1 = std::min(n, t0 + kTile);
    for (std::size_t i = 0; i < p.input_dim; ++i) {
      double* g = grad.w1.data() + i * h;
      for (std::size_t v = t0; v < t1; ++v)
        if (inputs[v][i] != 0.0) axpy(inputs[v][i], dpre.data() + v * h, g, h);
    }
  }
  return losses;
}

// Adds the gradient of the summed task loss into `grad`; returns the loss.
double accumulate_gradient(const MtlnParams& p, std::span<const FeatureVector> tasks, std::size_t label,
                           MtlnParams& grad) {
  std::vector<const double*> inputs;
  for (const auto& f : tasks) inputs.push_back(f.data());
  const std::vector<std::size_t> labels(tasks.size(), label);
  const auto losses = accumulate_batch(p, inputs, labels, grad);
  return std::accumulate(losses.begin(), losses.end(), 0.0);
}

void fill_zero(MtlnParams& g) {
  std::fill(g.w1.begin(), g.w1.end(), 0.0);
  std::fill(g.b1.begin(), g.b1.end(), 0.0);
  std::fill(g.w2.begin(), g.w2.end(), 0.0);
  std::fill(g.b2.begin(), g.b2.end(), 0.0);
}

void sgd_step(MtlnParams& p, const MtlnParams& g, double scale) {
  auto step = [scale](std::vector<double>& w, const std::vector<double>& dw) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * dw[i];
  };
  step(p.w1, g.w1);
  step(p.b1, g.b1);
  step(p.w2, g.w2);
  step(p.b2, g.b2);
}

}  // namespace

Mode parse_mode(std::string_view s) {
  if (s == "mtln") return Mode::mtln;
  if (s == "frame") return Mode::single_frame;
  if (s == "concat") return Mode::concat;
  if (s == "maxpool") return Mode::max_pool;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected mtln, frame, concat or maxpool)");
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::mtln: return "mtln";
    case Mode::single_frame: return "frame";
    case Mode::concat: return "concat";
    case Mode::max_pool: return "maxpool";
  }
  return "?";
}

void validate(const MtlnParams& p) {
  if (p.input_dim < 1 || p.hidden < 1 || p.classes < 1) throw DimensionError("classifier dims must be >= 1");
  if (p.w1.size() != p.input_dim * p.hidden || p.b1.size() != p.hidden || p.w2.size() != p.hidden * p.classes ||
      p.b2.size() != p.classes)
    throw DimensionError("classifier parameter shapes are inconsistent");
  for (const auto* v : {&p.w1, &p.b1, &p.w2, &p.b2})
    for (double x : *v)
      if (!std::isfinite(x)) throw DimensionError("non-finite classifier parameter");
}

MtlnParams zero_params(std::size_t input_dim, std::size_t hidden, std::size_t classes) {
  MtlnParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.classes = classes;
  p.w1.assign(input_dim * hidden, 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(hidden * classes, 0.0);
  p.b2.assign(classes, 0.0);
  return p;
}

MtlnParams init_params(std::size_t input_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed,
                       double output_gain) {
  if (!(output_gain >= 0.0) || !std::isfinite(output_gain)) throw ConfigError("output gain must be >= 0");
  MtlnParams p = zero_params(input_dim, hidden, classes);
  SplitMix64 rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
  for (auto& w : p.w1) w = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + classes)) * output_gain;
  for (auto& w : p.w2) w = rng.uniform(-a2, a2);
  return p;
}

double log_sum_exp(std::span<const double> z) {
  if (z.empty()) throw DimensionError("log_sum_exp of an empty vector");
  const std::size_t top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  double rest = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j)
    if (j != top) rest += std::exp(z[j] - z[top]);
  return z[top] + std::log1p(rest);
}

std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) throw DimensionError("softmax of an empty vector");
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) sum += (out[j] = std::exp(z[j] - top));
  for (auto& v : out) v /= sum;
  return out;
}

TaskScores forward(const MtlnParams& p, std::span<const FeatureVector> tasks) {
  check_inputs(p, tasks);
  TaskScores s;
  s.tasks = tasks.size();
  s.classes = p.classes;
  s.logits.resize(s.tasks * s.classes);
  s.probabilities.reserve(s.tasks * s.classes);
  std::vector<double> pre;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    hidden_pre(p, tasks[k], pre);
    output_logits(p, pre, s.logits.data() + k * s.classes);
    const auto prob = softmax(s.z(k));
    s.probabilities.insert(s.probabilities.end(), prob.begin(), prob.end());
  }
  return s;
}

TaskScores forward(const MtlnParams& p, const SampleFeatures& features) {
  return forward(p, make_task_inputs(Mode::mtln, features));
}

double task_loss(std::span<const double> z, std::size_t label) {
  if (label >= z.size()) throw ConfigError("label out of range");
  return log_sum_exp(z) - z[label];
}

double task_loss(std::span<const double> z, std::span<const double> y_onehot) {
  if (y_onehot.size() != z.size()) throw DimensionError("label vector length differs from class count");
  return task_loss(z, onehot_label(y_onehot));
}

double total_loss(const TaskScores& scores, std::size_t label) {
  double sum = 0.0;
  for (std::size_t k = 0; k < scores.tasks; ++k) sum += task_loss(scores.z(k), label);
  return sum;
}

double total_loss(const TaskScores& scores, std::span<const double> y_onehot) {
  if (y_onehot.size() != scores.classes) throw DimensionError("label vector length differs from class count");
  return total_loss(scores, onehot_label(y_onehot));
}

LossAndGradient backward(const MtlnParams& p, std::span<const FeatureVector> tasks, std::size_t label) {
  check_inputs(p, tasks);
  if (label >= p.classes) throw ConfigError("label out of range");
  LossAndGradient out;
  out.gradient = zero_params(p.input_dim, p.hidden, p.classes);
  out.loss = accumulate_gradient(p, tasks, label, out.gradient);
  return out;
}

LossAndGradient backward(const MtlnParams& p, std::span<const FeatureVector> tasks,
                         std::span<const double> y_onehot) {
  if (y_onehot.size() != p.classes) throw DimensionError("label vector length differs from class count");
  return backward(p, tasks, onehot_label(y_onehot));
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Prediction predict(const MtlnParams& p, std::span<const FeatureVector> tasks) {
  const TaskScores s = forward(p, tasks);
  Prediction out;
  out.probabilities.assign(s.classes, 0.0);
  for (std::size_t k = 0; k < s.tasks; ++k) axpy(1.0, s.prob(k).data(), out.probabilities.data(), s.classes);
  for (auto& v : out.probabilities) v /= static_cast<double>(s.tasks);
  out.label = argmax(out.probabilities);
  return out;
}

Prediction predict_multi_sample(const MtlnParams& p, std::span<const TaskInputs> samples) {
  if (samples.empty()) throw ConfigError("predict_multi_sample needs at least one sample");
  Prediction out;
  out.probabilities.assign(p.classes, 0.0);
  for (const auto& sample : samples) {
    const auto one = predict(p, sample);
    axpy(1.0, one.probabilities.data(), out.probabilities.data(), p.classes);
  }
  for (auto& v : out.probabilities) v /= static_cast<double>(samples.size());
  out.label = argmax(out.probabilities);
  return out;
}

TaskInputs make_task_inputs(Mode mode, std::span<const FeatureVector> steps, std::size_t frame_index) {
  if (steps.size() != kReferenceJointCount) throw DimensionError("expected four time-step features");
  const std::size_t d = steps[0].size();
  for (const auto& s : steps)
    if (s.size() != d) throw DimensionError("time-step features differ in length");
  switch (mode) {
    case Mode::mtln: return TaskInputs(steps.begin(), steps.end());
    case Mode::single_frame:
      if (frame_index >= kReferenceJointCount) throw ConfigError("frame index must be in 0..3");
      return {steps[frame_index]};
    case Mode::concat: {
      FeatureVector joined;
      joined.reserve(kReferenceJointCount * d);
      for (const auto& s : steps) joined.insert(joined.end(), s.begin(), s.end());
      return {std::move(joined)};
    }
    case Mode::max_pool: {
      FeatureVector m = steps[0];
      for (std::size_t k = 1; k < steps.size(); ++k)
        for (std::size_t i = 0; i < d; ++i) m[i] = std::max(m[i], steps[k][i]);
      return {std::move(m)};
    }
  }
  throw ConfigError("unknown mode");
}

TaskInputs make_task_inputs(Mode mode, const SampleFeatures& features, std::size_t frame_index) {
  std::vector<FeatureVector> steps;
  steps.reserve(features.size());
  for (const auto& f : features) steps.push_back(f.values);
  return make_task_inputs(mode, steps, frame_index);
}

std::size_t mode_input_dim(Mode mode, std::size_t step_dim) {
  return mode == Mode::concat ? kReferenceJointCount * step_dim : step_dim;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) throw ConfigError("learning rate must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (!(cfg.output_gain >= 0.0) || !std::isfinite(cfg.output_gain)) throw ConfigError("output gain must be >= 0");
}

TrainResult train(std::span<const TrainSample> data, std::size_t classes, const TrainConfig& cfg) {
  validate(cfg);
  if (data.empty()) throw ConfigError("training set is empty");
  if (classes < 2) throw ConfigError("need at least two classes");
  const std::size_t tasks = data[0].tasks.size();
  if (tasks == 0) throw DimensionError("training sample without task inputs");
  const std::size_t d = data[0].tasks[0].size();
  for (const auto& s : data) {
    if (s.tasks.size() != tasks) throw DimensionError("training samples differ in task count");
    for (const auto& f : s.tasks)
      if (f.size() != d) throw DimensionError("training samples differ in feature length");
    if (s.label >= classes) throw ConfigError("training label out of range");
  }

  SplitMix64 seeds(cfg.seed);
  const std::uint64_t init_seed = seeds.next();
  SplitMix64 order_rng(seeds.next());

  TrainResult result;
  result.params = init_params(d, cfg.hidden, classes, init_seed, cfg.output_gain);
  MtlnParams& p = result.params;

  double init_sum = 0.0;
  for (const auto& s : data) init_sum += total_loss(forward(p, s.tasks), s.label);
  result.initial_loss = init_sum / static_cast<double>(data.size());

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  MtlnParams grad = zero_params(d, cfg.hidden, classes);
  std::vector<const double*> inputs;
  std::vector<std::size_t> labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      fill_zero(grad);
      inputs.clear();
      labels.clear();
      for (std::size_t b = start; b < end; ++b) {
        const auto& s = data[order[b]];
        for (const auto& f : s.tasks) {
          inputs.push_back(f.data());
          labels.push_back(s.label);
        }
      }
      const auto losses = accumulate_batch(p, inputs, labels, grad);
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < end - start; ++b)
        batch_loss += std::accumulate(losses.begin() + static_cast<std::ptrdiff_t>(b * tasks),
                                      losses.begin() + static_cast<std::ptrdiff_t>((b + 1) * tasks), 0.0);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                              std::to_string(start));
      epoch_loss += batch_loss;
      sgd_step(p, grad, cfg.learning_rate / static_cast<double>(end - start));
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  validate(p);
  return result;
}

// --- checkpoints ---

namespace {

constexpr char kModelMagic[4] = {'S', 'K', 'T', 'C'};
constexpr std::uint8_t kModelVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

Tensor vector_tensor(const std::vector<double>& v, std::vector<std::uint32_t> shape) {
  Tensor t;
  t.dtype = DType::f64;
  t.shape = std::move(shape);
  t.values = v;
  return t;
}

}  // namespace

std::string encode_model(const Model& model) {
  if (model.heads.empty()) throw ConfigError("model has no classifier heads");
  const MtlnParams& first = model.heads.front();
  for (const auto& h : model.heads) {
    validate(h);
    if (h.input_dim != first.input_dim || h.hidden != first.hidden || h.classes != first.classes)
      throw DimensionError("model heads differ in shape");
  }
  KeyValueDoc header;
  header.set("mode", std::string(to_string(model.mode)));
  header.set("d", std::to_string(first.input_dim));
  header.set("h", std::to_string(first.hidden));
  header.set("n_classes", std::to_string(first.classes));
  header.set("seed", std::to_string(model.seed));
  header.set("heads", std::to_string(model.heads.size()));
  const std::string text = header.render();

  std::string out(kModelMagic, 4);
  out.push_back(static_cast<char>(kModelVersion));
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (std::size_t i = 0; i < model.heads.size(); ++i) {
    const auto& h = model.heads[i];
    const auto d = static_cast<std::uint32_t>(h.input_dim);
    const auto hid = static_cast<std::uint32_t>(h.hidden);
    const auto n = static_cast<std::uint32_t>(h.classes);
    const std::pair<const char*, Tensor> tensors[] = {{"W1", vector_tensor(h.w1, {d, hid})},
                                                      {"b1", vector_tensor(h.b1, {hid})},
                                                      {"W2", vector_tensor(h.w2, {hid, n})},
                                                      {"b2", vector_tensor(h.b2, {n})}};
    for (const auto& [name, tensor] : tensors) {
      const std::string full = model.heads.size() == 1 ? name : std::to_string(i) + "/" + name;
      out.push_back(static_cast<char>(full.size() & 0xff));
      out.push_back(static_cast<char>(full.size() >> 8));
      out += full;
      out += encode_tensor(tensor);
    }
  }
  return out;
}

Model decode_model(std::string_view bytes) {
  std::istringstream in{std::string(bytes), std::ios::binary};
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError("bad checkpoint magic");
  const int version = in.get();
  if (version != kModelVersion) throw FormatError("unsupported checkpoint version");
  unsigned char len_bytes[4];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 4)) throw FormatError("truncated checkpoint header");
  const std::uint32_t len = len_bytes[0] | (len_bytes[1] << 8) | (len_bytes[2] << 16) | (std::uint32_t{len_bytes[3]} << 24);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw FormatError("truncated checkpoint header");

  Model model;
  std::size_t d = 0, h = 0, n = 0, heads = 0;
  try {
    const auto header = KeyValueDoc::parse(text);
    model.mode = parse_mode(header.get("mode"));
    d = static_cast<std::size_t>(header.get_int("d"));
    h = static_cast<std::size_t>(header.get_int("h"));
    n = static_cast<std::size_t>(header.get_int("n_classes"));
    heads = static_cast<std::size_t>(header.get_int("heads"));
    model.seed = header.get_u64("seed", 0);
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (heads < 1 || heads > 64) throw FormatError("checkpoint head count out of range");

  for (std::size_t i = 0; i < heads; ++i) {
    MtlnParams p;
    p.input_dim = d;
    p.hidden = h;
    p.classes = n;
    std::vector<double>* slots[] = {&p.w1, &p.b1, &p.w2, &p.b2};
    const char* names[] = {"W1", "b1", "W2", "b2"};
    const std::size_t sizes[] = {d * h, h, h * n, n};
    for (int t = 0; t < 4; ++t) {
      const int lo = in.get();
      const int hi = in.get();
      if (lo < 0 || hi < 0) throw FormatError("truncated checkpoint");
      std::string name(static_cast<std::size_t>(lo | (hi << 8)), '\0');
      if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw FormatError("truncated checkpoint");
      const std::string expected = heads == 1 ? names[t] : std::to_string(i) + "/" + names[t];
      if (name != expected) throw FormatError("checkpoint tensor '" + name + "', expected '" + expected + "'");
      Tensor tensor = read_tensor(in);
      if (tensor.values.size() != sizes[t]) throw FormatError("checkpoint tensor " + name + " has the wrong size");
      *slots[t] = std::move(tensor.values);
    }
    try {
      validate(p);
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
    model.heads.push_back(std::move(p));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) { write_file(path, encode_model(model)); }

Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace skelclip
