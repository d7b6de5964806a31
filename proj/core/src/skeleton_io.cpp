#include "skelclip/skeleton_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "skelclip/error.hpp"
#include "skelclip/keyvalue.hpp"
#include "skelclip/tensor_io.hpp"

namespace skelclip {
namespace {

using nlohmann::json;

std::vector<std::size_t> iota_chain(std::size_t n) {
  std::vector<std::size_t> chain(n);
  for (std::size_t i = 0; i < n; ++i) chain[i] = i;
  return chain;
}

JointLayout make_layout(std::string name, std::vector<std::size_t> chain,
                        std::array<std::size_t, kReferenceJointCount> refs,
                        std::vector<std::string> names) {
  JointLayout layout;
  layout.name = std::move(name);
  layout.joint_count = chain.size();
  layout.chain_order = std::move(chain);
  layout.reference_joints = refs;
  for (std::size_t i = 0; i < names.size(); ++i) layout.joint_names[i] = std::move(names[i]);
  validate(layout);
  return layout;
}

JointLayout figure2_layout() {
  // Figure labels are 1-based: left shoulder 5, right shoulder 8, left hip 11,
  // right hip 14.
  return make_layout("figure2-16", iota_chain(16), {4, 7, 10, 13}, {});
}

JointLayout ntu_layout() {
  std::vector<std::string> names = {
      "spine_base",     "spine_mid",      "neck",        "head",           "left_shoulder",
      "left_elbow",     "left_wrist",     "left_hand",   "right_shoulder", "right_elbow",
      "right_wrist",    "right_hand",     "left_hip",    "left_knee",      "left_ankle",
      "left_foot",      "right_hip",      "right_knee",  "right_ankle",    "right_foot",
      "spine_shoulder", "left_hand_tip",  "left_thumb",  "right_hand_tip", "right_thumb"};
  // Torso, left arm, right arm, left leg, right leg.
  std::vector<std::size_t> chain = {0,  1,  20, 2,  3,  4,  5,  6,  7,  21, 22, 8, 9,
                                    10, 11, 23, 24, 12, 13, 14, 15, 16, 17, 18, 19};
  return make_layout("ntu-25", std::move(chain), {4, 8, 12, 16}, std::move(names));
}

JointLayout sbu_layout() {
  std::vector<std::string> names = {"head",       "neck",      "torso",          "left_shoulder",
                                    "left_elbow", "left_hand", "right_shoulder", "right_elbow",
                                    "right_hand", "left_hip",  "left_knee",      "left_foot",
                                    "right_hip",  "right_knee", "right_foot"};
  return make_layout("sbu-15", iota_chain(15), {3, 6, 9, 12}, std::move(names));
}

JointLayout cmu_layout() {
  // ASF skeleton segments; each joint is the proximal end of its segment, so
  // the humerus and femur entries sit at the shoulders and hips.
  std::vector<std::string> names = {
      "root",     "lhipjoint", "lfemur",    "ltibia",    "lfoot",     "ltoes",    "rhipjoint",
      "rfemur",   "rtibia",    "rfoot",     "rtoes",     "lowerback", "upperback", "thorax",
      "lowerneck", "upperneck", "head",     "lclavicle", "lhumerus",  "lradius",  "lwrist",
      "lhand",    "lfingers",  "lthumb",    "rclavicle", "rhumerus",  "rradius",  "rwrist",
      "rhand",    "rfingers",  "rthumb"};
  return make_layout("cmu-31", iota_chain(31), {18, 25, 2, 7}, std::move(names));
}

bool parse_number(std::string_view token, double& out) {
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(out);
}

bool parse_count(std::string_view token, long long& out) {
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc{} && ptr == token.data() + token.size();
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next line, tokenized. Throws at end of input.
  std::vector<std::string_view> next(const char* expecting) {
    if (!std::getline(in_, line_)) throw ParseError(line_no_ + 1, std::string("unexpected end of file, expected ") + expecting);
    ++line_no_;
    return tokens(line_);
  }

  long long count(const char* what) {
    const auto toks = next(what);
    long long v = 0;
    if (toks.size() != 1 || !parse_count(toks[0], v) || v < 0)
      throw ParseError(line_no_, std::string("malformed ") + what);
    return v;
  }

  bool only_blank_remaining() {
    std::string rest;
    while (std::getline(in_, rest)) {
      ++line_no_;
      if (!tokens(rest).empty()) return false;
    }
    return true;
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t line_no_ = 0;
};

json layout_to_json(const JointLayout& layout) {
  json j;
  j["name"] = layout.name;
  j["joint_count"] = layout.joint_count;
  j["chain"] = layout.chain_order;
  j["reference_joints"] = layout.reference_joints;
  if (!layout.joint_names.empty()) {
    json names = json::object();
    for (const auto& [idx, name] : layout.joint_names) names[std::to_string(idx)] = name;
    j["joint_names"] = names;
  }
  return j;
}

JointLayout layout_from_json(const json& j) {
  if (j.is_string()) return builtin_layout(j.get<std::string>());
  if (!j.is_object()) throw ParseError(0, "layout must be a name or an object");
  JointLayout layout;
  layout.name = j.at("name").get<std::string>();
  layout.joint_count = j.at("joint_count").get<std::size_t>();
  layout.chain_order = j.at("chain").get<std::vector<std::size_t>>();
  const auto refs = j.at("reference_joints").get<std::vector<std::size_t>>();
  if (refs.size() != kReferenceJointCount) throw ConfigError("layout needs exactly 4 reference joints");
  std::copy(refs.begin(), refs.end(), layout.reference_joints.begin());
  if (j.contains("joint_names"))
    for (const auto& [key, value] : j.at("joint_names").items())
      layout.joint_names[static_cast<std::size_t>(parse_int(key))] = value.get<std::string>();
  validate(layout);
  return layout;
}

std::optional<int> optional_id(const std::string& field) {
  if (field.empty() || field == "-") return std::nullopt;
  return static_cast<int>(parse_int(field));
}

}  // namespace

void validate(const JointLayout& layout) {
  const std::size_t m = layout.joint_count;
  if (m <= kReferenceJointCount) throw ConfigError("layout '" + layout.name + "': joint_count must be >= 5");
  if (layout.chain_order.size() != m)
    throw ConfigError("layout '" + layout.name + "': chain has " + std::to_string(layout.chain_order.size()) +
                      " entries, expected " + std::to_string(m));
  std::vector<bool> seen(m, false);
  for (auto idx : layout.chain_order) {
    if (idx >= m) throw ConfigError("layout '" + layout.name + "': chain index " + std::to_string(idx) + " out of range");
    if (seen[idx]) throw ConfigError("layout '" + layout.name + "': duplicate chain entry " + std::to_string(idx));
    seen[idx] = true;
  }
  std::set<std::size_t> refs;
  for (auto r : layout.reference_joints) {
    if (r >= m) throw ConfigError("layout '" + layout.name + "': reference joint " + std::to_string(r) + " out of range");
    refs.insert(r);
  }
  if (refs.size() != kReferenceJointCount)
    throw ConfigError("layout '" + layout.name + "': reference joints must be distinct");
  for (const auto& [idx, name] : layout.joint_names)
    if (idx >= m) throw ConfigError("layout '" + layout.name + "': joint name index out of range");
}

JointLayout builtin_layout(std::string_view name) {
  if (name == "figure2-16") return figure2_layout();
  if (name == "ntu-25") return ntu_layout();
  if (name == "sbu-15") return sbu_layout();
  if (name == "cmu-31") return cmu_layout();
  throw ConfigError("unknown built-in layout '" + std::string(name) + "'");
}

std::vector<std::string> builtin_layout_names() { return {"figure2-16", "ntu-25", "sbu-15", "cmu-31"}; }

JointLayout load_layout(std::string_view config_text) {
  const auto doc = KeyValueDoc::parse(config_text);
  JointLayout layout;
  layout.name = doc.get("name");
  const long long m = doc.get_int("joint_count");
  if (m < 1) throw ConfigError("joint_count must be positive");
  layout.joint_count = static_cast<std::size_t>(m);
  layout.chain_order = parse_index_list(doc.get("chain"));
  const auto refs = parse_index_list(doc.get("reference_joints"));
  if (refs.size() != kReferenceJointCount)
    throw ConfigError("reference_joints must list exactly 4 joints, got " + std::to_string(refs.size()));
  std::copy(refs.begin(), refs.end(), layout.reference_joints.begin());
  if (auto names = doc.find("joint_names")) {
    const auto list = split(*names, ',');
    for (std::size_t i = 0; i < list.size(); ++i)
      if (!list[i].empty()) layout.joint_names[i] = list[i];
  }
  validate(layout);
  return layout;
}

std::string write_layout(const JointLayout& layout) {
  auto join = [](const auto& xs) {
    std::string s;
    for (auto x : xs) s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
  };
  std::ostringstream out;
  out << "name = " << layout.name << '\n'
      << "joint_count = " << layout.joint_count << '\n'
      << "chain = " << join(layout.chain_order) << '\n'
      << "reference_joints = " << join(layout.reference_joints) << '\n';
  if (!layout.joint_names.empty()) {
    std::string names;
    for (std::size_t i = 0; i < layout.joint_count; ++i) {
      if (i) names += ',';
      auto it = layout.joint_names.find(i);
      if (it != layout.joint_names.end()) names += it->second;
    }
    out << "joint_names = " << names << '\n';
  }
  return out.str();
}

JointLayout resolve_layout(const std::string& name_or_path) {
  const auto names = builtin_layout_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin_layout(name_or_path);
  if (!std::filesystem::exists(name_or_path))
    throw ConfigError("'" + name_or_path + "' is neither a built-in layout nor a layout file");
  return load_layout(read_file(name_or_path));
}

void validate(const SkeletonSequence& seq, std::optional<int> class_count) {
  validate(seq.layout);
  if (seq.frame_count < 1) throw DimensionError("sequence must have at least one frame");
  if (seq.positions.size() != seq.frame_count * seq.layout.joint_count)
    throw DimensionError("sequence positions are not frames x joints");
  for (const auto& p : seq.positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw DimensionError("sequence contains non-finite coordinates");
  if (seq.label) {
    if (*seq.label < 0) throw ConfigError("negative label");
    if (class_count && *seq.label >= *class_count)
      throw ConfigError("label " + std::to_string(*seq.label) + " >= class count " + std::to_string(*class_count));
  }
}

std::vector<SkeletonSequence> parse_ntu_skeleton(std::istream& in, const JointLayout& layout) {
  validate(layout);
  LineReader reader(in);
  const long long frames = reader.count("frame count");
  if (frames < 1) throw ParseError(reader.line(), "frame count must be >= 1");

  std::vector<std::string> body_order;
  std::map<std::string, SkeletonSequence> bodies;
  const std::size_t m = layout.joint_count;

  for (long long f = 0; f < frames; ++f) {
    const long long body_count = reader.count("body count");
    for (long long b = 0; b < body_count; ++b) {
      const auto meta = reader.next("body metadata");
      if (meta.empty()) throw ParseError(reader.line(), "empty body metadata line");
      const std::string body_id(meta[0]);
      const long long joints = reader.count("joint count");
      if (joints != static_cast<long long>(m))
        throw ParseError(reader.line(), "joint count " + std::to_string(joints) + " does not match layout '" +
                                            layout.name + "' (" + std::to_string(m) + ")");
      auto [it, inserted] = bodies.try_emplace(body_id);
      SkeletonSequence& seq = it->second;
      if (inserted) {
        seq.layout = layout;
        body_order.push_back(body_id);
      }
      if (seq.frame_count * m != seq.positions.size())
        throw ParseError(reader.line(), "body '" + body_id + "' appears twice in one frame");
      for (std::size_t j = 0; j < m; ++j) {
        const auto toks = reader.next("joint line");
        Vec3 p;
        if (toks.size() < 3 || !parse_number(toks[0], p.x) || !parse_number(toks[1], p.y) ||
            !parse_number(toks[2], p.z))
          throw ParseError(reader.line(), "joint line needs three numeric coordinates");
        seq.positions.push_back(p);
      }
    }
    // Close the frame for every body seen in it.
    for (auto& [id, seq] : bodies)
      if (seq.positions.size() == (seq.frame_count + 1) * m) ++seq.frame_count;
  }
  if (!reader.only_blank_remaining()) throw ParseError(reader.line(), "trailing content after last frame");
  if (body_order.empty()) throw ParseError(reader.line(), "file contains no bodies");

  std::vector<SkeletonSequence> out;
  out.reserve(body_order.size());
  for (const auto& id : body_order) out.push_back(std::move(bodies[id]));
  return out;
}

std::optional<NtuFileInfo> parse_ntu_filename(std::string_view filename) {
  const auto slash = filename.find_last_of("/\\");
  if (slash != std::string_view::npos) filename.remove_prefix(slash + 1);
  if (filename.size() < 20) return std::nullopt;
  NtuFileInfo info;
  const std::pair<char, int*> fields[] = {{'S', &info.setup},      {'C', &info.camera}, {'P', &info.subject},
                                          {'R', &info.replication}, {'A', &info.action}};
  std::size_t pos = 0;
  for (const auto& [tag, dest] : fields) {
    if (filename[pos] != tag) return std::nullopt;
    const auto digits = filename.substr(pos + 1, 3);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), *dest);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    pos += 4;
  }
  return info;
}

SkeletonSequence parse_canonical(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("canonical sequence: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw ParseError(0, "canonical sequence must be an object");
    for (const char* key : {"layout", "label", "frames"})
      if (!doc.contains(key)) throw ParseError(0, std::string("canonical sequence: missing field '") + key + "'");

    SkeletonSequence seq;
    seq.layout = layout_from_json(doc["layout"]);
    if (!doc["label"].is_null()) seq.label = doc["label"].get<int>();
    if (doc.contains("subject_id") && !doc["subject_id"].is_null()) seq.subject_id = doc["subject_id"].get<int>();
    if (doc.contains("camera_id") && !doc["camera_id"].is_null()) seq.camera_id = doc["camera_id"].get<int>();

    const auto& frames = doc["frames"];
    if (!frames.is_array()) throw ParseError(0, "canonical sequence: 'frames' must be an array");
    if (frames.empty()) throw ParseError(0, "canonical sequence: 'frames' is empty");
    const std::size_t m = seq.layout.joint_count;
    seq.positions.reserve(frames.size() * m);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& frame = frames[f];
      if (!frame.is_array() || frame.size() != m)
        throw ParseError(0, "canonical sequence: frame " + std::to_string(f) + " has " +
                                std::to_string(frame.is_array() ? frame.size() : 0) + " joints, expected " +
                                std::to_string(m));
      for (const auto& joint : frame) {
        if (!joint.is_array() || joint.size() != 3 || !joint[0].is_number() || !joint[1].is_number() ||
            !joint[2].is_number())
          throw ParseError(0, "canonical sequence: joint in frame " + std::to_string(f) + " is not [x,y,z]");
        seq.positions.push_back({joint[0].get<double>(), joint[1].get<double>(), joint[2].get<double>()});
      }
    }
    seq.frame_count = frames.size();
    validate(seq);
    return seq;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("canonical sequence: ") + e.what());
  }
}

std::string write_canonical(const SkeletonSequence& seq) {
  validate(seq);
  json doc;
  const auto names = builtin_layout_names();
  const bool is_builtin = std::find(names.begin(), names.end(), seq.layout.name) != names.end() &&
                          builtin_layout(seq.layout.name) == seq.layout;
  doc["layout"] = is_builtin ? json(seq.layout.name) : layout_to_json(seq.layout);
  doc["label"] = seq.label ? json(*seq.label) : json(nullptr);
  if (seq.subject_id) doc["subject_id"] = *seq.subject_id;
  if (seq.camera_id) doc["camera_id"] = *seq.camera_id;
  json frames = json::array();
  for (std::size_t f = 0; f < seq.frame_count; ++f) {
    json frame = json::array();
    for (std::size_t j = 0; j < seq.joint_count(); ++j) {
      const auto& p = seq.at(f, j);
      frame.push_back({p.x, p.y, p.z});
    }
    frames.push_back(std::move(frame));
  }
  doc["frames"] = std::move(frames);
  return doc.dump() + "\n";
}

void validate(const DatasetManifest& manifest) {
  if (manifest.class_count < 1) throw ConfigError("manifest class_count must be positive");
  validate(manifest.layout);
  std::set<std::string> paths;
  for (const auto& r : manifest.records) {
    if (r.label < 0 || r.label >= manifest.class_count)
      throw ConfigError("manifest label " + std::to_string(r.label) + " out of range for '" + r.path + "'");
    if (!paths.insert(r.path).second) throw ConfigError("manifest path listed twice: " + r.path);
  }
}

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest manifest;
  std::string layout_name;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq != std::string_view::npos && line.find(',') == std::string_view::npos) {
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      try {
        if (key == "class_count") manifest.class_count = static_cast<int>(parse_int(value));
        else if (key == "layout") layout_name = std::string(value);
        else throw ParseError(line_no, "unknown manifest key '" + std::string(key) + "'");
      } catch (const ConfigError& e) {
        throw ParseError(line_no, e.what());
      }
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() < 2 || fields.size() > 5)
      throw ParseError(line_no, "manifest record needs path, label[, subject_id, camera_id[, fold]]");
    ManifestRecord r;
    try {
      r.path = fields[0];
      if (r.path.empty()) throw ParseError(line_no, "empty path");
      r.label = static_cast<int>(parse_int(fields[1]));
      if (fields.size() > 2) r.subject_id = optional_id(fields[2]);
      if (fields.size() > 3) r.camera_id = optional_id(fields[3]);
      if (fields.size() > 4) r.fold = optional_id(fields[4]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    manifest.records.push_back(std::move(r));
  }
  if (layout_name.empty()) throw ParseError(0, "manifest is missing 'layout'");
  manifest.layout = resolve_layout(layout_name);
  validate(manifest);
  return manifest;
}

std::string write_manifest(const DatasetManifest& manifest) {
  validate(manifest);
  auto id = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("-"); };
  std::ostringstream out;
  out << "class_count = " << manifest.class_count << '\n' << "layout = " << manifest.layout.name << '\n';
  for (const auto& r : manifest.records) {
    out << r.path << ',' << r.label << ',' << id(r.subject_id) << ',' << id(r.camera_id);
    if (r.fold) out << ',' << *r.fold;
    out << '\n';
  }
  return out.str();
}

std::vector<SkeletonSequence> load_record(const ManifestRecord& record, const JointLayout& layout,
                                          const std::filesystem::path& base_dir) {
  std::vector<SkeletonSequence> samples;
  for (const auto& part : split(record.path, '|')) {
    std::filesystem::path path(std::string(trim(part)));
    if (path.empty()) throw ConfigError("record '" + record.path + "' has an empty file name");
    if (path.is_relative()) path = base_dir / path;
    if (path.extension() == ".skeleton") {
      std::istringstream in(read_file(path));
      try {
        for (auto& s : parse_ntu_skeleton(in, layout)) samples.push_back(std::move(s));
      } catch (const ParseError& e) {
        throw ParseError(0, path.string() + ": " + e.what());
      }
    } else {
      samples.push_back(parse_canonical(read_file(path)));
      if (samples.back().layout.joint_count != layout.joint_count)
        throw DimensionError(path.string() + ": layout does not match manifest layout '" + layout.name + "'");
      samples.back().layout = layout;
    }
  }
  for (auto& s : samples) {
    s.label = record.label;
    if (record.subject_id) s.subject_id = record.subject_id;
    if (record.camera_id) s.camera_id = record.camera_id;
  }
  return samples;
}

}  // namespace skelclip
