#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace skelclip {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline constexpr std::size_t kReferenceJointCount = 4;

/// Joint set of a capture device: how joints are chained into image columns
/// and which four joints serve as references. Indices are 0-based.
struct JointLayout {
  std::string name;
  std::size_t joint_count = 0;
  std::vector<std::size_t> chain_order;
  std::array<std::size_t, kReferenceJointCount> reference_joints{};
  std::map<std::size_t, std::string> joint_names;

  friend bool operator==(const JointLayout&, const JointLayout&) = default;
};

/// Throws ConfigError unless the layout invariants hold.
void validate(const JointLayout& layout);

/// Built-in layouts: "figure2-16", "ntu-25", "sbu-15", "cmu-31".
JointLayout builtin_layout(std::string_view name);
std::vector<std::string> builtin_layout_names();

/// Parses a `key = value` layout config with keys name, joint_count, chain and
/// reference_joints (comma-separated 0-based indices), plus optional
/// joint_names (comma-separated, in index order).
JointLayout load_layout(std::string_view config_text);
std::string write_layout(const JointLayout& layout);

/// A built-in layout name, or a path to a layout config file.
JointLayout resolve_layout(const std::string& name_or_path);

/// t frames x m joints of 3D positions, stored frame-major.
struct SkeletonSequence {
  JointLayout layout;
  std::size_t frame_count = 0;
  std::vector<Vec3> positions;
  std::optional<int> label;
  std::optional<int> subject_id;
  std::optional<int> camera_id;

  std::size_t joint_count() const { return layout.joint_count; }
  const Vec3& at(std::size_t frame, std::size_t joint) const {
    return positions[frame * layout.joint_count + joint];
  }
  Vec3& at(std::size_t frame, std::size_t joint) { return positions[frame * layout.joint_count + joint]; }

  friend bool operator==(const SkeletonSequence&, const SkeletonSequence&) = default;
};

/// Throws ConfigError/DimensionError unless the sequence is well formed.
/// When `class_count` is given the label (if any) must be below it.
void validate(const SkeletonSequence& seq, std::optional<int> class_count = std::nullopt);

/// Reads an NTU RGB+D `.skeleton` file. Returns one sequence per body ID in
/// order of first appearance; frames in which a body is absent are skipped
/// for that body. Errors carry the offending line number.
std::vector<SkeletonSequence> parse_ntu_skeleton(std::istream& in, const JointLayout& layout);

/// Metadata encoded in NTU file names such as S001C002P003R002A013.
struct NtuFileInfo {
  int setup = 0;
  int camera = 0;
  int subject = 0;
  int replication = 0;
  int action = 0;  // 1-based as in the file name
};
std::optional<NtuFileInfo> parse_ntu_filename(std::string_view filename);

/// Canonical JSON document: {"layout": <builtin name | layout object>,
/// "label": int|null, "frames": [[[x,y,z], ...], ...]} with optional
/// "subject_id" and "camera_id".
SkeletonSequence parse_canonical(std::string_view text);
std::string write_canonical(const SkeletonSequence& seq);

/// One line of a manifest: `path, label[, subject_id, camera_id[, fold]]`.
/// Missing ids may be written as `-`. `a.json|b.json` lists several files
/// whose samples form one record (e.g. the two people of an interaction).
struct ManifestRecord {
  std::string path;
  int label = 0;
  std::optional<int> subject_id;
  std::optional<int> camera_id;
  std::optional<int> fold;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  int class_count = 0;
  JointLayout layout;
};

void validate(const DatasetManifest& manifest);

/// Manifest text: header lines `class_count = N` and `layout = <name|path>`,
/// then one comma-separated record per line. `#` starts a comment line.
DatasetManifest parse_manifest(std::string_view text);
std::string write_manifest(const DatasetManifest& manifest);

/// Loads every sample of a record. `.skeleton` files may hold several bodies;
/// anything else is read as a canonical document. Relative paths resolve
/// against `base_dir`. Record metadata overrides what the file carries.
std::vector<SkeletonSequence> load_record(const ManifestRecord& record, const JointLayout& layout,
                                          const std::filesystem::path& base_dir);

}  // namespace skelclip
