#include "motionlm/vocab.hpp"

#include <cmath>
#include <set>

namespace motionlm {

void GridSpec::validate() const {
  if (extent <= 0 || resolution <= 0) throw ConfigError("grid: extent and resolution must be positive");
  double ratio = extent / resolution;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw ConfigError("grid: extent must be an integer multiple of resolution");
}

int GridSpec::cols() const {
  validate();
  return static_cast<int>(std::round(extent / resolution));
}

std::array<int, 2> GridSpec::cell_rowcol(double x, double z) const {
  int n = cols();
  double half = extent / 2;
  if (x < -half || x > half || z < -half || z > half)
    throw DataError("grid: coordinates outside the extent");
  int col = static_cast<int>(std::floor((x + half) / resolution));
  int row = static_cast<int>(std::floor((z + half) / resolution));
  // the max edge belongs to the last cell
  col = std::min(col, n - 1);
  row = std::min(row, n - 1);
  return {row, col};
}

int GridSpec::cell_index(double x, double z) const {
  auto rc = cell_rowcol(x, z);
  return rc[0] * cols() + rc[1];
}

std::array<double, 2> GridSpec::cell_center(int index) const {
  int n = cols();
  if (index < 0 || index >= cells()) throw DataError("grid: cell index out of range");
  int row = index / n, col = index % n;
  double half = extent / 2;
  return {-half + (col + 0.5) * resolution, -half + (row + 0.5) * resolution};
}

std::string segment_label(Segment s) {
  switch (s) {
    case Segment::Text: return "text";
    case Segment::Robot: return "robot";
    case Segment::Human: return "human";
    case Segment::Special: return "special";
    case Segment::Grid: return "grid";
    case Segment::Gait: return "gait";
  }
  throw ConfigError("unknown segment");
}

Segment segment_from_label(const std::string& name) {
  for (Segment s : {Segment::Text, Segment::Robot, Segment::Human, Segment::Special,
                    Segment::Grid, Segment::Gait})
    if (segment_label(s) == name) return s;
  throw DataError("unknown segment label: " + name);
}

std::vector<std::string> default_special_names() {
  return {"T2RM_START", "T2RM_END", "T2HM_START", "T2HM_END", "CAP_START",
          "CAP_END",    "GOAL_START", "GOAL_END", "QA_START", "QA_END"};
}

void VocabConfig::validate() const {
  if (text_size < 257) throw ConfigError("vocab: text segment needs at least 256 bytes + EOT");
  if (robot_size < 1 || human_size < 1) throw ConfigError("vocab: motion segments need size >= 1");
  grid.validate();
  if (special_names.empty()) throw ConfigError("vocab: no special tokens");
  if (gait_names.empty()) throw ConfigError("vocab: no gait tokens");
  std::set<std::string> seen;
  for (const auto& n : special_names)
    if (n.empty() || !seen.insert(n).second) throw ConfigError("vocab: duplicate special token name " + n);
  for (const auto& n : gait_names)
    if (n.empty() || !seen.insert(n).second) throw ConfigError("vocab: duplicate gait token name " + n);
}

UnifiedVocabulary UnifiedVocabulary::build(const VocabConfig& cfg) {
  cfg.validate();
  UnifiedVocabulary v;
  v.grid_ = cfg.grid;
  v.special_names_ = cfg.special_names;
  v.gait_names_ = cfg.gait_names;
  auto push = [&v](Segment s, int size) {
    v.segments_.push_back({s, segment_label(s), size, v.total_});
    v.total_ += size;
  };
  push(Segment::Text, cfg.text_size);
  push(Segment::Robot, cfg.robot_size);
  push(Segment::Human, cfg.human_size);
  push(Segment::Special, static_cast<int>(cfg.special_names.size()));
  push(Segment::Grid, cfg.grid.cells());
  push(Segment::Gait, static_cast<int>(cfg.gait_names.size()));
  return v;
}

const UnifiedVocabulary::SegmentInfo& UnifiedVocabulary::info(Segment s) const {
  for (const auto& seg : segments_)
    if (seg.seg == s) return seg;
  throw ConfigError("vocabulary not built");
}

int UnifiedVocabulary::offset(Segment s) const { return info(s).offset; }
int UnifiedVocabulary::segment_size(Segment s) const { return info(s).size; }

int UnifiedVocabulary::to_global(Segment s, int local) const {
  const SegmentInfo& seg = info(s);
  if (local < 0 || local >= seg.size)
    throw DataError("vocab: local id " + std::to_string(local) + " outside segment " + seg.name);
  return seg.offset + local;
}

std::pair<Segment, int> UnifiedVocabulary::from_global(int id) const {
  if (id < 0 || id >= total_) throw DataError("vocab: global id out of range: " + std::to_string(id));
  for (const auto& seg : segments_)
    if (id < seg.offset + seg.size) return {seg.seg, id - seg.offset};
  throw DataError("vocab: unmapped id");  // unreachable given the invariant
}

std::vector<int> UnifiedVocabulary::encode_text(const std::string& s) const {
  int base = offset(Segment::Text);
  std::vector<int> ids;
  ids.reserve(s.size());
  for (unsigned char c : s) ids.push_back(base + static_cast<int>(c));
  return ids;
}

std::string UnifiedVocabulary::decode_text(const std::vector<int>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    auto [seg, local] = from_global(id);
    if (seg != Segment::Text) throw DataError("decode_text: non-text token");
    if (local >= 256) throw DataError("decode_text: not a byte token");
    out.push_back(static_cast<char>(local));
  }
  return out;
}

int UnifiedVocabulary::eot() const {
  const SegmentInfo& seg = info(Segment::Text);
  return seg.offset + seg.size - 1;
}

int UnifiedVocabulary::special(const std::string& name) const {
  for (size_t i = 0; i < special_names_.size(); ++i)
    if (special_names_[i] == name)
      return offset(Segment::Special) + static_cast<int>(i);
  throw DataError("unknown special token: " + name);
}

int UnifiedVocabulary::gait_token(Gait g) const {
  int local = static_cast<int>(g);
  if (local < 0 || local >= static_cast<int>(gait_names_.size()))
    throw DataError("gait not in vocabulary");
  return offset(Segment::Gait) + local;
}

Gait UnifiedVocabulary::gait_from_token(int id) const {
  auto [seg, local] = from_global(id);
  if (seg != Segment::Gait) throw DataError("not a gait token");
  return static_cast<Gait>(local);
}

int UnifiedVocabulary::grid_token(double x, double z) const {
  return offset(Segment::Grid) + grid_.cell_index(x, z);
}

int UnifiedVocabulary::grid_token_from_cell(int row, int col) const {
  int n = grid_.cols();
  if (row < 0 || row >= n || col < 0 || col >= n) throw DataError("grid cell out of range");
  return offset(Segment::Grid) + row * n + col;
}

std::array<double, 2> UnifiedVocabulary::grid_center(int id) const {
  auto [seg, local] = from_global(id);
  if (seg != Segment::Grid) throw DataError("not a grid token");
  return grid_.cell_center(local);
}

std::array<int, 2> UnifiedVocabulary::grid_cell(int id) const {
  auto [seg, local] = from_global(id);
  if (seg != Segment::Grid) throw DataError("not a grid token");
  return {local / grid_.cols(), local % grid_.cols()};
}

nlohmann::json UnifiedVocabulary::manifest() const {
  nlohmann::ordered_json j;
  j["segments"] = nlohmann::json::array();
  for (const auto& seg : segments_)
    j["segments"].push_back({{"name", seg.name}, {"size", seg.size}, {"offset", seg.offset}});
  j["grid"] = {{"extent", grid_.extent}, {"resolution", grid_.resolution}};
  j["special_names"] = special_names_;
  j["gait_names"] = gait_names_;
  return j;
}

UnifiedVocabulary UnifiedVocabulary::from_manifest(const nlohmann::json& j) {
  VocabConfig cfg;
  try {
    cfg.grid.extent = j.at("grid").at("extent").get<double>();
    cfg.grid.resolution = j.at("grid").at("resolution").get<double>();
    cfg.special_names = j.at("special_names").get<std::vector<std::string>>();
    cfg.gait_names = j.at("gait_names").get<std::vector<std::string>>();
    std::vector<SegmentInfo> declared;
    for (const auto& seg : j.at("segments"))
      declared.push_back({segment_from_label(seg.at("name").get<std::string>()), seg.at("name").get<std::string>(),
                          seg.at("size").get<int>(), seg.at("offset").get<int>()});
    if (declared.size() != 6) throw DataError("vocab manifest: expected 6 segments");
    cfg.text_size = declared[0].size;
    cfg.robot_size = declared[1].size;
    cfg.human_size = declared[2].size;
    UnifiedVocabulary v = build(cfg);
    for (size_t i = 0; i < declared.size(); ++i) {
      const auto& a = v.segments_[i];
      const auto& b = declared[i];
      if (a.seg != b.seg || a.size != b.size || a.offset != b.offset)
        throw DataError("vocab manifest: segment table does not match the declared layout");
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("vocab manifest: ") + e.what());
  }
}

}  // namespace motionlm
