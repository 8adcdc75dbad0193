// Unified vocabulary V = {text, robot motion, human motion, special, grid,
// gait}: contiguous segments in that fixed order, each token addressed by a
// global id = segment offset + local id. Text is byte-level (256 bytes +
// end-of-text); the grid segment maps ground-plane cells row-major from the
// (-extent/2, -extent/2) corner.
#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "motionlm/motion.hpp"

namespace motionlm {

struct GridSpec {
  double extent = 14.0;      // side length, metres, centered on the origin
  double resolution = 0.5;   // cell size, metres

  void validate() const;     // extent/resolution must be a positive integer
  int cols() const;
  int cells() const { return cols() * cols(); }

  // Row-major cell index; coordinates on the max edge clamp inward.
  // Throws DataError outside the extent.
  int cell_index(double x, double z) const;
  std::array<int, 2> cell_rowcol(double x, double z) const;  // [row, col]
  std::array<double, 2> cell_center(int index) const;        // (x, z)
};

enum class Segment { Text, Robot, Human, Special, Grid, Gait };
std::string segment_label(Segment s);
Segment segment_from_label(const std::string& name);

// Start/end markers, one pair per task, in registry order.
std::vector<std::string> default_special_names();

struct VocabConfig {
  int text_size = 257;    // 256 bytes + end-of-text; >= 257 required
  int robot_size = 128;   // robot codebook N
  int human_size = 512;   // human codebook N
  GridSpec grid;
  std::vector<std::string> special_names = default_special_names();
  std::vector<std::string> gait_names = {"TROT", "BOUND"};

  void validate() const;
};

class UnifiedVocabulary {
 public:
  struct SegmentInfo {
    Segment seg;
    std::string name;
    int size = 0;
    int offset = 0;
  };

  UnifiedVocabulary() = default;
  static UnifiedVocabulary build(const VocabConfig& cfg);

  int size() const { return total_; }
  const std::vector<SegmentInfo>& segments() const { return segments_; }
  const GridSpec& grid() const { return grid_; }

  int offset(Segment s) const;
  int segment_size(Segment s) const;

  int to_global(Segment s, int local) const;              // bounds-checked
  std::pair<Segment, int> from_global(int id) const;

  // text (byte-level; end-of-text is the last text-segment token)
  std::vector<int> encode_text(const std::string& s) const;
  std::string decode_text(const std::vector<int>& ids) const;
  int eot() const;

  // special tokens by registry name (e.g. "T2RM_START")
  int special(const std::string& name) const;
  const std::vector<std::string>& special_names() const { return special_names_; }

  // gait
  int gait_token(Gait g) const;
  Gait gait_from_token(int id) const;

  // grid
  int grid_token(double x, double z) const;
  int grid_token_from_cell(int row, int col) const;
  std::array<double, 2> grid_center(int id) const;
  std::array<int, 2> grid_cell(int id) const;   // [row, col]

  nlohmann::json manifest() const;
  static UnifiedVocabulary from_manifest(const nlohmann::json& j);

 private:
  std::vector<SegmentInfo> segments_;
  GridSpec grid_;
  std::vector<std::string> special_names_;
  std::vector<std::string> gait_names_;
  int total_ = 0;

  const SegmentInfo& info(Segment s) const;
};

}  // namespace motionlm
