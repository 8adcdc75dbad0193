// Instruction template: T = prefix_bytes ++ x ++ t_st ++ [gait] ++ y ++ t_ed
// over global vocabulary ids, with a registry of the five tasks and a
// deterministic multi-task training-set builder.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motionlm/vocab.hpp"

namespace motionlm {

class VqVae;

struct TaskSpec {
  std::string name;
  std::string prefix;             // printed text, trailing space included
  std::string start_name, end_name;  // special-token registry names
  Segment input_seg = Segment::Text;
  Segment output_seg = Segment::Robot;
  bool gait_allowed = false;      // only valid for robot-motion outputs
  bool single_input = false;      // goal: exactly one input token
};

class TaskRegistry {
 public:
  static TaskRegistry standard();  // t2rm, t2hm, caption, goal, qa

  explicit TaskRegistry(std::vector<TaskSpec> tasks = {});
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  const TaskSpec& by_name(const std::string& name) const;
  // nullptr when the id is not a start token of any registered task
  const TaskSpec* by_start_token(const UnifiedVocabulary& vocab, int id) const;

  nlohmann::json manifest() const;
  static TaskRegistry from_manifest(const nlohmann::json& j);

 private:
  std::vector<TaskSpec> tasks_;
};

struct InstructionSample {
  std::string task;
  std::vector<int> input;    // global ids in the task's input segment
  std::optional<int> gait;   // global gait id
  std::vector<int> output;   // global ids in the task's output segment

  bool operator==(const InstructionSample&) const = default;
};

// Eq. 2 rendering; throws DataError on segment mismatches.
std::vector<int> render(const UnifiedVocabulary& vocab, const TaskRegistry& registry,
                        const InstructionSample& sample);

// Inverse of render: task from the start token, prefix verified, gait
// recognized by segment right after the start token.
InstructionSample parse(const UnifiedVocabulary& vocab, const TaskRegistry& registry,
                        const std::vector<int>& ids);

// Motion corpus pre-encoded with a trained tokenizer, ready for templating.
struct TokenizedCorpus {
  struct Item {
    std::vector<int> motion;   // local codebook ids
    std::string caption;
    std::optional<std::array<int, 2>> goal_cell;
    std::optional<Gait> gait;
  };
  Segment segment = Segment::Robot;
  std::vector<Item> items;
};

// With `goal_grid` set (robot corpora only), goal labels are re-derived from
// the tokenized motion — the cell the decoded tokens actually reach, nullopt
// when they leave the grid — so goal supervision matches what emitting those
// tokens achieves. Without it, labels pass through from the source corpus.
TokenizedCorpus tokenize_corpus(const VqVae& vq,
                                const std::vector<CaptionedTrajectory>& corpus,
                                Segment segment, const GridSpec* goal_grid = nullptr);

// Deterministic multi-task mix: per-task counts by largest remainder over
// normalized weights, items cycled through a seeded shuffle of each source,
// then one global shuffle. Weight keys must name registered tasks; a
// positive-weight task with no usable source data is an error.
std::vector<InstructionSample> build_training_set(
    const UnifiedVocabulary& vocab, const TaskRegistry& registry,
    const TokenizedCorpus& robot, const TokenizedCorpus& human,
    const TokenizedCorpus& qa, const std::map<std::string, double>& weights,
    int total, uint64_t seed);

}  // namespace motionlm
