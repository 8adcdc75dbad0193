#include "motionlm/instruction.hpp"

#include <algorithm>
#include <cmath>

#include "motionlm/vqvae.hpp"

namespace motionlm {

TaskRegistry::TaskRegistry(std::vector<TaskSpec> tasks) : tasks_(std::move(tasks)) {
  for (const auto& t : tasks_) {
    if (t.gait_allowed && t.output_seg != Segment::Robot)
      throw ConfigError("task " + t.name + ": gait slot requires robot-motion output");
    for (const auto& o : tasks_)
      if (&o != &t && (o.name == t.name || o.start_name == t.start_name || o.end_name == t.end_name))
        throw ConfigError("task registry: duplicate name or special token in " + t.name);
  }
}

TaskRegistry TaskRegistry::standard() {
  std::vector<TaskSpec> tasks;
  tasks.push_back({"t2rm", "give robot motion: ", "T2RM_START", "T2RM_END",
                   Segment::Text, Segment::Robot, true, false});
  tasks.push_back({"t2hm", "give human motion: ", "T2HM_START", "T2HM_END",
                   Segment::Text, Segment::Human, false, false});
  tasks.push_back({"caption", "give text description: ", "CAP_START", "CAP_END",
                   Segment::Robot, Segment::Text, false, false});
  tasks.push_back({"goal", "reach goal: ", "GOAL_START", "GOAL_END",
                   Segment::Grid, Segment::Robot, true, true});
  // Q&A shares the text-to-human prefix but keeps its own start/end pair so
  // parsing recovers the task unambiguously.
  tasks.push_back({"qa", "give human motion: ", "QA_START", "QA_END",
                   Segment::Text, Segment::Human, false, false});
  return TaskRegistry(std::move(tasks));
}

const TaskSpec& TaskRegistry::by_name(const std::string& name) const {
  for (const auto& t : tasks_)
    if (t.name == name) return t;
  throw DataError("unknown task: " + name);
}

const TaskSpec* TaskRegistry::by_start_token(const UnifiedVocabulary& vocab, int id) const {
  for (const auto& t : tasks_)
    if (vocab.special(t.start_name) == id) return &t;
  return nullptr;
}

nlohmann::json TaskRegistry::manifest() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& t : tasks_)
    j.push_back({{"name", t.name},
                 {"prefix", t.prefix},
                 {"start", t.start_name},
                 {"end", t.end_name},
                 {"input", segment_label(t.input_seg)},
                 {"output", segment_label(t.output_seg)},
                 {"gait_allowed", t.gait_allowed},
                 {"single_input", t.single_input}});
  return j;
}

TaskRegistry TaskRegistry::from_manifest(const nlohmann::json& j) {
  std::vector<TaskSpec> tasks;
  try {
    for (const auto& e : j)
      tasks.push_back({e.at("name").get<std::string>(), e.at("prefix").get<std::string>(),
                       e.at("start").get<std::string>(), e.at("end").get<std::string>(),
                       segment_from_label(e.at("input").get<std::string>()),
                       segment_from_label(e.at("output").get<std::string>()),
                       e.at("gait_allowed").get<bool>(), e.at("single_input").get<bool>()});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("task manifest: ") + e.what());
  }
  return TaskRegistry(std::move(tasks));
}

namespace {

void check_segment(const UnifiedVocabulary& vocab, const std::vector<int>& ids,
                   Segment want, const std::string& what) {
  if (ids.empty()) throw DataError(what + " tokens must be non-empty");
  for (int id : ids)
    if (vocab.from_global(id).first != want)
      throw DataError(what + " token " + std::to_string(id) + " is not in the " +
                      segment_label(want) + " segment");
}

}  // namespace

std::vector<int> render(const UnifiedVocabulary& vocab, const TaskRegistry& registry,
                        const InstructionSample& sample) {
  const TaskSpec& task = registry.by_name(sample.task);
  check_segment(vocab, sample.input, task.input_seg, task.name + " input");
  check_segment(vocab, sample.output, task.output_seg, task.name + " output");
  if (task.single_input && sample.input.size() != 1)
    throw DataError(task.name + " expects exactly one input token");
  if (sample.gait) {
    if (!task.gait_allowed) throw DataError(task.name + " does not take a gait token");
    if (vocab.from_global(*sample.gait).first != Segment::Gait)
      throw DataError("gait slot holds a non-gait token");
  }

  std::vector<int> ids = vocab.encode_text(task.prefix);
  ids.insert(ids.end(), sample.input.begin(), sample.input.end());
  ids.push_back(vocab.special(task.start_name));
  if (sample.gait) ids.push_back(*sample.gait);
  ids.insert(ids.end(), sample.output.begin(), sample.output.end());
  ids.push_back(vocab.special(task.end_name));
  return ids;
}

InstructionSample parse(const UnifiedVocabulary& vocab, const TaskRegistry& registry,
                        const std::vector<int>& ids) {
  const TaskSpec* task = nullptr;
  size_t start_pos = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (const TaskSpec* t = registry.by_start_token(vocab, ids[i])) {
      if (task) throw DataError("parse: duplicated start token");
      task = t;
      start_pos = i;
    }
  }
  if (!task) throw DataError("parse: no task start token");

  int end_id = vocab.special(task->end_name);
  size_t end_pos = ids.size();
  for (size_t i = start_pos + 1; i < ids.size(); ++i) {
    if (ids[i] == end_id) {
      if (end_pos != ids.size()) throw DataError("parse: duplicated end token");
      end_pos = i;
    }
  }
  if (end_pos == ids.size()) throw DataError("parse: unterminated response");
  if (end_pos + 1 != ids.size()) throw DataError("parse: trailing tokens after end");

  std::vector<int> prefix_ids = vocab.encode_text(task->prefix);
  if (start_pos < prefix_ids.size() ||
      !std::equal(prefix_ids.begin(), prefix_ids.end(), ids.begin()))
    throw DataError("parse: prefix does not match task " + task->name);

  InstructionSample out;
  out.task = task->name;
  out.input.assign(ids.begin() + prefix_ids.size(), ids.begin() + start_pos);
  size_t y_begin = start_pos + 1;
  if (y_begin < end_pos && vocab.from_global(ids[y_begin]).first == Segment::Gait) {
    if (!task->gait_allowed) throw DataError("parse: gait token in a gait-free task");
    out.gait = ids[y_begin];
    ++y_begin;
  }
  out.output.assign(ids.begin() + y_begin, ids.begin() + end_pos);

  check_segment(vocab, out.input, task->input_seg, task->name + " input");
  check_segment(vocab, out.output, task->output_seg, task->name + " output");
  if (task->single_input && out.input.size() != 1)
    throw DataError(task->name + " expects exactly one input token");
  return out;
}

TokenizedCorpus tokenize_corpus(const VqVae& vq,
                                const std::vector<CaptionedTrajectory>& corpus,
                                Segment segment, const GridSpec* goal_grid) {
  if (segment != Segment::Robot && segment != Segment::Human)
    throw ConfigError("tokenize_corpus: segment must be a motion segment");
  bool want_robot = segment == Segment::Robot;
  if (want_robot != (vq.embodiment().kind == EmbodimentKind::Robot))
    throw ConfigError("tokenize_corpus: tokenizer embodiment does not match segment");
  if (goal_grid && !want_robot)
    throw ConfigError("tokenize_corpus: goal re-labeling applies to robot corpora only");
  TokenizedCorpus out;
  out.segment = segment;
  for (const auto& s : corpus) {
    TokenizedCorpus::Item item;
    item.motion = vq.encode(s.trajectory);
    item.caption = s.caption;
    item.goal_cell = s.goal_cell;
    item.gait = s.gait;
    if (goal_grid) {
      item.goal_cell.reset();
      Trajectory dec = vq.decode(item.motion, s.trajectory.dt, s.trajectory.len());
      Se2Pose end = integrate_se2(dec).back();
      if (std::abs(end.x) <= goal_grid->extent / 2 && std::abs(end.z) <= goal_grid->extent / 2)
        item.goal_cell = goal_grid->cell_rowcol(end.x, end.z);
    }
    out.items.push_back(std::move(item));
  }
  return out;
}

namespace {

// Largest-remainder apportionment of `total` over normalized weights.
std::vector<int> apportion(const std::vector<double>& weights, int total) {
  double sum = 0;
  for (double w : weights) sum += w;
  if (sum <= 0) throw ConfigError("mixing weights must sum to a positive value");
  std::vector<int> counts(weights.size());
  std::vector<std::pair<double, size_t>> rema;
  int assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    double exact = total * weights[i] / sum;
    counts[i] = static_cast<int>(exact);
    assigned += counts[i];
    rema.push_back({exact - counts[i], i});
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < total - assigned; ++i) counts[rema[i % rema.size()].second] += 1;
  return counts;
}

InstructionSample make_sample(const UnifiedVocabulary& vocab, const TaskSpec& task,
                              const TokenizedCorpus::Item& item, Segment motion_seg) {
  InstructionSample s;
  s.task = task.name;
  auto motion_global = [&](const std::vector<int>& local) {
    std::vector<int> out;
    out.reserve(local.size());
    for (int t : local) out.push_back(vocab.to_global(motion_seg, t));
    return out;
  };
  if (task.input_seg == Segment::Text) {
    s.input = vocab.encode_text(item.caption);
  } else if (task.input_seg == Segment::Grid) {
    if (!item.goal_cell) throw DataError("goal task: sample has no goal cell");
    s.input = {vocab.grid_token_from_cell((*item.goal_cell)[0], (*item.goal_cell)[1])};
  } else {
    s.input = motion_global(item.motion);
  }
  if (task.output_seg == Segment::Text)
    s.output = vocab.encode_text(item.caption);
  else
    s.output = motion_global(item.motion);
  if (task.gait_allowed && item.gait) s.gait = vocab.gait_token(*item.gait);
  return s;
}

}  // namespace

std::vector<InstructionSample> build_training_set(
    const UnifiedVocabulary& vocab, const TaskRegistry& registry,
    const TokenizedCorpus& robot, const TokenizedCorpus& human,
    const TokenizedCorpus& qa, const std::map<std::string, double>& weights,
    int total, uint64_t seed) {
  if (total <= 0) throw ConfigError("build_training_set: total must be positive");
  if (robot.segment != Segment::Robot || human.segment != Segment::Human ||
      qa.segment != Segment::Human)
    throw ConfigError("build_training_set: corpus segments mislabeled");

  std::vector<const TaskSpec*> tasks;
  std::vector<double> w;
  for (const auto& [name, weight] : weights) {
    if (weight < 0) throw ConfigError("negative mixing weight for " + name);
    if (weight == 0) continue;
    tasks.push_back(&registry.by_name(name));
    w.push_back(weight);
  }
  if (tasks.empty()) throw ConfigError("build_training_set: no task has positive weight");
  std::vector<int> counts = apportion(w, total);

  std::vector<InstructionSample> out;
  out.reserve(total);
  for (size_t ti = 0; ti < tasks.size(); ++ti) {
    const TaskSpec& task = *tasks[ti];
    std::vector<const TokenizedCorpus::Item*> pool;
    const TokenizedCorpus& source =
        task.name == "qa" ? qa : (task.input_seg == Segment::Text && task.output_seg == Segment::Human)
                                     ? human
                                     : robot;
    for (const auto& item : source.items)
      if (task.input_seg != Segment::Grid || item.goal_cell) pool.push_back(&item);
    if (pool.empty()) throw DataError("build_training_set: no usable samples for task " + task.name);

    std::vector<size_t> order(pool.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng task_rng = Rng::derive(seed, 0x100 + ti);
    task_rng.shuffle(order);
    Segment motion_seg = task.input_seg == Segment::Human || task.output_seg == Segment::Human
                             ? Segment::Human
                             : Segment::Robot;
    for (int i = 0; i < counts[ti]; ++i)
      out.push_back(make_sample(vocab, task, *pool[order[i % order.size()]], motion_seg));
  }

  std::vector<size_t> order(out.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng mix_rng = Rng::derive(seed, 0xFF);
  mix_rng.shuffle(order);
  std::vector<InstructionSample> mixed;
  mixed.reserve(out.size());
  for (size_t i : order) mixed.push_back(std::move(out[i]));
  return mixed;
}

}  // namespace motionlm
