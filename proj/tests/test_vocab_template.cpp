// Unified-vocabulary layout/bijection tests, grid-token fixtures, and the
// Eq. 2 render/parse round-trip across all five tasks, including the
// deterministic multi-task training-set mix.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>

#include "motionlm/instruction.hpp"
#include "motionlm/synth.hpp"
#include "motionlm/vocab.hpp"
#include "motionlm/vqvae.hpp"

using namespace motionlm;

namespace {

UnifiedVocabulary desk_vocab() { return UnifiedVocabulary::build(VocabConfig{}); }

InstructionSample random_sample(const UnifiedVocabulary& vocab, const std::string& task,
                                Rng& rng) {
  InstructionSample s;
  s.task = task;
  auto text_ids = [&](int lo, int hi) {
    std::vector<int> ids(rng.uniform_int(lo, hi));
    for (auto& id : ids)
      id = vocab.to_global(Segment::Text, static_cast<int>(rng.uniform_int(0, 255)));
    return ids;
  };
  auto motion_ids = [&](Segment seg, int lo, int hi) {
    std::vector<int> ids(rng.uniform_int(lo, hi));
    for (auto& id : ids)
      id = vocab.to_global(seg, static_cast<int>(rng.uniform_int(0, vocab.segment_size(seg) - 1)));
    return ids;
  };
  if (task == "t2rm") {
    s.input = text_ids(1, 40);
    s.output = motion_ids(Segment::Robot, 1, 20);
    if (rng.bernoulli(0.5))
      s.gait = vocab.gait_token(rng.bernoulli(0.5) ? Gait::Trot : Gait::Bound);
  } else if (task == "t2hm" || task == "qa") {
    s.input = text_ids(1, 40);
    s.output = motion_ids(Segment::Human, 1, 20);
  } else if (task == "caption") {
    s.input = motion_ids(Segment::Robot, 1, 20);
    s.output = text_ids(1, 40);
  } else {  // goal
    s.input = {vocab.to_global(Segment::Grid, static_cast<int>(rng.uniform_int(0, 783)))};
    s.output = motion_ids(Segment::Robot, 1, 20);
    if (rng.bernoulli(0.5)) s.gait = vocab.gait_token(Gait::Trot);
  }
  return s;
}

}  // namespace

TEST_CASE("desk layout: offsets, sizes, and total 1693") {
  auto vocab = desk_vocab();
  CHECK(vocab.size() == 1693);
  CHECK(vocab.offset(Segment::Text) == 0);
  CHECK(vocab.segment_size(Segment::Text) == 257);
  CHECK(vocab.offset(Segment::Robot) == 257);
  CHECK(vocab.segment_size(Segment::Robot) == 128);
  CHECK(vocab.offset(Segment::Human) == 385);
  CHECK(vocab.segment_size(Segment::Human) == 512);
  CHECK(vocab.offset(Segment::Special) == 897);
  CHECK(vocab.segment_size(Segment::Special) == 10);
  CHECK(vocab.offset(Segment::Grid) == 907);
  CHECK(vocab.segment_size(Segment::Grid) == 784);
  CHECK(vocab.offset(Segment::Gait) == 1691);
  CHECK(vocab.segment_size(Segment::Gait) == 2);
  CHECK(vocab.to_global(Segment::Robot, 0) == 257);
}

TEST_CASE("global-id bijection and segment disjointness, exhaustive") {
  auto vocab = desk_vocab();
  std::set<std::pair<Segment, int>> seen;
  for (int id = 0; id < vocab.size(); ++id) {
    auto [seg, local] = vocab.from_global(id);
    CHECK(vocab.to_global(seg, local) == id);
    CHECK(seen.insert({seg, local}).second);
    // membership in exactly one declared segment range
    int containing = 0;
    for (const auto& info : vocab.segments())
      if (id >= info.offset && id < info.offset + info.size) ++containing;
    CHECK(containing == 1);
  }
  CHECK_THROWS_AS(vocab.from_global(-1), DataError);
  CHECK_THROWS_AS(vocab.from_global(1693), DataError);
  CHECK_THROWS_AS(vocab.to_global(Segment::Gait, 2), DataError);
}

TEST_CASE("paper-scale layout is constructible") {
  VocabConfig cfg;
  cfg.text_size = 50257;
  auto vocab = UnifiedVocabulary::build(cfg);
  CHECK(vocab.offset(Segment::Robot) == 50257);
  CHECK(vocab.size() == 50257 + 128 + 512 + 10 + 784 + 2);
  CHECK(vocab.eot() == 50256);  // GPT-2 end-of-text position
}

TEST_CASE("grid: corner, center, and edge fixtures") {
  auto vocab = desk_vocab();
  const GridSpec& grid = vocab.grid();
  CHECK(grid.cols() == 28);
  CHECK(grid.cells() == 784);

  CHECK(grid.cell_index(-7.0, -7.0) == 0);
  CHECK(grid.cell_index(0.25, 0.25) == 406);
  auto rc = grid.cell_rowcol(0.25, 0.25);
  CHECK(rc[0] == 14);
  CHECK(rc[1] == 14);
  auto center = grid.cell_center(406);
  CHECK(center[0] == doctest::Approx(0.25));
  CHECK(center[1] == doctest::Approx(0.25));
  CHECK(grid.cell_index(7.0, 7.0) == 783);  // max edge clamps inward
  CHECK(grid.cell_index(6.99, -7.0) == 27);
  CHECK_THROWS_AS(grid.cell_index(7.01, 0.0), DataError);
  CHECK_THROWS_AS(grid.cell_index(0.0, -7.01), DataError);
  CHECK_THROWS_AS(grid.cell_center(784), DataError);

  CHECK(vocab.grid_token(0.25, 0.25) == 907 + 406);
  CHECK(vocab.grid_token_from_cell(14, 14) == 907 + 406);
  CHECK(vocab.grid_cell(907 + 406) == std::array<int, 2>{14, 14});
  CHECK_THROWS_AS(vocab.grid_token_from_cell(28, 0), DataError);
  CHECK_THROWS_AS(vocab.grid_center(0), DataError);  // text token

  // center recovery within resolution/2 on both axes
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    double x = rng.uniform() * 14.0 - 7.0;
    double z = rng.uniform() * 14.0 - 7.0;
    auto c = vocab.grid_center(vocab.grid_token(x, z));
    CHECK(std::abs(c[0] - x) <= 0.25 + 1e-12);
    CHECK(std::abs(c[1] - z) <= 0.25 + 1e-12);
  }
}

TEST_CASE("grid validation") {
  GridSpec bad;
  bad.resolution = 0.45;  // 14/0.45 is not integral
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.resolution = -0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  GridSpec coarse{10.0, 2.0};
  CHECK(coarse.cols() == 5);
  CHECK(coarse.cell_index(-5.0, -5.0) == 0);
  CHECK(coarse.cell_index(4.9, 4.9) == 24);
}

TEST_CASE("text: byte-level round-trip and EOT handling") {
  auto vocab = desk_vocab();
  CHECK(vocab.encode_text("").empty());
  CHECK(vocab.encode_text("ab") == std::vector<int>{97, 98});
  CHECK(vocab.eot() == 256);

  std::string caption = "the robot joyfully walks forward then turns left";
  CHECK(vocab.decode_text(vocab.encode_text(caption)) == caption);
  std::string utf8 = "caf\xc3\xa9 \xf0\x9f\xa4\x96";
  CHECK(vocab.decode_text(vocab.encode_text(utf8)) == utf8);

  CHECK_THROWS_AS(vocab.decode_text({vocab.eot()}), DataError);
  CHECK_THROWS_AS(vocab.decode_text({257}), DataError);  // robot token

  SynthConfig cfg;
  cfg.n_samples = 30;
  for (const auto& s : generate_robot_corpus(cfg))
    CHECK(vocab.decode_text(vocab.encode_text(s.caption)) == s.caption);
}

TEST_CASE("special and gait tokens") {
  auto vocab = desk_vocab();
  CHECK(vocab.special("T2RM_START") == 897);
  CHECK(vocab.special("T2RM_END") == 898);
  CHECK(vocab.special("QA_END") == 906);
  CHECK_THROWS_AS(vocab.special("NOPE"), DataError);

  CHECK(vocab.gait_token(Gait::Trot) == 1691);
  CHECK(vocab.gait_token(Gait::Bound) == 1692);
  CHECK(vocab.gait_from_token(1691) == Gait::Trot);
  CHECK(vocab.gait_from_token(1692) == Gait::Bound);
  CHECK_THROWS_AS(vocab.gait_from_token(897), DataError);
}

TEST_CASE("vocab config validation") {
  VocabConfig cfg;
  cfg.text_size = 256;
  CHECK_THROWS_AS(UnifiedVocabulary::build(cfg), ConfigError);
  cfg = VocabConfig{};
  cfg.special_names.push_back("T2RM_START");
  CHECK_THROWS_AS(UnifiedVocabulary::build(cfg), ConfigError);
  cfg = VocabConfig{};
  cfg.gait_names = {"TROT", "TROT"};
  CHECK_THROWS_AS(UnifiedVocabulary::build(cfg), ConfigError);
  cfg = VocabConfig{};
  cfg.robot_size = 0;
  CHECK_THROWS_AS(UnifiedVocabulary::build(cfg), ConfigError);
}

TEST_CASE("vocab manifest round-trip and tamper detection") {
  auto vocab = desk_vocab();
  auto j = vocab.manifest();
  auto back = UnifiedVocabulary::from_manifest(j);
  CHECK(back.size() == vocab.size());
  for (size_t i = 0; i < vocab.segments().size(); ++i) {
    CHECK(back.segments()[i].name == vocab.segments()[i].name);
    CHECK(back.segments()[i].offset == vocab.segments()[i].offset);
    CHECK(back.segments()[i].size == vocab.segments()[i].size);
  }
  CHECK(back.special("QA_START") == vocab.special("QA_START"));

  auto tampered = j;
  tampered["segments"][1]["offset"] = 300;
  CHECK_THROWS_AS(UnifiedVocabulary::from_manifest(tampered), DataError);
  auto missing = j;
  missing.erase("grid");
  CHECK_THROWS_AS(UnifiedVocabulary::from_manifest(missing), DataError);
}

TEST_CASE("task registry: standard five tasks and validation") {
  auto registry = TaskRegistry::standard();
  REQUIRE(registry.tasks().size() == 5);
  CHECK(registry.by_name("t2rm").prefix == "give robot motion: ");
  CHECK(registry.by_name("t2hm").prefix == "give human motion: ");
  CHECK(registry.by_name("caption").prefix == "give text description: ");
  CHECK(registry.by_name("goal").prefix == "reach goal: ");
  CHECK(registry.by_name("qa").prefix == "give human motion: ");  // shared prefix
  CHECK(registry.by_name("qa").start_name == "QA_START");         // own specials
  CHECK(registry.by_name("goal").single_input);
  CHECK(registry.by_name("t2rm").gait_allowed);
  CHECK_FALSE(registry.by_name("t2hm").gait_allowed);
  CHECK_THROWS_AS(registry.by_name("dance"), DataError);

  auto vocab = desk_vocab();
  CHECK(registry.by_start_token(vocab, vocab.special("CAP_START"))->name == "caption");
  CHECK(registry.by_start_token(vocab, vocab.special("CAP_END")) == nullptr);
  CHECK(registry.by_start_token(vocab, 0) == nullptr);

  // gait on a non-robot output is rejected at construction
  CHECK_THROWS_AS(TaskRegistry({{"bad", "p: ", "T2RM_START", "T2RM_END", Segment::Text,
                                 Segment::Human, true, false}}),
                  ConfigError);
  CHECK_THROWS_AS(TaskRegistry({{"a", "p: ", "T2RM_START", "T2RM_END", Segment::Text,
                                 Segment::Robot, false, false},
                                {"a", "q: ", "CAP_START", "CAP_END", Segment::Text,
                                 Segment::Robot, false, false}}),
                  ConfigError);
}

TEST_CASE("task registry manifest round-trip") {
  auto registry = TaskRegistry::standard();
  auto back = TaskRegistry::from_manifest(registry.manifest());
  REQUIRE(back.tasks().size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(back.tasks()[i].name == registry.tasks()[i].name);
    CHECK(back.tasks()[i].prefix == registry.tasks()[i].prefix);
    CHECK(back.tasks()[i].start_name == registry.tasks()[i].start_name);
    CHECK(back.tasks()[i].input_seg == registry.tasks()[i].input_seg);
    CHECK(back.tasks()[i].gait_allowed == registry.tasks()[i].gait_allowed);
  }
}

TEST_CASE("render: Eq. 2 ordering fixture with gait") {
  auto vocab = desk_vocab();
  auto registry = TaskRegistry::standard();
  InstructionSample s;
  s.task = "t2rm";
  s.input = vocab.encode_text("walk forward");
  s.gait = vocab.gait_token(Gait::Trot);
  s.output = {vocab.to_global(Segment::Robot, 3), vocab.to_global(Segment::Robot, 7)};

  auto ids = render(vocab, registry, s);
  auto prefix = vocab.encode_text("give robot motion: ");
  REQUIRE(ids.size() == prefix.size() + 12 + 1 + 1 + 2 + 1);
  for (size_t i = 0; i < prefix.size(); ++i) CHECK(ids[i] == prefix[i]);
  size_t p = prefix.size();
  for (size_t i = 0; i < 12; ++i) CHECK(ids[p + i] == s.input[i]);
  CHECK(ids[p + 12] == vocab.special("T2RM_START"));
  CHECK(ids[p + 13] == vocab.gait_token(Gait::Trot));
  CHECK(ids[p + 14] == vocab.to_global(Segment::Robot, 3));
  CHECK(ids[p + 15] == vocab.to_global(Segment::Robot, 7));
  CHECK(ids.back() == vocab.special("T2RM_END"));

  // exactly one start and one end, start before end
  int starts = 0, ends = 0;
  for (int id : ids) {
    if (id == vocab.special("T2RM_START")) ++starts;
    if (id == vocab.special("T2RM_END")) ++ends;
  }
  CHECK(starts == 1);
  CHECK(ends == 1);
}

TEST_CASE("render: validation errors") {
  auto vocab = desk_vocab();
  auto registry = TaskRegistry::standard();

  InstructionSample s;
  s.task = "caption";
  s.input = {vocab.to_global(Segment::Human, 0)};  // human tokens in a robot slot
  s.output = vocab.encode_text("x");
  CHECK_THROWS_AS(render(vocab, registry, s), DataError);

  s.input = {vocab.to_global(Segment::Robot, 0)};
  s.gait = vocab.gait_token(Gait::Trot);  // caption takes no gait
  CHECK_THROWS_AS(render(vocab, registry, s), DataError);
  s.gait.reset();
  CHECK_NOTHROW(render(vocab, registry, s));

  s.output.clear();  // empty response
  CHECK_THROWS_AS(render(vocab, registry, s), DataError);

  InstructionSample g;
  g.task = "goal";
  g.input = {vocab.to_global(Segment::Grid, 5), vocab.to_global(Segment::Grid, 6)};
  g.output = {vocab.to_global(Segment::Robot, 0)};
  CHECK_THROWS_AS(render(vocab, registry, g), DataError);  // single grid token only
  g.input.resize(1);
  CHECK_NOTHROW(render(vocab, registry, g));
}

TEST_CASE("parse: inverse fixtures and error cases") {
  auto vocab = desk_vocab();
  auto registry = TaskRegistry::standard();

  InstructionSample g;
  g.task = "goal";
  g.input = {vocab.to_global(Segment::Grid, 406)};
  g.output = {vocab.to_global(Segment::Robot, 9)};
  auto ids = render(vocab, registry, g);
  auto back = parse(vocab, registry, ids);
  CHECK(back.task == "goal");
  CHECK(back.input.size() == 1);
  CHECK(back == g);

  auto no_end = ids;
  no_end.pop_back();
  CHECK_THROWS_WITH_AS(parse(vocab, registry, no_end), "parse: unterminated response",
                       DataError);
  auto trailing = ids;
  trailing.push_back(vocab.to_global(Segment::Robot, 1));
  CHECK_THROWS_AS(parse(vocab, registry, trailing), DataError);
  auto dup_start = ids;
  dup_start.push_back(vocab.special("GOAL_START"));
  CHECK_THROWS_AS(parse(vocab, registry, dup_start), DataError);
  CHECK_THROWS_AS(parse(vocab, registry, vocab.encode_text("no start here")), DataError);

  // prefix must match the task owning the start token
  InstructionSample wrong = g;
  auto bad_ids = vocab.encode_text("reach gool: ");
  bad_ids.push_back(g.input[0]);
  bad_ids.push_back(vocab.special("GOAL_START"));
  bad_ids.push_back(g.output[0]);
  bad_ids.push_back(vocab.special("GOAL_END"));
  CHECK_THROWS_AS(parse(vocab, registry, bad_ids), DataError);
  (void)wrong;

  // gait token in a gait-free task is rejected
  InstructionSample c;
  c.task = "caption";
  c.input = {vocab.to_global(Segment::Robot, 2)};
  c.output = vocab.encode_text("y");
  auto cap_ids = render(vocab, registry, c);
  auto with_gait = cap_ids;
  with_gait.insert(with_gait.begin() + (cap_ids.size() - 2), vocab.gait_token(Gait::Trot));
  CHECK_THROWS_AS(parse(vocab, registry, with_gait), DataError);
}

TEST_CASE("round-trip: parse(render(s)) == s for 1000 samples over five tasks") {
  auto vocab = desk_vocab();
  auto registry = TaskRegistry::standard();
  const std::string tasks[5] = {"t2rm", "t2hm", "caption", "goal", "qa"};
  Rng rng(77);
  int ok = 0;
  for (int i = 0; i < 1000; ++i) {
    auto s = random_sample(vocab, tasks[i % 5], rng);
    if (parse(vocab, registry, render(vocab, registry, s)) == s) ++ok;
  }
  CHECK(ok == 1000);
}

TEST_CASE("tokenize_corpus goal re-labeling follows the decoded tokens") {
  SynthConfig rc;
  rc.seed = 21;
  rc.n_samples = 30;
  auto corpus = generate_robot_corpus(rc);
  VqConfig vc;
  vc.N = 32;
  vc.d = 16;
  vc.hidden = 32;
  VqVae vq(EmbodimentSpec::robot(), vc);
  GridSpec grid;

  auto tok = tokenize_corpus(vq, corpus, Segment::Robot, &grid);
  REQUIRE(tok.items.size() == corpus.size());
  for (size_t i = 0; i < tok.items.size(); ++i) {
    // independent re-derivation via the corpus-side labeler
    Trajectory dec = vq.decode(tok.items[i].motion, corpus[i].trajectory.dt,
                               corpus[i].trajectory.len());
    auto expect = goal_cell_for(dec, grid.extent, grid.resolution);
    CHECK(tok.items[i].goal_cell == expect);
  }
  // pass-through without a grid
  auto plain = tokenize_corpus(vq, corpus, Segment::Robot);
  for (size_t i = 0; i < plain.items.size(); ++i)
    CHECK(plain.items[i].goal_cell == corpus[i].goal_cell);
  // re-labeling is a robot-corpus feature
  SynthConfig hcfg = rc;
  hcfg.n_samples = 4;
  auto human_corpus = generate_human_corpus(hcfg);
  VqConfig hc = vc;
  VqVae hvq(EmbodimentSpec::human(5), hc);
  CHECK_THROWS_AS(tokenize_corpus(hvq, human_corpus, Segment::Human, &grid), ConfigError);
}

TEST_CASE("build_training_set: mixing, determinism, and errors") {
  auto vocab = desk_vocab();
  auto registry = TaskRegistry::standard();

  SynthConfig rc;
  rc.seed = 11;
  rc.n_samples = 40;
  auto robot_corpus = generate_robot_corpus(rc);
  SynthConfig hc = rc;
  hc.seed = 12;
  hc.n_samples = 30;
  auto human_corpus = generate_human_corpus(hc);
  SynthConfig qc = hc;
  qc.seed = 13;
  qc.n_samples = 20;
  qc.question_captions = true;
  auto qa_corpus = generate_human_corpus(qc);

  VqConfig vq;
  vq.N = 32;
  vq.d = 16;
  vq.hidden = 32;
  auto robot_vq = VqVae(EmbodimentSpec::robot(), vq);
  VqConfig vqh = vq;
  vqh.N = 48;
  auto human_vq = VqVae(EmbodimentSpec::human(5), vqh);

  auto robot_tok = tokenize_corpus(robot_vq, robot_corpus, Segment::Robot);
  auto human_tok = tokenize_corpus(human_vq, human_corpus, Segment::Human);
  auto qa_tok = tokenize_corpus(human_vq, qa_corpus, Segment::Human);
  CHECK(robot_tok.items.size() == 40);
  CHECK(robot_tok.items[0].motion == robot_vq.encode(robot_corpus[0].trajectory));
  CHECK_THROWS_AS(tokenize_corpus(robot_vq, human_corpus, Segment::Human), ConfigError);

  // single-task weights
  auto only = build_training_set(vocab, registry, robot_tok, human_tok, qa_tok,
                                 {{"t2rm", 1.0}}, 50, 3);
  CHECK(only.size() == 50);
  for (const auto& s : only) CHECK(s.task == "t2rm");

  // 50/50 split lands exactly on halves via largest remainder
  auto half = build_training_set(vocab, registry, robot_tok, human_tok, qa_tok,
                                 {{"t2rm", 0.5}, {"caption", 0.5}}, 10000, 3);
  std::map<std::string, int> by_task;
  for (const auto& s : half) by_task[s.task] += 1;
  CHECK(by_task["t2rm"] == 5000);
  CHECK(by_task["caption"] == 5000);

  // all five tasks; every sample round-trips and respects its task's segments
  std::map<std::string, double> weights = {
      {"t2rm", 0.3}, {"t2hm", 0.2}, {"caption", 0.2}, {"goal", 0.2}, {"qa", 0.1}};
  auto mix = build_training_set(vocab, registry, robot_tok, human_tok, qa_tok, weights, 500, 7);
  CHECK(mix.size() == 500);
  std::map<std::string, int> counts;
  for (const auto& s : mix) {
    counts[s.task] += 1;
    CHECK(parse(vocab, registry, render(vocab, registry, s)) == s);
  }
  CHECK(counts["t2rm"] == 150);
  CHECK(counts["t2hm"] == 100);
  CHECK(counts["caption"] == 100);
  CHECK(counts["goal"] == 100);
  CHECK(counts["qa"] == 50);

  // same seed, same stream; different seed, different order
  auto mix2 = build_training_set(vocab, registry, robot_tok, human_tok, qa_tok, weights, 500, 7);
  CHECK(mix == mix2);
  auto mix3 = build_training_set(vocab, registry, robot_tok, human_tok, qa_tok, weights, 500, 8);
  CHECK(mix != mix3);

  // goal task with no goal-labeled samples is an error
  TokenizedCorpus no_goals = robot_tok;
  for (auto& item : no_goals.items) item.goal_cell.reset();
  CHECK_THROWS_AS(build_training_set(vocab, registry, no_goals, human_tok, qa_tok,
                                     {{"goal", 1.0}}, 10, 3),
                  DataError);
  CHECK_THROWS_AS(build_training_set(vocab, registry, robot_tok, human_tok, qa_tok,
                                     {{"t2rm", -0.5}}, 10, 3),
                  ConfigError);
  CHECK_THROWS_AS(build_training_set(vocab, registry, robot_tok, human_tok, qa_tok, {}, 10, 3),
                  ConfigError);
}

TEST_CASE("qa samples carry question captions into the shared prefix template") {
  auto vocab = desk_vocab();
  auto registry = TaskRegistry::standard();

  SynthConfig qc;
  qc.seed = 21;
  qc.n_samples = 10;
  qc.question_captions = true;
  auto qa_corpus = generate_human_corpus(qc);
  VqConfig vq;
  vq.N = 16;
  vq.d = 8;
  vq.hidden = 16;
  auto human_vq = VqVae(EmbodimentSpec::human(5), vq);
  auto qa_tok = tokenize_corpus(human_vq, qa_corpus, Segment::Human);

  TokenizedCorpus empty_human;
  empty_human.segment = Segment::Human;
  auto set = build_training_set(vocab, registry, TokenizedCorpus{}, empty_human, qa_tok,
                                {{"qa", 1.0}}, 20, 5);
  for (const auto& s : set) {
    CHECK(s.task == "qa");
    std::string question = vocab.decode_text(s.input);
    CHECK(question.find("what does") == 0);
    auto ids = render(vocab, registry, s);
    // rendered stream begins with the shared t2hm prefix but ends with QA specials
    auto prefix = vocab.encode_text("give human motion: ");
    for (size_t i = 0; i < prefix.size(); ++i) CHECK(ids[i] == prefix[i]);
    CHECK(ids.back() == vocab.special("QA_END"));
  }
}
