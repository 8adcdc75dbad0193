#include "motionlm/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "motionlm/checkpoint.hpp"
#include "motionlm/feature.hpp"
#include "motionlm/jsonl.hpp"
#include "motionlm/lm.hpp"
#include "motionlm/metrics.hpp"
#include "motionlm/synth.hpp"
#include "motionlm/trace_export.hpp"
#include "motionlm/vqvae.hpp"

namespace motionlm {

namespace {

std::string default_out_dir() {
  const char* v = std::getenv(kDataDirEnv);
  return v && *v ? std::string(v) : std::string(".");
}

nlohmann::json load_config_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad --config file: ") + e.what());
  }
  if (!j.is_object() || !j.contains("command") || !j.contains("args"))
    throw ConfigError("--config file needs {\"command\": ..., \"args\": {...}}");
  return j;
}

// Inserts the config's command/args in front of the explicit arguments;
// explicitly passed flags win because they are merged only when absent.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string config_path;
  std::vector<std::string> rest;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;

  nlohmann::json j = load_config_file(config_path);
  std::vector<std::string> merged;
  std::string command = j.at("command").get<std::string>();
  if (rest.empty() || rest[0].rfind("--", 0) == 0) {
    merged.push_back(command);
  } else {
    if (rest[0] != command)
      throw ConfigError("--config is for command '" + command + "', not '" + rest[0] + "'");
    merged.push_back(rest[0]);
    rest.erase(rest.begin());
  }
  for (const auto& [key, value] : j.at("args").items()) {
    std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : rest)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (given) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) merged.push_back(flag);
    } else {
      merged.push_back(flag);
      merged.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  merged.insert(merged.end(), rest.begin(), rest.end());
  return merged;
}

void write_run_config(const std::string& path, const std::string& command,
                      const nlohmann::json& args, const std::vector<std::string>& inputs) {
  nlohmann::json j{{"command", command}, {"args", args}};
  nlohmann::json h = nlohmann::json::object();
  for (const auto& p : inputs) h[p] = fnv1a64_file_hex(p);
  j["inputs"] = h;
  atomic_write_text(path, j.dump(2) + "\n");
}

void write_loss_csv(const std::string& path, const std::vector<double>& curve, int stride) {
  std::ostringstream csv;
  csv << "step,loss\n";
  csv.precision(9);
  for (size_t i = 0; i < curve.size(); ++i) csv << i * stride << ',' << curve[i] << '\n';
  atomic_write_text(path, csv.str());
}

std::map<std::string, double> parse_weights(const std::string& spec) {
  std::map<std::string, double> out;
  std::istringstream in(spec);
  std::string part;
  while (std::getline(in, part, ',')) {
    auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("weights must look like task=value,...");
    out[part.substr(0, eq)] = std::stod(part.substr(eq + 1));
  }
  if (out.empty()) throw ConfigError("empty --weights");
  return out;
}

std::optional<Gait> parse_gait(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return gait_from_name(s);
}

GenerationConfig make_gen(double temperature, int top_k, int max_new, bool greedy,
                          uint64_t seed) {
  GenerationConfig gen;
  gen.temperature = temperature;
  gen.top_k = top_k;
  gen.max_new_tokens = max_new;
  gen.greedy = greedy;
  gen.seed = seed;
  gen.validate();
  return gen;
}

// ---------------------------------------------------------------- synth-data

struct SynthOpts {
  std::string embodiment = "robot";
  int n = 1000;
  uint64_t seed = 0;
  double dt = 0.1;
  bool question_captions = false;
  std::string out;
};

int cmd_synth(const SynthOpts& o) {
  SynthConfig sc;
  sc.n_samples = o.n;
  sc.seed = o.seed;
  sc.dt = o.dt;
  sc.question_captions = o.question_captions;
  sc.validate();
  std::vector<CaptionedTrajectory> corpus;
  if (o.embodiment == "robot") {
    if (o.question_captions) throw ConfigError("question captions are a human-corpus option");
    corpus = generate_robot_corpus(sc);
  } else if (o.embodiment == "human") {
    corpus = generate_human_corpus(sc);
  } else {
    throw ConfigError("embodiment must be robot or human");
  }
  std::string dir = o.out.empty() ? default_out_dir() : o.out;
  std::string tag = o.question_captions ? "qa" : o.embodiment;
  std::string prefix = dir + "/" + tag + "_";
  write_corpus_jsonl(prefix + "corpus.jsonl", corpus);
  write_stats_sidecar(prefix + "stats.json", corpus);
  write_run_config(prefix + "run_config.json", "synth-data",
                   {{"embodiment", o.embodiment},
                    {"n", o.n},
                    {"seed", o.seed},
                    {"dt", o.dt},
                    {"question-captions", o.question_captions},
                    {"out", dir}},
                   {});
  std::cout << "wrote " << corpus.size() << " samples to " << prefix << "corpus.jsonl\n";
  return 0;
}

// ----------------------------------------------------------- train-tokenizer

struct TokOpts {
  std::string corpus;
  std::string out;
  std::string name;  // checkpoint stem; default = embodiment
  int codebook = 0;  // 0 = per-embodiment default
  int dim = 64;
  int hidden = 128;
  int steps = 3000;
  int batch = 32;
  double lr = 5e-4;
  uint64_t seed = 0;
  double heldout_fraction = 0.1;
};

int cmd_train_tokenizer(const TokOpts& o) {
  auto corpus = read_corpus_jsonl(o.corpus);
  if (corpus.empty()) throw DataError("empty corpus: " + o.corpus);
  EmbodimentSpec emb = corpus[0].trajectory.embodiment;

  VqConfig vc;
  vc.N = o.codebook > 0 ? o.codebook : (emb.kind == EmbodimentKind::Human ? 512 : 128);
  vc.d = o.dim;
  vc.hidden = o.hidden;
  vc.seed = o.seed;
  vc.validate();

  int n_held = std::max(1, static_cast<int>(o.heldout_fraction * corpus.size()));
  if (n_held >= static_cast<int>(corpus.size()))
    throw DataError("corpus too small for the held-out split");
  std::vector<CaptionedTrajectory> train(corpus.begin(), corpus.end() - n_held);
  std::vector<CaptionedTrajectory> held(corpus.end() - n_held, corpus.end());

  nn::OptimConfig oc;
  oc.steps = o.steps;
  oc.batch_size = o.batch;
  oc.lr = o.lr;
  oc.seed = o.seed;

  VqVae vq(emb, vc);
  VqTrainStats stats = train_vqvae(vq, train, held, oc);

  std::string dir = o.out.empty() ? default_out_dir() : o.out;
  std::string stem = o.name.empty() ? emb.name() : o.name;
  std::string base = dir + "/" + stem + "_vq";
  vq.save(base);
  write_loss_csv(base + "_loss.csv", stats.loss_curve, oc.log_every);
  write_run_config(base + "_run_config.json", "train-tokenizer",
                   {{"corpus", o.corpus},
                    {"out", dir},
                    {"name", stem},
                    {"codebook", vc.N},
                    {"dim", o.dim},
                    {"hidden", o.hidden},
                    {"steps", o.steps},
                    {"batch", o.batch},
                    {"lr", o.lr},
                    {"seed", o.seed},
                    {"heldout-fraction", o.heldout_fraction}},
                   {o.corpus});
  std::cout << "saved " << base << " | held-out recon " << stats.final_heldout.reconstruction
            << " | utilization " << stats.heldout_utilization << "\n";
  return 0;
}

// ----------------------------------------------------------------- train-lm

struct TrainLmOpts {
  std::string robot_corpus, human_corpus, qa_corpus;
  std::string robot_vq, human_vq;
  std::string out;
  std::string weights;
  int samples = 20000;
  int d_model = 256, layers = 4, heads = 4, context = 320;
  bool response_only = false;
  int steps = 3000;
  int batch = 32;
  int grad_accum = 1;
  double lr = 5e-4;
  uint64_t seed = 0;
};

int cmd_train_lm(const TrainLmOpts& o) {
  if (o.robot_corpus.empty() || o.robot_vq.empty())
    throw ConfigError("train-lm needs --robot-corpus and --robot-vq");

  ModelBundle bundle;
  bundle.registry = TaskRegistry::standard();
  bundle.robot_vq = VqVae::load(o.robot_vq);
  if (!o.human_vq.empty()) {
    bundle.human_vq = VqVae::load(o.human_vq);
  } else {
    // untrained stand-in keeps the bundle layout; human tasks need a real one
    VqConfig hv;
    hv.N = 512;
    hv.seed = o.seed;
    bundle.human_vq = VqVae(EmbodimentSpec::human(), hv);
  }
  // motion segment sizes follow the tokenizers' codebooks
  VocabConfig vocab_cfg;
  vocab_cfg.robot_size = bundle.robot_vq.config().N;
  vocab_cfg.human_size = bundle.human_vq.config().N;
  bundle.vocab = UnifiedVocabulary::build(vocab_cfg);

  auto rcorpus = read_corpus_jsonl(o.robot_corpus);
  // goal labels follow the tokenized motion so goal supervision is consistent
  // with what the emitted tokens reach
  TokenizedCorpus rtc =
      tokenize_corpus(bundle.robot_vq, rcorpus, Segment::Robot, &bundle.vocab.grid());
  TokenizedCorpus htc, qtc;
  htc.segment = Segment::Human;
  qtc.segment = Segment::Human;
  if (!o.human_corpus.empty())
    htc = tokenize_corpus(bundle.human_vq, read_corpus_jsonl(o.human_corpus), Segment::Human);
  if (!o.qa_corpus.empty())
    qtc = tokenize_corpus(bundle.human_vq, read_corpus_jsonl(o.qa_corpus), Segment::Human);

  std::map<std::string, double> weights;
  if (!o.weights.empty()) {
    weights = parse_weights(o.weights);
  } else {
    weights["t2rm"] = 1;
    weights["caption"] = 1;
    weights["goal"] = 1;
    if (!o.human_corpus.empty()) weights["t2hm"] = 1;
    if (!o.qa_corpus.empty()) weights["qa"] = 0.5;
  }

  auto samples =
      build_training_set(bundle.vocab, bundle.registry, rtc, htc, qtc, weights, o.samples,
                         o.seed);
  std::vector<std::vector<int>> seqs;
  std::vector<int> response_from;
  seqs.reserve(samples.size());
  for (const auto& s : samples) {
    seqs.push_back(render(bundle.vocab, bundle.registry, s));
    if (o.response_only)
      response_from.push_back(response_start(bundle.vocab, bundle.registry, seqs.back()));
  }

  LmConfig lc;
  lc.vocab_size = bundle.vocab.size();
  lc.d_model = o.d_model;
  lc.layers = o.layers;
  lc.heads = o.heads;
  lc.context = o.context;
  lc.response_only = o.response_only;
  lc.seed = o.seed;
  bundle.lm = LanguageModel(lc);

  nn::OptimConfig oc;
  oc.steps = o.steps;
  oc.batch_size = o.batch;
  oc.grad_accum = o.grad_accum;
  oc.lr = o.lr;
  oc.seed = o.seed;
  LmTrainStats stats = train_lm(bundle.lm, seqs, response_from, oc);

  std::string dir = o.out.empty() ? default_out_dir() + "/bundle" : o.out;
  bundle.save(dir);
  write_loss_csv(dir + "/lm_loss.csv", stats.loss_curve, 1);
  std::vector<std::string> inputs = {o.robot_corpus};
  if (!o.human_corpus.empty()) inputs.push_back(o.human_corpus);
  if (!o.qa_corpus.empty()) inputs.push_back(o.qa_corpus);
  write_run_config(dir + "/run_config.json", "train-lm",
                   {{"robot-corpus", o.robot_corpus},
                    {"human-corpus", o.human_corpus},
                    {"qa-corpus", o.qa_corpus},
                    {"robot-vq", o.robot_vq},
                    {"human-vq", o.human_vq},
                    {"out", dir},
                    {"samples", o.samples},
                    {"d-model", o.d_model},
                    {"layers", o.layers},
                    {"heads", o.heads},
                    {"context", o.context},
                    {"response-only", o.response_only},
                    {"steps", o.steps},
                    {"batch", o.batch},
                    {"grad-accum", o.grad_accum},
                    {"lr", o.lr},
                    {"seed", o.seed}},
                   inputs);
  std::cout << "saved bundle to " << dir << " | initial loss " << stats.initial_loss
            << " | final loss " << stats.final_loss << "\n";
  return 0;
}

// ----------------------------------------------------------------- generate

struct GenerateOpts {
  std::string model;
  std::string task = "t2rm";
  std::string text;
  std::string goal;  // "row,col"
  std::string gait;
  std::string input_motion;
  double temperature = 1.0;
  int top_k = 40;
  int max_new = 96;
  bool greedy = false;
  uint64_t seed = 0;
  std::string out;
};

int cmd_generate(const GenerateOpts& o) {
  if (o.model.empty()) throw ConfigError("generate needs --model");
  ModelBundle bundle = ModelBundle::load(o.model);
  const TaskSpec& task = bundle.registry.by_name(o.task);
  GenerationConfig gen = make_gen(o.temperature, o.top_k, o.max_new, o.greedy, o.seed);
  std::string prefix = o.out.empty() ? default_out_dir() + "/generated" : o.out;

  if (task.output_seg == Segment::Text) {
    if (o.input_motion.empty()) throw ConfigError("caption task needs --input-motion");
    auto corpus = read_corpus_jsonl(o.input_motion);
    if (corpus.empty()) throw DataError("empty motion file: " + o.input_motion);
    std::string caption = motion_to_text(bundle, corpus[0].trajectory, gen);
    atomic_write_text(prefix + "_caption.txt", caption + "\n");
    write_run_config(prefix + "_run_config.json", "generate",
                     {{"model", o.model},
                      {"task", o.task},
                      {"input-motion", o.input_motion},
                      {"temperature", o.temperature},
                      {"top-k", o.top_k},
                      {"max-new", o.max_new},
                      {"greedy", o.greedy},
                      {"seed", o.seed},
                      {"out", prefix}},
                     {o.input_motion});
    std::cout << "caption: " << caption << "\n";
    return 0;
  }

  CaptionedTrajectory result;
  if (o.task == "goal") {
    if (o.goal.empty()) throw ConfigError("goal task needs --goal row,col");
    auto comma = o.goal.find(',');
    if (comma == std::string::npos) throw ConfigError("--goal must be row,col");
    int row = std::stoi(o.goal.substr(0, comma));
    int col = std::stoi(o.goal.substr(comma + 1));
    result.trajectory = goal_to_motion(bundle, row, col, parse_gait(o.gait), gen);
    result.caption = "goal " + o.goal;
    result.goal_cell = {{row, col}};
  } else {
    if (o.text.empty()) throw ConfigError(o.task + " needs --text");
    result.trajectory = text_to_motion(bundle, o.text, parse_gait(o.gait), gen, o.task);
    result.caption = o.text;
  }
  if (!o.gait.empty()) result.gait = gait_from_name(o.gait);

  write_corpus_jsonl(prefix + "_motion.jsonl", {result});
  write_run_config(prefix + "_run_config.json", "generate",
                   {{"model", o.model},
                    {"task", o.task},
                    {"text", o.text},
                    {"goal", o.goal},
                    {"gait", o.gait},
                    {"temperature", o.temperature},
                    {"top-k", o.top_k},
                    {"max-new", o.max_new},
                    {"greedy", o.greedy},
                    {"seed", o.seed},
                    {"out", prefix}},
                   {});
  std::cout << "wrote " << result.trajectory.len() << "-step "
            << result.trajectory.embodiment.name() << " trajectory to " << prefix
            << "_motion.jsonl\n";
  return 0;
}

// ----------------------------------------------------------------- evaluate

struct EvaluateOpts {
  std::string model;
  std::string corpus;
  std::string suite = "t2rm";
  int n = 128;
  int n_per_goal = 40;
  int goals = 25;
  int mmod_prompts = 5;
  int fx_steps = 300;
  double temperature = 1.0;
  int top_k = 40;
  uint64_t seed = 0;
  std::string out;
};

FeatureExtractor train_eval_extractor(const std::vector<CaptionedTrajectory>& corpus,
                                      int steps, uint64_t seed) {
  FeatureConfig fc;
  fc.seed = seed;
  FeatureExtractor fx(corpus[0].trajectory.embodiment, fc);
  nn::OptimConfig oc;
  oc.steps = steps;
  oc.batch_size = 32;
  oc.lr = 1e-3;
  oc.seed = seed;
  train_feature_extractor(fx, corpus, oc, 0.1);
  return fx;
}

int cmd_evaluate(const EvaluateOpts& o) {
  if (o.model.empty() || o.corpus.empty())
    throw ConfigError("evaluate needs --model and --corpus");
  ModelBundle bundle = ModelBundle::load(o.model);
  auto corpus = read_corpus_jsonl(o.corpus);
  if (corpus.empty()) throw DataError("empty corpus: " + o.corpus);
  if (corpus[0].trajectory.embodiment.kind != EmbodimentKind::Robot)
    throw DataError("evaluation suites expect a robot corpus");

  Rng rng = Rng::derive(o.seed, 0xe7a1);
  std::vector<int> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  int n = std::min<int>(o.n, static_cast<int>(corpus.size()));

  GenerationConfig gen = make_gen(o.temperature, o.top_k, 96, false, o.seed);
  std::vector<MetricReport> reports;
  int failures = 0;

  if (o.suite == "t2rm") {
    FeatureExtractor fx = train_eval_extractor(corpus, o.fx_steps, o.seed);
    FeatureSet real, generated, text_feats;
    for (int i = 0; i < n; ++i) {
      const auto& sample = corpus[order[i]];
      real.push_back(fx.motion_feature(sample.trajectory));
      GenerationConfig g = gen;
      g.seed = splitmix64(o.seed ^ (0x1000 + i));
      try {
        Trajectory t = text_to_motion(bundle, sample.caption, sample.gait, g);
        generated.push_back(fx.motion_feature(t));
        text_feats.push_back(fx.text_feature(sample.caption));
      } catch (const DataError&) {
        ++failures;
      }
    }
    if (generated.size() < static_cast<size_t>(std::max(32, n / 2)))
      throw DataError("too many generation failures in the t2rm suite");
    reports.push_back(fid(real, generated, 1e-6, 200, o.seed));
    reports.push_back(
        diversity(generated, std::min<int>(100, static_cast<int>(generated.size()) / 2),
                  o.seed));
    RetrievalReport rp = r_precision(generated, text_feats, 32, o.seed, 1000);
    reports.push_back(rp.top1);
    reports.push_back(rp.top2);
    reports.push_back(rp.top3);
    reports.push_back(rp.mmdist);
    // multimodality: repeated sampling for a few prompts
    std::vector<FeatureSet> per_prompt;
    for (int p = 0; p < std::min<int>(o.mmod_prompts, n); ++p) {
      FeatureSet set;
      for (int r = 0; r < 20; ++r) {
        GenerationConfig g = gen;
        g.seed = splitmix64(o.seed ^ (0x9000 + p * 64 + r));
        try {
          set.push_back(
              fx.motion_feature(text_to_motion(bundle, corpus[order[p]].caption,
                                               corpus[order[p]].gait, g)));
        } catch (const DataError&) {
        }
      }
      if (set.size() % 2 == 1) set.pop_back();
      if (set.size() >= 2) per_prompt.push_back(std::move(set));
    }
    if (!per_prompt.empty()) reports.push_back(multimodality(per_prompt));
  } else if (o.suite == "caption") {
    std::vector<std::string> cands, refs;
    for (int i = 0; i < n; ++i) {
      const auto& sample = corpus[order[i]];
      GenerationConfig g = gen;
      g.seed = splitmix64(o.seed ^ (0x2000 + i));
      try {
        cands.push_back(motion_to_text(bundle, sample.trajectory, g));
        refs.push_back(sample.caption);
      } catch (const DataError&) {
        ++failures;
      }
    }
    if (cands.empty()) throw DataError("all caption generations failed");
    reports.push_back(bleu(cands, refs, 1, 500, o.seed));
    reports.push_back(bleu(cands, refs, 4, 500, o.seed));
    reports.push_back(rouge_l(cands, refs, 500, o.seed));
  } else if (o.suite == "goal") {
    GridSpec grid;
    std::vector<std::array<int, 2>> cells;
    for (int i : order) {
      if (!corpus[i].goal_cell) continue;
      auto c = *corpus[i].goal_cell;
      if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
      if (static_cast<int>(cells.size()) >= o.goals) break;
    }
    if (cells.empty()) throw DataError("corpus has no goal cells");
    FeatureExtractor fx = train_eval_extractor(corpus, o.fx_steps, o.seed);
    std::vector<GoalRollouts> rollouts;
    FeatureSet all_feats;
    std::vector<FeatureSet> per_goal_feats;
    for (size_t ci = 0; ci < cells.size(); ++ci) {
      GoalRollouts roll;
      roll.row = cells[ci][0];
      roll.col = cells[ci][1];
      FeatureSet feats;
      for (int r = 0; r < o.n_per_goal; ++r) {
        GenerationConfig g = gen;
        g.seed = splitmix64(o.seed ^ (0x3000 + ci * 1024 + r));
        try {
          Trajectory t = goal_to_motion(bundle, roll.row, roll.col, std::nullopt, g);
          auto path = integrate_se2(t);
          roll.terminal_xz.push_back({path.back().x, path.back().z});
          Eigen::VectorXf f = fx.motion_feature(t);
          feats.push_back(f);
          all_feats.push_back(f);
        } catch (const DataError&) {
          ++failures;
          roll.terminal_xz.push_back({1e9, 1e9});  // counted as a miss
        }
      }
      rollouts.push_back(std::move(roll));
      if (feats.size() % 2 == 1) feats.pop_back();
      if (feats.size() >= 2) per_goal_feats.push_back(std::move(feats));
    }
    reports.push_back(success_rate(rollouts, grid, 500, o.seed));
    if (all_feats.size() >= 4)
      reports.push_back(
          diversity(all_feats, std::min<int>(100, static_cast<int>(all_feats.size()) / 2),
                    o.seed));
    if (!per_goal_feats.empty()) reports.push_back(multimodality(per_goal_feats));
  } else {
    throw ConfigError("suite must be t2rm, caption, or goal");
  }

  for (auto& rep : reports) rep.config["generation_failures"] = failures;
  std::string prefix = o.out.empty() ? default_out_dir() + "/eval_" + o.suite : o.out;
  write_metric_reports(reports, prefix + "_metrics.json", prefix + "_metrics.csv");
  write_run_config(prefix + "_run_config.json", "evaluate",
                   {{"model", o.model},
                    {"corpus", o.corpus},
                    {"suite", o.suite},
                    {"n", o.n},
                    {"n-per-goal", o.n_per_goal},
                    {"goals", o.goals},
                    {"mmod-prompts", o.mmod_prompts},
                    {"fx-steps", o.fx_steps},
                    {"temperature", o.temperature},
                    {"top-k", o.top_k},
                    {"seed", o.seed},
                    {"out", prefix}},
                   {o.corpus});
  for (const auto& rep : reports)
    std::cout << rep.name << ": " << rep.value << " +/- " << rep.ci_half << "\n";
  return 0;
}

// ------------------------------------------------------------- export-traces

struct ExportOpts {
  std::string input;
  std::string out;
  double extent = 0;
  int limit = 16;
};

int cmd_export_traces(const ExportOpts& o) {
  if (o.input.empty()) throw ConfigError("export-traces needs --input");
  auto corpus = read_corpus_jsonl(o.input);
  std::vector<Trajectory> trajs;
  for (const auto& s : corpus) {
    if (s.trajectory.embodiment.kind != EmbodimentKind::Robot) continue;
    trajs.push_back(s.trajectory);
    if (static_cast<int>(trajs.size()) >= o.limit) break;
  }
  if (trajs.empty()) throw DataError("no robot trajectories in " + o.input);
  std::string prefix = o.out.empty() ? default_out_dir() + "/traces" : o.out;
  write_traces_csv(prefix + ".csv", trajs);
  write_traces_svg(prefix + ".svg", trajs, o.extent);
  write_run_config(prefix + "_run_config.json", "export-traces",
                   {{"input", o.input}, {"out", prefix}, {"extent", o.extent},
                    {"limit", o.limit}},
                   {o.input});
  std::cout << "wrote " << trajs.size() << " traces to " << prefix << ".{csv,svg}\n";
  return 0;
}

}  // namespace

std::string fnv1a64_file_hex(const std::string& path) {
  std::string content = read_text_file(path);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : content) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

int run_cli(const std::vector<std::string>& raw_args) {
  try {
    std::vector<std::string> args = merge_config(raw_args);

    CLI::App app{"desk-scale multi-embodiment motion language modeling"};
    app.require_subcommand(1);
    int exit_code = 0;

    SynthOpts so;
    auto* synth = app.add_subcommand("synth-data", "generate a synthetic motion corpus");
    synth->add_option("--embodiment", so.embodiment, "robot | human");
    synth->add_option("--n", so.n, "number of samples");
    synth->add_option("--seed", so.seed);
    synth->add_option("--dt", so.dt);
    synth->add_flag("--question-captions", so.question_captions,
                    "QA phrasing (human corpora)");
    synth->add_option("--out", so.out, "output directory");
    synth->callback([&] { exit_code = cmd_synth(so); });

    TokOpts to;
    auto* tok = app.add_subcommand("train-tokenizer", "train a VQ-VAE motion tokenizer");
    tok->add_option("--corpus", to.corpus)->required();
    tok->add_option("--out", to.out);
    tok->add_option("--name", to.name, "checkpoint stem (default: embodiment)");
    tok->add_option("--codebook", to.codebook, "codebook size (default 128 robot / 512 human)");
    tok->add_option("--dim", to.dim);
    tok->add_option("--hidden", to.hidden);
    tok->add_option("--steps", to.steps);
    tok->add_option("--batch", to.batch);
    tok->add_option("--lr", to.lr);
    tok->add_option("--seed", to.seed);
    tok->add_option("--heldout-fraction", to.heldout_fraction);
    tok->callback([&] { exit_code = cmd_train_tokenizer(to); });

    TrainLmOpts lo;
    auto* tlm = app.add_subcommand("train-lm", "train the instruction-following LM");
    tlm->add_option("--robot-corpus", lo.robot_corpus);
    tlm->add_option("--human-corpus", lo.human_corpus);
    tlm->add_option("--qa-corpus", lo.qa_corpus);
    tlm->add_option("--robot-vq", lo.robot_vq);
    tlm->add_option("--human-vq", lo.human_vq);
    tlm->add_option("--out", lo.out);
    tlm->add_option("--weights", lo.weights, "task=weight,... (default: available tasks)");
    tlm->add_option("--samples", lo.samples);
    tlm->add_option("--d-model", lo.d_model);
    tlm->add_option("--layers", lo.layers);
    tlm->add_option("--heads", lo.heads);
    tlm->add_option("--context", lo.context);
    tlm->add_flag("--response-only", lo.response_only, "mask loss before the start token");
    tlm->add_option("--steps", lo.steps);
    tlm->add_option("--batch", lo.batch);
    tlm->add_option("--grad-accum", lo.grad_accum);
    tlm->add_option("--lr", lo.lr);
    tlm->add_option("--seed", lo.seed);
    tlm->callback([&] { exit_code = cmd_train_lm(lo); });

    GenerateOpts go;
    auto* gen = app.add_subcommand("generate", "run one task prompt");
    gen->add_option("--model", go.model, "bundle directory");
    gen->add_option("--task", go.task, "t2rm | t2hm | caption | goal | qa");
    gen->add_option("--text", go.text);
    gen->add_option("--goal", go.goal, "row,col");
    gen->add_option("--gait", go.gait, "trot | bound");
    gen->add_option("--input-motion", go.input_motion, "JSONL with the motion to caption");
    gen->add_option("--temperature", go.temperature);
    gen->add_option("--top-k", go.top_k);
    gen->add_option("--max-new", go.max_new);
    gen->add_flag("--greedy", go.greedy);
    gen->add_option("--seed", go.seed);
    gen->add_option("--out", go.out, "output prefix");
    gen->callback([&] { exit_code = cmd_generate(go); });

    EvaluateOpts eo;
    auto* ev = app.add_subcommand("evaluate", "run a metric suite against a corpus");
    ev->add_option("--model", eo.model);
    ev->add_option("--corpus", eo.corpus);
    ev->add_option("--suite", eo.suite, "t2rm | caption | goal");
    ev->add_option("--n", eo.n);
    ev->add_option("--n-per-goal", eo.n_per_goal);
    ev->add_option("--goals", eo.goals);
    ev->add_option("--mmod-prompts", eo.mmod_prompts);
    ev->add_option("--fx-steps", eo.fx_steps);
    ev->add_option("--temperature", eo.temperature);
    ev->add_option("--top-k", eo.top_k);
    ev->add_option("--seed", eo.seed);
    ev->add_option("--out", eo.out, "output prefix");
    ev->callback([&] { exit_code = cmd_evaluate(eo); });

    ExportOpts xo;
    auto* ex = app.add_subcommand("export-traces", "trajectories -> integrated CSV + SVG");
    ex->add_option("--input", xo.input, "trajectory JSONL");
    ex->add_option("--out", xo.out, "output prefix");
    ex->add_option("--extent", xo.extent, "fixed view extent (0 = fit)");
    ex->add_option("--limit", xo.limit, "max trajectories to draw");
    ex->callback([&] { exit_code = cmd_export_traces(xo); });

    std::vector<const char*> cargv = {"motionlm"};
    for (const auto& s : args) cargv.push_back(s.c_str());
    try {
      app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 2;
    }
    return exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace motionlm
