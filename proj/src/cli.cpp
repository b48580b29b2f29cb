#include "autophoto/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "autophoto/baselines.hpp"
#include "autophoto/harness.hpp"
#include "autophoto/policy.hpp"

namespace autophoto::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Merged run configuration. A --config file may override any subset; all
// other values stay at module defaults. Unknown keys are rejected.
struct RunConfig {
  scene::GenParams gen;
  aes::TrainScorerConfig scorer_train;
  pomdp::EpisodeConfig episode;
  policy::PPOConfig ppo;
  policy::PolicyOptions options;
  baselines::ImitationTrainConfig imitation;

  json to_json() const;
  void merge(const json& j);
};

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void check_keys(const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return k == a; }) == allowed.end())
      throw ConfigError(std::string("unknown config key '") + k + "' in " + section);
  }
}

json RunConfig::to_json() const {
  json j;
  j["scene_gen"] = {{"width", gen.width},
                    {"height", gen.height},
                    {"rooms", gen.rooms},
                    {"hotspots", gen.hotspots},
                    {"salient_objects", gen.salient_objects}};
  j["scorer_train"] = {{"iters", scorer_train.iters},
                       {"batch_size", scorer_train.batch_size},
                       {"lr", scorer_train.lr},
                       {"ambiguous_gap", scorer_train.ambiguous_gap}};
  const auto& r = scorer_train.robustness;
  j["robustness"] = {{"lambda", r.lambda},
                     {"lambda_sim", r.lambda_sim},
                     {"lambda_expo", r.lambda_expo},
                     {"over_exposure", r.over_exposure},
                     {"under_exposure", r.under_exposure},
                     {"jitter_translation", r.jitter_translation},
                     {"jitter_rotation", r.jitter_rotation}};
  j["episode"] = {{"max_steps", episode.max_steps},
                  {"beta", episode.beta},
                  {"explore_coeff", episode.explore_coeff},
                  {"explore_base", episode.explore_base},
                  {"n_samples", episode.n_samples},
                  {"knn", episode.knn},
                  {"resample_low_init", episode.resample_low_init},
                  {"use_score_diff", episode.use_score_diff},
                  {"use_explore", episode.use_explore}};
  j["ppo"] = json::parse(ppo.to_json());
  j["policy"] = {{"use_lstm", options.use_lstm},
                 {"hidden", options.hidden},
                 {"feature_mode", options.feature_mode == policy::FeatureMode::Multilayer
                                      ? "multilayer"
                                      : "last_layer"}};
  j["imitation"] = {{"lr", imitation.lr},
                    {"lr_decay", imitation.lr_decay},
                    {"epochs", imitation.epochs},
                    {"batch_episodes", imitation.batch_episodes},
                    {"holdout_fraction", imitation.holdout_fraction}};
  return j;
}

void RunConfig::merge(const json& j) {
  check_keys(j, "config root",
             {"scene_gen", "scorer_train", "robustness", "episode", "ppo", "policy",
              "imitation"});
  if (j.contains("scene_gen")) {
    const auto& s = j.at("scene_gen");
    check_keys(s, "scene_gen", {"width", "height", "rooms", "hotspots", "salient_objects"});
    take(s, "width", gen.width);
    take(s, "height", gen.height);
    take(s, "rooms", gen.rooms);
    take(s, "hotspots", gen.hotspots);
    take(s, "salient_objects", gen.salient_objects);
  }
  if (j.contains("scorer_train")) {
    const auto& s = j.at("scorer_train");
    check_keys(s, "scorer_train", {"iters", "batch_size", "lr", "ambiguous_gap"});
    take(s, "iters", scorer_train.iters);
    take(s, "batch_size", scorer_train.batch_size);
    take(s, "lr", scorer_train.lr);
    take(s, "ambiguous_gap", scorer_train.ambiguous_gap);
  }
  if (j.contains("robustness")) {
    const auto& s = j.at("robustness");
    check_keys(s, "robustness",
               {"lambda", "lambda_sim", "lambda_expo", "over_exposure", "under_exposure",
                "jitter_translation", "jitter_rotation"});
    auto& r = scorer_train.robustness;
    take(s, "lambda", r.lambda);
    take(s, "lambda_sim", r.lambda_sim);
    take(s, "lambda_expo", r.lambda_expo);
    take(s, "over_exposure", r.over_exposure);
    take(s, "under_exposure", r.under_exposure);
    take(s, "jitter_translation", r.jitter_translation);
    take(s, "jitter_rotation", r.jitter_rotation);
  }
  if (j.contains("episode")) {
    const auto& s = j.at("episode");
    check_keys(s, "episode",
               {"max_steps", "beta", "explore_coeff", "explore_base", "n_samples", "knn",
                "resample_low_init", "use_score_diff", "use_explore"});
    take(s, "max_steps", episode.max_steps);
    take(s, "beta", episode.beta);
    take(s, "explore_coeff", episode.explore_coeff);
    take(s, "explore_base", episode.explore_base);
    take(s, "n_samples", episode.n_samples);
    take(s, "knn", episode.knn);
    take(s, "resample_low_init", episode.resample_low_init);
    take(s, "use_score_diff", episode.use_score_diff);
    take(s, "use_explore", episode.use_explore);
  }
  if (j.contains("ppo")) {
    const auto& s = j.at("ppo");
    check_keys(s, "ppo",
               {"gamma", "gae_lambda", "clip", "epochs", "minibatch", "lr",
                "entropy_coeff", "value_coeff", "horizon", "n_envs",
                "scene_switch_every", "total_steps"});
    take(s, "gamma", ppo.gamma);
    take(s, "gae_lambda", ppo.gae_lambda);
    take(s, "clip", ppo.clip);
    take(s, "epochs", ppo.epochs);
    take(s, "minibatch", ppo.minibatch);
    take(s, "lr", ppo.lr);
    take(s, "entropy_coeff", ppo.entropy_coeff);
    take(s, "value_coeff", ppo.value_coeff);
    take(s, "horizon", ppo.horizon);
    take(s, "n_envs", ppo.n_envs);
    take(s, "scene_switch_every", ppo.scene_switch_every);
    take(s, "total_steps", ppo.total_steps);
  }
  if (j.contains("policy")) {
    const auto& s = j.at("policy");
    check_keys(s, "policy", {"use_lstm", "hidden", "feature_mode"});
    take(s, "use_lstm", options.use_lstm);
    take(s, "hidden", options.hidden);
    if (s.contains("feature_mode")) {
      const std::string m = s.at("feature_mode").get<std::string>();
      if (m == "multilayer")
        options.feature_mode = policy::FeatureMode::Multilayer;
      else if (m == "last_layer")
        options.feature_mode = policy::FeatureMode::LastLayer;
      else
        throw ConfigError("policy.feature_mode must be multilayer or last_layer");
    }
  }
  if (j.contains("imitation")) {
    const auto& s = j.at("imitation");
    check_keys(s, "imitation",
               {"lr", "lr_decay", "epochs", "batch_episodes", "holdout_fraction"});
    take(s, "lr", imitation.lr);
    take(s, "lr_decay", imitation.lr_decay);
    take(s, "epochs", imitation.epochs);
    take(s, "batch_episodes", imitation.batch_episodes);
    take(s, "holdout_fraction", imitation.holdout_fraction);
  }
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  cfg.merge(j);
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty())
    fs::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

// Scene inputs: a directory of scene JSON files, a single file, or a
// comma-separated list of either.
std::vector<scene::SceneSpec> load_scenes(const std::string& arg) {
  std::vector<std::string> files;
  std::stringstream ss(arg);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    if (fs::is_directory(part)) {
      std::vector<std::string> batch;
      for (const auto& e : fs::directory_iterator(part))
        if (e.path().extension() == ".json") batch.push_back(e.path().string());
      std::sort(batch.begin(), batch.end());
      files.insert(files.end(), batch.begin(), batch.end());
    } else if (fs::exists(part)) {
      files.push_back(part);
    } else {
      throw ConfigError("scene path does not exist: " + part);
    }
  }
  if (files.empty()) throw ConfigError("no scene files found in: " + arg);
  std::vector<scene::SceneSpec> scenes;
  for (const auto& f : files) scenes.push_back(scene::SceneSpec::load(f));
  return scenes;
}

std::vector<const scene::SceneSpec*> ptrs(const std::vector<scene::SceneSpec>& v) {
  std::vector<const scene::SceneSpec*> p;
  for (const auto& s : v) p.push_back(&s);
  return p;
}

// '#'-prefixed lines echoing the tool version and run configuration into
// every CSV artifact.
std::string csv_preamble(const RunConfig& cfg, std::uint64_t seed,
                         const std::string& extra = "") {
  std::ostringstream ss;
  ss << "# " << kVersion << "\n# seed " << seed << "\n# config " << cfg.to_json().dump()
     << "\n";
  if (!extra.empty()) ss << "# " << extra << "\n";
  return ss.str();
}

std::string meta_json(const RunConfig& cfg, std::uint64_t seed) {
  json j;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["config"] = cfg.to_json();
  return j.dump();
}

int run_gen_scenes(const RunConfig& cfg, int count, std::uint64_t seed,
                   const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    auto sc = scene::generate_scene(derive_seed(seed, 0x5ce2e, i), cfg.gen);
    sc.scene_id = static_cast<int>(i);
    char name[64];
    std::snprintf(name, sizeof name, "scene_%03d.json", i);
    sc.save((fs::path(out_dir) / name).string());
    std::cout << "wrote " << (fs::path(out_dir) / name).string() << "\n";
  }
  return 0;
}

int run_train_scorer(RunConfig cfg, const std::string& scenes_arg, long long iters,
                     std::uint64_t seed, const std::string& out_path) {
  const auto scenes = load_scenes(scenes_arg);
  if (iters > 0) cfg.scorer_train.iters = iters;
  const auto result = aes::train_scorer(ptrs(scenes), cfg.scorer_train, seed);
  result.scorer.save(out_path, meta_json(cfg, seed));
  std::ostringstream log;
  log << csv_preamble(cfg, seed) << "iter,loss\n";
  char buf[64];
  for (const auto& row : result.log) {
    std::snprintf(buf, sizeof buf, "%lld,%.6f\n", row.iter, row.loss);
    log << buf;
  }
  write_file(out_path + ".log.csv", log.str());
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_eval_scorer(const RunConfig& cfg, const std::string& scorer_path,
                    const std::string& scenes_arg, std::uint64_t seed,
                    const std::string& out_path) {
  const auto scorer = aes::ScorerParams::load(scorer_path);
  const auto scenes = load_scenes(scenes_arg);
  const auto rep =
      aes::eval_scorer(scorer, ptrs(scenes), seed, cfg.scorer_train.robustness);
  const std::string csv = csv_preamble(cfg, seed) +
                          "scene_set,pair_accuracy,exposure_accuracy,jitter_mse\n" +
                          rep.csv_row(scenes_arg);
  if (!out_path.empty()) write_file(out_path, csv);
  std::cout << csv;
  return 0;
}

int run_train_agent(RunConfig cfg, const std::string& scenes_arg,
                    const std::string& scorer_path, long long steps,
                    std::uint64_t seed, const std::string& out_path, bool imitation) {
  const auto scenes = load_scenes(scenes_arg);
  const auto scorer = aes::ScorerParams::load(scorer_path);
  if (steps > 0) cfg.ppo.total_steps = steps;
  if (imitation) {
    const int demo_count = std::max(50, static_cast<int>(scenes.size()) * 12);
    const auto demos = baselines::generate_demonstrations(
        ptrs(scenes), scorer, demo_count, cfg.episode, derive_seed(seed, 0xde30, 0));
    const auto result =
        baselines::imitation_train(demos, scorer, cfg.imitation, derive_seed(seed, 0xbc, 0));
    result.params.save(out_path, meta_json(cfg, seed));
    std::cout << "demos " << demos.size() << " train_acc " << result.train_accuracy
              << " holdout_acc " << result.holdout_accuracy << "\n";
  } else {
    policy::TrainAgentConfig tc{cfg.ppo, cfg.episode, cfg.options};
    const auto result = policy::train_agent(ptrs(scenes), scorer, tc, seed);
    result.params.save(out_path, meta_json(cfg, seed));
    write_file(out_path + ".metrics.csv",
               csv_preamble(cfg, seed) + policy::metrics_csv(result.metrics));
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

harness::PolicyRunner make_runner(const std::string& policy_name,
                                  const std::string& agent_path,
                                  const aes::ScorerParams& scorer,
                                  policy::PolicyParams& rl_store,
                                  baselines::ImitationPolicy& im_store) {
  if (policy_name == "random") return harness::make_random_runner();
  if (policy_name == "thirds") return harness::make_thirds_runner();
  if (policy_name == "greedy") return harness::make_greedy_runner();
  if (policy_name == "keyframe") return harness::make_keyframe_runner();
  if (policy_name == "imitation") {
    if (agent_path.empty()) throw ConfigError("--agent required for imitation policy");
    im_store = baselines::ImitationPolicy::load(agent_path);
    return harness::make_imitation_runner(im_store, scorer);
  }
  if (policy_name == "rl") {
    if (agent_path.empty()) throw ConfigError("--agent required for rl policy");
    rl_store = policy::PolicyParams::load(agent_path);
    return harness::make_rl_runner(rl_store, scorer);
  }
  throw ConfigError("unknown policy: " + policy_name +
                    " (expected random|thirds|greedy|keyframe|imitation|rl)");
}

int run_eval(const RunConfig& cfg, const std::string& scenes_arg,
             const std::string& scorer_path, const std::vector<std::string>& policy_names,
             const std::string& agent_path, int episodes, std::uint64_t seed,
             const std::string& train_scenes_arg, const std::string& out_path,
             int jobs) {
  const auto scenes = load_scenes(scenes_arg);
  const auto scorer = aes::ScorerParams::load(scorer_path);
  policy::PolicyParams rl_store;
  baselines::ImitationPolicy im_store;
  std::vector<harness::PolicyRunner> runners;
  for (const auto& name : policy_names)
    runners.push_back(make_runner(name, agent_path, scorer, rl_store, im_store));

  std::vector<int> train_ids;
  const std::vector<int>* train_ids_ptr = nullptr;
  if (!train_scenes_arg.empty()) {
    for (const auto& sc : load_scenes(train_scenes_arg)) train_ids.push_back(sc.scene_id);
    train_ids_ptr = &train_ids;
  }
  harness::EvalReport rep;
  try {
    rep = harness::evaluate(runners, ptrs(scenes), episodes, scorer, cfg.episode, seed,
                            train_ids_ptr, jobs);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string csv = rep.to_csv(csv_preamble(cfg, seed));
  if (!out_path.empty()) write_file(out_path, csv);
  std::cout << rep.summary();
  if (out_path.empty()) std::cout << csv;
  return 0;
}

int run_ablate(const RunConfig& cfg, const std::string& train_arg,
               const std::string& eval_arg, const std::string& scorer_path,
               long long steps, int episodes, std::uint64_t seed,
               const std::string& out_path,
               const std::vector<std::string>& variants) {
  const auto train_scenes = load_scenes(train_arg);
  const auto eval_scenes = load_scenes(eval_arg);
  const auto scorer = aes::ScorerParams::load(scorer_path);
  policy::TrainAgentConfig base{cfg.ppo, cfg.episode, cfg.options};
  if (steps > 0) base.ppo.total_steps = steps;
  const auto rows = harness::ablation_suite(ptrs(train_scenes), ptrs(eval_scenes), scorer,
                                            base, episodes, seed, variants);
  const std::string csv = harness::ablation_csv(rows, csv_preamble(cfg, seed));
  if (!out_path.empty()) write_file(out_path, csv);
  std::cout << csv;
  return 0;
}

int run_render(const std::string& scene_path, const std::string& transcript_path,
               const std::string& out_path) {
  const auto sc = scene::SceneSpec::load(scene_path);
  const auto tr = pomdp::EpisodeTranscript::deserialize(read_file(transcript_path));
  write_file(out_path, harness::render_trajectory(sc, tr));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_demo(const RunConfig& cfg, const std::string& scene_path,
             const std::string& scorer_path, const std::string& policy_name,
             const std::string& agent_path, std::uint64_t seed) {
  const auto sc = scene::SceneSpec::load(scene_path);
  const auto scorer = aes::ScorerParams::load(scorer_path);
  policy::PolicyParams rl_store;
  baselines::ImitationPolicy im_store;
  const auto runner = make_runner(policy_name, agent_path, scorer, rl_store, im_store);
  pomdp::Environment env(sc, scorer, cfg.episode);
  env.reset(derive_seed(seed, 0xde00, 0));
  Rng rng(derive_seed(seed, 0xde01, 0));
  const auto tr = runner.run(env, rng);
  std::cout << tr.serialize();
  std::cout << "# " << policy_name << (tr.final_phi > tr.tau ? " SUCCESS" : " FAIL")
            << " final_phi " << tr.final_phi << " tau " << tr.tau << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " — autonomous aesthetic photo capture laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "JSON run configuration")->capture_default_str();
  app.add_option("--seed", seed, "root random seed")->capture_default_str();

  auto* gen = app.add_subcommand("gen-scenes", "generate procedural scenes");
  int gen_count = 3;
  std::string gen_out = "scenes";
  gen->add_option("--count", gen_count, "number of scenes");
  gen->add_option("--out", gen_out, "output directory");

  auto* ts = app.add_subcommand("train-scorer", "train the aesthetic scorer");
  std::string ts_scenes, ts_out = "scorer.ckpt";
  long long ts_iters = 0;
  ts->add_option("--scenes", ts_scenes, "training scenes")->required();
  ts->add_option("--iters", ts_iters, "training iterations (0 = default)");
  ts->add_option("--out", ts_out, "output checkpoint");

  auto* es = app.add_subcommand("eval-scorer", "evaluate a trained scorer");
  std::string es_scorer, es_scenes, es_out;
  es->add_option("--scorer", es_scorer, "scorer checkpoint")->required();
  es->add_option("--scenes", es_scenes, "evaluation scenes")->required();
  es->add_option("--out", es_out, "output CSV (optional)");

  auto* ta = app.add_subcommand("train-agent", "train the capture policy");
  std::string ta_scenes, ta_scorer, ta_out = "agent.ckpt";
  long long ta_steps = 0;
  bool ta_imitation = false;
  ta->add_option("--scenes", ta_scenes, "training scenes")->required();
  ta->add_option("--scorer", ta_scorer, "scorer checkpoint")->required();
  ta->add_option("--steps", ta_steps, "environment steps (0 = default)");
  ta->add_option("--out", ta_out, "output checkpoint");
  ta->add_flag("--imitation", ta_imitation, "behavior cloning instead of RL");

  auto* ev = app.add_subcommand("eval", "evaluate policies on scenes");
  std::string ev_scenes, ev_scorer, ev_agent, ev_train_scenes, ev_out;
  std::vector<std::string> ev_policies;
  int ev_episodes = 50, ev_jobs = 1;
  ev->add_option("--scenes", ev_scenes, "evaluation scenes")->required();
  ev->add_option("--scorer", ev_scorer, "scorer checkpoint")->required();
  ev->add_option("--policy", ev_policies,
                 "random|thirds|greedy|keyframe|imitation|rl (repeatable)")
      ->required();
  ev->add_option("--agent", ev_agent, "agent checkpoint (imitation/rl)");
  ev->add_option("--episodes", ev_episodes, "episodes per scene");
  ev->add_option("--train-scenes", ev_train_scenes,
                 "training scenes, rejected if they overlap the eval set");
  ev->add_option("--out", ev_out, "output CSV");
  ev->add_option("--jobs", ev_jobs, "worker threads");

  auto* ab = app.add_subcommand("ablate", "train and compare ablation variants");
  std::string ab_train, ab_eval, ab_scorer, ab_out;
  long long ab_steps = 0;
  int ab_episodes = 50;
  std::vector<std::string> ab_variants;
  ab->add_option("--scenes", ab_train, "training scenes")->required();
  ab->add_option("--eval-scenes", ab_eval, "held-out evaluation scenes")->required();
  ab->add_option("--scorer", ab_scorer, "scorer checkpoint")->required();
  ab->add_option("--steps", ab_steps, "environment steps per variant (0 = default)");
  ab->add_option("--episodes", ab_episodes, "episodes per scene");
  ab->add_option("--out", ab_out, "output CSV");
  ab->add_option("--variant", ab_variants, "variant names (default: all)");

  auto* rd = app.add_subcommand("render", "render an episode transcript to SVG");
  std::string rd_scene, rd_transcript, rd_out;
  rd->add_option("--scene", rd_scene, "scene file")->required();
  rd->add_option("--transcript", rd_transcript, "episode transcript")->required();
  rd->add_option("--out", rd_out, "output SVG")->required();

  auto* dm = app.add_subcommand("demo", "run one episode and print the transcript");
  std::string dm_scene, dm_scorer, dm_agent, dm_policy = "greedy";
  dm->add_option("--scene", dm_scene, "scene file")->required();
  dm->add_option("--scorer", dm_scorer, "scorer checkpoint")->required();
  dm->add_option("--policy", dm_policy, "policy name");
  dm->add_option("--agent", dm_agent, "agent checkpoint (imitation/rl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = load_config(config_path);
    if (gen->parsed()) return run_gen_scenes(cfg, gen_count, seed, gen_out);
    if (ts->parsed()) return run_train_scorer(cfg, ts_scenes, ts_iters, seed, ts_out);
    if (es->parsed()) return run_eval_scorer(cfg, es_scorer, es_scenes, seed, es_out);
    if (ta->parsed())
      return run_train_agent(cfg, ta_scenes, ta_scorer, ta_steps, seed, ta_out,
                             ta_imitation);
    if (ev->parsed())
      return run_eval(cfg, ev_scenes, ev_scorer, ev_policies, ev_agent, ev_episodes,
                      seed, ev_train_scenes, ev_out, ev_jobs);
    if (ab->parsed())
      return run_ablate(cfg, ab_train, ab_eval, ab_scorer, ab_steps, ab_episodes, seed,
                        ab_out, ab_variants);
    if (rd->parsed()) return run_render(rd_scene, rd_transcript, rd_out);
    if (dm->parsed()) return run_demo(cfg, dm_scene, dm_scorer, dm_policy, dm_agent, seed);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace autophoto::cli
