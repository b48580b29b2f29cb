#include "autophoto/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace autophoto::harness {

using pomdp::EpisodeTranscript;
using scene::SceneSpec;

PolicyRunner make_random_runner() {
  return {"random", [](pomdp::Environment& env, Rng& rng) {
            return baselines::random_policy(env, rng);
          }};
}

PolicyRunner make_thirds_runner() {
  return {"thirds", [](pomdp::Environment& env, Rng&) {
            return baselines::rule_of_thirds_policy(env);
          }};
}

PolicyRunner make_greedy_runner(int budget) {
  return {"greedy", [budget](pomdp::Environment& env, Rng&) {
            return baselines::greedy_policy(env, budget);
          }};
}

PolicyRunner make_keyframe_runner(int budget) {
  return {"keyframe", [budget](pomdp::Environment& env, Rng& rng) {
            return baselines::keyframe_policy(env, rng, budget);
          }};
}

PolicyRunner make_imitation_runner(const baselines::ImitationPolicy& params,
                                   const aes::ScorerParams& scorer) {
  return {"imitation", [&params, &scorer](pomdp::Environment& env, Rng&) {
            return baselines::imitation_policy(env, params, scorer);
          }};
}

PolicyRunner make_rl_runner(const policy::PolicyParams& params,
                            const aes::ScorerParams& scorer) {
  return {"rl", [&params, &scorer](pomdp::Environment& env, Rng&) {
            return policy::run_greedy_episode(env, params, scorer);
          }};
}

namespace {

std::uint64_t name_tag(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  return h;
}

struct EpisodeOutcome {
  bool success = false;
  int length = 0;
  double final_phi = 0.0;
};

}  // namespace

EvalReport evaluate(const std::vector<PolicyRunner>& policies,
                    const std::vector<const SceneSpec*>& scenes,
                    int episodes_per_scene, const aes::ScorerParams& scorer,
                    const pomdp::EpisodeConfig& episode_config, std::uint64_t seed,
                    const std::vector<int>* train_scene_ids, int jobs) {
  if (scenes.empty()) throw std::invalid_argument("evaluate: no scenes");
  if (train_scene_ids) {
    std::set<int> train(train_scene_ids->begin(), train_scene_ids->end());
    for (const auto* sc : scenes)
      if (train.count(sc->scene_id))
        throw std::invalid_argument("evaluate: train/eval scene overlap, scene_id " +
                                    std::to_string(sc->scene_id));
  }

  pomdp::EpisodeConfig cfg = episode_config;
  cfg.resample_low_init = false;  // never during evaluation

  const int n_scenes = static_cast<int>(scenes.size());
  const int n_pol = static_cast<int>(policies.size());
  const int total = n_scenes * episodes_per_scene;
  // outcome[p][scene * episodes_per_scene + ep]
  std::vector<std::vector<EpisodeOutcome>> outcome(
      n_pol, std::vector<EpisodeOutcome>(total));

  auto run_scene = [&](int si) {
    pomdp::ViewSampleCache cache;
    const SceneSpec& sc = *scenes[si];
    for (int ep = 0; ep < episodes_per_scene; ++ep) {
      const std::uint64_t ep_seed = derive_seed(seed, sc.scene_id, ep);
      for (int p = 0; p < n_pol; ++p) {
        pomdp::Environment env(sc, scorer, cfg, &cache);
        env.reset(ep_seed);  // identical start pose and threshold per policy
        Rng rng(derive_seed(seed ^ name_tag(policies[p].name), sc.scene_id, ep));
        const auto tr = policies[p].run(env, rng);
        auto& o = outcome[p][si * episodes_per_scene + ep];
        o.success = tr.terminal && tr.final_phi > tr.tau;
        o.length = static_cast<int>(tr.steps.size());
        o.final_phi = tr.final_phi;
      }
    }
  };

  if (jobs <= 1) {
    for (int si = 0; si < n_scenes; ++si) run_scene(si);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    const int n_workers = std::min(jobs, n_scenes);
    for (int w = 0; w < n_workers; ++w)
      workers.emplace_back([&] {
        for (int si = next.fetch_add(1); si < n_scenes; si = next.fetch_add(1))
          run_scene(si);
      });
    for (auto& t : workers) t.join();
  }

  EvalReport rep;
  rep.seed = seed;
  rep.episodes_per_scene = episodes_per_scene;
  for (const auto* sc : scenes) rep.scene_ids.push_back(sc->scene_id);
  for (int p = 0; p < n_pol; ++p) {
    EvalRow row;
    row.policy = policies[p].name;
    row.scenes = n_scenes;
    row.episodes = total;
    double acc = 0.0, len = 0.0, phi = 0.0;
    for (const auto& o : outcome[p]) {
      acc += o.success ? 1.0 : 0.0;
      len += o.length;
      phi += o.final_phi;
    }
    row.accuracy = acc / total;
    row.stderr_ = std::sqrt(row.accuracy * (1.0 - row.accuracy) / total);
    row.mean_len = len / total;
    row.mean_phi = phi / total;
    rep.rows.push_back(row);
  }
  return rep;
}

std::string EvalReport::to_csv(const std::string& preamble) const {
  std::ostringstream ss;
  ss << preamble;
  ss << "policy,scenes,episodes,accuracy,stderr,mean_len,mean_phi\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.6f,%.6f,%.6f,%.6f\n", r.policy.c_str(),
                  r.scenes, r.episodes, r.accuracy, r.stderr_, r.mean_len, r.mean_phi);
    ss << buf;
  }
  return ss.str();
}

std::string EvalReport::summary() const {
  std::ostringstream ss;
  ss << "Evaluation over " << scene_ids.size() << " scenes x " << episodes_per_scene
     << " episodes (seed " << seed << ")\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "  %-10s accuracy %5.1f%% +- %.1f  mean_len %5.1f  mean_phi %6.3f\n",
                  r.policy.c_str(), 100.0 * r.accuracy, 100.0 * r.stderr_, r.mean_len,
                  r.mean_phi);
    ss << buf;
  }
  return ss.str();
}

const EvalRow& EvalReport::row(const std::string& policy) const {
  for (const auto& r : rows)
    if (r.policy == policy) return r;
  throw std::out_of_range("no such policy row: " + policy);
}

std::vector<AblationVariant> standard_variants() {
  std::vector<AblationVariant> v;
  v.push_back({"full"});
  v.push_back({"no_score_diff", false, true});
  v.push_back({"no_explore", true, false});
  v.push_back({"no_reward_shaping", false, false});
  v.push_back({"no_lstm", true, true, false});
  v.push_back({"last_layer_feats", true, true, true, policy::FeatureMode::LastLayer});
  // drop the fine (10 deg) and large (90 deg) turn pairs
  AblationVariant coarse{"coarse_turns_only"};
  coarse.action_set = {pomdp::Action::Forward, pomdp::Action::Backward,
                       pomdp::Action::TurnL30, pomdp::Action::TurnR30,
                       pomdp::Action::Capture};
  v.push_back(coarse);
  return v;
}

std::vector<AblationRow> ablation_suite(
    const std::vector<const SceneSpec*>& train_pool,
    const std::vector<const SceneSpec*>& eval_scenes,
    const aes::ScorerParams& scorer, const policy::TrainAgentConfig& base_config,
    int episodes_per_scene, std::uint64_t seed,
    const std::vector<std::string>& variant_names) {
  auto variants = standard_variants();
  if (!variant_names.empty()) {
    std::vector<AblationVariant> pick;
    for (const auto& name : variant_names) {
      const auto it = std::find_if(variants.begin(), variants.end(),
                                   [&](const auto& v) { return v.name == name; });
      if (it == variants.end())
        throw std::invalid_argument("ablation_suite: unknown variant " + name);
      pick.push_back(*it);
    }
    variants = std::move(pick);
  }

  std::vector<policy::PolicyParams> trained;
  trained.reserve(variants.size());
  for (const auto& var : variants) {
    policy::TrainAgentConfig cfg = base_config;
    cfg.episode.use_score_diff = var.use_score_diff;
    cfg.episode.use_explore = var.use_explore;
    cfg.options.use_lstm = var.use_lstm;
    cfg.options.feature_mode = var.feature_mode;
    cfg.options.action_set = var.action_set;
    trained.push_back(policy::train_agent(train_pool, scorer, cfg, seed).params);
  }

  std::vector<PolicyRunner> runners;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& params = trained[i];
    runners.push_back({variants[i].name, [&params, &scorer](pomdp::Environment& env, Rng&) {
                         return policy::run_greedy_episode(env, params, scorer);
                       }});
  }
  std::vector<int> train_ids;
  for (const auto* sc : train_pool) train_ids.push_back(sc->scene_id);
  const auto rep = evaluate(runners, eval_scenes, episodes_per_scene, scorer,
                            base_config.episode, seed, &train_ids);

  std::vector<AblationRow> rows;
  for (const auto& r : rep.rows) rows.push_back({r.policy, r.accuracy, r.stderr_});
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows,
                         const std::string& preamble) {
  std::ostringstream ss;
  ss << preamble << "variant,accuracy,stderr\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f\n", r.variant.c_str(), r.accuracy,
                  r.stderr_);
    ss << buf;
  }
  return ss.str();
}

namespace {

// blue -> yellow heat ramp
std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(40 + 215 * v);
  const int g = static_cast<int>(40 + 180 * v);
  const int b = static_cast<int>(150 - 110 * v);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string render_trajectory(const SceneSpec& sc, const EpisodeTranscript& transcript) {
  if (transcript.scene_id != sc.scene_id)
    throw std::invalid_argument("render_trajectory: transcript does not belong to scene");

  const double px = 16.0;  // pixels per cell
  const double w = sc.width * px;
  const double h = sc.height * px;
  const double scale = px / scene::kCellSize;  // pixels per meter
  char buf[512];
  std::ostringstream ss;
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
     << h + 40 << "\" viewBox=\"0 0 " << w << " " << h + 40 << "\">\n";

  // aesthetic heatmap over heading slices (max over 8 headings per cell)
  ss << "<g id=\"heatmap\">\n";
  double lo = 1e300, hi = -1e300;
  std::vector<double> heat(static_cast<std::size_t>(sc.width) * sc.height, 0.0);
  for (int cy = 0; cy < sc.height; ++cy)
    for (int cx = 0; cx < sc.width; ++cx) {
      if (sc.occupied(cx, cy)) continue;
      double best = -1e300;
      for (int k = 0; k < 8; ++k) {
        scene::Pose p{(cx + 0.5) * scene::kCellSize, (cy + 0.5) * scene::kCellSize,
                      scene::wrap_angle(k * scene::kPi / 4.0)};
        best = std::max(best, scene::true_aesthetic(sc, p));
      }
      heat[static_cast<std::size_t>(cy) * sc.width + cx] = best;
      lo = std::min(lo, best);
      hi = std::max(hi, best);
    }
  const double range = hi > lo ? hi - lo : 1.0;
  for (int cy = 0; cy < sc.height; ++cy)
    for (int cx = 0; cx < sc.width; ++cx) {
      const double y_svg = h - (cy + 1) * px;  // y axis up
      if (sc.occupied(cx, cy)) {
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"#666666\"/>\n",
                      cx * px, y_svg, px, px);
      } else {
        const double v = (heat[static_cast<std::size_t>(cy) * sc.width + cx] - lo) / range;
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\"/>\n",
                      cx * px, y_svg, px, px, heat_color(v).c_str());
      }
      ss << buf;
    }
  ss << "</g>\n";

  // path polyline: start plus one vertex per movement step
  std::vector<scene::Pose> path{transcript.start_pose};
  scene::Pose capture_pose = transcript.start_pose;
  for (const auto& s : transcript.steps) {
    if (pomdp::is_movement(s.action))
      path.push_back(s.pose);
    else
      capture_pose = s.pose;
  }
  if (path.size() > 1) {
    ss << "<polyline fill=\"none\" stroke=\"#ff3030\" stroke-width=\"2\" points=\"";
    for (const auto& p : path) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", p.x * scale, h - p.y * scale);
      ss << buf;
    }
    ss << "\"/>\n";
  }
  ss << "<g id=\"markers\">\n";
  for (const auto& p : path) {
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2.5\" fill=\"#ffffff\" stroke=\"#ff3030\"/>\n",
                  p.x * scale, h - p.y * scale);
    ss << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"6\" fill=\"none\" stroke=\"#00ff88\" stroke-width=\"3\"/>\n",
                capture_pose.x * scale, h - capture_pose.y * scale);
  ss << buf << "</g>\n";

  std::snprintf(buf, sizeof buf,
                "<text x=\"6\" y=\"%.1f\" font-family=\"monospace\" font-size=\"14\" fill=\"#000000\">tau=%.4f final_phi=%.4f %s</text>\n",
                h + 24.0, transcript.tau, transcript.final_phi,
                transcript.final_phi > transcript.tau ? "SUCCESS" : "FAIL");
  ss << buf;
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace autophoto::harness
