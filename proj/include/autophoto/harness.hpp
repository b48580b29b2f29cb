#ifndef AUTOPHOTO_HARNESS_HPP_
#define AUTOPHOTO_HARNESS_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "autophoto/baselines.hpp"
#include "autophoto/policy.hpp"
#include "autophoto/pomdp.hpp"

namespace autophoto::harness {

// One evaluation episode on a freshly reset environment. The rng is
// derived per (policy, scene, episode) so results are independent of the
// order policies run in.
struct PolicyRunner {
  std::string name;
  std::function<pomdp::EpisodeTranscript(pomdp::Environment&, Rng&)> run;
};

PolicyRunner make_random_runner();
PolicyRunner make_thirds_runner();
PolicyRunner make_greedy_runner(int budget = baselines::kDefaultBudget);
PolicyRunner make_keyframe_runner(int budget = baselines::kDefaultBudget);
PolicyRunner make_imitation_runner(const baselines::ImitationPolicy& params,
                                   const aes::ScorerParams& scorer);
PolicyRunner make_rl_runner(const policy::PolicyParams& params,
                            const aes::ScorerParams& scorer);

struct EvalRow {
  std::string policy;
  int scenes = 0;
  int episodes = 0;
  double accuracy = 0.0;   // fraction of episodes with phi(s_T) > tau
  double stderr_ = 0.0;    // sqrt(p(1-p)/n)
  double mean_len = 0.0;
  double mean_phi = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<int> scene_ids;
  std::uint64_t seed = 0;
  int episodes_per_scene = 0;

  std::string to_csv(const std::string& preamble = "") const;
  std::string summary() const;
  const EvalRow& row(const std::string& policy) const;
};

// Paired design: every policy sees identical (scene, start pose,
// threshold) triples. Throws if a train scene id appears in the eval set.
EvalReport evaluate(const std::vector<PolicyRunner>& policies,
                    const std::vector<const scene::SceneSpec*>& scenes,
                    int episodes_per_scene, const aes::ScorerParams& scorer,
                    const pomdp::EpisodeConfig& episode_config, std::uint64_t seed,
                    const std::vector<int>* train_scene_ids = nullptr,
                    int jobs = 1);

struct AblationVariant {
  std::string name;
  bool use_score_diff = true;
  bool use_explore = true;
  bool use_lstm = true;
  policy::FeatureMode feature_mode = policy::FeatureMode::Multilayer;
  std::vector<pomdp::Action> action_set = policy::full_action_set();
};

// full method + the six single-change ablation variants
std::vector<AblationVariant> standard_variants();

struct AblationRow {
  std::string variant;
  double accuracy = 0.0;
  double stderr_ = 0.0;
};

// Trains every requested variant with identical seeds and budgets, then
// evaluates all of them on the same paired episode set.
std::vector<AblationRow> ablation_suite(
    const std::vector<const scene::SceneSpec*>& train_pool,
    const std::vector<const scene::SceneSpec*>& eval_scenes,
    const aes::ScorerParams& scorer, const policy::TrainAgentConfig& base_config,
    int episodes_per_scene, std::uint64_t seed,
    const std::vector<std::string>& variant_names = {});

std::string ablation_csv(const std::vector<AblationRow>& rows,
                         const std::string& preamble = "");

// Top-down SVG: occupancy, true-aesthetic heatmap, path polyline, capture
// marker, legend with tau and the final score.
std::string render_trajectory(const scene::SceneSpec& sc,
                              const pomdp::EpisodeTranscript& transcript);

}  // namespace autophoto::harness

#endif  // AUTOPHOTO_HARNESS_HPP_
