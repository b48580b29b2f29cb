#ifndef AUTOPHOTO_BASELINES_HPP_
#define AUTOPHOTO_BASELINES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "autophoto/policy.hpp"
#include "autophoto/pomdp.hpp"

namespace autophoto::baselines {

inline constexpr int kDefaultBudget = 16;  // Greedy / Key Frame step budget

// All baselines expect an already-reset environment and run one episode.

pomdp::EpisodeTranscript random_policy(pomdp::Environment& env, Rng& rng);

pomdp::EpisodeTranscript rule_of_thirds_policy(pomdp::Environment& env);

// Probes all 8 movement actions per decision (each probe charged against
// the budget), commits the best strictly improving one as a free restore,
// captures when no move improves or the budget cannot cover another
// probe round.
pomdp::EpisodeTranscript greedy_policy(pomdp::Environment& env,
                                       int budget = kDefaultBudget);

// Executes `budget` uniform random movement actions, then backtracks to
// the highest-scoring visited pose (first occurrence on ties) and captures.
pomdp::EpisodeTranscript keyframe_policy(pomdp::Environment& env, Rng& rng,
                                         int budget = kDefaultBudget);

struct Demonstration {
  int scene_id = 0;
  std::vector<scene::ViewObservation> views;  // one per decision point
  std::vector<pomdp::Action> actions;         // same length, ends with CAPTURE
  double final_phi = 0.0;
  double tau = 0.0;
};

// Greedy hill-climb paths ending in CAPTURE; only demonstrations whose
// captured score exceeds the local threshold are kept.
std::vector<Demonstration> generate_demonstrations(
    const std::vector<const scene::SceneSpec*>& scenes,
    const aes::ScorerParams& scorer, int count,
    const pomdp::EpisodeConfig& episode_config, std::uint64_t seed);

// Same backbone as the RL agent, no critic branch.
struct ImitationPolicy {
  net::NetSpec backbone, actor;
  std::vector<double> backbone_p, actor_p;
  policy::PolicyOptions options;

  net::RecurrentState zero_state() const {
    return net::RecurrentState::zero(backbone.hidden_size());
  }
  void save(const std::string& path, const std::string& meta_json = "{}") const;
  static ImitationPolicy load(const std::string& path);
};

struct ImitationTrainConfig {
  double lr = 1e-4;
  double lr_decay = 0.95;  // per epoch
  int epochs = 50;
  int batch_episodes = 8;
  double holdout_fraction = 0.1;
};

struct ImitationTrainResult {
  ImitationPolicy params;
  double train_accuracy = 0.0;
  double holdout_accuracy = 0.0;
};

ImitationTrainResult imitation_train(const std::vector<Demonstration>& demos,
                                     const aes::ScorerParams& scorer,
                                     const ImitationTrainConfig& config,
                                     std::uint64_t seed);

pomdp::EpisodeTranscript imitation_policy(pomdp::Environment& env,
                                          const ImitationPolicy& params,
                                          const aes::ScorerParams& scorer);

}  // namespace autophoto::baselines

#endif  // AUTOPHOTO_BASELINES_HPP_
