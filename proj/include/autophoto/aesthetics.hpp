#ifndef AUTOPHOTO_AESTHETICS_HPP_
#define AUTOPHOTO_AESTHETICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autophoto/netcore.hpp"
#include "autophoto/scene.hpp"

namespace autophoto::aes {

inline constexpr int kFeatureDims = 64 + 64 + 32;  // concatenated hidden layers

struct RobustnessConfig {
  double lambda = 0.6;
  double lambda_sim = 0.875;
  double lambda_expo = 0.125;
  double over_exposure = 4.0;
  double under_exposure = 0.5;
  double jitter_translation = 0.02;                    // meters
  double jitter_rotation = scene::kPi / 180.0;         // 1 degree
};

struct ScorerParams {
  net::NetSpec spec;
  std::vector<double> params;

  static net::NetSpec default_spec();
  static ScorerParams init(std::uint64_t seed);

  void save(const std::string& path, const std::string& meta_json = "{}") const;
  static ScorerParams load(const std::string& path);
};

struct PreferencePair {
  const scene::SceneSpec* scene = nullptr;
  scene::Pose winner_pose, loser_pose;
  scene::ViewObservation winner, loser;
  double margin = 0.0;  // true-score gap, diagnostic only
};

double score(const ScorerParams& scorer, const scene::ViewObservation& view);

double rank_loss(double score_hi, double score_lo);

// rng taken by value: one call consumes a fixed draw sequence, so the
// loss and its gradient can be evaluated consistently.
double robust_loss(const ScorerParams& scorer, const scene::SceneSpec& sc,
                   const scene::Pose& pose, const scene::ViewObservation& view,
                   const RobustnessConfig& config, Rng rng);

double total_loss(const ScorerParams& scorer, const PreferencePair& pair,
                  const RobustnessConfig& config, Rng rng);

// Accumulates d total_loss / d params into grad; returns the loss.
double total_loss_grad(const ScorerParams& scorer, const PreferencePair& pair,
                       const RobustnessConfig& config, Rng rng,
                       std::span<double> grad);

std::vector<double> multilayer_features(const ScorerParams& scorer,
                                        const scene::ViewObservation& view);

// Last-hidden-layer activations only (32 dims), for the ablation variant.
std::vector<double> last_layer_features(const ScorerParams& scorer,
                                        const scene::ViewObservation& view);

struct TrainLogRow {
  long long iter;
  double loss;
};

struct TrainScorerResult {
  ScorerParams scorer;
  std::vector<TrainLogRow> log;
};

struct TrainScorerConfig {
  long long iters = 20000;
  int batch_size = 32;
  double lr = 1e-3;
  double ambiguous_gap = 0.05;  // skip pairs with a smaller true gap
  RobustnessConfig robustness;
};

TrainScorerResult train_scorer(const std::vector<const scene::SceneSpec*>& scenes,
                               const TrainScorerConfig& config, std::uint64_t seed);

struct EvalScorerReport {
  double pair_accuracy = 0.0;      // on pairs with true gap >= 0.2
  double exposure_accuracy = 0.0;  // well-exposed ranked above badly exposed
  double jitter_mse = 0.0;
  int pairs = 0;

  std::string csv_row(const std::string& scene_set) const;
};

EvalScorerReport eval_scorer(const ScorerParams& scorer,
                             const std::vector<const scene::SceneSpec*>& scenes,
                             std::uint64_t seed,
                             const RobustnessConfig& config = {},
                             int pairs_per_scene = 400);

}  // namespace autophoto::aes

#endif  // AUTOPHOTO_AESTHETICS_HPP_
