#ifndef AUTOPHOTO_POMDP_HPP_
#define AUTOPHOTO_POMDP_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "autophoto/aesthetics.hpp"
#include "autophoto/scene.hpp"

namespace autophoto::pomdp {

enum class Action {
  Forward,
  Backward,
  TurnL10,
  TurnL30,
  TurnL90,
  TurnR10,
  TurnR30,
  TurnR90,
  Capture,
};

inline constexpr int kNumActions = 9;
inline constexpr double kTranslation = 0.25;  // meters

const char* action_name(Action a);
Action action_from_name(const std::string& name);
bool is_movement(Action a);

// Pose after a movement action, ignoring collisions.
scene::Pose apply_action(const scene::Pose& pose, Action a);

struct ThresholdEstimate {
  double mu = 0.0;
  double sigma = 0.0;
  double tau = 0.0;  // mu + sigma
  double scene_mu = 0.0;
  double scene_sigma = 0.0;
};

struct EpisodeConfig {
  int max_steps = 48;
  double beta = 0.005;
  double explore_coeff = 0.1;
  double explore_base = 0.9999;
  int n_samples = 2000;
  int knn = 100;
  bool resample_low_init = false;  // training only
  // ablation switches for the shaped reward
  bool use_score_diff = true;
  bool use_explore = true;
};

struct StepRecord {
  int t = 0;
  long long zeta = 0;
  scene::Pose pose;  // pose after the action
  Action action = Action::Capture;
  double phi = 0.0;  // score of the view at `pose`
  double reward = 0.0;
  bool terminal = false;
  bool privileged = false;  // probe/teleport simulator access
};

struct EpisodeTranscript {
  int scene_id = 0;
  scene::Pose start_pose;
  double start_phi = 0.0;
  double tau = 0.0;
  std::vector<StepRecord> steps;
  bool terminal = false;
  double final_phi = 0.0;
  int probe_count = 0;
  int restore_count = 0;

  std::string serialize() const;  // "autophoto-episode/1" text format
  static EpisodeTranscript deserialize(const std::string& text);
};

// Per-scene cache of the N sampled views and their learned scores. The
// scorer is frozen during rollouts, so entries stay valid for a run.
class ViewSampleCache {
 public:
  struct Entry {
    std::vector<scene::Pose> poses;
    std::vector<double> scores;
  };

  const Entry& get(const scene::SceneSpec& sc, const aes::ScorerParams& scorer,
                   int n_samples, std::uint64_t seed);
  void clear() { entries_.clear(); }

 private:
  std::map<std::pair<int, std::uint64_t>, Entry> entries_;
};

ThresholdEstimate compute_threshold(const scene::SceneSpec& sc,
                                    const scene::Pose& start_pose,
                                    const aes::ScorerParams& scorer,
                                    const EpisodeConfig& config,
                                    std::uint64_t seed,
                                    ViewSampleCache* cache = nullptr);

// Threshold statistics from precomputed positions/scores (shared by the
// environment and by synthetic-score tests).
ThresholdEstimate threshold_from_samples(const std::vector<scene::Pose>& poses,
                                         const std::vector<double>& scores,
                                         const scene::Pose& start_pose, int knn);

struct StepResult {
  scene::ViewObservation observation;
  double reward = 0.0;
  bool done = false;
  bool forced_capture = false;
};

class Environment {
 public:
  Environment(const scene::SceneSpec& sc, const aes::ScorerParams& scorer,
              EpisodeConfig config, ViewSampleCache* cache = nullptr);

  // Seed for the view sampling that defines thresholds; derived from the
  // scene seed so all episodes in a scene share one sample set.
  std::uint64_t sample_seed() const;

  scene::ViewObservation reset(std::uint64_t seed);
  StepResult step(Action a, long long zeta);

  bool done() const { return done_; }
  int steps_taken() const { return t_; }
  const scene::Pose& pose() const { return pose_; }
  double phi() const { return phi_; }
  const ThresholdEstimate& threshold() const { return threshold_; }
  const scene::ViewObservation& observation() const { return obs_; }
  const scene::SceneSpec& scene_spec() const { return *scene_; }
  const aes::ScorerParams& scorer() const { return *scorer_; }
  const EpisodeConfig& config() const { return config_; }
  const EpisodeTranscript& transcript() const { return transcript_; }

  void switch_scene(const scene::SceneSpec& sc);

  // Simulator privileges for the scripted baselines; both are recorded
  // in the transcript.
  double probe_phi(Action movement);
  void teleport(const scene::Pose& pose);

 private:
  const scene::SceneSpec* scene_;
  const aes::ScorerParams* scorer_;
  EpisodeConfig config_;
  ViewSampleCache* cache_;
  ViewSampleCache local_cache_;

  scene::Pose pose_{};
  scene::ViewObservation obs_{};
  double phi_ = 0.0;
  int t_ = 0;
  bool done_ = true;
  ThresholdEstimate threshold_{};
  EpisodeTranscript transcript_{};
};

// Movement reward (paper's non-terminal shaping); exposed for the
// reward-fidelity checks.
double movement_reward(double phi_next, double phi_curr, long long zeta, int t,
                       const EpisodeConfig& config);
double capture_reward(double phi_final, double tau);

}  // namespace autophoto::pomdp

#endif  // AUTOPHOTO_POMDP_HPP_
