#include "autophoto/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "autophoto/checkpoint.hpp"

namespace autophoto::baselines {

using pomdp::Action;
using pomdp::Environment;
using pomdp::EpisodeTranscript;

namespace {

constexpr Action kMovementActions[8] = {
    Action::Forward,  Action::Backward, Action::TurnL10, Action::TurnL30,
    Action::TurnL90,  Action::TurnR10,  Action::TurnR30, Action::TurnR90};

constexpr long long kFrozenZeta = 0;  // eval reward values are not reported

}  // namespace

EpisodeTranscript random_policy(Environment& env, Rng& rng) {
  while (!env.done())
    env.step(static_cast<Action>(rng.index(pomdp::kNumActions)), kFrozenZeta);
  return env.transcript();
}

EpisodeTranscript rule_of_thirds_policy(Environment& env) {
  constexpr double kAlignTol = 0.04;
  constexpr double kCoarseDeg = 25.0;
  while (!env.done()) {
    const auto& obs = env.observation();
    if (!obs.salient_present) {
      env.step(Action::TurnL90, kFrozenZeta);  // large turn to explore
      continue;
    }
    const double sx = obs.salient_x;
    if (std::abs(sx - 1.0 / 3.0) <= kAlignTol || std::abs(sx - 2.0 / 3.0) <= kAlignTol) {
      env.step(Action::Capture, kFrozenZeta);
      break;
    }
    // nearer third target, ties toward 1/3
    const double d1 = std::abs(sx - 1.0 / 3.0);
    const double d2 = std::abs(sx - 2.0 / 3.0);
    const double target = d1 <= d2 ? 1.0 / 3.0 : 2.0 / 3.0;
    const double err_deg = (sx - target) * 90.0;  // viewport spans 90 degrees
    // sx too large -> rotate right shifts the object left in the viewport
    const bool coarse = std::abs(err_deg) > kCoarseDeg;
    Action a;
    if (err_deg > 0.0)
      a = coarse ? Action::TurnR30 : Action::TurnR10;
    else
      a = coarse ? Action::TurnL30 : Action::TurnL10;
    env.step(a, kFrozenZeta);
  }
  return env.transcript();
}

EpisodeTranscript greedy_policy(Environment& env, int budget) {
  int used = 0;
  while (!env.done()) {
    // probes and committed moves both spend budget: a decision round costs
    // 8 probes plus the move it commits
    if (budget - used < 9) {
      env.step(Action::Capture, kFrozenZeta);
      break;
    }
    double best_phi = -1e300;
    Action best = Action::Capture;
    for (Action a : kMovementActions) {
      const double phi = env.probe_phi(a);
      ++used;
      if (phi > best_phi) {
        best_phi = phi;
        best = a;
      }
    }
    if (best_phi > env.phi()) {
      env.step(best, kFrozenZeta);  // restore to the probed pose
      ++used;
    } else {
      env.step(Action::Capture, kFrozenZeta);  // no move improves the score
      break;
    }
  }
  return env.transcript();
}

EpisodeTranscript keyframe_policy(Environment& env, Rng& rng, int budget) {
  std::vector<scene::Pose> visited{env.pose()};
  std::vector<double> phis{env.phi()};
  for (int i = 0; i < budget && !env.done(); ++i) {
    env.step(kMovementActions[rng.index(8)], kFrozenZeta);
    visited.push_back(env.pose());
    phis.push_back(env.phi());
  }
  // backtrack to the best view seen (first occurrence on ties)
  std::size_t best = 0;
  for (std::size_t i = 1; i < phis.size(); ++i)
    if (phis[i] > phis[best]) best = i;
  if (!env.done()) {
    env.teleport(visited[best]);
    env.step(Action::Capture, kFrozenZeta);
  }
  return env.transcript();
}

std::vector<Demonstration> generate_demonstrations(
    const std::vector<const scene::SceneSpec*>& scenes,
    const aes::ScorerParams& scorer, int count,
    const pomdp::EpisodeConfig& episode_config, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_demonstrations: count must be >= 1");
  if (scenes.empty())
    throw std::invalid_argument("generate_demonstrations: need at least one scene");

  std::vector<Demonstration> demos;
  pomdp::ViewSampleCache cache;
  Rng rng(derive_seed(seed, 0xde305ULL));
  int attempts = 0;
  const int max_attempts = count * 50;

  while (static_cast<int>(demos.size()) < count && attempts < max_attempts) {
    ++attempts;
    const auto* sc = scenes[rng.index(static_cast<int>(scenes.size()))];
    Environment env(*sc, scorer, episode_config, &cache);
    env.reset(rng.next_u64());

    Demonstration demo;
    demo.scene_id = sc->scene_id;
    demo.tau = env.threshold().tau;
    while (!env.done()) {
      demo.views.push_back(env.observation());
      double best_phi = -1e300;
      Action best = Action::Capture;
      for (Action a : kMovementActions) {
        const double phi = env.probe_phi(a);
        if (phi > best_phi) {
          best_phi = phi;
          best = a;
        }
      }
      const Action chosen = best_phi > env.phi() ? best : Action::Capture;
      demo.actions.push_back(chosen);
      env.step(chosen, kFrozenZeta);
    }
    demo.final_phi = env.transcript().final_phi;
    // keep only demonstrations whose photo clears the local threshold
    if (demo.final_phi > demo.tau) demos.push_back(std::move(demo));
  }
  if (demos.empty())
    throw std::runtime_error("generate_demonstrations: no demonstration cleared the threshold");
  return demos;
}

namespace {

int action_index_full(Action a) { return static_cast<int>(a); }

// forward an episode, returning per-step losses/grads through BPTT
struct EpisodeResult {
  double loss = 0.0;
  int correct = 0;
  int steps = 0;
};

EpisodeResult imitation_episode_pass(const ImitationPolicy& p,
                                     const aes::ScorerParams& scorer,
                                     const Demonstration& demo, bool with_grad,
                                     std::vector<double>* backbone_grad,
                                     std::vector<double>* actor_grad) {
  const int n = static_cast<int>(demo.actions.size());
  EpisodeResult res;
  res.steps = n;

  std::vector<net::Tape> bb_tapes(n), actor_tapes(n);
  std::vector<std::vector<double>> dlogits(n);
  net::RecurrentState state = p.zero_state();

  for (int k = 0; k < n; ++k) {
    const auto feats =
        policy::extract_features(scorer, demo.views[k], p.options.feature_mode);
    const auto bb = net::forward(p.backbone, p.backbone_p, feats, &state,
                                 with_grad ? &bb_tapes[k] : nullptr);
    state = bb.state;
    const auto logits = net::forward(p.actor, p.actor_p, bb.output, nullptr,
                                     with_grad ? &actor_tapes[k] : nullptr);
    // stable softmax cross-entropy
    const double m = *std::max_element(logits.output.begin(), logits.output.end());
    double z = 0.0;
    for (double l : logits.output) z += std::exp(l - m);
    const int target = action_index_full(demo.actions[k]);
    const double logp = logits.output[target] - m - std::log(z);
    res.loss += -logp;
    const int pred = static_cast<int>(
        std::max_element(logits.output.begin(), logits.output.end()) -
        logits.output.begin());
    if (pred == target) ++res.correct;

    if (with_grad) {
      std::vector<double> dl(logits.output.size());
      for (std::size_t j = 0; j < dl.size(); ++j) {
        const double pj = std::exp(logits.output[j] - m) / z;
        dl[j] = (pj - (static_cast<int>(j) == target ? 1.0 : 0.0)) / n;
      }
      dlogits[k] = std::move(dl);
    }
  }

  if (with_grad) {
    net::RecurrentState carry;  // state grads flow back through the episode
    for (int k = n - 1; k >= 0; --k) {
      const auto da = net::backward(p.actor, p.actor_p, actor_tapes[k], dlogits[k],
                                    nullptr, *actor_grad);
      const auto db = net::backward(p.backbone, p.backbone_p, bb_tapes[k],
                                    da.input_grad, carry.empty() ? nullptr : &carry,
                                    *backbone_grad);
      carry = db.state_grad;
    }
  }
  res.loss /= std::max(1, n);
  return res;
}

}  // namespace

ImitationTrainResult imitation_train(const std::vector<Demonstration>& demos,
                                     const aes::ScorerParams& scorer,
                                     const ImitationTrainConfig& config,
                                     std::uint64_t seed) {
  if (demos.empty()) throw std::invalid_argument("imitation_train: empty demonstration set");

  ImitationTrainResult res;
  policy::PolicyOptions opts;  // multilayer features, lstm backbone, 9 actions
  const auto full = policy::PolicyParams::init(opts, derive_seed(seed, 7));
  res.params.backbone = full.backbone;
  res.params.actor = full.actor;
  res.params.backbone_p = full.backbone_p;
  res.params.actor_p = full.actor_p;
  res.params.options = opts;

  // held-out split for cloning accuracy
  const int holdout = std::max(
      1, static_cast<int>(std::floor(demos.size() * config.holdout_fraction)));
  const int train_n = static_cast<int>(demos.size()) - holdout;
  if (train_n < 1) throw std::invalid_argument("imitation_train: demo set too small");

  Rng rng(derive_seed(seed, 8));
  auto adam_bb = net::AdamState::zero(res.params.backbone_p.size());
  auto adam_actor = net::AdamState::zero(res.params.actor_p.size());
  std::vector<double> gbb(res.params.backbone_p.size());
  std::vector<double> gactor(res.params.actor_p.size());

  std::vector<int> order(train_n);
  for (int i = 0; i < train_n; ++i) order[i] = i;

  double lr = config.lr;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = train_n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    for (int b0 = 0; b0 < train_n; b0 += config.batch_episodes) {
      std::fill(gbb.begin(), gbb.end(), 0.0);
      std::fill(gactor.begin(), gactor.end(), 0.0);
      const int b1 = std::min(b0 + config.batch_episodes, train_n);
      for (int i = b0; i < b1; ++i)
        imitation_episode_pass(res.params, scorer, demos[order[i]], true, &gbb, &gactor);
      const double inv = 1.0 / (b1 - b0);
      for (auto& g : gbb) g *= inv;
      for (auto& g : gactor) g *= inv;
      net::adam_step(res.params.backbone_p, gbb, adam_bb, lr);
      net::adam_step(res.params.actor_p, gactor, adam_actor, lr);
    }
    lr *= config.lr_decay;
  }

  long long tc = 0, tn = 0, hc = 0, hn = 0;
  for (int i = 0; i < train_n; ++i) {
    const auto r = imitation_episode_pass(res.params, scorer, demos[i], false, nullptr, nullptr);
    tc += r.correct;
    tn += r.steps;
  }
  for (std::size_t i = train_n; i < demos.size(); ++i) {
    const auto r = imitation_episode_pass(res.params, scorer, demos[i], false, nullptr, nullptr);
    hc += r.correct;
    hn += r.steps;
  }
  res.train_accuracy = tn ? static_cast<double>(tc) / tn : 0.0;
  res.holdout_accuracy = hn ? static_cast<double>(hc) / hn : 0.0;
  return res;
}

EpisodeTranscript imitation_policy(Environment& env, const ImitationPolicy& params,
                                   const aes::ScorerParams& scorer) {
  auto state = params.zero_state();
  while (!env.done()) {
    const auto feats = policy::extract_features(scorer, env.observation(),
                                                params.options.feature_mode);
    const auto bb = net::forward(params.backbone, params.backbone_p, feats, &state);
    state = bb.state;
    const auto logits = net::forward(params.actor, params.actor_p, bb.output, nullptr);
    const int idx = static_cast<int>(
        std::max_element(logits.output.begin(), logits.output.end()) -
        logits.output.begin());
    env.step(static_cast<Action>(idx), kFrozenZeta);
  }
  return env.transcript();
}

void ImitationPolicy::save(const std::string& path, const std::string& meta_json) const {
  nlohmann::json h;
  h["type"] = "imitation";
  h["backbone"] = nlohmann::json::parse(ckpt::spec_to_json(backbone));
  h["actor"] = nlohmann::json::parse(ckpt::spec_to_json(actor));
  h["meta"] = nlohmann::json::parse(meta_json);
  ckpt::save_checkpoint(path, h.dump(),
                        {std::span<const double>(backbone_p),
                         std::span<const double>(actor_p)});
}

ImitationPolicy ImitationPolicy::load(const std::string& path) {
  const auto c = ckpt::load_checkpoint(path);
  const auto h = nlohmann::json::parse(c.header_json);
  if (h.at("type") != "imitation")
    throw std::runtime_error("not an imitation checkpoint: " + path);
  ImitationPolicy p;
  p.backbone = ckpt::spec_from_json(h.at("backbone").dump());
  p.actor = ckpt::spec_from_json(h.at("actor").dump());
  p.backbone_p = c.sections.at(0);
  p.actor_p = c.sections.at(1);
  return p;
}

}  // namespace autophoto::baselines
