#include "autophoto/aesthetics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "autophoto/checkpoint.hpp"

namespace autophoto::aes {

using scene::Pose;
using scene::SceneSpec;
using scene::ViewObservation;

net::NetSpec ScorerParams::default_spec() {
  net::NetSpec s;
  s.layers = {net::dense(ViewObservation::kDims, 64, net::Activation::Tanh),
              net::dense(64, 64, net::Activation::Tanh),
              net::dense(64, 32, net::Activation::Tanh),
              net::dense(32, 1, net::Activation::Identity)};
  return s;
}

ScorerParams ScorerParams::init(std::uint64_t seed) {
  ScorerParams p;
  p.spec = default_spec();
  p.params.resize(p.spec.param_count());
  Rng rng(splitmix64(seed ^ 0x5c0e7eULL));
  net::init_params(p.spec, rng, p.params);
  return p;
}

void ScorerParams::save(const std::string& path, const std::string& meta_json) const {
  nlohmann::json h;
  h["type"] = "scorer";
  h["spec"] = nlohmann::json::parse(ckpt::spec_to_json(spec));
  h["meta"] = nlohmann::json::parse(meta_json);
  ckpt::save_checkpoint(path, h.dump(), {std::span<const double>(params)});
}

ScorerParams ScorerParams::load(const std::string& path) {
  const auto c = ckpt::load_checkpoint(path);
  const auto h = nlohmann::json::parse(c.header_json);
  if (h.at("type") != "scorer") throw std::runtime_error("not a scorer checkpoint: " + path);
  ScorerParams p;
  p.spec = ckpt::spec_from_json(h.at("spec").dump());
  p.params = c.sections.at(0);
  if (p.params.size() != p.spec.param_count())
    throw std::runtime_error("scorer checkpoint: parameter count mismatch");
  return p;
}

double score(const ScorerParams& scorer, const ViewObservation& view) {
  const auto in = view.flatten();
  return net::forward(scorer.spec, scorer.params, in, nullptr).output[0];
}

double rank_loss(double score_hi, double score_lo) {
  return std::max(0.0, score_lo - score_hi + 1.0);
}

namespace {

// forward with tape and backprop a scalar output gradient into grad
double score_grad(const ScorerParams& scorer, const ViewObservation& view,
                  double dscore, std::span<double> grad) {
  const auto in = view.flatten();
  net::Tape tape;
  const auto out = net::forward(scorer.spec, scorer.params, in, nullptr, &tape);
  if (dscore != 0.0 && !grad.empty()) {
    const double dout[1] = {dscore};
    net::backward(scorer.spec, scorer.params, tape, dout, nullptr, grad);
  }
  return out.output[0];
}

struct RobustDraw {
  Pose jittered;
  bool jitter_ok;
  double exposure;
};

RobustDraw draw_robust(const SceneSpec& sc, const Pose& pose,
                       const RobustnessConfig& cfg, Rng& rng) {
  RobustDraw d;
  d.jittered = pose;
  d.jittered.x += rng.uniform(-cfg.jitter_translation, cfg.jitter_translation);
  d.jittered.y += rng.uniform(-cfg.jitter_translation, cfg.jitter_translation);
  d.jittered.theta = scene::wrap_angle(
      d.jittered.theta + rng.uniform(-cfg.jitter_rotation, cfg.jitter_rotation));
  d.jitter_ok = sc.navigable_point(d.jittered.x, d.jittered.y);
  if (!d.jitter_ok) d.jittered = pose;
  d.exposure = rng.uniform() < 0.5 ? cfg.over_exposure : cfg.under_exposure;
  return d;
}

// Shared by the loss-only and gradient paths so both consume the same draws.
double robust_loss_impl(const ScorerParams& scorer, const SceneSpec& sc,
                        const Pose& pose, const ViewObservation& view,
                        const RobustnessConfig& cfg, Rng& rng,
                        std::span<double> grad, double outer_weight) {
  const RobustDraw d = draw_robust(sc, pose, cfg, rng);
  const ViewObservation jit_view = scene::render_view(sc, d.jittered, view.brightness);
  ViewObservation expo_view = view;
  expo_view.brightness = d.exposure;

  const bool with_grad = !grad.empty();
  const double phi_s = with_grad ? score_grad(scorer, view, 0.0, {})
                                 : score(scorer, view);
  const double phi_j = with_grad ? score_grad(scorer, jit_view, 0.0, {})
                                 : score(scorer, jit_view);
  const double phi_e = with_grad ? score_grad(scorer, expo_view, 0.0, {})
                                 : score(scorer, expo_view);

  const double l_sim = 0.5 * (phi_s - phi_j) * (phi_s - phi_j);
  const double l_expo = rank_loss(phi_s, phi_e);
  const double total = cfg.lambda_sim * l_sim + cfg.lambda_expo * l_expo;

  if (with_grad) {
    double d_s = outer_weight * cfg.lambda_sim * (phi_s - phi_j);
    double d_j = -outer_weight * cfg.lambda_sim * (phi_s - phi_j);
    double d_e = 0.0;
    if (phi_e - phi_s + 1.0 > 0.0) {
      d_s += -outer_weight * cfg.lambda_expo;
      d_e += outer_weight * cfg.lambda_expo;
    }
    score_grad(scorer, view, d_s, grad);
    score_grad(scorer, jit_view, d_j, grad);
    score_grad(scorer, expo_view, d_e, grad);
  }
  return total;
}

}  // namespace

double robust_loss(const ScorerParams& scorer, const SceneSpec& sc,
                   const Pose& pose, const ViewObservation& view,
                   const RobustnessConfig& config, Rng rng) {
  return robust_loss_impl(scorer, sc, pose, view, config, rng, {}, 1.0);
}

double total_loss(const ScorerParams& scorer, const PreferencePair& pair,
                  const RobustnessConfig& config, Rng rng) {
  const bool pick_winner = rng.uniform() < 0.5;
  const double phi_w = score(scorer, pair.winner);
  const double phi_l = score(scorer, pair.loser);
  const double l_rank = rank_loss(phi_w, phi_l);
  const double l_rob = robust_loss_impl(
      scorer, *pair.scene, pick_winner ? pair.winner_pose : pair.loser_pose,
      pick_winner ? pair.winner : pair.loser, config, rng, {}, 1.0);
  return config.lambda * l_rank + (1.0 - config.lambda) * l_rob;
}

double total_loss_grad(const ScorerParams& scorer, const PreferencePair& pair,
                       const RobustnessConfig& config, Rng rng,
                       std::span<double> grad) {
  const bool pick_winner = rng.uniform() < 0.5;
  const double phi_w = score(scorer, pair.winner);
  const double phi_l = score(scorer, pair.loser);
  const double l_rank = rank_loss(phi_w, phi_l);
  if (l_rank > 0.0) {
    score_grad(scorer, pair.winner, -config.lambda, grad);
    score_grad(scorer, pair.loser, config.lambda, grad);
  }
  const double l_rob = robust_loss_impl(
      scorer, *pair.scene, pick_winner ? pair.winner_pose : pair.loser_pose,
      pick_winner ? pair.winner : pair.loser, config, rng, grad,
      1.0 - config.lambda);
  return config.lambda * l_rank + (1.0 - config.lambda) * l_rob;
}

std::vector<double> multilayer_features(const ScorerParams& scorer,
                                        const ViewObservation& view) {
  const auto in = view.flatten();
  net::Tape tape;
  net::forward(scorer.spec, scorer.params, in, nullptr, &tape);
  std::vector<double> feats;
  feats.reserve(kFeatureDims);
  for (int li = 0; li < 3; ++li)
    feats.insert(feats.end(), tape.layers[li].out.begin(), tape.layers[li].out.end());
  return feats;
}

std::vector<double> last_layer_features(const ScorerParams& scorer,
                                        const ViewObservation& view) {
  const auto in = view.flatten();
  net::Tape tape;
  net::forward(scorer.spec, scorer.params, in, nullptr, &tape);
  return tape.layers[2].out;
}

namespace {

bool draw_pair(const SceneSpec& sc, double min_gap, Rng& rng, PreferencePair& out) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    const auto views = scene::sample_views(sc, 2, rng.next_u64());
    const double s0 = scene::true_aesthetic(sc, views[0].first);
    const double s1 = scene::true_aesthetic(sc, views[1].first);
    if (std::abs(s0 - s1) < min_gap) continue;
    const int w = s0 > s1 ? 0 : 1;
    out.scene = &sc;
    out.winner_pose = views[w].first;
    out.loser_pose = views[1 - w].first;
    out.winner = views[w].second;
    out.loser = views[1 - w].second;
    out.margin = std::abs(s0 - s1);
    return true;
  }
  return false;
}

}  // namespace

TrainScorerResult train_scorer(const std::vector<const SceneSpec*>& scenes,
                               const TrainScorerConfig& config, std::uint64_t seed) {
  if (scenes.empty()) throw std::invalid_argument("train_scorer: need at least one scene");
  if (config.iters < 0) throw std::invalid_argument("train_scorer: negative iteration count");

  TrainScorerResult res;
  res.scorer = ScorerParams::init(derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  auto adam = net::AdamState::zero(res.scorer.params.size());
  std::vector<double> grad(res.scorer.params.size());

  for (long long it = 0; it < config.iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    int used = 0;
    for (int b = 0; b < config.batch_size; ++b) {
      const SceneSpec& sc = *scenes[rng.index(static_cast<int>(scenes.size()))];
      PreferencePair pair;
      if (!draw_pair(sc, config.ambiguous_gap, rng, pair)) continue;
      loss += total_loss_grad(res.scorer, pair, config.robustness,
                              rng.split(0x9a1b), grad);
      ++used;
    }
    if (used == 0) continue;
    const double inv = 1.0 / used;
    for (auto& g : grad) g *= inv;
    net::adam_step(res.scorer.params, grad, adam, config.lr);
    if (it % 200 == 0 || it + 1 == config.iters)
      res.log.push_back({it, loss * inv});
  }
  return res;
}

EvalScorerReport eval_scorer(const ScorerParams& scorer,
                             const std::vector<const SceneSpec*>& scenes,
                             std::uint64_t seed, const RobustnessConfig& config,
                             int pairs_per_scene) {
  EvalScorerReport rep;
  double pair_ok = 0.0;
  long long pair_n = 0, expo_ok = 0, expo_n = 0;
  double jitter_sq = 0.0;
  long long jitter_n = 0;

  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const SceneSpec& sc = *scenes[si];
    Rng rng(derive_seed(seed, 0xe7a1, si));
    for (int p = 0; p < pairs_per_scene; ++p) {
      PreferencePair pair;
      if (!draw_pair(sc, 0.2, rng, pair)) continue;
      const double phi_w = score(scorer, pair.winner);
      const double phi_l = score(scorer, pair.loser);
      if (phi_w > phi_l)
        pair_ok += 1.0;
      else if (phi_w == phi_l)  // exact tie counts as chance
        pair_ok += 0.5;
      ++pair_n;

      // exposure: well exposed should beat both corruptions
      for (double mult : {config.over_exposure, config.under_exposure}) {
        ViewObservation bad = pair.winner;
        bad.brightness = mult;
        if (phi_w > score(scorer, bad)) ++expo_ok;
        ++expo_n;
      }

      const RobustDraw d = draw_robust(sc, pair.winner_pose, config, rng);
      const double phi_j =
          score(scorer, scene::render_view(sc, d.jittered, pair.winner.brightness));
      jitter_sq += (phi_w - phi_j) * (phi_w - phi_j);
      ++jitter_n;
    }
  }
  rep.pairs = static_cast<int>(pair_n);
  rep.pair_accuracy = pair_n ? pair_ok / pair_n : 0.0;
  rep.exposure_accuracy = expo_n ? static_cast<double>(expo_ok) / expo_n : 0.0;
  rep.jitter_mse = jitter_n ? jitter_sq / jitter_n : 0.0;
  return rep;
}

std::string EvalScorerReport::csv_row(const std::string& scene_set) const {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << scene_set << "," << pair_accuracy << "," << exposure_accuracy
     << "," << jitter_mse << "\n";
  return ss.str();
}

}  // namespace autophoto::aes
