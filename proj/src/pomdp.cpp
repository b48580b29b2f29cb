#include "autophoto/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace autophoto::pomdp {

using scene::Pose;
using scene::SceneSpec;

namespace {
constexpr double kDeg = scene::kPi / 180.0;
}

const char* action_name(Action a) {
  switch (a) {
    case Action::Forward: return "FORWARD";
    case Action::Backward: return "BACKWARD";
    case Action::TurnL10: return "TURN_L10";
    case Action::TurnL30: return "TURN_L30";
    case Action::TurnL90: return "TURN_L90";
    case Action::TurnR10: return "TURN_R10";
    case Action::TurnR30: return "TURN_R30";
    case Action::TurnR90: return "TURN_R90";
    case Action::Capture: return "CAPTURE";
  }
  return "?";
}

Action action_from_name(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i)
    if (name == action_name(static_cast<Action>(i))) return static_cast<Action>(i);
  throw std::invalid_argument("unknown action: " + name);
}

bool is_movement(Action a) { return a != Action::Capture; }

Pose apply_action(const Pose& pose, Action a) {
  Pose p = pose;
  switch (a) {
    case Action::Forward:
      p.x += kTranslation * std::cos(p.theta);
      p.y += kTranslation * std::sin(p.theta);
      break;
    case Action::Backward:
      p.x -= kTranslation * std::cos(p.theta);
      p.y -= kTranslation * std::sin(p.theta);
      break;
    case Action::TurnL10: p.theta = scene::wrap_angle(p.theta + 10.0 * kDeg); break;
    case Action::TurnL30: p.theta = scene::wrap_angle(p.theta + 30.0 * kDeg); break;
    case Action::TurnL90: p.theta = scene::wrap_angle(p.theta + 90.0 * kDeg); break;
    case Action::TurnR10: p.theta = scene::wrap_angle(p.theta - 10.0 * kDeg); break;
    case Action::TurnR30: p.theta = scene::wrap_angle(p.theta - 30.0 * kDeg); break;
    case Action::TurnR90: p.theta = scene::wrap_angle(p.theta - 90.0 * kDeg); break;
    case Action::Capture: break;
  }
  return p;
}

double movement_reward(double phi_next, double phi_curr, long long zeta, int t,
                       const EpisodeConfig& config) {
  double r = -config.beta * t;
  if (config.use_score_diff) r += phi_next - phi_curr;
  if (config.use_explore)
    r += config.explore_coeff * std::pow(config.explore_base, static_cast<double>(zeta));
  return r;
}

double capture_reward(double phi_final, double tau) {
  return phi_final > tau ? 1.0 : -1.0;  // strict inequality, ties fail
}

const ViewSampleCache::Entry& ViewSampleCache::get(const SceneSpec& sc,
                                                   const aes::ScorerParams& scorer,
                                                   int n_samples,
                                                   std::uint64_t seed) {
  const auto key = std::make_pair(sc.scene_id, seed);
  auto it = entries_.find(key);
  if (it != entries_.end()) return it->second;
  Entry e;
  const auto views = scene::sample_views(sc, n_samples, seed);
  e.poses.reserve(views.size());
  e.scores.reserve(views.size());
  for (const auto& [pose, obs] : views) {
    e.poses.push_back(pose);
    e.scores.push_back(aes::score(scorer, obs));
  }
  return entries_.emplace(key, std::move(e)).first->second;
}

ThresholdEstimate threshold_from_samples(const std::vector<Pose>& poses,
                                         const std::vector<double>& scores,
                                         const Pose& start_pose, int knn) {
  const int n = static_cast<int>(scores.size());
  if (knn > n) throw std::invalid_argument("threshold: K must not exceed N");

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) {
    const double dx = poses[i].x - start_pose.x;
    const double dy = poses[i].y - start_pose.y;
    d2[i] = dx * dx + dy * dy;
  }
  // ties in distance broken by sample index
  std::partial_sort(idx.begin(), idx.begin() + knn, idx.end(), [&](int a, int b) {
    if (d2[a] != d2[b]) return d2[a] < d2[b];
    return a < b;
  });

  ThresholdEstimate est;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < knn; ++i) {
    const double s = scores[idx[i]];
    sum += s;
    sum2 += s * s;
  }
  est.mu = sum / knn;
  est.sigma = std::sqrt(std::max(0.0, sum2 / knn - est.mu * est.mu));
  est.tau = est.mu + est.sigma;

  double asum = 0.0, asum2 = 0.0;
  for (double s : scores) {
    asum += s;
    asum2 += s * s;
  }
  est.scene_mu = asum / n;
  est.scene_sigma = std::sqrt(std::max(0.0, asum2 / n - est.scene_mu * est.scene_mu));
  return est;
}

ThresholdEstimate compute_threshold(const SceneSpec& sc, const Pose& start_pose,
                                    const aes::ScorerParams& scorer,
                                    const EpisodeConfig& config, std::uint64_t seed,
                                    ViewSampleCache* cache) {
  ViewSampleCache local;
  ViewSampleCache& c = cache ? *cache : local;
  const auto& entry = c.get(sc, scorer, config.n_samples, seed);
  return threshold_from_samples(entry.poses, entry.scores, start_pose, config.knn);
}

Environment::Environment(const SceneSpec& sc, const aes::ScorerParams& scorer,
                         EpisodeConfig config, ViewSampleCache* cache)
    : scene_(&sc),
      scorer_(&scorer),
      config_(std::move(config)),
      cache_(cache) {
  if (config_.knn > config_.n_samples)
    throw std::invalid_argument("Environment: K must not exceed N");
}

std::uint64_t Environment::sample_seed() const {
  return derive_seed(scene_->rng_seed, 0x5eedULL, config_.n_samples);
}

void Environment::switch_scene(const SceneSpec& sc) {
  scene_ = &sc;
  done_ = true;
}

scene::ViewObservation Environment::reset(std::uint64_t seed) {
  // fall back to the owned cache lazily so copied environments stay valid
  auto* cache = cache_ ? cache_ : &local_cache_;
  const auto& samples = cache->get(*scene_, *scorer_, config_.n_samples, sample_seed());
  Rng rng(derive_seed(seed, 0x4e5e7ULL));

  pose_ = scene::sample_pose(*scene_, rng);
  phi_ = aes::score(*scorer_, scene::render_view(*scene_, pose_));
  if (config_.resample_low_init) {
    ThresholdEstimate probe =
        threshold_from_samples(samples.poses, samples.scores, pose_, config_.knn);
    const double low = probe.scene_mu - probe.scene_sigma;
    for (int redraws = 0; phi_ < low && redraws < 100; ++redraws) {
      pose_ = scene::sample_pose(*scene_, rng);
      phi_ = aes::score(*scorer_, scene::render_view(*scene_, pose_));
    }
  }
  threshold_ =
      threshold_from_samples(samples.poses, samples.scores, pose_, config_.knn);
  obs_ = scene::render_view(*scene_, pose_);
  t_ = 0;
  done_ = false;
  transcript_ = {};
  transcript_.scene_id = scene_->scene_id;
  transcript_.start_pose = pose_;
  transcript_.start_phi = phi_;
  transcript_.tau = threshold_.tau;
  return obs_;
}

StepResult Environment::step(Action a, long long zeta) {
  if (done_) throw std::logic_error("step: episode already terminated");

  StepResult res;
  const bool forced = t_ >= config_.max_steps;
  if (forced) {
    a = Action::Capture;
    res.forced_capture = true;
  }

  StepRecord rec;
  rec.t = t_;
  rec.zeta = zeta;
  rec.action = a;

  if (a == Action::Capture) {
    rec.pose = pose_;
    rec.phi = phi_;
    rec.reward = capture_reward(phi_, threshold_.tau);
    rec.terminal = true;
    done_ = true;
    transcript_.terminal = true;
    transcript_.final_phi = phi_;
    res.done = true;
    res.reward = rec.reward;
    res.observation = obs_;
  } else {
    Pose next = apply_action(pose_, a);
    if (!scene_->navigable_point(next.x, next.y)) next = pose_;  // blocked: no-op
    const auto next_obs = scene::render_view(*scene_, next);
    const double phi_next = aes::score(*scorer_, next_obs);
    rec.reward = movement_reward(phi_next, phi_, zeta, t_, config_);
    rec.pose = next;
    rec.phi = phi_next;
    pose_ = next;
    obs_ = next_obs;
    phi_ = phi_next;
    res.observation = obs_;
    res.reward = rec.reward;
  }
  transcript_.steps.push_back(rec);
  ++t_;
  return res;
}

double Environment::probe_phi(Action movement) {
  if (!is_movement(movement)) throw std::invalid_argument("probe_phi: movement actions only");
  Pose next = apply_action(pose_, movement);
  if (!scene_->navigable_point(next.x, next.y)) next = pose_;
  ++transcript_.probe_count;
  return aes::score(*scorer_, scene::render_view(*scene_, next));
}

void Environment::teleport(const Pose& pose) {
  if (!scene_->navigable_point(pose.x, pose.y))
    throw std::invalid_argument("teleport: target pose not navigable");
  pose_ = pose;
  obs_ = scene::render_view(*scene_, pose_);
  phi_ = aes::score(*scorer_, obs_);
  ++transcript_.restore_count;
}

std::string EpisodeTranscript::serialize() const {
  std::ostringstream ss;
  char buf[512];
  ss << "autophoto-episode/1\n";
  nlohmann::json meta;
  meta["scene_id"] = scene_id;
  meta["start"] = {start_pose.x, start_pose.y, start_pose.theta};
  meta["start_phi"] = start_phi;
  meta["tau"] = tau;
  meta["terminal"] = terminal;
  meta["final_phi"] = final_phi;
  meta["probes"] = probe_count;
  meta["restores"] = restore_count;
  ss << "meta " << meta.dump() << "\n";
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "step %d %lld %.17g %.17g %.17g %s %.17g %.17g %d %d\n",
                  s.t, s.zeta, s.pose.x, s.pose.y, s.pose.theta,
                  action_name(s.action), s.phi, s.reward, s.terminal ? 1 : 0,
                  s.privileged ? 1 : 0);
    ss << buf;
  }
  return ss.str();
}

EpisodeTranscript EpisodeTranscript::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "autophoto-episode/1")
    throw std::runtime_error("transcript: unknown format tag");
  EpisodeTranscript tr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string rest;
      std::getline(ls, rest);
      const auto meta = nlohmann::json::parse(rest);
      tr.scene_id = meta.at("scene_id").get<int>();
      tr.start_pose = {meta.at("start")[0].get<double>(), meta.at("start")[1].get<double>(),
                       meta.at("start")[2].get<double>()};
      tr.start_phi = meta.at("start_phi").get<double>();
      tr.tau = meta.at("tau").get<double>();
      tr.terminal = meta.at("terminal").get<bool>();
      tr.final_phi = meta.at("final_phi").get<double>();
      tr.probe_count = meta.at("probes").get<int>();
      tr.restore_count = meta.at("restores").get<int>();
    } else if (kind == "step") {
      StepRecord s;
      std::string act;
      int term = 0, priv = 0;
      ls >> s.t >> s.zeta >> s.pose.x >> s.pose.y >> s.pose.theta >> act >> s.phi >>
          s.reward >> term >> priv;
      if (!ls) throw std::runtime_error("transcript: malformed step line");
      s.action = action_from_name(act);
      s.terminal = term != 0;
      s.privileged = priv != 0;
      tr.steps.push_back(s);
    } else {
      throw std::runtime_error("transcript: unknown record kind " + kind);
    }
  }
  return tr;
}

}  // namespace autophoto::pomdp
