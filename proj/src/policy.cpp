#include "autophoto/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "autophoto/checkpoint.hpp"

namespace autophoto::policy {

using nlohmann::json;
using pomdp::Action;

int feature_dim(FeatureMode mode) {
  return mode == FeatureMode::Multilayer ? aes::kFeatureDims : 32;
}

std::vector<double> extract_features(const aes::ScorerParams& scorer,
                                     const scene::ViewObservation& view,
                                     FeatureMode mode) {
  return mode == FeatureMode::Multilayer ? aes::multilayer_features(scorer, view)
                                         : aes::last_layer_features(scorer, view);
}

std::vector<Action> full_action_set() {
  std::vector<Action> a(pomdp::kNumActions);
  for (int i = 0; i < pomdp::kNumActions; ++i) a[i] = static_cast<Action>(i);
  return a;
}

std::string PPOConfig::to_json() const {
  json j;
  j["gamma"] = gamma;
  j["gae_lambda"] = gae_lambda;
  j["clip"] = clip;
  j["epochs"] = epochs;
  j["minibatch"] = minibatch;
  j["lr"] = lr;
  j["entropy_coeff"] = entropy_coeff;
  j["value_coeff"] = value_coeff;
  j["horizon"] = horizon;
  j["n_envs"] = n_envs;
  j["scene_switch_every"] = scene_switch_every;
  j["total_steps"] = total_steps;
  return j.dump();
}

PPOConfig PPOConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  PPOConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.gae_lambda = j.at("gae_lambda").get<double>();
  c.clip = j.at("clip").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.minibatch = j.at("minibatch").get<int>();
  c.lr = j.at("lr").get<double>();
  c.entropy_coeff = j.at("entropy_coeff").get<double>();
  c.value_coeff = j.at("value_coeff").get<double>();
  c.horizon = j.at("horizon").get<int>();
  c.n_envs = j.at("n_envs").get<int>();
  c.scene_switch_every = j.at("scene_switch_every").get<int>();
  c.total_steps = j.at("total_steps").get<long long>();
  return c;
}

PolicyParams PolicyParams::init(const PolicyOptions& options, std::uint64_t seed) {
  PolicyParams p;
  p.options = options;
  const int f = feature_dim(options.feature_mode);
  const int h = options.hidden;
  if (options.use_lstm)
    p.backbone.layers = {net::dense(f, h, net::Activation::Tanh), net::lstm_cell(h, h)};
  else
    p.backbone.layers = {net::dense(f, h, net::Activation::Tanh),
                         net::dense(h, h, net::Activation::Tanh)};
  p.actor.layers = {net::dense(h, static_cast<int>(options.action_set.size()),
                               net::Activation::Identity)};
  p.critic.layers = {net::dense(h, 1, net::Activation::Identity)};
  p.backbone.validate();

  p.backbone_p.resize(p.backbone.param_count());
  p.actor_p.resize(p.actor.param_count());
  p.critic_p.resize(p.critic.param_count());
  Rng rng(derive_seed(seed, 0x901cULL));
  net::init_params(p.backbone, rng, p.backbone_p);
  net::init_params(p.actor, rng, p.actor_p);
  net::init_params(p.critic, rng, p.critic_p);
  // small actor head keeps the initial policy near uniform
  for (auto& w : p.actor_p) w *= 0.01;
  return p;
}

namespace {

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace

ActResult act(const PolicyParams& params, std::span<const double> features,
              const net::RecurrentState& state, bool greedy, Rng* rng) {
  for (double f : features)
    if (!std::isfinite(f)) throw std::invalid_argument("act: non-finite features");

  const auto bb = net::forward(params.backbone, params.backbone_p, features, &state);
  const auto logits = net::forward(params.actor, params.actor_p, bb.output, nullptr);
  const auto val = net::forward(params.critic, params.critic_p, bb.output, nullptr);

  ActResult res;
  res.probs = softmax(logits.output);
  res.value = val.output[0];
  res.state = bb.state;
  if (greedy) {
    res.action_index = static_cast<int>(
        std::max_element(res.probs.begin(), res.probs.end()) - res.probs.begin());
  } else {
    const double u = rng->uniform();
    double acc = 0.0;
    res.action_index = static_cast<int>(res.probs.size()) - 1;
    for (std::size_t i = 0; i < res.probs.size(); ++i) {
      acc += res.probs[i];
      if (u < acc) {
        res.action_index = static_cast<int>(i);
        break;
      }
    }
  }
  res.log_prob = std::log(std::max(res.probs[res.action_index], 1e-300));
  return res;
}

void RolloutBuffer::resize(int envs, int hor, int fdim, int hid) {
  n_envs = envs;
  horizon = hor;
  feat_dim = fdim;
  hidden = hid;
  const std::size_t n = static_cast<std::size_t>(envs) * hor;
  features.assign(n * fdim, 0.0);
  h0.assign(n * hid, 0.0);
  c0.assign(n * hid, 0.0);
  actions.assign(n, 0);
  logp.assign(n, 0.0);
  rewards.assign(n, 0.0);
  values.assign(n, 0.0);
  dones.assign(n, 0);
  episode_starts.assign(n, 0);
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  bootstrap.assign(envs, 0.0);
}

void gae_advantages(RolloutBuffer& b, double gamma, double gae_lambda) {
  for (int e = 0; e < b.n_envs; ++e) {
    double carry = 0.0;
    for (int t = b.horizon - 1; t >= 0; --t) {
      const int i = e * b.horizon + t;
      const double nonterm = b.dones[i] ? 0.0 : 1.0;
      const double next_v =
          (t == b.horizon - 1) ? b.bootstrap[e] : b.values[i + 1];
      const double delta = b.rewards[i] + gamma * next_v * nonterm - b.values[i];
      carry = delta + gamma * gae_lambda * nonterm * carry;
      b.advantages[i] = carry;
      b.returns[i] = carry + b.values[i];
    }
  }
}

RolloutBuffer collect_rollouts(std::vector<EnvSlot>& envs, const PolicyParams& params,
                               const aes::ScorerParams& scorer, int horizon,
                               long long& zeta, Rng& rng,
                               std::vector<EpisodeStat>* stats_out) {
  const int n_envs = static_cast<int>(envs.size());
  const int fdim = feature_dim(params.options.feature_mode);
  RolloutBuffer buf;
  buf.resize(n_envs, horizon, fdim, params.backbone.hidden_size());

  std::vector<double> ep_reward(n_envs, 0.0);
  std::vector<int> ep_len(n_envs, 0);
  std::vector<std::uint8_t> fresh(n_envs, 0);
  for (int e = 0; e < n_envs; ++e) fresh[e] = envs[e].env.steps_taken() == 0;

  for (int t = 0; t < horizon; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      auto& slot = envs[e];
      const int i = e * horizon + t;
      std::copy(slot.feats.begin(), slot.feats.end(),
                buf.features.begin() + static_cast<std::size_t>(i) * fdim);
      if (buf.hidden > 0) {
        std::copy(slot.state.h.begin(), slot.state.h.end(),
                  buf.h0.begin() + static_cast<std::size_t>(i) * buf.hidden);
        std::copy(slot.state.c.begin(), slot.state.c.end(),
                  buf.c0.begin() + static_cast<std::size_t>(i) * buf.hidden);
      }
      buf.episode_starts[i] = fresh[e];
      fresh[e] = 0;

      const auto a = act(params, slot.feats, slot.state, false, &rng);
      slot.state = a.state;
      const auto sr = slot.env.step(params.options.action_set[a.action_index], zeta);
      ++zeta;

      buf.actions[i] = a.action_index;
      buf.logp[i] = a.log_prob;
      buf.values[i] = a.value;
      buf.rewards[i] = sr.reward;
      buf.dones[i] = sr.done ? 1 : 0;
      ep_reward[e] += sr.reward;
      ++ep_len[e];

      if (sr.done) {
        if (stats_out)
          stats_out->push_back({ep_reward[e], ep_len[e],
                                slot.env.transcript().final_phi > slot.env.transcript().tau});
        ep_reward[e] = 0.0;
        ep_len[e] = 0;
        ++slot.episodes_done;
        ++slot.episodes_since_switch;
        slot.env.reset(rng.next_u64());
        slot.state = params.zero_state();
        fresh[e] = 1;
      }
      slot.feats = extract_features(scorer, slot.env.observation(),
                                    params.options.feature_mode);
    }
  }
  // bootstrap values for truncated episodes
  for (int e = 0; e < n_envs; ++e) {
    const int last = e * horizon + horizon - 1;
    if (buf.dones[last]) {
      buf.bootstrap[e] = 0.0;
    } else {
      const auto a = act(params, envs[e].feats, envs[e].state, true, nullptr);
      buf.bootstrap[e] = a.value;
    }
  }
  return buf;
}

void PolicyGrads::zero() {
  std::fill(backbone.begin(), backbone.end(), 0.0);
  std::fill(actor.begin(), actor.end(), 0.0);
  std::fill(critic.begin(), critic.end(), 0.0);
}

double ppo_loss_grad(const PolicyParams& params, const RolloutBuffer& buffer,
                     const PPOConfig& config, std::span<const SeqRef> seqs,
                     double adv_mean, double adv_std, PolicyGrads& grads,
                     UpdateStats* stats) {
  const int hid = buffer.hidden;
  int total_steps = 0;
  for (const auto& s : seqs) total_steps += s.len;
  if (total_steps == 0) return 0.0;
  const double scale = 1.0 / total_steps;

  double loss_sum = 0.0, ploss_sum = 0.0, vloss_sum = 0.0, ent_sum = 0.0;
  int clipped = 0;

  for (const auto& seq : seqs) {
    std::vector<net::Tape> bb_tapes(seq.len), actor_tapes(seq.len), critic_tapes(seq.len);
    std::vector<std::vector<double>> dlogits(seq.len);
    std::vector<double> dvalue(seq.len, 0.0);

    net::RecurrentState state = params.zero_state();
    const int i0 = seq.env * buffer.horizon + seq.t0;
    if (hid > 0 && !buffer.episode_starts[i0]) {
      std::copy_n(buffer.h0.begin() + static_cast<std::size_t>(i0) * hid, hid,
                  state.h.begin());
      std::copy_n(buffer.c0.begin() + static_cast<std::size_t>(i0) * hid, hid,
                  state.c.begin());
    }

    for (int k = 0; k < seq.len; ++k) {
      const int i = i0 + k;
      if (k > 0 && buffer.episode_starts[i]) state = params.zero_state();
      const std::span<const double> feats(
          buffer.features.data() + static_cast<std::size_t>(i) * buffer.feat_dim,
          buffer.feat_dim);
      const auto bb =
          net::forward(params.backbone, params.backbone_p, feats, &state, &bb_tapes[k]);
      state = bb.state;
      const auto logits = net::forward(params.actor, params.actor_p, bb.output,
                                       nullptr, &actor_tapes[k]);
      const auto val = net::forward(params.critic, params.critic_p, bb.output,
                                    nullptr, &critic_tapes[k]);

      const auto probs = softmax(logits.output);
      const int a = buffer.actions[i];
      const double lp_new = std::log(std::max(probs[a], 1e-300));
      const double ratio = std::exp(lp_new - buffer.logp[i]);
      const double adv = (buffer.advantages[i] - adv_mean) / adv_std;

      const double unclipped = ratio * adv;
      const double rclip = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
      const double clippedv = rclip * adv;
      const double surr = -std::min(unclipped, clippedv);
      if (std::abs(ratio - 1.0) > config.clip) ++clipped;

      double entropy = 0.0;
      for (double p : probs)
        if (p > 0.0) entropy -= p * std::log(p);

      const double v = val.output[0];
      const double verr = v - buffer.returns[i];
      const double vloss = config.value_coeff * verr * verr;

      loss_sum += surr + vloss - config.entropy_coeff * entropy;
      ploss_sum += surr;
      vloss_sum += verr * verr;
      ent_sum += entropy;

      // d loss / d logits
      std::vector<double> dl(probs.size(), 0.0);
      const bool active = unclipped <= clippedv;  // min picks the unclipped branch
      if (active) {
        const double dsurr_dlp = -ratio * adv;
        for (std::size_t j = 0; j < probs.size(); ++j)
          dl[j] += dsurr_dlp * ((static_cast<int>(j) == a ? 1.0 : 0.0) - probs[j]);
      }
      for (std::size_t j = 0; j < probs.size(); ++j)
        dl[j] += config.entropy_coeff * probs[j] * (std::log(std::max(probs[j], 1e-300)) + entropy);
      for (auto& g : dl) g *= scale;
      dlogits[k] = std::move(dl);
      dvalue[k] = scale * config.value_coeff * 2.0 * verr;
    }

    // backward through time
    net::RecurrentState carry;  // empty = no incoming state gradient
    for (int k = seq.len - 1; k >= 0; --k) {
      const int i = i0 + k;
      const auto da = net::backward(params.actor, params.actor_p, actor_tapes[k],
                                    dlogits[k], nullptr, grads.actor);
      const double dv[1] = {dvalue[k]};
      const auto dc = net::backward(params.critic, params.critic_p, critic_tapes[k],
                                    dv, nullptr, grads.critic);
      std::vector<double> dh(da.input_grad.size());
      for (std::size_t j = 0; j < dh.size(); ++j)
        dh[j] = da.input_grad[j] + dc.input_grad[j];

      const auto db = net::backward(params.backbone, params.backbone_p, bb_tapes[k],
                                    dh, carry.empty() ? nullptr : &carry,
                                    grads.backbone);
      carry = db.state_grad;
      if (buffer.episode_starts[i]) carry = {};  // no flow across episode resets
    }
  }

  if (stats) {
    stats->policy_loss = ploss_sum * scale;
    stats->value_loss = vloss_sum * scale;
    stats->entropy = ent_sum * scale;
    stats->clip_fraction = static_cast<double>(clipped) / total_steps;
  }
  const double total = loss_sum * scale;
  if (!std::isfinite(total)) throw std::runtime_error("ppo: non-finite loss");
  return total;
}

UpdateStats ppo_update(PolicyParams& params, const RolloutBuffer& buffer,
                       const PPOConfig& config, PolicyAdam& adam, Rng& rng) {
  const int n = buffer.size();
  double mean = 0.0;
  for (double a : buffer.advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : buffer.advantages) var += (a - mean) * (a - mean);
  const double std_ = std::sqrt(var / n) + 1e-8;

  std::vector<SeqRef> seqs;
  const int seq_len = config.minibatch;
  for (int e = 0; e < buffer.n_envs; ++e)
    for (int t0 = 0; t0 < buffer.horizon; t0 += seq_len)
      seqs.push_back({e, t0, std::min(seq_len, buffer.horizon - t0)});

  PolicyGrads grads(params);
  UpdateStats agg{};
  int nb = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the run's rng keeps updates deterministic
    for (int i = static_cast<int>(seqs.size()) - 1; i > 0; --i)
      std::swap(seqs[i], seqs[rng.index(i + 1)]);
    for (const auto& seq : seqs) {
      grads.zero();
      UpdateStats st{};
      ppo_loss_grad(params, buffer, config, {&seq, 1}, mean, std_, grads, &st);
      net::adam_step(params.backbone_p, grads.backbone, adam.backbone, config.lr);
      net::adam_step(params.actor_p, grads.actor, adam.actor, config.lr);
      net::adam_step(params.critic_p, grads.critic, adam.critic, config.lr);
      agg.policy_loss += st.policy_loss;
      agg.value_loss += st.value_loss;
      agg.entropy += st.entropy;
      agg.clip_fraction += st.clip_fraction;
      ++nb;
    }
  }
  if (nb > 0) {
    agg.policy_loss /= nb;
    agg.value_loss /= nb;
    agg.entropy /= nb;
    agg.clip_fraction /= nb;
  }
  return agg;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream ss;
  ss << "update,env_steps,mean_reward,capture_acc,mean_len,policy_loss,value_loss,entropy\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.update,
                  r.env_steps, r.mean_reward, r.capture_acc, r.mean_len, r.policy_loss,
                  r.value_loss, r.entropy);
    ss << buf;
  }
  return ss.str();
}

TrainAgentResult train_agent(const std::vector<const scene::SceneSpec*>& pool,
                             const aes::ScorerParams& scorer,
                             const TrainAgentConfig& config, std::uint64_t seed) {
  if (pool.empty()) throw std::invalid_argument("train_agent: need at least one scene");

  TrainAgentResult res;
  res.params = PolicyParams::init(config.options, derive_seed(seed, 1));
  PolicyAdam adam(res.params);
  Rng rng(derive_seed(seed, 2));
  Rng scene_rng(derive_seed(seed, 3));

  pomdp::EpisodeConfig ep_cfg = config.episode;
  ep_cfg.resample_low_init = true;

  pomdp::ViewSampleCache cache;
  std::vector<EnvSlot> envs;
  envs.reserve(config.ppo.n_envs);
  for (int e = 0; e < config.ppo.n_envs; ++e) {
    const auto* sc = pool[scene_rng.index(static_cast<int>(pool.size()))];
    envs.push_back({pomdp::Environment(*sc, scorer, ep_cfg, &cache),
                    res.params.zero_state(), {}, 0, 0});
    envs.back().env.reset(rng.next_u64());
    envs.back().feats = extract_features(scorer, envs.back().env.observation(),
                                         config.options.feature_mode);
  }

  long long zeta = 0;
  const long long steps_per_update =
      static_cast<long long>(config.ppo.n_envs) * config.ppo.horizon;
  const long long n_updates =
      std::max(1LL, config.ppo.total_steps / steps_per_update);

  for (long long u = 0; u < n_updates; ++u) {
    std::vector<EpisodeStat> stats;
    auto buffer = collect_rollouts(envs, res.params, scorer, config.ppo.horizon, zeta,
                                   rng, &stats);
    gae_advantages(buffer, config.ppo.gamma, config.ppo.gae_lambda);
    // linear lr decay keeps late updates from destabilizing the policy
    PPOConfig upd = config.ppo;
    upd.lr = config.ppo.lr * (1.0 - static_cast<double>(u) / n_updates);
    const auto us = ppo_update(res.params, buffer, upd, adam, rng);

    MetricsRow row;
    row.update = static_cast<int>(u);
    row.env_steps = zeta;
    if (!stats.empty()) {
      for (const auto& s : stats) {
        row.mean_reward += s.total_reward;
        row.capture_acc += s.success ? 1.0 : 0.0;
        row.mean_len += s.length;
      }
      row.mean_reward /= stats.size();
      row.capture_acc /= stats.size();
      row.mean_len /= stats.size();
    }
    row.policy_loss = us.policy_loss;
    row.value_loss = us.value_loss;
    row.entropy = us.entropy;
    res.metrics.push_back(row);

    // scene swap after every scene_switch_every episodes per env
    for (auto& slot : envs) {
      if (slot.episodes_since_switch >= config.ppo.scene_switch_every) {
        slot.episodes_since_switch = 0;
        const auto* sc = pool[scene_rng.index(static_cast<int>(pool.size()))];
        slot.env.switch_scene(*sc);
        slot.env.reset(rng.next_u64());
        slot.state = res.params.zero_state();
        slot.feats = extract_features(scorer, slot.env.observation(),
                                      config.options.feature_mode);
      }
    }
  }
  res.zeta = zeta;
  return res;
}

pomdp::EpisodeTranscript run_greedy_episode(pomdp::Environment& env,
                                            const PolicyParams& params,
                                            const aes::ScorerParams& scorer,
                                            long long zeta_frozen) {
  auto state = params.zero_state();
  while (!env.done()) {
    const auto feats =
        extract_features(scorer, env.observation(), params.options.feature_mode);
    const auto a = act(params, feats, state, true, nullptr);
    state = a.state;
    env.step(params.options.action_set[a.action_index], zeta_frozen);
  }
  return env.transcript();
}

namespace {

json options_to_json(const PolicyOptions& o) {
  json j;
  j["feature_mode"] = o.feature_mode == FeatureMode::Multilayer ? "multilayer" : "last_layer";
  j["use_lstm"] = o.use_lstm;
  j["hidden"] = o.hidden;
  json acts = json::array();
  for (auto a : o.action_set) acts.push_back(pomdp::action_name(a));
  j["action_set"] = acts;
  return j;
}

PolicyOptions options_from_json(const json& j) {
  PolicyOptions o;
  o.feature_mode = j.at("feature_mode") == "multilayer" ? FeatureMode::Multilayer
                                                        : FeatureMode::LastLayer;
  o.use_lstm = j.at("use_lstm").get<bool>();
  o.hidden = j.at("hidden").get<int>();
  o.action_set.clear();
  for (const auto& a : j.at("action_set"))
    o.action_set.push_back(pomdp::action_from_name(a.get<std::string>()));
  return o;
}

}  // namespace

void PolicyParams::save(const std::string& path, const std::string& meta_json) const {
  json h;
  h["type"] = "policy";
  h["backbone"] = json::parse(ckpt::spec_to_json(backbone));
  h["actor"] = json::parse(ckpt::spec_to_json(actor));
  h["critic"] = json::parse(ckpt::spec_to_json(critic));
  h["options"] = options_to_json(options);
  h["meta"] = json::parse(meta_json);
  ckpt::save_checkpoint(path, h.dump(),
                        {std::span<const double>(backbone_p),
                         std::span<const double>(actor_p),
                         std::span<const double>(critic_p)});
}

PolicyParams PolicyParams::load(const std::string& path) {
  const auto c = ckpt::load_checkpoint(path);
  const auto h = json::parse(c.header_json);
  if (h.at("type") != "policy") throw std::runtime_error("not a policy checkpoint: " + path);
  PolicyParams p;
  p.backbone = ckpt::spec_from_json(h.at("backbone").dump());
  p.actor = ckpt::spec_from_json(h.at("actor").dump());
  p.critic = ckpt::spec_from_json(h.at("critic").dump());
  p.options = options_from_json(h.at("options"));
  p.backbone_p = c.sections.at(0);
  p.actor_p = c.sections.at(1);
  p.critic_p = c.sections.at(2);
  if (p.backbone_p.size() != p.backbone.param_count() ||
      p.actor_p.size() != p.actor.param_count() ||
      p.critic_p.size() != p.critic.param_count())
    throw std::runtime_error("policy checkpoint: parameter count mismatch");
  return p;
}

}  // namespace autophoto::policy
