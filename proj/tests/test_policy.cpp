#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <vector>

#include "autophoto/policy.hpp"

using namespace autophoto;
using policy::FeatureMode;
using policy::PolicyOptions;
using policy::PolicyParams;
using policy::PPOConfig;
using policy::RolloutBuffer;

namespace {

PolicyOptions tiny_options() {
  PolicyOptions o;
  o.hidden = 16;
  return o;
}

std::vector<double> rand_features(Rng& rng, int n) {
  std::vector<double> f(n);
  for (auto& v : f) v = rng.uniform(-1.0, 1.0);
  return f;
}

// discounted-return oracle for GAE(lambda): direct O(T^2) evaluation of
// the sum of lambda-weighted k-step advantage estimates
void gae_oracle(const RolloutBuffer& b, double gamma, double lam, int e,
                std::vector<double>& adv) {
  const int T = b.horizon;
  adv.assign(T, 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const int i = e * T + t;
    const double not_done = b.dones[i] ? 0.0 : 1.0;
    const double v_next = (t == T - 1) ? b.bootstrap[e] : b.values[i + 1];
    const double delta = b.rewards[i] + gamma * not_done * v_next - b.values[i];
    const double next_adv = (t == T - 1) ? 0.0 : adv[t + 1];
    adv[t] = delta + gamma * lam * not_done * next_adv;
  }
}

struct TinyRollout {
  std::vector<policy::EnvSlot> envs;
  RolloutBuffer buffer;
  long long zeta = 0;
};

TinyRollout make_rollout(const scene::SceneSpec& sc, const aes::ScorerParams& scorer,
                         const PolicyParams& params, int n_envs, int horizon,
                         std::uint64_t seed) {
  pomdp::EpisodeConfig cfg;
  cfg.n_samples = 150;
  cfg.knn = 25;
  cfg.max_steps = 6;
  TinyRollout r;
  Rng rng(seed);
  for (int e = 0; e < n_envs; ++e) {
    r.envs.push_back({pomdp::Environment(sc, scorer, cfg), params.zero_state(), {}, 0, 0});
    r.envs.back().env.reset(rng.next_u64());
    r.envs.back().feats = policy::extract_features(
        scorer, r.envs.back().env.observation(), params.options.feature_mode);
  }
  r.buffer = policy::collect_rollouts(r.envs, params, scorer, horizon, r.zeta, rng, nullptr);
  return r;
}

}  // namespace

TEST_CASE("feature extraction dimensions match the scorer taps") {
  CHECK(policy::feature_dim(FeatureMode::Multilayer) == 160);
  CHECK(policy::feature_dim(FeatureMode::LastLayer) == 32);
  const auto sc = scene::generate_scene(21, {});
  const auto scorer = aes::ScorerParams::init(2);
  const auto views = scene::sample_views(sc, 3, 9);
  for (const auto& [pose, obs] : views) {
    CHECK(policy::extract_features(scorer, obs, FeatureMode::Multilayer) ==
          aes::multilayer_features(scorer, obs));
    CHECK(policy::extract_features(scorer, obs, FeatureMode::LastLayer) ==
          aes::last_layer_features(scorer, obs));
  }
}

TEST_CASE("act produces a proper distribution") {
  auto params = PolicyParams::init(tiny_options(), 5);
  Rng rng(3);
  const auto feats = rand_features(rng, policy::feature_dim(params.options.feature_mode));
  const auto state = params.zero_state();

  SUBCASE("probabilities form a simplex") {
    const auto a = policy::act(params, feats, state, true, nullptr);
    REQUIRE(a.probs.size() == 9);
    double sum = 0.0;
    for (double p : a.probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.log_prob == doctest::Approx(std::log(a.probs[a.action_index])).epsilon(1e-12));
  }
  SUBCASE("zero actor weights give the uniform distribution") {
    std::fill(params.actor_p.begin(), params.actor_p.end(), 0.0);
    const auto a = policy::act(params, feats, state, true, nullptr);
    for (double p : a.probs) CHECK(p == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  }
  SUBCASE("greedy picks the argmax and is deterministic") {
    const auto a = policy::act(params, feats, state, true, nullptr);
    const auto b = policy::act(params, feats, state, true, nullptr);
    CHECK(a.action_index == b.action_index);
    CHECK(a.value == b.value);
    const auto it = std::max_element(a.probs.begin(), a.probs.end());
    CHECK(a.action_index == static_cast<int>(it - a.probs.begin()));
  }
  SUBCASE("sampling frequencies match the probabilities") {
    const auto ref = policy::act(params, feats, state, true, nullptr);
    std::vector<int> counts(9, 0);
    Rng draw(77);
    const int n = 100000;
    for (int i = 0; i < n; ++i)
      ++counts[policy::act(params, feats, state, false, &draw).action_index];
    for (int j = 0; j < 9; ++j)
      CHECK(std::abs(counts[j] / static_cast<double>(n) - ref.probs[j]) < 0.01);
  }
  SUBCASE("non-finite features are rejected") {
    auto bad = feats;
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(policy::act(params, bad, state, true, nullptr));
  }
}

TEST_CASE("gae_advantages matches the direct oracle") {
  RolloutBuffer b;
  b.resize(2, 12, 1, 0);
  Rng rng(8);
  for (int i = 0; i < b.size(); ++i) {
    b.rewards[i] = rng.uniform(-1.0, 1.0);
    b.values[i] = rng.uniform(-1.0, 1.0);
    b.dones[i] = rng.uniform() < 0.2 ? 1 : 0;
  }
  b.bootstrap = {rng.uniform(), rng.uniform()};

  SUBCASE("general case to 1e-12") {
    policy::gae_advantages(b, 0.99, 0.95);
    std::vector<double> oracle;
    for (int e = 0; e < 2; ++e) {
      gae_oracle(b, 0.99, 0.95, e, oracle);
      for (int t = 0; t < b.horizon; ++t) {
        const int i = e * b.horizon + t;
        CHECK(b.advantages[i] == doctest::Approx(oracle[t]).epsilon(1e-12));
        CHECK(b.returns[i] ==
              doctest::Approx(oracle[t] + b.values[i]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("lambda=1 on a done-free stream telescopes to discounted returns") {
    std::fill(b.dones.begin(), b.dones.end(), std::uint8_t{0});
    policy::gae_advantages(b, 0.9, 1.0);
    for (int e = 0; e < 2; ++e) {
      for (int t = 0; t < b.horizon; ++t) {
        double ret = 0.0, g = 1.0;
        for (int k = t; k < b.horizon; ++k) {
          ret += g * b.rewards[e * b.horizon + k];
          g *= 0.9;
        }
        ret += g * b.bootstrap[e];
        const int i = e * b.horizon + t;
        CHECK(b.advantages[i] == doctest::Approx(ret - b.values[i]).epsilon(1e-10));
      }
    }
  }
  SUBCASE("single step reduces to the TD residual") {
    RolloutBuffer s;
    s.resize(1, 1, 1, 0);
    s.rewards[0] = 0.7;
    s.values[0] = 0.2;
    s.dones[0] = 0;
    s.bootstrap = {0.4};
    policy::gae_advantages(s, 0.99, 0.95);
    CHECK(s.advantages[0] == doctest::Approx(0.7 + 0.99 * 0.4 - 0.2));
    s.dones[0] = 1;
    policy::gae_advantages(s, 0.99, 0.95);
    CHECK(s.advantages[0] == doctest::Approx(0.7 - 0.2));
  }
}

TEST_CASE("collect_rollouts records a consistent buffer") {
  const auto sc = scene::generate_scene(22, {});
  const auto scorer = aes::ScorerParams::init(4);
  const auto params = PolicyParams::init(tiny_options(), 6);
  auto r = make_rollout(sc, scorer, params, 2, 16, 91);
  const auto& b = r.buffer;

  CHECK(b.n_envs == 2);
  CHECK(b.horizon == 16);
  CHECK(b.feat_dim == 160);
  CHECK(b.hidden == 16);
  CHECK(r.zeta == 32);  // one tick per env-step
  CHECK(b.bootstrap.size() == 2);

  for (int e = 0; e < 2; ++e) {
    CHECK(b.episode_starts[e * 16] == 1);  // fresh env at t=0
    for (int t = 0; t < 16; ++t) {
      const int i = e * 16 + t;
      CHECK(b.logp[i] <= 0.0);
      CHECK(std::isfinite(b.values[i]));
      if (b.episode_starts[i]) {
        // the recurrent state snapshot at an episode boundary is zero
        for (int h = 0; h < b.hidden; ++h) {
          CHECK(b.h0[static_cast<std::size_t>(i) * b.hidden + h] == 0.0);
          CHECK(b.c0[static_cast<std::size_t>(i) * b.hidden + h] == 0.0);
        }
      }
      if (t > 0) CHECK(b.episode_starts[i] == b.dones[i - 1]);
    }
  }
}

TEST_CASE("ppo loss at the behavior policy") {
  const auto sc = scene::generate_scene(23, {});
  const auto scorer = aes::ScorerParams::init(5);
  const auto params = PolicyParams::init(tiny_options(), 7);
  auto r = make_rollout(sc, scorer, params, 2, 8, 13);
  PPOConfig cfg;
  policy::gae_advantages(r.buffer, cfg.gamma, cfg.gae_lambda);

  const int n = r.buffer.size();
  double mean = 0.0;
  for (double a : r.buffer.advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : r.buffer.advantages) var += (a - mean) * (a - mean);
  const double stdev = std::sqrt(var / n) + 1e-8;

  const std::vector<policy::SeqRef> seqs{{0, 0, 8}, {1, 0, 8}};

  SUBCASE("ratios are one, nothing clips, policy term is the mean advantage") {
    policy::PolicyGrads grads(params);
    policy::UpdateStats stats;
    policy::ppo_loss_grad(params, r.buffer, cfg, seqs, mean, stdev, grads, &stats);
    CHECK(stats.clip_fraction == 0.0);
    // normalized advantages have mean ~0, so the surrogate is ~0
    CHECK(std::abs(stats.policy_loss) < 1e-9);
  }
  SUBCASE("zero advantages and no entropy bonus leave the actor untouched") {
    auto buf = r.buffer;
    std::fill(buf.advantages.begin(), buf.advantages.end(), 0.0);
    PPOConfig c2 = cfg;
    c2.entropy_coeff = 0.0;
    policy::PolicyGrads grads(params);
    policy::ppo_loss_grad(params, buf, c2, seqs, 0.0, 1.0, grads, nullptr);
    for (double g : grads.actor) CHECK(std::abs(g) < 1e-12);
    // the critic still learns through the shared backbone
    double cn = 0.0;
    for (double g : grads.critic) cn += std::abs(g);
    CHECK(cn > 0.0);
  }
  SUBCASE("analytic gradients match finite differences") {
    policy::PolicyGrads grads(params);
    policy::ppo_loss_grad(params, r.buffer, cfg, seqs, mean, stdev, grads, nullptr);

    auto loss_at = [&](const PolicyParams& p) {
      policy::PolicyGrads g(p);
      return policy::ppo_loss_grad(p, r.buffer, cfg, seqs, mean, stdev, g, nullptr);
    };
    Rng pick(17);
    auto check_block = [&](std::vector<double> PolicyParams::* block,
                           const std::vector<double>& analytic) {
      double worst = 0.0;
      for (int k = 0; k < 25; ++k) {
        PolicyParams p = params;
        auto& vec = p.*block;
        const std::size_t c = pick.integer(vec.size());
        // larger step than usual: the recurrent loss accumulates enough
        // roundoff that 1e-6 steps drown small gradients in cancellation
        const double h = 1e-5, orig = vec[c];
        vec[c] = orig + h;
        const double lp = loss_at(p);
        vec[c] = orig - h;
        const double lm = loss_at(p);
        const double num = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(num), std::abs(analytic[c]), 1e-8});
        worst = std::max(worst, std::abs(num - analytic[c]) / denom);
      }
      CHECK(worst <= 1e-4);
    };
    check_block(&PolicyParams::backbone_p, grads.backbone);
    check_block(&PolicyParams::actor_p, grads.actor);
    check_block(&PolicyParams::critic_p, grads.critic);
  }
}

TEST_CASE("ppo_update reduces the loss on a frozen buffer") {
  const auto sc = scene::generate_scene(24, {});
  const auto scorer = aes::ScorerParams::init(6);
  auto params = PolicyParams::init(tiny_options(), 8);
  auto r = make_rollout(sc, scorer, params, 2, 16, 29);
  PPOConfig cfg;
  cfg.minibatch = 8;
  cfg.lr = 1e-3;
  policy::gae_advantages(r.buffer, cfg.gamma, cfg.gae_lambda);

  const int n = r.buffer.size();
  double mean = 0.0;
  for (double a : r.buffer.advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : r.buffer.advantages) var += (a - mean) * (a - mean);
  const double stdev = std::sqrt(var / n) + 1e-8;
  const std::vector<policy::SeqRef> all{{0, 0, 16}, {1, 0, 16}};
  auto full_loss = [&](const PolicyParams& p) {
    policy::PolicyGrads g(p);
    return policy::ppo_loss_grad(p, r.buffer, cfg, all, mean, stdev, g, nullptr);
  };

  const double before = full_loss(params);
  policy::PolicyAdam adam(params);
  Rng rng(4);
  policy::UpdateStats stats{};
  for (int i = 0; i < 3; ++i) stats = policy::ppo_update(params, r.buffer, cfg, adam, rng);
  CHECK(full_loss(params) < before);
  CHECK(std::isfinite(stats.entropy));
  CHECK(stats.entropy > 0.0);
  CHECK(stats.entropy <= std::log(9.0) + 1e-9);
}

TEST_CASE("train_agent runs deterministically on a tiny budget") {
  const auto sc1 = scene::generate_scene(25, {});
  const auto sc2 = scene::generate_scene(26, {});
  const std::vector<const scene::SceneSpec*> pool{&sc1, &sc2};
  const auto scorer = aes::ScorerParams::init(9);

  policy::TrainAgentConfig cfg;
  cfg.options = tiny_options();
  cfg.ppo.n_envs = 2;
  cfg.ppo.horizon = 8;
  cfg.ppo.minibatch = 4;
  cfg.ppo.total_steps = 32;
  cfg.episode.n_samples = 150;
  cfg.episode.knn = 25;
  cfg.episode.max_steps = 6;

  const auto a = policy::train_agent(pool, scorer, cfg, 33);
  const auto b = policy::train_agent(pool, scorer, cfg, 33);
  CHECK(a.params.backbone_p == b.params.backbone_p);
  CHECK(a.params.actor_p == b.params.actor_p);
  CHECK(a.params.critic_p == b.params.critic_p);
  REQUIRE(a.metrics.size() == 2);  // 32 steps / (2 envs * 8 horizon)
  CHECK(a.metrics[1].env_steps == 32);
  const auto csv = policy::metrics_csv(a.metrics);
  CHECK(csv.rfind("update,env_steps,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("greedy evaluation episode terminates in a capture") {
  const auto sc = scene::generate_scene(27, {});
  const auto scorer = aes::ScorerParams::init(10);
  const auto params = PolicyParams::init(tiny_options(), 11);
  pomdp::EpisodeConfig cfg;
  cfg.n_samples = 150;
  cfg.knn = 25;
  pomdp::Environment env(sc, scorer, cfg);
  env.reset(3);
  const auto tr = policy::run_greedy_episode(env, params, scorer);
  CHECK(tr.terminal);
  CHECK(tr.steps.back().action == pomdp::Action::Capture);
  CHECK(tr.probe_count == 0);
  CHECK(tr.restore_count == 0);
  // greedy rollouts are repeatable
  env.reset(3);
  const auto tr2 = policy::run_greedy_episode(env, params, scorer);
  CHECK(tr2.serialize() == tr.serialize());
}

TEST_CASE("policy checkpoints round-trip including the options") {
  PolicyOptions opt;
  opt.hidden = 24;
  opt.feature_mode = FeatureMode::LastLayer;
  opt.action_set = {pomdp::Action::Forward, pomdp::Action::Backward,
                    pomdp::Action::TurnL30, pomdp::Action::TurnR30,
                    pomdp::Action::Capture};
  const auto p = PolicyParams::init(opt, 50);
  const auto path = std::filesystem::temp_directory_path() / "autophoto_policy_rt.ckpt";
  p.save(path.string(), "{\"note\":\"unit\"}");
  const auto back = PolicyParams::load(path.string());
  CHECK(back.backbone_p == p.backbone_p);
  CHECK(back.actor_p == p.actor_p);
  CHECK(back.critic_p == p.critic_p);
  CHECK(back.options.hidden == 24);
  CHECK(back.options.use_lstm == opt.use_lstm);
  CHECK(back.options.feature_mode == FeatureMode::LastLayer);
  CHECK(back.options.action_set == opt.action_set);
  std::filesystem::remove(path);

  SUBCASE("feed-forward variant also round-trips and acts") {
    PolicyOptions ff = opt;
    ff.use_lstm = false;
    const auto q = PolicyParams::init(ff, 51);
    CHECK(q.backbone.hidden_size() == 0);
    Rng rng(1);
    const auto feats = rand_features(rng, policy::feature_dim(ff.feature_mode));
    const auto a = policy::act(q, feats, q.zero_state(), true, nullptr);
    CHECK(a.probs.size() == 5);
  }
}
