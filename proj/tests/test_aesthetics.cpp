#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "autophoto/aesthetics.hpp"

using namespace autophoto;
using aes::RobustnessConfig;
using aes::ScorerParams;
using scene::SceneSpec;

namespace {

ScorerParams zero_scorer() {
  ScorerParams p;
  p.spec = ScorerParams::default_spec();
  p.params.assign(p.spec.param_count(), 0.0);
  return p;
}

aes::PreferencePair make_pair_from(const SceneSpec& sc, std::uint64_t seed) {
  const auto views = scene::sample_views(sc, 2, seed);
  const double s0 = scene::true_aesthetic(sc, views[0].first);
  const double s1 = scene::true_aesthetic(sc, views[1].first);
  const int w = s0 > s1 ? 0 : 1;
  aes::PreferencePair pair;
  pair.scene = &sc;
  pair.winner_pose = views[w].first;
  pair.loser_pose = views[1 - w].first;
  pair.winner = views[w].second;
  pair.loser = views[1 - w].second;
  pair.margin = std::abs(s0 - s1);
  return pair;
}

}  // namespace

TEST_CASE("scorer has the documented architecture") {
  const auto spec = ScorerParams::default_spec();
  REQUIRE(spec.layers.size() == 4);
  CHECK(spec.input_dim() == 35);
  CHECK(spec.layers[0].out == 64);
  CHECK(spec.layers[1].out == 64);
  CHECK(spec.layers[2].out == 32);
  CHECK(spec.output_dim() == 1);
  CHECK(aes::kFeatureDims == 160);
}

TEST_CASE("zero-parameter scorer outputs zero and is deterministic") {
  const auto sc = scene::generate_scene(3, {});
  const auto views = scene::sample_views(sc, 5, 1);
  const auto z = zero_scorer();
  const auto s = ScorerParams::init(12);
  for (const auto& [pose, obs] : views) {
    CHECK(aes::score(z, obs) == 0.0);
    CHECK(aes::score(s, obs) == aes::score(s, obs));
  }
}

TEST_CASE("score equals a direct netcore forward pass") {
  const auto sc = scene::generate_scene(4, {});
  const auto views = scene::sample_views(sc, 10, 2);
  const auto s = ScorerParams::init(7);
  for (const auto& [pose, obs] : views) {
    const auto in = obs.flatten();
    const auto ref = net::forward(s.spec, s.params, in, nullptr).output[0];
    CHECK(aes::score(s, obs) == ref);
  }
}

TEST_CASE("rank_loss hinge values and zero condition") {
  CHECK(aes::rank_loss(2.0, 0.5) == 0.0);
  CHECK(aes::rank_loss(0.5, 0.5) == 1.0);
  CHECK(aes::rank_loss(0.3, 0.5) == doctest::Approx(1.2));
  for (double a : {-2.0, 0.0, 1.0, 3.0})
    for (double b : {-2.0, 0.0, 1.0, 3.0}) {
      const double l = aes::rank_loss(a, b);
      CHECK(l >= 0.0);
      CHECK((l == 0.0) == (a >= b + 1.0));
    }
}

TEST_CASE("robustness weights are the published constants") {
  const RobustnessConfig c;
  CHECK(c.lambda == 0.6);
  CHECK(c.lambda_sim == 0.875);
  CHECK(c.lambda_expo == 0.125);
  CHECK(c.lambda_sim + c.lambda_expo == 1.0);
  CHECK(c.over_exposure == 4.0);
  CHECK(c.under_exposure == 0.5);
}

TEST_CASE("robust_loss of the zero scorer is the tie-hinge weight") {
  const auto sc = scene::generate_scene(5, {});
  const auto views = scene::sample_views(sc, 3, 4);
  const auto z = zero_scorer();
  for (const auto& [pose, obs] : views) {
    // all scores are 0: l_sim = 0, l_expo = hinge(0,0) = 1
    CHECK(aes::robust_loss(z, sc, pose, obs, {}, Rng(9)) ==
          doctest::Approx(0.125).epsilon(1e-15));
  }
}

TEST_CASE("robust_loss composes score and rank_loss over the drawn perturbations") {
  const auto sc = scene::generate_scene(6, {});
  const auto views = scene::sample_views(sc, 4, 5);
  const auto s = ScorerParams::init(20);
  const RobustnessConfig cfg;
  for (const auto& [pose, obs] : views) {
    // replicate the documented draw order: jitter dx, dy, dtheta, exposure coin
    Rng rng(31);
    scene::Pose jit = pose;
    jit.x += rng.uniform(-cfg.jitter_translation, cfg.jitter_translation);
    jit.y += rng.uniform(-cfg.jitter_translation, cfg.jitter_translation);
    jit.theta = scene::wrap_angle(jit.theta + rng.uniform(-cfg.jitter_rotation, cfg.jitter_rotation));
    if (!sc.navigable_point(jit.x, jit.y)) jit = pose;
    const double expo = rng.uniform() < 0.5 ? cfg.over_exposure : cfg.under_exposure;

    const double phi = aes::score(s, obs);
    const double phi_j = aes::score(s, scene::render_view(sc, jit, obs.brightness));
    auto bad = obs;
    bad.brightness = expo;
    const double phi_e = aes::score(s, bad);
    const double expect = cfg.lambda_sim * 0.5 * (phi - phi_j) * (phi - phi_j) +
                          cfg.lambda_expo * aes::rank_loss(phi, phi_e);
    CHECK(aes::robust_loss(s, sc, pose, obs, cfg, Rng(31)) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("total_loss applies the published mixture weights") {
  const auto sc = scene::generate_scene(7, {});
  const auto pair = make_pair_from(sc, 8);
  const auto z = zero_scorer();
  // zero scorer: l_rank = 1 (tie), l_robust = 0.125
  CHECK(aes::total_loss(z, pair, {}, Rng(3)) ==
        doctest::Approx(0.6 * 1.0 + 0.4 * 0.125).epsilon(1e-15));
  // random scorer: decomposes into rank + robust with the same rng
  const auto s = ScorerParams::init(9);
  Rng rng(55);
  const bool pick_winner = Rng(55).uniform() < 0.5;
  Rng tail(55);
  tail.uniform();  // consume the selection draw
  const double l_rank = aes::rank_loss(aes::score(s, pair.winner), aes::score(s, pair.loser));
  const double l_rob = aes::robust_loss(
      s, sc, pick_winner ? pair.winner_pose : pair.loser_pose,
      pick_winner ? pair.winner : pair.loser, {}, tail);
  CHECK(aes::total_loss(s, pair, {}, Rng(55)) ==
        doctest::Approx(0.6 * l_rank + 0.4 * l_rob).epsilon(1e-12));
  (void)rng;
}

TEST_CASE("total_loss is non-negative and loss/grad paths agree") {
  const auto sc = scene::generate_scene(10, {});
  const auto s = ScorerParams::init(2);
  std::vector<double> grad(s.params.size(), 0.0);
  for (std::uint64_t k = 0; k < 8; ++k) {
    const auto pair = make_pair_from(sc, 100 + k);
    const double a = aes::total_loss(s, pair, {}, Rng(k));
    std::fill(grad.begin(), grad.end(), 0.0);
    const double b = aes::total_loss_grad(s, pair, {}, Rng(k), grad);
    CHECK(a >= 0.0);
    CHECK(a == b);  // same rng value -> identical draws on both paths
  }
}

TEST_CASE("total_loss gradient matches central finite differences") {
  const auto sc = scene::generate_scene(12, {});
  const auto pair = make_pair_from(sc, 17);
  auto s = ScorerParams::init(6);
  std::vector<double> analytic(s.params.size(), 0.0);
  aes::total_loss_grad(s, pair, {}, Rng(99), analytic);

  Rng pick(321);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {  // seeded coordinate subset
    const std::size_t c = pick.integer(s.params.size());
    const double h = 1e-6, orig = s.params[c];
    s.params[c] = orig + h;
    const double lp = aes::total_loss(s, pair, {}, Rng(99));
    s.params[c] = orig - h;
    const double lm = aes::total_loss(s, pair, {}, Rng(99));
    s.params[c] = orig;
    const double num = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::abs(num), std::abs(analytic[c]), 1e-8});
    worst = std::max(worst, std::abs(num - analytic[c]) / denom);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("multilayer features concatenate the hidden layers") {
  const auto sc = scene::generate_scene(14, {});
  const auto views = scene::sample_views(sc, 3, 6);
  const auto z = zero_scorer();
  const auto s = ScorerParams::init(4);
  for (const auto& [pose, obs] : views) {
    const auto fz = aes::multilayer_features(z, obs);
    REQUIRE(fz.size() == 160);
    for (double v : fz) CHECK(v == 0.0);

    const auto f = aes::multilayer_features(s, obs);
    REQUIRE(f.size() == 160);
    const auto last = aes::last_layer_features(s, obs);
    REQUIRE(last.size() == 32);
    // oracle: run the layers one at a time
    net::Tape tape;
    net::forward(s.spec, s.params, obs.flatten(), nullptr, &tape);
    std::size_t at = 0;
    for (int li = 0; li < 3; ++li)
      for (double v : tape.layers[li].out) CHECK(f.at(at++) == v);
    for (int i = 0; i < 32; ++i) CHECK(last[i] == tape.layers[2].out[i]);
  }
}

TEST_CASE("train_scorer determinism and zero-iteration identity") {
  const auto sc = scene::generate_scene(15, {});
  const std::vector<const SceneSpec*> scenes{&sc};
  aes::TrainScorerConfig cfg;
  cfg.iters = 0;
  const auto r0 = aes::train_scorer(scenes, cfg, 77);
  CHECK(r0.scorer.params == ScorerParams::init(derive_seed(77, 1)).params);

  cfg.iters = 10;
  const auto a = aes::train_scorer(scenes, cfg, 78);
  const auto b = aes::train_scorer(scenes, cfg, 78);
  CHECK(a.scorer.params == b.scorer.params);
  CHECK(a.log.size() == b.log.size());
  CHECK(a.scorer.params != r0.scorer.params);
}

TEST_CASE("eval_scorer on degenerate scorers") {
  const auto sc1 = scene::generate_scene(16, {});
  const auto sc2 = scene::generate_scene(18, {});
  const std::vector<const SceneSpec*> scenes{&sc1, &sc2};
  const auto z = zero_scorer();  // constant output
  const auto rep = aes::eval_scorer(z, scenes, 5, {}, 50);
  CHECK(rep.pairs > 0);
  CHECK(rep.pair_accuracy == doctest::Approx(0.5));  // ties score at chance
  CHECK(rep.jitter_mse == 0.0);
  const auto rep2 = aes::eval_scorer(z, scenes, 5, {}, 50);
  CHECK(rep.pair_accuracy == rep2.pair_accuracy);  // deterministic
  const auto row = rep.csv_row("held_out");
  CHECK(row.find("held_out,") == 0);
  CHECK(row.back() == '\n');
}

TEST_CASE("scorer checkpoints round-trip") {
  const auto s = ScorerParams::init(123);
  const auto path = std::filesystem::temp_directory_path() / "autophoto_scorer_rt.ckpt";
  s.save(path.string(), "{\"note\":\"unit\"}");
  const auto back = ScorerParams::load(path.string());
  CHECK(back.params == s.params);
  CHECK(back.spec.param_count() == s.spec.param_count());
  std::filesystem::remove(path);
}
