#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <cstring>

#include "traj/env/dataset.hpp"
#include "traj/error.hpp"

using namespace traj;
using namespace traj::env;

// Encoder-facing view must not expose labels.
template <class T>
concept ExposesLabels = requires(const T& v) { v.eval_labels(); } || requires(const T& v) { v.return_label(); } ||
                        requires(const T& v) { v.ability(); } || requires(const T& v) { v.labels(); };
static_assert(!ExposesLabels<StateActionView>, "StateActionView must not reach labels");
static_assert(requires(const Trajectory& t) { t.eval_labels(); }, "labels live behind the named accessor");

TEST_CASE("waypoint2d: zero action from rest leaves position unchanged with zero reward") {
  auto env = make_env("waypoint2d");
  const std::vector<double> x = {0.1, -0.1, 0.0, 0.0, 1.9, 0.1};
  Step s = env->step(x, std::vector<double>{0.0, 0.0});
  CHECK(s.next_state[0] == 0.1);
  CHECK(s.next_state[1] == -0.1);
  CHECK(s.reward == 0.0);
}

TEST_CASE("linewalker1d: max action for 10 steps matches a hand-simulated rollout") {
  auto env = make_env("linewalker1d", 10);
  const auto& spec = env->spec();
  // reference: v' = v + dt (a - damping v); x' = x + dt v'; r = v' - cost a^2
  double x = 0.0, v = 0.0, expected = 0.0;
  const double dt = spec.param("dt"), damping = spec.param("damping"), cost = spec.param("control_cost");
  for (int t = 0; t < 10; ++t) {
    v = v + dt * (1.0 - damping * v);
    x = x + dt * v;
    expected += v - cost;
  }
  Rollout r = rollout(*env, {0.0, 0.0}, [](std::span<const double>) { return std::vector<double>{1.0}; });
  CHECK(r.total_return == doctest::Approx(expected).epsilon(1e-14));
  CHECK(r.states.rows() == 10);
}

TEST_CASE("initial states are a function of the seed; unknown names are rejected") {
  auto env = make_env("waypoint2d");
  num::Rng a(5), b(5), c(6);
  CHECK(env->initial_state(a) == env->initial_state(b));
  CHECK(env->initial_state(a) != env->initial_state(c));
  CHECK_THROWS_AS(make_env("hopper"), Error);
}

TEST_CASE("actions are clipped to bounds and recorded as applied") {
  auto env = make_env("waypoint2d", 5);
  Step s = env->step(std::vector<double>{0, 0, 0, 0, 2, 0}, std::vector<double>{5.0, -3.0});
  CHECK(s.action == std::vector<double>{1.0, -1.0});
  Rollout r = rollout(*env, {0, 0, 0, 0, 2, 0}, [](std::span<const double>) { return std::vector<double>{2.0, 0.5}; });
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(r.actions(t, 0) == 1.0);
    CHECK(r.actions(t, 1) == 0.5);
  }
}

TEST_CASE("scripted controllers: ordered bands and noise-free determinism") {
  const EnvSpec spec = default_spec("waypoint2d");
  AbilityDataset d = generate_dataset(spec, 3, 60, 21);
  auto stats = d.level_stats();
  REQUIRE(stats.size() == 3);
  CHECK(stats[0].mean < stats[1].mean);
  CHECK(stats[1].mean < stats[2].mean);
  CHECK_NOTHROW(check_separation(stats, 3.0));

  auto env = make_env(spec);
  ScriptedController expert = scripted_policy(3, 3, spec);
  expert.noise_std = 0.0;
  num::Rng r0(1);
  const auto x0 = env->initial_state(r0);
  std::vector<double> returns;
  for (int k = 0; k < 5; ++k) {
    num::Rng rng(100 + k);
    returns.push_back(rollout(*env, x0, [&](std::span<const double> x) { return expert.act(*env, x, rng); }).total_return);
  }
  for (double r : returns) CHECK(r == returns[0]);
  CHECK_THROWS_AS(scripted_policy(4, 3, spec), GenerationError);
  CHECK_THROWS_AS(scripted_policy(0, 3, spec), GenerationError);
}

TEST_CASE("generate_dataset: labels, counts and overlap detection") {
  const EnvSpec spec = default_spec("linewalker1d");
  AbilityDataset one = generate_dataset(spec, 1, 1, 3);
  REQUIRE(one.trajectories.size() == 1);
  auto env = make_env(spec);
  const Trajectory& t = one.trajectories[0];
  CHECK(std::abs(recompute_return(*env, t.view()) - t.eval_labels().return_label) < 1e-9);

  AbilityDataset three = generate_dataset(default_spec("waypoint2d"), 3, 60, 7);
  CHECK(three.trajectories.size() == 180);
  for (std::size_t i = 0; i < three.trajectories.size(); ++i) {
    CHECK(three.trajectories[i].id() == i);
    CHECK(three.trajectories[i].eval_labels().ability == static_cast<int>(i / 60) + 1);
  }

  ControllerBands flat;
  flat.speed_high = flat.speed_low + 0.01;
  flat.gain_high = flat.gain_low;
  try {
    generate_dataset(spec, 3, 20, 3, flat);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(std::string(e.what()).find("levels 1 and 2") != std::string::npos);
  }
  CHECK_THROWS_AS(generate_dataset(spec, 3, 0, 3), GenerationError);
}

TEST_CASE("dataset bytes depend only on (env, seed, config), not on thread count") {
  const EnvSpec spec = default_spec("waypoint2d");
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const std::string a = encode_dataset(generate_dataset(spec, 3, 20, 9));
  omp_set_num_threads(4);
  const std::string b = encode_dataset(generate_dataset(spec, 3, 20, 9));
  omp_set_num_threads(saved);
  CHECK(a == b);
  CHECK(a != encode_dataset(generate_dataset(spec, 3, 20, 10)));
}

TEST_CASE(".trajset round trip, empty datasets and structured parse errors") {
  AbilityDataset d = generate_dataset(default_spec("waypoint2d", 12), 3, 4, 2);
  const std::string bytes = encode_dataset(d);
  CHECK(decode_dataset(bytes) == d);
  CHECK(std::memcmp(bytes.data(), "TRAJSET", 8) == 0);

  AbilityDataset empty{default_spec("linewalker1d"), 2, {}};
  CHECK(decode_dataset(encode_dataset(empty)) == empty);

  std::string bad = bytes;
  // header length field sits after 8 magic bytes and the u32 version
  const std::uint64_t huge = 1ull << 40;
  std::memcpy(bad.data() + 12, &huge, sizeof(huge));
  try {
    decode_dataset(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 12);
  }
  std::string truncated = bytes.substr(0, bytes.size() - 17);
  CHECK_THROWS_AS(decode_dataset(truncated), ParseError);

  std::string wrong_version = bytes;
  wrong_version[8] = 9;
  try {
    decode_dataset(wrong_version);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 8);
  }

  // flipping a payload bit breaks the return-label invariant
  std::string tampered = bytes;
  tampered[tampered.size() - 3] ^= 0x10;
  CHECK_THROWS_AS(decode_dataset(tampered), ParseError);
}
