#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "sketchstack/diffusion.hpp"

using namespace sketchstack;
using nn::Mat;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.latent = 16;
  a.hidden = 16;
  a.time_emb = 16;
  a.time_hidden = 32;
  a.token_dim = 16;
  a.attn_blocks = 2;
  a.heads = 2;
  a.max_slots = 4;
  return a;
}

Dataset constant_pose_dataset(int n) {
  Dataset d;
  d.relation = "test-delta";
  d.mode = ArityMode::Fixed;
  d.arity = 1;
  d.pose_dim = 3;
  d.geom_dim = 3;
  for (int i = 0; i < n; ++i)
    d.samples.push_back({{0.2f, 0.3f, 0.1f}, {0.25f, -0.4f, 0.6f}, 1});
  return d;
}

}  // namespace

TEST_CASE("cosine schedule properties", "[diffusion]") {
  CHECK_THROWS_AS(cosine_schedule(0), ConfigError);
  const NoiseSchedule s = cosine_schedule(1500);
  CHECK(std::abs(s.alpha_bar[0] - 1.0) < 1e-6);
  for (int t = 1; t <= 1500; ++t) {
    CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
    CHECK(s.beta[t] >= 1e-6);
    CHECK(s.beta[t] <= 0.999);
  }
  CHECK(s.alpha_bar[1500] < 1e-3);
  // the clamp engages at the very end of the schedule
  CHECK(s.beta[1500] == Catch::Approx(0.999));
  const NoiseSchedule s200 = cosine_schedule(200);
  CHECK(s200.beta[200] == Catch::Approx(0.999));
}

TEST_CASE("forward_noise endpoints and shape check", "[diffusion]") {
  Mat<float> p0(2, 3), eps(2, 3);
  p0 << 1, 2, 3, 4, 5, 6;
  eps << -1, -2, -3, -4, -5, -6;
  CHECK((forward_noise(p0, eps, 1.0) - p0).norm() == 0.0f);
  CHECK((forward_noise(p0, eps, 0.0) - eps).norm() == 0.0f);
  Mat<float> bad(1, 3);
  CHECK_THROWS_AS(forward_noise(p0, bad, 0.5), ShapeError);
}

TEST_CASE("forward_noise marginal variance matches the closed form",
          "[diffusion][property]") {
  Rng rng(21);
  const double ab = 0.37;
  const double var_p0 = 0.8 * 0.8;
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    Mat<float> p0(1, 1), eps(1, 1);
    p0(0, 0) = static_cast<float>(rng.normal() * 0.8);
    eps(0, 0) = rng.normal_f();
    const double x = forward_noise(p0, eps, ab)(0, 0);
    sum += x;
    sq += x * x;
  }
  const double var = sq / n - (sum / n) * (sum / n);
  const double expected = ab * var_p0 + (1 - ab);
  CHECK(std::abs(var - expected) / expected < 0.02);
}

TEST_CASE("grad_check fixed and variadic models", "[diffusion]") {
  const NoiseSchedule sched = cosine_schedule(50);
  Rng rng(31);

  DenoiserD fixed = DenoiserD::create("left-of", ArityMode::Fixed, 2, 6, 6,
                                      tiny_arch(), 99);
  Mat<double> p0(3, 6), g(3, 6), eps(3, 6);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 6; ++c) {
      p0(r, c) = rng.uniform(-1, 1);
      g(r, c) = rng.uniform(0.05, 0.5);
      eps(r, c) = rng.normal();
    }
  const double err = grad_check(fixed, p0, g, eps, {3, 17, 42}, {2, 2, 2},
                                sched, rng);
  CHECK(err <= 1e-4);

  DenoiserD var = DenoiserD::create("h-line", ArityMode::Variadic, 0, 3, 4,
                                    tiny_arch(), 77);
  const int S = var.max_slots;
  Mat<double> vp = Mat<double>::Zero(2 * S, 3);
  Mat<double> vg = Mat<double>::Zero(2 * S, 4);
  Mat<double> veps = Mat<double>::Zero(2 * S, 3);
  std::vector<int> counts = {3, 2};
  for (int b = 0; b < 2; ++b)
    for (int s = 0; s < counts[b]; ++s)
      for (int c = 0; c < 3; ++c) {
        vp(b * S + s, c) = rng.uniform(-1, 1);
        vg(b * S + s, c) = rng.uniform(0.05, 0.5);
        veps(b * S + s, c) = rng.normal();
      }
  const double verr =
      grad_check(var, vp, vg, veps, {5, 11}, counts, sched, rng);
  CHECK(verr <= 1e-4);
}

TEST_CASE("grad_check at a zero-loss point", "[diffusion]") {
  const NoiseSchedule sched = cosine_schedule(50);
  Rng rng(41);
  DenoiserD model = DenoiserD::create("zero", ArityMode::Fixed, 1, 3, 3,
                                      tiny_arch(), 5);
  for (auto& [name, mat] : model.tensors()) mat->setZero();
  Mat<double> p0 = Mat<double>::Zero(2, 3);
  Mat<double> g = Mat<double>::Zero(2, 3);
  Mat<double> eps = Mat<double>::Zero(2, 3);  // target 0, output 0 -> loss 0

  nn::Tape<double> tape;
  auto pv = tape.input(p0);
  auto gv = tape.input(g);
  std::vector<int> param_vars;
  auto out = model.forward(tape, pv, gv, {3, 9}, {1, 1}, &param_vars);
  auto loss = tape.mean_sq(out, tape.input(eps));
  CHECK(tape.value(loss)(0, 0) == 0.0);
  tape.backward(loss);
  for (int v : param_vars)
    if (tape.grad(v).size() > 0) CHECK(tape.grad(v).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("denoise: zero weights give zero output, batching is pointwise",
          "[diffusion]") {
  DenoiserF model = DenoiserF::create("t", ArityMode::Fixed, 2, 6, 6,
                                      tiny_arch(), 13);
  Mat<float> p(2, 6), g(2, 6);
  Rng rng(55);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 6; ++c) {
      p(r, c) = rng.normal_f();
      g(r, c) = static_cast<float>(rng.uniform(0.1, 0.5));
    }
  const Mat<float> both = model.denoise(p, g, {7, 9}, {2, 2});
  const Mat<float> first = model.denoise(p.topRows(1), g.topRows(1), {7}, {2});
  const Mat<float> second =
      model.denoise(p.bottomRows(1), g.bottomRows(1), {9}, {2});
  CHECK((both.row(0) - first.row(0)).norm() < 1e-6);
  CHECK((both.row(1) - second.row(0)).norm() < 1e-6);

  DenoiserF zero = model;
  for (auto& [name, mat] : zero.tensors()) mat->setZero();
  CHECK(zero.denoise(p, g, {7, 9}, {2, 2}).norm() == 0.0f);
}

TEST_CASE("variadic permutation equivariance without slot encoding",
          "[diffusion]") {
  ArchConfig arch = tiny_arch();
  arch.slot_pos = false;
  DenoiserF model =
      DenoiserF::create("line", ArityMode::Variadic, 0, 3, 4, arch, 3);
  const int S = model.max_slots;
  Rng rng(77);
  Mat<float> p = Mat<float>::Zero(S, 3), g = Mat<float>::Zero(S, 4);
  for (int s = 0; s < 3; ++s)
    for (int c = 0; c < 3; ++c) {
      p(s, c) = rng.normal_f();
      g(s, c) = static_cast<float>(rng.uniform(0.1, 0.5));
    }
  const Mat<float> out = model.denoise(p, g, {11}, {3});
  // swap slots 0 and 2
  Mat<float> p2 = p, g2 = g;
  p2.row(0).swap(p2.row(2));
  g2.row(0).swap(g2.row(2));
  const Mat<float> out2 = model.denoise(p2, g2, {11}, {3});
  CHECK((out.row(0) - out2.row(2)).norm() < 1e-5);
  CHECK((out.row(2) - out2.row(0)).norm() < 1e-5);

  // arity overflow guard
  Mat<float> big = Mat<float>::Zero(S, 3);
  CHECK_THROWS_AS(model.denoise(big, g, {1}, {S + 1}), ArityError);
}

TEST_CASE("training is reproducible and learns a delta distribution",
          "[diffusion]") {
  const NoiseSchedule sched = cosine_schedule(50);
  const Dataset data = constant_pose_dataset(256);
  OptConfig opt;
  opt.steps = 8000;
  opt.batch = 64;
  const TrainResult a = train_denoiser(data, tiny_arch(), opt, sched, 1234);
  const TrainResult b = train_denoiser(data, tiny_arch(), opt, sched, 1234);
  auto ta = const_cast<TrainResult&>(a).model.tensors();
  auto tb = const_cast<TrainResult&>(b).model.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i)
    REQUIRE((*ta[i].second - *tb[i].second).norm() == 0.0f);
  CHECK(a.final_loss < 0.05);

  // samples concentrate on the training pose
  DenoiserF model = a.model;
  Mat<float> g(1, 3);
  g << 0.2f, 0.3f, 0.1f;
  Rng rng(5);
  int close = 0;
  const int trials = 100;
  for (int i = 0; i < trials; ++i) {
    const Mat<float> p = sample_single(model, g, sched, rng);
    const double dx = p(0, 0) - 0.25, dy = p(0, 1) + 0.4, dz = p(0, 2) - 0.6;
    if (std::sqrt(dx * dx + dy * dy + dz * dz) < 0.05) ++close;
  }
  CHECK(close >= 95);
}

TEST_CASE("training rejects undersized datasets", "[diffusion]") {
  const NoiseSchedule sched = cosine_schedule(10);
  Dataset d = constant_pose_dataset(3);
  OptConfig opt;
  opt.steps = 1;
  opt.batch = 64;
  CHECK_THROWS_AS(train_denoiser(d, tiny_arch(), opt, sched, 1), ConfigError);
}

TEST_CASE("sampling determinism", "[diffusion]") {
  const NoiseSchedule sched = cosine_schedule(30);
  DenoiserF model = DenoiserF::create("d", ArityMode::Fixed, 1, 3, 3,
                                      tiny_arch(), 21);
  Mat<float> g(1, 3);
  g << 0.1f, 0.2f, 0.3f;
  Rng r1(99), r2(99);
  const Mat<float> a = sample_single(model, g, sched, r1);
  const Mat<float> b = sample_single(model, g, sched, r2);
  CHECK((a - b).norm() == 0.0f);
}

TEST_CASE("checkpoint round trip preserves weights and outputs",
          "[diffusion]") {
  const NoiseSchedule sched = cosine_schedule(25);
  DenoiserF model = DenoiserF::create("left-of", ArityMode::Variadic, 0, 3, 4,
                                      tiny_arch(), 88);
  const std::string path =
      (std::filesystem::temp_directory_path() / "model.ckpt").string();
  save_checkpoint(model, sched, path, "deadbeef");
  NoiseSchedule sched2;
  DenoiserF back = load_checkpoint(path, &sched2);
  CHECK(sched2.T == sched.T);
  auto ta = model.tensors();
  auto tb = back.tensors();
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i)
    CHECK((*ta[i].second - *tb[i].second).norm() == 0.0f);
}
