#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sketchstack/config.hpp"
#include "sketchstack/nn.hpp"

namespace sketchstack {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& msg, int at_step)
      : std::runtime_error(msg), step(at_step) {}
  int step;
};

struct NoiseSchedule {
  int T = 0;
  std::vector<double> alpha_bar;  // size T+1, alpha_bar[0] == 1
  std::vector<double> beta;       // size T+1, beta[0] unused

  double a_coef(int t) const {  // A_t = beta_t / sqrt(1 - alpha_bar_t)
    return beta[t] / std::sqrt(1.0 - alpha_bar[t]);
  }
  double b_coef(int t) const { return std::sqrt(beta[t]); }  // B_t
};

// Cosine schedule: alpha_bar(t) = cos^2(((t/T + s)/(1+s)) * pi/2) normalized
// to 1 at t = 0; betas derived and clamped to [1e-6, 0.999].
inline NoiseSchedule cosine_schedule(int T, double offset = 0.008) {
  if (T < 1) throw ConfigError("schedule needs T >= 1");
  NoiseSchedule s;
  s.T = T;
  s.alpha_bar.resize(T + 1);
  s.beta.assign(T + 1, 0.0);
  const double pi_2 = 1.5707963267948966;
  auto f = [&](double t) {
    const double x = ((t / T + offset) / (1.0 + offset)) * pi_2;
    const double c = std::cos(x);
    return c * c;
  };
  const double f0 = f(0.0);
  for (int t = 0; t <= T; ++t) s.alpha_bar[t] = f(t) / f0;
  for (int t = 1; t <= T; ++t) {
    double b = 1.0 - s.alpha_bar[t] / s.alpha_bar[t - 1];
    b = std::min(0.999, std::max(1e-6, b));
    s.beta[t] = b;
  }
  return s;
}

// Eq.-style forward interpolant: p_t = sqrt(ab) p0 + sqrt(1-ab) eps.
template <class Derived1, class Derived2>
Eigen::Matrix<typename Derived1::Scalar, Eigen::Dynamic, Eigen::Dynamic>
forward_noise(const Eigen::MatrixBase<Derived1>& p0,
              const Eigen::MatrixBase<Derived2>& eps, double alpha_bar) {
  if (p0.rows() != eps.rows() || p0.cols() != eps.cols())
    throw ShapeError("forward_noise: p0 and eps shapes differ");
  using S = typename Derived1::Scalar;
  const S sa = static_cast<S>(std::sqrt(alpha_bar));
  const S sb = static_cast<S>(std::sqrt(1.0 - alpha_bar));
  return p0 * sa + eps * sb;
}

enum class ArityMode { Fixed, Variadic };

// Per-slot feature widths for the variadic backbone.
constexpr int kSlotPoseDims = 3;
constexpr int kSlotGeomDims = 4;  // (w, l, h, role)

struct TrainingSample {
  std::vector<float> g;
  std::vector<float> p;
  int count = 0;  // valid operand slots (variadic); operand count otherwise
};

struct Dataset {
  std::string relation;
  ArityMode mode = ArityMode::Fixed;
  int arity = 2;      // fixed-mode operand count
  int pose_dim = 6;   // fixed: total; variadic: per-slot * max_slots
  int geom_dim = 6;
  int max_slots = 0;  // variadic only
  std::vector<TrainingSample> samples;
};

// A per-relation denoising network.  Fixed arity uses the MLP backbone over
// concatenated encodings; variadic uses masked self-attention over slot
// tokens with additive slot position encoding.
template <class Scalar>
struct Denoiser {
  using M = nn::Mat<Scalar>;
  using TapeT = nn::Tape<Scalar>;
  using Var = typename TapeT::Var;

  std::string relation;
  ArityMode mode = ArityMode::Fixed;
  int arity = 2;
  int pose_dim = 6;
  int geom_dim = 6;
  int max_slots = 8;
  ArchConfig arch;
  std::uint64_t seed = 0;

  nn::Linear<Scalar> shape1, shape2, pose1, pose2, time1, time2;
  nn::Linear<Scalar> bb1, bb2, dec;
  struct AttnBlock {
    M wq, wk, wv, wo;
    nn::Linear<Scalar> ff1, ff2;
  };
  std::vector<AttnBlock> blocks;
  M slot_emb;

  static Denoiser create(const std::string& relation, ArityMode mode, int arity,
                         int pose_dim, int geom_dim, const ArchConfig& arch,
                         std::uint64_t seed) {
    Denoiser m;
    m.relation = relation;
    m.mode = mode;
    m.arity = arity;
    m.pose_dim = pose_dim;
    m.geom_dim = geom_dim;
    m.max_slots = arch.max_slots;
    m.arch = arch;
    m.seed = seed;
    Rng rng(seed);
    using L = nn::Linear<Scalar>;
    if (mode == ArityMode::Fixed) {
      m.shape1 = L::init(geom_dim, arch.hidden, rng);
      m.shape2 = L::init(arch.hidden, arch.latent, rng);
      m.pose1 = L::init(pose_dim, arch.hidden, rng);
      m.pose2 = L::init(arch.hidden, arch.latent, rng);
      m.time1 = L::init(arch.time_emb, arch.time_hidden, rng);
      m.time2 = L::init(arch.time_hidden, arch.latent, rng);
      m.bb1 = L::init(3 * arch.latent, arch.hidden, rng);
      m.bb2 = L::init(arch.hidden, arch.hidden, rng);
      m.dec = L::init(arch.hidden, pose_dim, rng);
    } else {
      const int d = arch.token_dim;
      m.shape1 = L::init(kSlotGeomDims, arch.hidden, rng);
      m.shape2 = L::init(arch.hidden, d, rng);
      m.pose1 = L::init(kSlotPoseDims, arch.hidden, rng);
      m.pose2 = L::init(arch.hidden, d, rng);
      m.time1 = L::init(arch.time_emb, arch.time_hidden, rng);
      m.time2 = L::init(arch.time_hidden, d, rng);
      m.dec = L::init(d, kSlotPoseDims, rng);
      m.slot_emb.resize(arch.max_slots, d);
      const double bound = 1.0 / std::sqrt(static_cast<double>(d));
      for (int i = 0; i < arch.max_slots; ++i)
        for (int j = 0; j < d; ++j)
          m.slot_emb(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
      for (int blk = 0; blk < arch.attn_blocks; ++blk) {
        AttnBlock b;
        auto init_mat = [&](M& w) {
          w.resize(d, d);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
              w(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
        };
        init_mat(b.wq);
        init_mat(b.wk);
        init_mat(b.wv);
        init_mat(b.wo);
        b.ff1 = L::init(d, 2 * d, rng);
        b.ff2 = L::init(2 * d, d, rng);
        m.blocks.push_back(std::move(b));
      }
    }
    return m;
  }

  // Parameter tensors in the declared checkpoint order.
  std::vector<std::pair<std::string, M*>> tensors() {
    std::vector<std::pair<std::string, M*>> out = {
        {"shape1.w", &shape1.w}, {"shape1.b", &shape1.b},
        {"shape2.w", &shape2.w}, {"shape2.b", &shape2.b},
        {"pose1.w", &pose1.w},   {"pose1.b", &pose1.b},
        {"pose2.w", &pose2.w},   {"pose2.b", &pose2.b},
        {"time1.w", &time1.w},   {"time1.b", &time1.b},
        {"time2.w", &time2.w},   {"time2.b", &time2.b},
        {"dec.w", &dec.w},       {"dec.b", &dec.b},
    };
    if (mode == ArityMode::Fixed) {
      out.push_back({"bb1.w", &bb1.w});
      out.push_back({"bb1.b", &bb1.b});
      out.push_back({"bb2.w", &bb2.w});
      out.push_back({"bb2.b", &bb2.b});
    } else {
      out.push_back({"slot_emb", &slot_emb});
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "attn" + std::to_string(i) + ".";
        out.push_back({p + "wq", &blocks[i].wq});
        out.push_back({p + "wk", &blocks[i].wk});
        out.push_back({p + "wv", &blocks[i].wv});
        out.push_back({p + "wo", &blocks[i].wo});
        out.push_back({p + "ff1.w", &blocks[i].ff1.w});
        out.push_back({p + "ff1.b", &blocks[i].ff1.b});
        out.push_back({p + "ff2.w", &blocks[i].ff2.w});
        out.push_back({p + "ff2.b", &blocks[i].ff2.b});
      }
    }
    return out;
  }

  // Builds the forward pass on a tape.  For Fixed mode: poses (B x pose_dim),
  // geoms (B x geom_dim).  For Variadic: poses (B*S x 3), geoms (B*S x 4),
  // counts per sample.  param_vars (if given) receives one tape var per
  // tensors() entry, in order.
  Var forward(TapeT& tape, Var poses, Var geoms, const std::vector<int>& ts,
              const std::vector<int>& counts,
              std::vector<Var>* param_vars = nullptr) {
    std::vector<Var> pv;
    for (auto& [name, mat] : tensors()) pv.push_back(tape.input(*mat));
    if (param_vars != nullptr) *param_vars = pv;
    int k = 0;
    auto next = [&]() { return pv[k++]; };
    const Var shape1w = next(), shape1b = next(), shape2w = next(),
              shape2b = next();
    const Var pose1w = next(), pose1b = next(), pose2w = next(),
              pose2b = next();
    const Var time1w = next(), time1b = next(), time2w = next(),
              time2b = next();
    const Var decw = next(), decb = next();

    if (mode == ArityMode::Fixed) {
      const Var bb1w = next(), bb1b = next(), bb2w = next(), bb2b = next();
      const Var shape = tape.silu(tape.add_rowvec(
          tape.matmul(tape.silu(tape.add_rowvec(tape.matmul(geoms, shape1w),
                                                shape1b)),
                      shape2w),
          shape2b));
      const Var pose = tape.silu(tape.add_rowvec(
          tape.matmul(
              tape.silu(tape.add_rowvec(tape.matmul(poses, pose1w), pose1b)),
              pose2w),
          pose2b));
      const Var temb =
          tape.input(nn::sinusoidal_embedding<Scalar>(ts, arch.time_emb));
      const Var time = tape.add_rowvec(
          tape.matmul(
              tape.mish(tape.add_rowvec(tape.matmul(temb, time1w), time1b)),
              time2w),
          time2b);
      const Var h = tape.concat_cols({shape, pose, time});
      const Var h1 = tape.silu(tape.add_rowvec(tape.matmul(h, bb1w), bb1b));
      const Var h2 = tape.silu(tape.add_rowvec(tape.matmul(h1, bb2w), bb2b));
      return tape.add_rowvec(tape.matmul(h2, decw), decb);
    }

    const Var slot_embv = next();
    std::vector<std::array<Var, 8>> attn_vars;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      std::array<Var, 8> a;
      for (int j = 0; j < 8; ++j) a[j] = next();
      attn_vars.push_back(a);
    }

    const int batch = static_cast<int>(counts.size());
    const int S = max_slots;
    // per-slot time rows: repeat each sample's t over its slot rows
    std::vector<int> slot_ts(static_cast<std::size_t>(batch) * S);
    for (int b = 0; b < batch; ++b)
      for (int s = 0; s < S; ++s) slot_ts[static_cast<std::size_t>(b) * S + s] = ts[b];
    // validity mask over slot rows
    M mask = M::Zero(static_cast<int>(batch) * S, arch.token_dim);
    M out_mask = M::Zero(static_cast<int>(batch) * S, kSlotPoseDims);
    for (int b = 0; b < batch; ++b)
      for (int s = 0; s < counts[b]; ++s) {
        mask.row(b * S + s).setOnes();
        out_mask.row(b * S + s).setOnes();
      }

    const Var shape = tape.silu(tape.add_rowvec(
        tape.matmul(
            tape.silu(tape.add_rowvec(tape.matmul(geoms, shape1w), shape1b)),
            shape2w),
        shape2b));
    const Var pose = tape.silu(tape.add_rowvec(
        tape.matmul(
            tape.silu(tape.add_rowvec(tape.matmul(poses, pose1w), pose1b)),
            pose2w),
        pose2b));
    const Var temb =
        tape.input(nn::sinusoidal_embedding<Scalar>(slot_ts, arch.time_emb));
    const Var time = tape.add_rowvec(
        tape.matmul(
            tape.mish(tape.add_rowvec(tape.matmul(temb, time1w), time1b)),
            time2w),
        time2b);
    Var tok = tape.add(tape.add(shape, pose), time);
    if (arch.slot_pos) tok = tape.add(tok, tape.tile_rows(slot_embv, batch));
    tok = tape.mul_const(tok, mask);

    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& a = attn_vars[i];
      const Var att =
          tape.mha(tok, a[0], a[1], a[2], a[3], counts, S, arch.heads);
      tok = tape.add(tok, att);
      const Var ff = tape.add_rowvec(
          tape.matmul(
              tape.silu(tape.add_rowvec(tape.matmul(tok, a[4]), a[5])),
              a[6]),
          a[7]);
      tok = tape.mul_const(tape.add(tok, ff), mask);
    }
    const Var eps = tape.add_rowvec(tape.matmul(tok, decw), decb);
    return tape.mul_const(eps, out_mask);
  }

  // Pure inference forward pass.
  M denoise(const M& poses, const M& geoms, const std::vector<int>& ts,
            const std::vector<int>& counts) {
    if (mode == ArityMode::Variadic) {
      for (int c : counts)
        if (c > max_slots)
          throw ArityError(relation + ": operand count exceeds max slots");
    }
    TapeT tape;
    const Var p = tape.input(poses);
    const Var g = tape.input(geoms);
    const Var out = forward(tape, p, g, ts, counts);
    return tape.value(out);
  }
};

using DenoiserF = Denoiser<float>;
using DenoiserD = Denoiser<double>;

struct TrainResult {
  DenoiserF model;
  std::vector<double> loss_trace;  // every 100 steps
  double final_loss = 0.0;
};

namespace diffdetail {

// Packs a minibatch: fixed mode keeps flat rows; variadic expands to slot
// rows with zero padding.
template <class Scalar>
struct Batch {
  nn::Mat<Scalar> p0, g, eps;
  std::vector<int> ts;
  std::vector<int> counts;
};

template <class Scalar>
Batch<Scalar> make_batch(const Dataset& data, const std::vector<int>& idx,
                         const NoiseSchedule& sched, int max_slots, Rng& rng) {
  Batch<Scalar> b;
  const int n = static_cast<int>(idx.size());
  if (data.mode == ArityMode::Fixed) {
    b.p0.resize(n, data.pose_dim);
    b.g.resize(n, data.geom_dim);
    b.eps.resize(n, data.pose_dim);
    for (int r = 0; r < n; ++r) {
      const TrainingSample& s = data.samples[idx[r]];
      for (int c = 0; c < data.pose_dim; ++c) b.p0(r, c) = s.p[c];
      for (int c = 0; c < data.geom_dim; ++c) b.g(r, c) = s.g[c];
      for (int c = 0; c < data.pose_dim; ++c)
        b.eps(r, c) = static_cast<Scalar>(rng.normal());
      b.counts.push_back(s.count);
      b.ts.push_back(1 + static_cast<int>(rng.uniform_int(sched.T)));
    }
  } else {
    b.p0 = nn::Mat<Scalar>::Zero(n * max_slots, kSlotPoseDims);
    b.g = nn::Mat<Scalar>::Zero(n * max_slots, kSlotGeomDims);
    b.eps = nn::Mat<Scalar>::Zero(n * max_slots, kSlotPoseDims);
    for (int r = 0; r < n; ++r) {
      const TrainingSample& s = data.samples[idx[r]];
      for (int slot = 0; slot < s.count; ++slot) {
        for (int c = 0; c < kSlotPoseDims; ++c)
          b.p0(r * max_slots + slot, c) = s.p[slot * kSlotPoseDims + c];
        for (int c = 0; c < kSlotGeomDims; ++c)
          b.g(r * max_slots + slot, c) = s.g[slot * kSlotGeomDims + c];
        for (int c = 0; c < kSlotPoseDims; ++c)
          b.eps(r * max_slots + slot, c) = static_cast<Scalar>(rng.normal());
      }
      b.counts.push_back(s.count);
      b.ts.push_back(1 + static_cast<int>(rng.uniform_int(sched.T)));
    }
  }
  return b;
}

}  // namespace diffdetail

// Minibatch training of the denoising objective: uniform t, fresh Gaussian
// noise, Adam steps.  Reproducible: same data, config, and seed give
// identical weights.
inline TrainResult train_denoiser(const Dataset& data, const ArchConfig& arch,
                                  const OptConfig& opt,
                                  const NoiseSchedule& sched,
                                  std::uint64_t seed) {
  if (static_cast<int>(data.samples.size()) < opt.batch)
    throw ConfigError("dataset smaller than one batch: " + data.relation);
  TrainResult result;
  ArchConfig model_arch = arch;
  if (data.mode == ArityMode::Variadic) model_arch.max_slots = data.max_slots;
  result.model =
      DenoiserF::create(data.relation, data.mode, data.arity, data.pose_dim,
                        data.geom_dim, model_arch, seed);
  DenoiserF& model = result.model;
  auto tensors = model.tensors();
  std::vector<nn::Mat<float>*> params;
  for (auto& [name, mat] : tensors) params.push_back(mat);
  nn::Adam<float> adam(opt.lr, opt.beta1, opt.beta2, opt.adam_eps);
  Rng rng(seed ^ 0x5f3759df9e3779b9ULL);

  for (int step = 0; step < opt.steps; ++step) {
    std::vector<int> idx(opt.batch);
    for (int i = 0; i < opt.batch; ++i)
      idx[i] = static_cast<int>(rng.uniform_int(data.samples.size()));
    auto batch = diffdetail::make_batch<float>(data, idx, sched,
                                               model.max_slots, rng);
    nn::Mat<float> pt(batch.p0.rows(), batch.p0.cols());
    if (data.mode == ArityMode::Fixed) {
      for (int r = 0; r < pt.rows(); ++r) {
        const double ab = sched.alpha_bar[batch.ts[r]];
        pt.row(r) = forward_noise(batch.p0.row(r), batch.eps.row(r), ab).row(0);
      }
    } else {
      for (int r = 0; r < pt.rows(); ++r) {
        const double ab = sched.alpha_bar[batch.ts[r / model.max_slots]];
        pt.row(r) = forward_noise(batch.p0.row(r), batch.eps.row(r), ab).row(0);
      }
    }

    nn::Tape<float> tape;
    const auto pv = tape.input(std::move(pt));
    const auto gv = tape.input(batch.g);
    const auto target = tape.input(batch.eps);
    std::vector<int> param_vars;
    const auto out = model.forward(tape, pv, gv, batch.ts, batch.counts,
                                   &param_vars);
    const auto loss = tape.mean_sq(out, target);
    const double loss_val = tape.value(loss)(0, 0);
    if (!std::isfinite(loss_val))
      throw TrainingDiverged("loss diverged for " + data.relation, step);
    tape.backward(loss);
    std::vector<nn::Mat<float>> grads;
    for (int v : param_vars) grads.push_back(tape.grad(v));
    adam.step(params, grads);
    if (step % 100 == 0) result.loss_trace.push_back(loss_val);
    result.final_loss = loss_val;
  }
  return result;
}

// Ancestral reverse chain; the final step emits the posterior mean, which at
// t = 1 equals the model's clean-pose estimate.  Bit-identical for a fixed
// seed.  Returns normalized poses.
inline nn::Mat<float> sample_single_batch(DenoiserF& model,
                                          const nn::Mat<float>& geoms,
                                          const std::vector<int>& counts,
                                          const NoiseSchedule& sched,
                                          Rng& rng) {
  const int rows = static_cast<int>(geoms.rows());
  const int pose_cols =
      model.mode == ArityMode::Fixed ? model.pose_dim : kSlotPoseDims;
  nn::Mat<float> p(rows, pose_cols);
  const int batch = static_cast<int>(counts.size());
  auto valid_row = [&](int r) {
    if (model.mode == ArityMode::Fixed) return true;
    return r % model.max_slots < counts[r / model.max_slots];
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < pose_cols; ++c)
      p(r, c) = valid_row(r) ? rng.normal_f() : 0.0f;

  std::vector<int> ts(batch);
  for (int t = sched.T; t >= 1; --t) {
    std::fill(ts.begin(), ts.end(), t);
    const nn::Mat<float> eps = model.denoise(p, geoms, ts, counts);
    const double ab = sched.alpha_bar[t];
    const double alpha = 1.0 - sched.beta[t];
    if (t > 1) {
      const float c1 = static_cast<float>(1.0 / std::sqrt(alpha));
      const float c2 =
          static_cast<float>(sched.beta[t] / std::sqrt(1.0 - ab));
      const float sn = static_cast<float>(std::sqrt(sched.beta[t]));
      for (int r = 0; r < rows; ++r) {
        if (!valid_row(r)) continue;
        for (int c = 0; c < pose_cols; ++c)
          p(r, c) = c1 * (p(r, c) - c2 * eps(r, c)) + sn * rng.normal_f();
      }
    } else {
      const float ca = static_cast<float>(std::sqrt(1.0 - ab));
      const float cb = static_cast<float>(1.0 / std::sqrt(ab));
      for (int r = 0; r < rows; ++r) {
        if (!valid_row(r)) continue;
        for (int c = 0; c < pose_cols; ++c)
          p(r, c) = cb * (p(r, c) - ca * eps(r, c));
      }
    }
  }
  return p;
}

inline nn::Mat<float> sample_single(DenoiserF& model,
                                    const nn::Mat<float>& geoms,
                                    const NoiseSchedule& sched, Rng& rng) {
  const std::vector<int> counts{model.arity};
  return sample_single_batch(model, geoms, counts, sched, rng);
}

// Finite-difference check of the training-loss gradients on one batch.
// Returns the maximum relative error over sampled parameters.
template <class Scalar>
double grad_check(Denoiser<Scalar>& model, const nn::Mat<Scalar>& p0,
                  const nn::Mat<Scalar>& g, const nn::Mat<Scalar>& eps,
                  const std::vector<int>& ts, const std::vector<int>& counts,
                  const NoiseSchedule& sched, Rng& rng, double h = 1e-4,
                  int max_params = 200) {
  auto tensors = model.tensors();
  std::vector<nn::Mat<Scalar>*> params;
  for (auto& [name, mat] : tensors) params.push_back(mat);

  nn::Mat<Scalar> pt(p0.rows(), p0.cols());
  for (int r = 0; r < p0.rows(); ++r) {
    const int sample =
        model.mode == ArityMode::Fixed ? r : r / model.max_slots;
    const double ab = sched.alpha_bar[ts[sample]];
    pt.row(r) = forward_noise(p0.row(r), eps.row(r), ab).row(0);
  }

  auto loss_value = [&](const std::vector<nn::Mat<Scalar>*>&) -> Scalar {
    nn::Tape<Scalar> tape;
    const auto pv = tape.input(pt);
    const auto gv = tape.input(g);
    const auto target = tape.input(eps);
    const auto out = model.forward(tape, pv, gv, ts, counts);
    return tape.value(tape.mean_sq(out, target))(0, 0);
  };
  auto loss_grads = [&](std::vector<nn::Mat<Scalar>>& grads) {
    nn::Tape<Scalar> tape;
    const auto pv = tape.input(pt);
    const auto gv = tape.input(g);
    const auto target = tape.input(eps);
    std::vector<int> param_vars;
    const auto out = model.forward(tape, pv, gv, ts, counts, &param_vars);
    const auto loss = tape.mean_sq(out, target);
    tape.backward(loss);
    grads.clear();
    for (int v : param_vars) grads.push_back(tape.grad(v));
  };
  return nn::grad_check_fn<Scalar>(loss_value, loss_grads, params, rng, h,
                                   max_params);
}

// --- checkpoint I/O -----------------------------------------------------------
// Layout: u32 little-endian header length, JSON header, then row-major
// float32 tensor data in the header's declared order.

inline void save_checkpoint(DenoiserF& model, const NoiseSchedule& sched,
                            const std::string& path,
                            const std::string& cfg_hash = "") {
  json header;
  header["relation"] = model.relation;
  header["arity_mode"] =
      model.mode == ArityMode::Fixed ? "fixed" : "variadic";
  header["arity"] = model.arity;
  header["pose_dim"] = model.pose_dim;
  header["geom_dim"] = model.geom_dim;
  header["max_slots"] = model.max_slots;
  header["seed"] = model.seed;
  header["cfg_hash"] = cfg_hash;
  header["schedule"] = {{"T", sched.T}};
  header["arch"] = {{"latent", model.arch.latent},
                    {"hidden", model.arch.hidden},
                    {"time_emb", model.arch.time_emb},
                    {"time_hidden", model.arch.time_hidden},
                    {"token_dim", model.arch.token_dim},
                    {"attn_blocks", model.arch.attn_blocks},
                    {"heads", model.arch.heads},
                    {"max_slots", model.arch.max_slots},
                    {"slot_pos", model.arch.slot_pos}};
  header["layout"] = "row-major";
  json tensor_list = json::array();
  for (auto& [name, mat] : model.tensors())
    tensor_list.push_back(json{{"name", name},
                               {"rows", mat->rows()},
                               {"cols", mat->cols()}});
  header["tensors"] = tensor_list;

  const std::string head = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path);
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(head.data(), head.size());
  for (auto& [name, mat] : model.tensors())
    for (int r = 0; r < mat->rows(); ++r)
      for (int c = 0; c < mat->cols(); ++c) {
        const float v = (*mat)(r, c);
        os.write(reinterpret_cast<const char*>(&v), 4);
      }
}

inline DenoiserF load_checkpoint(const std::string& path,
                                 NoiseSchedule* sched_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint: " + path);
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 4);
  std::string head(len, '\0');
  is.read(head.data(), len);
  const json header = json::parse(head);

  ArchConfig arch;
  arch.latent = header["arch"]["latent"];
  arch.hidden = header["arch"]["hidden"];
  arch.time_emb = header["arch"]["time_emb"];
  arch.time_hidden = header["arch"]["time_hidden"];
  arch.token_dim = header["arch"]["token_dim"];
  arch.attn_blocks = header["arch"]["attn_blocks"];
  arch.heads = header["arch"]["heads"];
  arch.max_slots = header["arch"]["max_slots"];
  arch.slot_pos = header["arch"]["slot_pos"];
  DenoiserF model = DenoiserF::create(
      header["relation"],
      header["arity_mode"] == "fixed" ? ArityMode::Fixed : ArityMode::Variadic,
      header["arity"], header["pose_dim"], header["geom_dim"], arch,
      header["seed"]);
  for (auto& [name, mat] : model.tensors())
    for (int r = 0; r < mat->rows(); ++r)
      for (int c = 0; c < mat->cols(); ++c) {
        float v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        (*mat)(r, c) = v;
      }
  if (!is) throw IoError("truncated checkpoint: " + path);
  if (sched_out != nullptr)
    *sched_out = cosine_schedule(header["schedule"]["T"]);
  return model;
}

}  // namespace sketchstack
