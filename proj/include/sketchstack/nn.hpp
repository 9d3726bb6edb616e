#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sketchstack/rng.hpp"

namespace sketchstack {
namespace nn {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <class Scalar>
Scalar softplus(Scalar x) {
  if (x > Scalar(20)) return x;
  return std::log1p(std::exp(x));
}

// Reverse-mode tape over dense matrices (rows = batch, cols = features).
// Built per forward pass; backward() accumulates into leaf gradients.
template <class Scalar>
class Tape {
 public:
  using M = Mat<Scalar>;
  using Var = int;

  Var input(M value) {
    nodes_.push_back(Node{std::move(value), M(), nullptr});
    return static_cast<Var>(nodes_.size()) - 1;
  }

  const M& value(Var v) const { return nodes_[v].value; }

  const M& grad(Var v) const { return nodes_[v].grad; }

  Var matmul(Var a, Var b) {
    M out = nodes_[a].value * nodes_[b].value;
    return make(std::move(out), [this, a, b](const M& g) {
      acc(a, g * nodes_[b].value.transpose());
      acc(b, nodes_[a].value.transpose() * g);
    });
  }

  Var add(Var a, Var b) {
    M out = nodes_[a].value + nodes_[b].value;
    return make(std::move(out), [this, a, b](const M& g) {
      acc(a, g);
      acc(b, g);
    });
  }

  Var sub(Var a, Var b) {
    M out = nodes_[a].value - nodes_[b].value;
    return make(std::move(out), [this, a, b](const M& g) {
      acc(a, g);
      acc(b, -g);
    });
  }

  Var mul(Var a, Var b) {
    M out = nodes_[a].value.cwiseProduct(nodes_[b].value);
    return make(std::move(out), [this, a, b](const M& g) {
      acc(a, g.cwiseProduct(nodes_[b].value));
      acc(b, g.cwiseProduct(nodes_[a].value));
    });
  }

  Var scale(Var a, Scalar s) {
    M out = nodes_[a].value * s;
    return make(std::move(out),
                [this, a, s](const M& g) { acc(a, (g * s).eval()); });
  }

  // broadcast-add a 1 x n bias row to every row
  Var add_rowvec(Var a, Var bias) {
    M out = nodes_[a].value;
    out.rowwise() += nodes_[bias].value.row(0);
    return make(std::move(out), [this, a, bias](const M& g) {
      acc(a, g);
      acc(bias, g.colwise().sum());
    });
  }

  // repeat a (S x n) parameter block `times` times vertically
  Var tile_rows(Var a, int times) {
    const M& v = nodes_[a].value;
    M out(v.rows() * times, v.cols());
    for (int i = 0; i < times; ++i) out.middleRows(i * v.rows(), v.rows()) = v;
    return make(std::move(out), [this, a, times](const M& g) {
      const auto rows = nodes_[a].value.rows();
      M acc_g = M::Zero(rows, nodes_[a].value.cols());
      for (int i = 0; i < times; ++i) acc_g += g.middleRows(i * rows, rows);
      acc(a, acc_g);
    });
  }

  // elementwise product with a constant mask (no gradient for the mask)
  Var mul_const(Var a, M mask) {
    M out = nodes_[a].value.cwiseProduct(mask);
    auto m = std::make_shared<M>(std::move(mask));
    return make(std::move(out),
                [this, a, m](const M& g) { acc(a, g.cwiseProduct(*m)); });
  }

  Var silu(Var a) {
    const M& x = nodes_[a].value;
    M out = x.unaryExpr([](Scalar v) { return v * sigmoid(v); });
    return make(std::move(out), [this, a](const M& g) {
      const M& x = nodes_[a].value;
      M d = x.unaryExpr([](Scalar v) {
        const Scalar s = sigmoid(v);
        return s * (Scalar(1) + v * (Scalar(1) - s));
      });
      acc(a, g.cwiseProduct(d));
    });
  }

  Var mish(Var a) {
    const M& x = nodes_[a].value;
    M out = x.unaryExpr([](Scalar v) { return v * std::tanh(softplus(v)); });
    return make(std::move(out), [this, a](const M& g) {
      const M& x = nodes_[a].value;
      M d = x.unaryExpr([](Scalar v) {
        const Scalar sp = softplus(v);
        const Scalar t = std::tanh(sp);
        const Scalar s = sigmoid(v);
        return t + v * (Scalar(1) - t * t) * s;
      });
      acc(a, g.cwiseProduct(d));
    });
  }

  Var concat_cols(const std::vector<Var>& vars) {
    int cols = 0;
    const auto rows = nodes_[vars[0]].value.rows();
    for (Var v : vars) cols += static_cast<int>(nodes_[v].value.cols());
    M out(rows, cols);
    int at = 0;
    for (Var v : vars) {
      out.middleCols(at, nodes_[v].value.cols()) = nodes_[v].value;
      at += static_cast<int>(nodes_[v].value.cols());
    }
    auto list = std::make_shared<std::vector<Var>>(vars);
    return make(std::move(out), [this, list](const M& g) {
      int at = 0;
      for (Var v : *list) {
        const int w = static_cast<int>(nodes_[v].value.cols());
        acc(v, g.middleCols(at, w));
        at += w;
      }
    });
  }

  // custom elementwise unary with caller-provided forward and derivative;
  // the extension point used by mutation tests
  Var custom_unary(Var a, std::function<Scalar(Scalar)> f,
                   std::function<Scalar(Scalar)> df) {
    const M& x = nodes_[a].value;
    M out = x.unaryExpr([&](Scalar v) { return f(v); });
    auto dfn = std::make_shared<std::function<Scalar(Scalar)>>(std::move(df));
    return make(std::move(out), [this, a, dfn](const M& g) {
      const M& x = nodes_[a].value;
      M d = x.unaryExpr([&](Scalar v) { return (*dfn)(v); });
      acc(a, g.cwiseProduct(d));
    });
  }

  // mean of squared differences over all entries: the training loss kernel
  Var mean_sq(Var pred, Var target) {
    const M diff = nodes_[pred].value - nodes_[target].value;
    const Scalar n = static_cast<Scalar>(diff.size());
    M out(1, 1);
    out(0, 0) = diff.squaredNorm() / n;
    return make(std::move(out), [this, pred, target, n](const M& g) {
      const M diff = nodes_[pred].value - nodes_[target].value;
      const Scalar s = g(0, 0) * Scalar(2) / n;
      acc(pred, (diff * s).eval());
      acc(target, (-diff * s).eval());
    });
  }

  // Fused masked multi-head self-attention over per-sample token blocks.
  // x: (batch*slots) x dim; counts[b] gives the valid slots of sample b.
  // Padded rows yield zero output and receive zero gradient.
  Var mha(Var x, Var wq, Var wk, Var wv, Var wo, std::vector<int> counts,
          int slots, int heads) {
    const M& xv = nodes_[x].value;
    const int dim = static_cast<int>(xv.cols());
    const int dh = dim / heads;
    const int batch = static_cast<int>(counts.size());
    const Scalar inv_sqrt_dh = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

    struct Saved {
      std::vector<M> q, k, v, o;          // per sample, nb x dim
      std::vector<std::vector<M>> probs;  // per sample, per head, nb x nb
    };
    auto saved = std::make_shared<Saved>();
    auto cts = std::make_shared<std::vector<int>>(std::move(counts));

    M out = M::Zero(xv.rows(), dim);
    for (int b = 0; b < batch; ++b) {
      const int nb = (*cts)[b];
      if (nb == 0) {
        saved->q.emplace_back();
        saved->k.emplace_back();
        saved->v.emplace_back();
        saved->o.emplace_back();
        saved->probs.emplace_back();
        continue;
      }
      const M xb = xv.middleRows(b * slots, nb);
      M q = xb * nodes_[wq].value;
      M k = xb * nodes_[wk].value;
      M v = xb * nodes_[wv].value;
      M o(nb, dim);
      std::vector<M> probs;
      for (int h = 0; h < heads; ++h) {
        const M qh = q.middleCols(h * dh, dh);
        const M kh = k.middleCols(h * dh, dh);
        const M vh = v.middleCols(h * dh, dh);
        M z = qh * kh.transpose() * inv_sqrt_dh;
        // row-wise softmax
        M p(nb, nb);
        for (int r = 0; r < nb; ++r) {
          const Scalar mx = z.row(r).maxCoeff();
          Eigen::Array<Scalar, 1, Eigen::Dynamic> e =
              (z.row(r).array() - mx).exp();
          p.row(r) = (e / e.sum()).matrix();
        }
        o.middleCols(h * dh, dh) = p * vh;
        probs.push_back(std::move(p));
      }
      out.middleRows(b * slots, nb) = o * nodes_[wo].value;
      saved->q.push_back(std::move(q));
      saved->k.push_back(std::move(k));
      saved->v.push_back(std::move(v));
      saved->o.push_back(std::move(o));
      saved->probs.push_back(std::move(probs));
    }

    return make(std::move(out), [this, x, wq, wk, wv, wo, saved, cts, slots,
                                 heads, dh, dim, batch,
                                 inv_sqrt_dh](const M& g) {
      const M& xv = nodes_[x].value;
      M dx = M::Zero(xv.rows(), dim);
      M dwq = M::Zero(dim, dim), dwk = M::Zero(dim, dim),
        dwv = M::Zero(dim, dim), dwo = M::Zero(dim, dim);
      for (int b = 0; b < batch; ++b) {
        const int nb = (*cts)[b];
        if (nb == 0) continue;
        const M gb = g.middleRows(b * slots, nb);
        const M& o = saved->o[b];
        dwo += o.transpose() * gb;
        const M go = gb * nodes_[wo].value.transpose();
        M dq = M::Zero(nb, dim), dk = M::Zero(nb, dim), dv = M::Zero(nb, dim);
        for (int h = 0; h < heads; ++h) {
          const M& p = saved->probs[b][h];
          const M goh = go.middleCols(h * dh, dh);
          const M vh = saved->v[b].middleCols(h * dh, dh);
          const M dp = goh * vh.transpose();
          dv.middleCols(h * dh, dh) = p.transpose() * goh;
          // softmax backward per row
          M dz(nb, nb);
          for (int r = 0; r < nb; ++r) {
            const Scalar dot = dp.row(r).dot(p.row(r));
            dz.row(r) =
                p.row(r).cwiseProduct(dp.row(r) -
                                      Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::
                                          Constant(1, nb, dot));
          }
          const M qh = saved->q[b].middleCols(h * dh, dh);
          const M kh = saved->k[b].middleCols(h * dh, dh);
          dq.middleCols(h * dh, dh) = dz * kh * inv_sqrt_dh;
          dk.middleCols(h * dh, dh) = dz.transpose() * qh * inv_sqrt_dh;
        }
        const M xb = xv.middleRows(b * slots, nb);
        dwq += xb.transpose() * dq;
        dwk += xb.transpose() * dk;
        dwv += xb.transpose() * dv;
        dx.middleRows(b * slots, nb) = dq * nodes_[wq].value.transpose() +
                                       dk * nodes_[wk].value.transpose() +
                                       dv * nodes_[wv].value.transpose();
      }
      acc(x, dx);
      acc(wq, dwq);
      acc(wk, dwk);
      acc(wv, dwv);
      acc(wo, dwo);
    });
  }

  // Seeds the root with ones and propagates gradients to every node.
  void backward(Var root) {
    for (Node& n : nodes_) n.grad = M();
    nodes_[root].grad =
        M::Ones(nodes_[root].value.rows(), nodes_[root].value.cols());
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      if (!nodes_[i].backward) continue;
      if (nodes_[i].grad.size() == 0) continue;
      nodes_[i].backward(nodes_[i].grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    M value;
    M grad;
    std::function<void(const M&)> backward;
  };

  Var make(M value, std::function<void(const M&)> bwd) {
    nodes_.push_back(Node{std::move(value), M(), std::move(bwd)});
    return static_cast<Var>(nodes_.size()) - 1;
  }

  void acc(Var v, const M& g) {
    if (nodes_[v].grad.size() == 0)
      nodes_[v].grad = M::Zero(nodes_[v].value.rows(), nodes_[v].value.cols());
    nodes_[v].grad += g;
  }

  std::vector<Node> nodes_;
};

// --- layers and optimizer -----------------------------------------------------

template <class Scalar>
struct Linear {
  Mat<Scalar> w;  // in x out
  Mat<Scalar> b;  // 1 x out

  static Linear init(int in, int out, Rng& rng) {
    Linear l;
    l.w.resize(in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j)
        l.w(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    l.b = Mat<Scalar>::Zero(1, out);
    return l;
  }

  template <class TapeT>
  typename TapeT::Var forward(TapeT& tape, typename TapeT::Var x,
                              typename TapeT::Var wv,
                              typename TapeT::Var bv) const {
    return tape.add_rowvec(tape.matmul(x, wv), bv);
  }
};

// Adaptive moment estimation over a flat list of parameter matrices.
template <class Scalar>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Mat<Scalar>*>& params,
            const std::vector<Mat<Scalar>>& grads) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
        v_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (grads[i].size() == 0) continue;
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] +
              (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
      const Mat<Scalar> mhat = m_[i] / bc1;
      const Mat<Scalar> vhat = v_[i] / bc2;
      *params[i] -=
          (lr_ * mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat<Scalar>> m_, v_;
};

// Central-difference gradient check of a scalar-valued tape function.
// Rebuilds the forward pass with perturbed parameters; returns the maximum
// relative error over `max_params` randomly chosen entries.
template <class Scalar>
double grad_check_fn(
    const std::function<Scalar(const std::vector<Mat<Scalar>*>&)>& loss_value,
    const std::function<void(std::vector<Mat<Scalar>>&)>& loss_grads,
    const std::vector<Mat<Scalar>*>& params, Rng& rng, double h = 1e-4,
    int max_params = 200) {
  std::vector<Mat<Scalar>> grads;
  loss_grads(grads);
  std::vector<std::pair<int, int>> picks;  // (param idx, flat entry)
  long total = 0;
  for (auto* p : params) total += p->size();
  const int want = static_cast<int>(std::min<long>(max_params, total));
  for (int k = 0; k < want; ++k) {
    long flat = static_cast<long>(rng.uniform_int(total));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (flat < params[i]->size()) {
        picks.push_back({static_cast<int>(i), static_cast<int>(flat)});
        break;
      }
      flat -= params[i]->size();
    }
  }
  double max_rel = 0.0;
  for (const auto& [pi, entry] : picks) {
    Scalar* slot = params[pi]->data() + entry;
    const Scalar orig = *slot;
    *slot = orig + static_cast<Scalar>(h);
    const double lp = static_cast<double>(loss_value(params));
    *slot = orig - static_cast<Scalar>(h);
    const double lm = static_cast<double>(loss_value(params));
    *slot = orig;
    const double fd = (lp - lm) / (2 * h);
    const double an = static_cast<double>(grads[pi].data()[entry]);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    max_rel = std::max(max_rel, std::abs(fd - an) / denom);
  }
  return max_rel;
}

// Sinusoidal timestep embedding, one row per batch entry.
template <class Scalar>
Mat<Scalar> sinusoidal_embedding(const std::vector<int>& t, int dim) {
  Mat<Scalar> out(static_cast<int>(t.size()), dim);
  const int half = dim / 2;
  for (std::size_t r = 0; r < t.size(); ++r)
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      out(static_cast<int>(r), i) =
          static_cast<Scalar>(std::sin(t[r] * freq));
      out(static_cast<int>(r), half + i) =
          static_cast<Scalar>(std::cos(t[r] * freq));
    }
  return out;
}

}  // namespace nn
}  // namespace sketchstack
