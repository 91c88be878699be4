#pragma once

#include <cblas.h>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "presto/tensor.hpp"

namespace presto {

inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}
inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

// Reverse-mode tape over dense tensors. Nodes are created in topological
// order; backward() walks the tape in reverse. Values live until the tape is
// destroyed, so one tape corresponds to one forward/backward pass.
template <typename S>
class TapeT {
 public:
  using Var = int32_t;

  struct AssemblePiece {
    Var src;
    std::vector<int32_t> src_rows;  // row of src feeding each destination row
    std::vector<int32_t> dst_rows;  // same length as src_rows
    int64_t col_off = 0;
  };

  Var constant(TensorT<S> t) { return push(std::move(t), false); }
  Var param(TensorT<S> t) { return push(std::move(t), true); }

  const TensorT<S>& value(Var v) const { return nodes_[size_t(v)].value; }
  const TensorT<S>& grad(Var v) const {
    if (!nodes_[size_t(v)].requires_grad)
      throw std::logic_error("tape: grad of non-differentiable node");
    return nodes_[size_t(v)].grad;
  }
  bool requires_grad(Var v) const { return nodes_[size_t(v)].requires_grad; }
  size_t size() const { return nodes_.size(); }

  // ---- ops -----------------------------------------------------------------

  Var matmul(Var a, Var b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul: shape mismatch");
    TensorT<S> out({A.rows(), B.cols()});
    gemm(false, false, int(A.rows()), int(B.cols()), int(A.cols()), S(1),
         A.data.data(), int(A.cols()), B.data.data(), int(B.cols()), S(0),
         out.data.data(), int(B.cols()));
    Var y = push(std::move(out), rg(a) || rg(b));
    set_backward(y, [this, a, b, y] {
      const auto& A = val(a);
      const auto& B = val(b);
      const auto& G = nodes_[size_t(y)].grad;
      if (rg(a))
        gemm(false, true, int(A.rows()), int(A.cols()), int(B.cols()), S(1),
             G.data.data(), int(B.cols()), B.data.data(), int(B.cols()), S(1),
             gptr(a), int(A.cols()));
      if (rg(b))
        gemm(true, false, int(B.rows()), int(B.cols()), int(A.rows()), S(1),
             A.data.data(), int(A.cols()), G.data.data(), int(B.cols()), S(1),
             gptr(b), int(B.cols()));
    });
    return y;
  }

  // y = x w + bias (bias broadcast over rows); bias < 0 means none.
  Var linear(Var x, Var w, Var bias = -1) {
    const auto& X = val(x);
    const auto& W = val(w);
    if (X.cols() != W.rows()) throw std::invalid_argument("linear: shape mismatch");
    TensorT<S> out({X.rows(), W.cols()});
    gemm(false, false, int(X.rows()), int(W.cols()), int(X.cols()), S(1),
         X.data.data(), int(X.cols()), W.data.data(), int(W.cols()), S(0),
         out.data.data(), int(W.cols()));
    if (bias >= 0) {
      const auto& B = val(bias);
      if (B.numel() != W.cols()) throw std::invalid_argument("linear: bad bias");
      S* o = out.data.data();
      for (int64_t r = 0; r < out.rows(); ++r)
        for (int64_t c = 0; c < out.cols(); ++c) o[r * out.cols() + c] += B.data[size_t(c)];
    }
    Var y = push(std::move(out), rg(x) || rg(w) || (bias >= 0 && rg(bias)));
    set_backward(y, [this, x, w, bias, y] {
      const auto& X = val(x);
      const auto& W = val(w);
      const auto& G = nodes_[size_t(y)].grad;
      if (rg(x))
        gemm(false, true, int(X.rows()), int(X.cols()), int(W.cols()), S(1),
             G.data.data(), int(W.cols()), W.data.data(), int(W.cols()), S(1),
             gptr(x), int(X.cols()));
      if (rg(w))
        gemm(true, false, int(W.rows()), int(W.cols()), int(X.rows()), S(1),
             X.data.data(), int(X.cols()), G.data.data(), int(W.cols()), S(1),
             gptr(w), int(W.cols()));
      if (bias >= 0 && rg(bias)) {
        S* gb = gptr(bias);
        for (int64_t r = 0; r < G.rows(); ++r)
          for (int64_t c = 0; c < G.cols(); ++c) gb[c] += G.at(r, c);
      }
    });
    return y;
  }

  Var add(Var a, Var b) { return add_scaled(a, b, S(1)); }

  // a + alpha * b, elementwise (shapes must match).
  Var add_scaled(Var a, Var b, S alpha) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.shape != B.shape) throw std::invalid_argument("add: shape mismatch");
    TensorT<S> out = A;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += alpha * B.data[i];
    Var y = push(std::move(out), rg(a) || rg(b));
    set_backward(y, [this, a, b, alpha, y] {
      const auto& G = nodes_[size_t(y)].grad;
      if (rg(a)) {
        S* g = gptr(a);
        for (size_t i = 0; i < G.data.size(); ++i) g[i] += G.data[i];
      }
      if (rg(b)) {
        S* g = gptr(b);
        for (size_t i = 0; i < G.data.size(); ++i) g[i] += alpha * G.data[i];
      }
    });
    return y;
  }

  Var scale(Var a, S c) {
    TensorT<S> out = val(a);
    for (auto& v : out.data) v *= c;
    Var y = push(std::move(out), rg(a));
    set_backward(y, [this, a, c, y] {
      if (!rg(a)) return;
      const auto& G = nodes_[size_t(y)].grad;
      S* g = gptr(a);
      for (size_t i = 0; i < G.data.size(); ++i) g[i] += c * G.data[i];
    });
    return y;
  }

  Var mul(Var a, Var b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.shape != B.shape) throw std::invalid_argument("mul: shape mismatch");
    TensorT<S> out = A;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
    Var y = push(std::move(out), rg(a) || rg(b));
    set_backward(y, [this, a, b, y] {
      const auto& G = nodes_[size_t(y)].grad;
      const auto& A = val(a);
      const auto& B = val(b);
      if (rg(a)) {
        S* g = gptr(a);
        for (size_t i = 0; i < G.data.size(); ++i) g[i] += G.data[i] * B.data[i];
      }
      if (rg(b)) {
        S* g = gptr(b);
        for (size_t i = 0; i < G.data.size(); ++i) g[i] += G.data[i] * A.data[i];
      }
    });
    return y;
  }

  Var sum_all(Var a) {
    S s = 0;
    for (S v : val(a).data) s += v;
    Var y = push(TensorT<S>({1}, {s}), rg(a));
    set_backward(y, [this, a, y] {
      if (!rg(a)) return;
      S g0 = nodes_[size_t(y)].grad.data[0];
      S* g = gptr(a);
      for (size_t i = 0; i < val(a).data.size(); ++i) g[i] += g0;
    });
    return y;
  }

  Var mean_all(Var a) {
    return scale(sum_all(a), S(1) / S(val(a).numel()));
  }

  Var gelu(Var a) {
    TensorT<S> out = val(a);
    for (auto& v : out.data) v = S(0.5) * v * (S(1) + S(std::erf(double(v) * M_SQRT1_2)));
    Var y = push(std::move(out), rg(a));
    set_backward(y, [this, a, y] {
      if (!rg(a)) return;
      const auto& G = nodes_[size_t(y)].grad;
      const auto& A = val(a);
      S* g = gptr(a);
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (size_t i = 0; i < G.data.size(); ++i) {
        double x = double(A.data[i]);
        double d = 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
                   x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        g[i] += G.data[i] * S(d);
      }
    });
    return y;
  }

  Var softmax_rows(Var a) {
    TensorT<S> out = val(a);
    softmax_inplace(out);
    Var y = push(std::move(out), rg(a));
    set_backward(y, [this, a, y] {
      if (!rg(a)) return;
      const auto& P = nodes_[size_t(y)].value;
      const auto& G = nodes_[size_t(y)].grad;
      S* g = gptr(a);
      for (int64_t r = 0; r < P.rows(); ++r) {
        S dot = 0;
        for (int64_t c = 0; c < P.cols(); ++c) dot += G.at(r, c) * P.at(r, c);
        for (int64_t c = 0; c < P.cols(); ++c)
          g[r * P.cols() + c] += P.at(r, c) * (G.at(r, c) - dot);
      }
    });
    return y;
  }

  // Row-wise layer norm with affine parameters, eps = 1e-5.
  Var layer_norm(Var x, Var gamma, Var beta) {
    const auto& X = val(x);
    const auto& Gm = val(gamma);
    const auto& Bt = val(beta);
    const int64_t C = X.cols();
    if (Gm.numel() != C || Bt.numel() != C)
      throw std::invalid_argument("layer_norm: bad affine shape");
    TensorT<S> out({X.rows(), C});
    for (int64_t r = 0; r < X.rows(); ++r) {
      S mu = 0, var = 0;
      for (int64_t c = 0; c < C; ++c) mu += X.at(r, c);
      mu /= S(C);
      for (int64_t c = 0; c < C; ++c) { S d = X.at(r, c) - mu; var += d * d; }
      var /= S(C);
      S inv = S(1) / std::sqrt(var + S(kLnEps));
      for (int64_t c = 0; c < C; ++c)
        out.at(r, c) = Gm.data[size_t(c)] * (X.at(r, c) - mu) * inv + Bt.data[size_t(c)];
    }
    Var y = push(std::move(out), rg(x) || rg(gamma) || rg(beta));
    set_backward(y, [this, x, gamma, beta, y] {
      const auto& X = val(x);
      const auto& Gm = val(gamma);
      const auto& G = nodes_[size_t(y)].grad;
      const int64_t C = X.cols();
      std::vector<S> xhat(size_t(C), S(0));
      for (int64_t r = 0; r < X.rows(); ++r) {
        S mu = 0, var = 0;
        for (int64_t c = 0; c < C; ++c) mu += X.at(r, c);
        mu /= S(C);
        for (int64_t c = 0; c < C; ++c) { S d = X.at(r, c) - mu; var += d * d; }
        var /= S(C);
        S inv = S(1) / std::sqrt(var + S(kLnEps));
        for (int64_t c = 0; c < C; ++c) xhat[size_t(c)] = (X.at(r, c) - mu) * inv;
        if (rg(gamma)) {
          S* gg = gptr(gamma);
          for (int64_t c = 0; c < C; ++c) gg[c] += G.at(r, c) * xhat[size_t(c)];
        }
        if (rg(beta)) {
          S* gb = gptr(beta);
          for (int64_t c = 0; c < C; ++c) gb[c] += G.at(r, c);
        }
        if (rg(x)) {
          S m1 = 0, m2 = 0;
          for (int64_t c = 0; c < C; ++c) {
            S dxh = G.at(r, c) * Gm.data[size_t(c)];
            m1 += dxh;
            m2 += dxh * xhat[size_t(c)];
          }
          m1 /= S(C);
          m2 /= S(C);
          S* gx = gptr(x);
          for (int64_t c = 0; c < C; ++c) {
            S dxh = G.at(r, c) * Gm.data[size_t(c)];
            gx[r * C + c] += inv * (dxh - m1 - xhat[size_t(c)] * m2);
          }
        }
      }
    });
    return y;
  }

  // Multi-head self-attention over a ragged batch. q,k,v are (R x d) with
  // sample boundaries in offsets (size B+1, offsets.back() == R). Attention
  // probabilities are recomputed in the backward pass instead of stored.
  Var attention(Var q, Var k, Var v, std::vector<int32_t> offsets, int n_heads) {
    const auto& Q = val(q);
    const int64_t R = Q.rows(), d = Q.cols();
    if (val(k).shape != Q.shape || val(v).shape != Q.shape)
      throw std::invalid_argument("attention: q/k/v shape mismatch");
    if (d % n_heads != 0) throw std::invalid_argument("attention: heads must divide dim");
    if (offsets.empty() || offsets.back() != R)
      throw std::invalid_argument("attention: bad offsets");
    const int hd = int(d / n_heads);
    const S scl = S(1) / std::sqrt(S(hd));
    TensorT<S> out({R, d});
    auto off = std::make_shared<std::vector<int32_t>>(std::move(offsets));
    attn_forward(val(q), val(k), val(v), *off, n_heads, hd, scl, out);
    Var y = push(std::move(out), rg(q) || rg(k) || rg(v));
    set_backward(y, [this, q, k, v, off, n_heads, hd, scl, y] {
      attn_backward(q, k, v, *off, n_heads, hd, scl, y);
    });
    return y;
  }

  // out[ids[i], :] row-gather: y[i, :] = x[ids[i], :].
  Var gather_rows(Var x, std::vector<int32_t> ids) {
    const auto& X = val(x);
    const int64_t C = X.cols();
    TensorT<S> out({int64_t(ids.size()), C});
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= X.rows())
        throw std::out_of_range("gather_rows: index out of range");
      std::copy_n(X.data.data() + int64_t(ids[i]) * C, C, out.data.data() + int64_t(i) * C);
    }
    auto sh = std::make_shared<std::vector<int32_t>>(std::move(ids));
    Var y = push(std::move(out), rg(x));
    set_backward(y, [this, x, sh, y] {
      if (!rg(x)) return;
      const auto& G = nodes_[size_t(y)].grad;
      const int64_t C = G.cols();
      S* g = gptr(x);
      for (size_t i = 0; i < sh->size(); ++i) {
        const S* gr = G.data.data() + int64_t(i) * C;
        S* dst = g + int64_t((*sh)[i]) * C;
        for (int64_t c = 0; c < C; ++c) dst[c] += gr[c];
      }
    });
    return y;
  }

  // Build an (R x C) matrix as base (optional constant) plus scattered-and-
  // summed pieces: out[dst, off:off+w] += src[src_row, :].
  Var assemble(int64_t rows, int64_t cols, const TensorT<S>* base,
               std::vector<AssemblePiece> pieces) {
    TensorT<S> out({rows, cols});
    if (base) {
      if (base->shape != out.shape) throw std::invalid_argument("assemble: bad base");
      out.data = base->data;
    }
    bool req = false;
    for (const auto& p : pieces) {
      const auto& Src = val(p.src);
      const int64_t w = Src.cols();
      if (p.col_off + w > cols || p.src_rows.size() != p.dst_rows.size())
        throw std::invalid_argument("assemble: bad piece");
      for (size_t i = 0; i < p.src_rows.size(); ++i) {
        const S* s = Src.data.data() + int64_t(p.src_rows[i]) * w;
        S* d = out.data.data() + int64_t(p.dst_rows[i]) * cols + p.col_off;
        for (int64_t c = 0; c < w; ++c) d[c] += s[c];
      }
      req = req || rg(p.src);
    }
    auto sh = std::make_shared<std::vector<AssemblePiece>>(std::move(pieces));
    Var y = push(std::move(out), req);
    set_backward(y, [this, sh, y] {
      const auto& G = nodes_[size_t(y)].grad;
      const int64_t cols = G.cols();
      for (const auto& p : *sh) {
        if (!rg(p.src)) continue;
        const int64_t w = val(p.src).cols();
        S* g = gptr(p.src);
        for (size_t i = 0; i < p.src_rows.size(); ++i) {
          const S* gr = G.data.data() + int64_t(p.dst_rows[i]) * cols + p.col_off;
          S* dst = g + int64_t(p.src_rows[i]) * w;
          for (int64_t c = 0; c < w; ++c) dst[c] += gr[c];
        }
      }
    });
    return y;
  }

  // Mean over each row segment [offsets[s], offsets[s+1]) -> (B x C).
  Var segment_mean(Var x, std::vector<int32_t> offsets) {
    const auto& X = val(x);
    const int64_t C = X.cols();
    if (offsets.empty() || offsets.back() != X.rows())
      throw std::invalid_argument("segment_mean: bad offsets");
    const int64_t B = int64_t(offsets.size()) - 1;
    TensorT<S> out({B, C});
    for (int64_t s = 0; s < B; ++s) {
      int64_t n = offsets[size_t(s) + 1] - offsets[size_t(s)];
      if (n <= 0) throw std::invalid_argument("segment_mean: empty segment");
      for (int64_t r = offsets[size_t(s)]; r < offsets[size_t(s) + 1]; ++r)
        for (int64_t c = 0; c < C; ++c) out.at(s, c) += X.at(r, c);
      for (int64_t c = 0; c < C; ++c) out.at(s, c) /= S(n);
    }
    auto sh = std::make_shared<std::vector<int32_t>>(std::move(offsets));
    Var y = push(std::move(out), rg(x));
    set_backward(y, [this, x, sh, y] {
      if (!rg(x)) return;
      const auto& G = nodes_[size_t(y)].grad;
      const int64_t C = G.cols();
      S* g = gptr(x);
      for (int64_t s = 0; s + 1 < int64_t(sh->size()); ++s) {
        S inv = S(1) / S((*sh)[size_t(s) + 1] - (*sh)[size_t(s)]);
        for (int64_t r = (*sh)[size_t(s)]; r < (*sh)[size_t(s) + 1]; ++r)
          for (int64_t c = 0; c < C; ++c) g[r * C + c] += G.at(s, c) * inv;
      }
    });
    return y;
  }

  // Sum of squared errors against a constant target (scalar output).
  Var sse(Var pred, TensorT<S> target) {
    const auto& P = val(pred);
    if (P.shape != target.shape) throw std::invalid_argument("sse: shape mismatch");
    S s = 0;
    for (size_t i = 0; i < P.data.size(); ++i) {
      S d = P.data[i] - target.data[i];
      s += d * d;
    }
    auto tg = std::make_shared<TensorT<S>>(std::move(target));
    Var y = push(TensorT<S>({1}, {s}), rg(pred));
    set_backward(y, [this, pred, tg, y] {
      if (!rg(pred)) return;
      S g0 = nodes_[size_t(y)].grad.data[0];
      const auto& P = val(pred);
      S* g = gptr(pred);
      for (size_t i = 0; i < P.data.size(); ++i)
        g[i] += g0 * S(2) * (P.data[i] - tg->data[i]);
    });
    return y;
  }

  Var mse(Var pred, TensorT<S> target) {
    int64_t n = target.numel();
    return scale(sse(pred, std::move(target)), S(1) / S(n));
  }

  // Mean cross-entropy of row logits against integer class targets.
  Var cross_entropy_mean(Var logits, std::vector<int32_t> targets) {
    const auto& L = val(logits);
    if (int64_t(targets.size()) != L.rows())
      throw std::invalid_argument("cross_entropy: target count mismatch");
    S loss = 0;
    for (int64_t r = 0; r < L.rows(); ++r) {
      if (targets[size_t(r)] < 0 || targets[size_t(r)] >= L.cols())
        throw std::out_of_range("cross_entropy: class id out of range");
      loss += S(row_logsumexp(L, r)) - L.at(r, targets[size_t(r)]);
    }
    loss /= S(L.rows());
    auto tg = std::make_shared<std::vector<int32_t>>(std::move(targets));
    Var y = push(TensorT<S>({1}, {loss}), rg(logits));
    set_backward(y, [this, logits, tg, y] {
      if (!rg(logits)) return;
      const auto& L = val(logits);
      S g0 = nodes_[size_t(y)].grad.data[0] / S(L.rows());
      S* g = gptr(logits);
      for (int64_t r = 0; r < L.rows(); ++r) {
        double lse = row_logsumexp(L, r);
        for (int64_t c = 0; c < L.cols(); ++c)
          g[r * L.cols() + c] += g0 * S(std::exp(double(L.at(r, c)) - lse));
        g[r * L.cols() + (*tg)[size_t(r)]] -= g0;
      }
    });
    return y;
  }

  // ---- backward -------------------------------------------------------------

  void backward(Var loss) {
    if (!val(loss).is_scalar())
      throw std::invalid_argument("backward: loss must be scalar");
    if (!rg(loss)) throw std::invalid_argument("backward: loss has no parameters");
    for (auto& n : nodes_)
      if (n.requires_grad) n.grad = TensorT<S>(n.value.shape, S(0));
    nodes_[size_t(loss)].grad.data[0] = S(1);
    for (int64_t i = loss; i >= 0; --i)
      if (nodes_[size_t(i)].backward_fn) nodes_[size_t(i)].backward_fn();
  }

 private:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;
    std::function<void()> backward_fn;
    bool requires_grad = false;
  };

  static constexpr double kLnEps = 1e-5;

  const TensorT<S>& val(Var v) const { return nodes_[size_t(v)].value; }
  bool rg(Var v) const { return nodes_[size_t(v)].requires_grad; }
  S* gptr(Var v) { return nodes_[size_t(v)].grad.data.data(); }

  Var push(TensorT<S> t, bool req) {
    nodes_.push_back(Node{std::move(t), {}, nullptr, req});
    return Var(nodes_.size() - 1);
  }
  void set_backward(Var v, std::function<void()> fn) {
    if (nodes_[size_t(v)].requires_grad) nodes_[size_t(v)].backward_fn = std::move(fn);
  }

  static void softmax_inplace(TensorT<S>& m) {
    for (int64_t r = 0; r < m.rows(); ++r) {
      S mx = m.at(r, 0);
      for (int64_t c = 1; c < m.cols(); ++c) mx = std::max(mx, m.at(r, c));
      S sum = 0;
      for (int64_t c = 0; c < m.cols(); ++c) {
        m.at(r, c) = std::exp(m.at(r, c) - mx);
        sum += m.at(r, c);
      }
      for (int64_t c = 0; c < m.cols(); ++c) m.at(r, c) /= sum;
    }
  }

  static double row_logsumexp(const TensorT<S>& m, int64_t r) {
    double mx = m.at(r, 0);
    for (int64_t c = 1; c < m.cols(); ++c) mx = std::max(mx, double(m.at(r, c)));
    double s = 0;
    for (int64_t c = 0; c < m.cols(); ++c) s += std::exp(double(m.at(r, c)) - mx);
    return mx + std::log(s);
  }

  // Per-sample, per-head scores/probs computed into scratch buffers.
  void attn_forward(const TensorT<S>& Q, const TensorT<S>& K, const TensorT<S>& V,
                    const std::vector<int32_t>& off, int H, int hd, S scl,
                    TensorT<S>& out) {
    const int64_t d = Q.cols();
    std::vector<S> probs;
    for (size_t s = 0; s + 1 < off.size(); ++s) {
      const int n = off[s + 1] - off[s];
      probs.resize(size_t(n) * size_t(n));
      const int64_t r0 = off[s];
      for (int h = 0; h < H; ++h) {
        const S* q = Q.data.data() + r0 * d + int64_t(h) * hd;
        const S* k = K.data.data() + r0 * d + int64_t(h) * hd;
        const S* v = V.data.data() + r0 * d + int64_t(h) * hd;
        S* o = out.data.data() + r0 * d + int64_t(h) * hd;
        gemm(false, true, n, n, hd, scl, q, int(d), k, int(d), S(0), probs.data(), n);
        TensorT<S> pm({n, n});
        pm.data.assign(probs.begin(), probs.end());
        softmax_inplace(pm);
        gemm(false, false, n, hd, n, S(1), pm.data.data(), n, v, int(d), S(0), o, int(d));
      }
    }
  }

  void attn_backward(Var q, Var k, Var v, const std::vector<int32_t>& off, int H,
                     int hd, S scl, Var y) {
    const auto& Q = val(q);
    const auto& K = val(k);
    const auto& V = val(v);
    const auto& G = nodes_[size_t(y)].grad;
    const int64_t d = Q.cols();
    std::vector<S> probs, dp, ds;
    for (size_t s = 0; s + 1 < off.size(); ++s) {
      const int n = off[s + 1] - off[s];
      probs.resize(size_t(n) * size_t(n));
      dp.resize(size_t(n) * size_t(n));
      ds.resize(size_t(n) * size_t(n));
      const int64_t r0 = off[s];
      for (int h = 0; h < H; ++h) {
        const S* qp = Q.data.data() + r0 * d + int64_t(h) * hd;
        const S* kp = K.data.data() + r0 * d + int64_t(h) * hd;
        const S* vp = V.data.data() + r0 * d + int64_t(h) * hd;
        const S* go = G.data.data() + r0 * d + int64_t(h) * hd;
        gemm(false, true, n, n, hd, scl, qp, int(d), kp, int(d), S(0), probs.data(), n);
        TensorT<S> pm({n, n});
        pm.data.assign(probs.begin(), probs.end());
        softmax_inplace(pm);
        const S* P = pm.data.data();
        if (rg(v))
          gemm(true, false, n, hd, n, S(1), P, n, go, int(d), S(1),
               gptr(v) + r0 * d + int64_t(h) * hd, int(d));
        // dP = dO V^T; dS = P o (dP - rowsum(dP o P)); scaled by scl.
        gemm(false, true, n, n, hd, S(1), go, int(d), vp, int(d), S(0), dp.data(), n);
        for (int r = 0; r < n; ++r) {
          S dot = 0;
          for (int c = 0; c < n; ++c) dot += dp[size_t(r) * n + c] * P[size_t(r) * n + c];
          for (int c = 0; c < n; ++c)
            ds[size_t(r) * n + c] =
                P[size_t(r) * n + c] * (dp[size_t(r) * n + c] - dot) * scl;
        }
        if (rg(q))
          gemm(false, false, n, hd, n, S(1), ds.data(), n, kp, int(d), S(1),
               gptr(q) + r0 * d + int64_t(h) * hd, int(d));
        if (rg(k))
          gemm(true, false, n, hd, n, S(1), ds.data(), n, qp, int(d), S(1),
               gptr(k) + r0 * d + int64_t(h) * hd, int(d));
      }
    }
  }

  std::vector<Node> nodes_;
};

using Tape = TapeT<float>;

}  // namespace presto
