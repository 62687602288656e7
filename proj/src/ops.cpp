#include "dmrl/ops.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace dmrl {

namespace detail {

void mm_nn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      const double av = a[i * k + kk];
      if (av == 0.0) continue;
      const double* brow = b + kk * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_nt(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      c[i * n + j] += acc;
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
  for (size_t kk = 0; kk < k; ++kk) {
    const double* brow = b + kk * n;
    for (size_t i = 0; i < m; ++i) {
      const double av = a[kk * m + i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

namespace {

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (grad_path(*t)) return true;
  }
  return false;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tensor result(a.shape(), std::move(out));
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    Tape::active()->record("add", {ai, bi}, result.impl(), [ai, bi](Tape& tape, TapeNode& node) {
      tape.accumulate(ai, node.grad.data(), node.grad.size());
      tape.accumulate(bi, node.grad.data(), node.grad.size());
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  Tensor result(a.shape(), std::move(out));
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    Tape::active()->record("sub", {ai, bi}, result.impl(), [ai, bi](Tape& tape, TapeNode& node) {
      tape.accumulate(ai, node.grad.data(), node.grad.size());
      std::vector<double> neg(node.grad.size());
      for (size_t i = 0; i < neg.size(); ++i) neg[i] = -node.grad[i];
      tape.accumulate(bi, neg.data(), neg.size());
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tensor result(a.shape(), std::move(out));
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    Tape::active()->record("mul", {ai, bi}, result.impl(), [ai, bi](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = node.grad[i] * bi->data[i];
      tape.accumulate(ai, tmp.data(), tmp.size());
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = node.grad[i] * ai->data[i];
      tape.accumulate(bi, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * s;
  Tensor result(a.shape(), std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("mul_scalar", {ai}, result.impl(), [ai, s](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = node.grad[i] * s;
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] > 0.0 || std::isnan(ad[i]) ? ad[i] : 0.0;
  Tensor result(a.shape(), std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("relu", {ai}, result.impl(), [ai](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = ai->data[i] > 0.0 ? node.grad[i] : 0.0;
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor exp_op(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ad[i]);
  Tensor result(a.shape(), std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    auto oi = result.impl();
    Tape::active()->record("exp", {ai}, oi, [ai, oi](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = node.grad[i] * oi->data[i];
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor log_op(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) {
    // NaN passes through; the clamp must not mask an upstream failure.
    out[i] = std::isnan(ad[i]) ? ad[i] : std::log(ad[i] > kLogClampEps ? ad[i] : kLogClampEps);
  }
  Tensor result(a.shape(), std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("log", {ai}, result.impl(), [ai](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) {
        tmp[i] = ai->data[i] >= kLogClampEps ? node.grad[i] / ai->data[i] : 0.0;
      }
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor abs_op(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(ad[i]);
  Tensor result(a.shape(), std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("abs", {ai}, result.impl(), [ai](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) {
        const double x = ai->data[i];
        tmp[i] = x > 0.0 ? node.grad[i] : (x < 0.0 ? -node.grad[i] : 0.0);
      }
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = ad[i];
    if (x >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      out[i] = e / (1.0 + e);
    }
  }
  Tensor result(a.shape(), std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    auto oi = result.impl();
    Tape::active()->record("sigmoid", {ai}, oi, [ai, oi](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) {
        const double s = oi->data[i];
        tmp[i] = node.grad[i] * s * (1.0 - s);
      }
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  std::vector<double> out(a.numel());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] < lo ? lo : (ad[i] > hi ? hi : ad[i]);
  Tensor result(a.shape(), std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("clamp", {ai}, result.impl(), [ai, lo, hi](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(node.grad.size());
      for (size_t i = 0; i < tmp.size(); ++i) {
        const double x = ai->data[i];
        tmp[i] = (x > lo && x < hi) ? node.grad[i] : 0.0;
      }
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor result({1}, {acc});
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("sum_all", {ai}, result.impl(), [ai](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(ai->data.size(), node.grad[0]);
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor mean_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  Tensor result({1}, {acc * inv_n});
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("mean_all", {ai}, result.impl(), [ai, inv_n](Tape& tape, TapeNode& node) {
      std::vector<double> tmp(ai->data.size(), node.grad[0] * inv_n);
      tape.accumulate(ai, tmp.data(), tmp.size());
    });
  }
  return result;
}

Tensor mean_axis(const Tensor& a, size_t axis) {
  if (axis >= a.rank()) throw std::invalid_argument("mean_axis: axis out of range for shape " + shape_string(a.shape()));
  const auto& shape = a.shape();
  size_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const size_t len = shape[axis];
  const double inv_len = 1.0 / static_cast<double>(len);

  std::vector<size_t> out_shape;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out_shape.push_back(shape[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  std::vector<double> out(outer * inner, 0.0);
  const auto& ad = a.data();
  for (size_t o = 0; o < outer; ++o) {
    for (size_t l = 0; l < len; ++l) {
      const double* src = ad.data() + (o * len + l) * inner;
      double* dst = out.data() + o * inner;
      for (size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (double& v : out) v *= inv_len;
  Tensor result(out_shape, std::move(out));
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("mean_axis", {ai}, result.impl(),
                           [ai, outer, inner, len, inv_len](Tape& tape, TapeNode& node) {
                             std::vector<double> tmp(ai->data.size());
                             for (size_t o = 0; o < outer; ++o) {
                               for (size_t l = 0; l < len; ++l) {
                                 double* dst = tmp.data() + (o * len + l) * inner;
                                 const double* src = node.grad.data() + o * inner;
                                 for (size_t i = 0; i < inner; ++i) dst[i] = src[i] * inv_len;
                               }
                             }
                             tape.accumulate(ai, tmp.data(), tmp.size());
                           });
  }
  return result;
}

Tensor reshape(const Tensor& a, std::vector<size_t> shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  Tensor result(std::move(shape), a.data());
  if (recording({&a})) {
    auto ai = a.impl();
    Tape::active()->record("reshape", {ai}, result.impl(), [ai](Tape& tape, TapeNode& node) {
      tape.accumulate(ai, node.grad.data(), node.grad.size());
    });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                                shape_string(b.shape()));
  }
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  detail::mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  Tensor result({m, n}, std::move(out));
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    Tape::active()->record("matmul", {ai, bi}, result.impl(), [ai, bi, m, k, n](Tape& tape, TapeNode& node) {
      std::vector<double> da(m * k, 0.0);
      detail::mm_nt(node.grad.data(), bi->data.data(), da.data(), m, n, k);
      tape.accumulate(ai, da.data(), da.size());
      std::vector<double> db(k * n, 0.0);
      detail::mm_tn(ai->data.data(), node.grad.data(), db.data(), k, m, n);
      tape.accumulate(bi, db.data(), db.size());
    });
  }
  return result;
}

Tensor bias_row(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw std::invalid_argument("bias_row: incompatible shapes " + shape_string(x.shape()) + " and " +
                                shape_string(bias.shape()));
  }
  const size_t n = x.dim(0), kcol = x.dim(1);
  std::vector<double> out(n * kcol);
  const auto& xd = x.data();
  const auto& bd = bias.data();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < kcol; ++j) out[i * kcol + j] = xd[i * kcol + j] + bd[j];
  }
  Tensor result(x.shape(), std::move(out));
  if (recording({&x, &bias})) {
    auto xi = x.impl(), bi = bias.impl();
    Tape::active()->record("bias_row", {xi, bi}, result.impl(), [xi, bi, n, kcol](Tape& tape, TapeNode& node) {
      tape.accumulate(xi, node.grad.data(), node.grad.size());
      std::vector<double> db(kcol, 0.0);
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < kcol; ++j) db[j] += node.grad[i * kcol + j];
      }
      tape.accumulate(bi, db.data(), db.size());
    });
  }
  return result;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return bias_row(matmul(x, w), b); }

namespace {

// col[(c*kh+u)*kw+v][oh*ow_count+ow] = x_n[c][oh+u][ow+v]
void im2col(const double* xn, size_t c_count, size_t h, size_t w, size_t kh, size_t kw, size_t oh_count,
            size_t ow_count, double* col) {
  const size_t patch = oh_count * ow_count;
  for (size_t c = 0; c < c_count; ++c) {
    for (size_t u = 0; u < kh; ++u) {
      for (size_t v = 0; v < kw; ++v) {
        double* dst = col + ((c * kh + u) * kw + v) * patch;
        for (size_t oh = 0; oh < oh_count; ++oh) {
          const double* src = xn + c * h * w + (oh + u) * w + v;
          for (size_t ow = 0; ow < ow_count; ++ow) dst[oh * ow_count + ow] = src[ow];
        }
      }
    }
  }
}

void col2im_add(const double* col, size_t c_count, size_t h, size_t w, size_t kh, size_t kw, size_t oh_count,
                size_t ow_count, double* xn) {
  const size_t patch = oh_count * ow_count;
  for (size_t c = 0; c < c_count; ++c) {
    for (size_t u = 0; u < kh; ++u) {
      for (size_t v = 0; v < kw; ++v) {
        const double* src = col + ((c * kh + u) * kw + v) * patch;
        for (size_t oh = 0; oh < oh_count; ++oh) {
          double* dst = xn + c * h * w + (oh + u) * w + v;
          for (size_t ow = 0; ow < ow_count; ++ow) dst[ow] += src[oh * ow_count + ow];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 4 || w.rank() != 4) {
    throw std::invalid_argument("conv2d: expected 4-d input and kernel, got " + shape_string(x.shape()) + " and " +
                                shape_string(w.shape()));
  }
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const size_t f = w.dim(0), wc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (wc != c) {
    throw std::invalid_argument("conv2d: channel mismatch " + shape_string(x.shape()) + " vs " +
                                shape_string(w.shape()));
  }
  if (kh > h || kw > wd) {
    throw std::invalid_argument("conv2d: kernel " + shape_string(w.shape()) + " larger than input " +
                                shape_string(x.shape()));
  }
  if (b.rank() != 1 || b.dim(0) != f) {
    throw std::invalid_argument("conv2d: bias shape " + shape_string(b.shape()) + " does not match filter count " +
                                std::to_string(f));
  }
  const size_t oh = h - kh + 1, ow = wd - kw + 1;
  const size_t ckk = c * kh * kw, patch = oh * ow;

  std::vector<double> out(n * f * patch);
  std::vector<double> col(ckk * patch);
  const auto& xd = x.data();
  const auto& wdta = w.data();
  const auto& bd = b.data();
  for (size_t i = 0; i < n; ++i) {
    im2col(xd.data() + i * c * h * wd, c, h, wd, kh, kw, oh, ow, col.data());
    double* outn = out.data() + i * f * patch;
    for (size_t ff = 0; ff < f; ++ff) {
      for (size_t p = 0; p < patch; ++p) outn[ff * patch + p] = bd[ff];
    }
    detail::mm_nn(wdta.data(), col.data(), outn, f, ckk, patch);
  }
  Tensor result({n, f, oh, ow}, std::move(out));
  if (recording({&x, &w, &b})) {
    auto xi = x.impl(), wi = w.impl(), bi = b.impl();
    Tape::active()->record(
        "conv2d", {xi, wi, bi}, result.impl(), [xi, wi, bi, n, c, h, wd, f, kh, kw, oh, ow](Tape& tape, TapeNode& node) {
          const size_t ckk = c * kh * kw, patch = oh * ow;
          std::vector<double> col(ckk * patch);
          std::vector<double> dcol(ckk * patch);
          std::vector<double> dx(xi->data.size(), 0.0);
          std::vector<double> dw(wi->data.size(), 0.0);
          std::vector<double> db(f, 0.0);
          for (size_t i = 0; i < n; ++i) {
            const double* gn = node.grad.data() + i * f * patch;
            im2col(xi->data.data() + i * c * h * wd, c, h, wd, kh, kw, oh, ow, col.data());
            detail::mm_nt(gn, col.data(), dw.data(), f, patch, ckk);
            for (size_t ff = 0; ff < f; ++ff) {
              double acc = 0.0;
              for (size_t p = 0; p < patch; ++p) acc += gn[ff * patch + p];
              db[ff] += acc;
            }
            std::fill(dcol.begin(), dcol.end(), 0.0);
            detail::mm_tn(wi->data.data(), gn, dcol.data(), ckk, f, patch);
            col2im_add(dcol.data(), c, h, wd, kh, kw, oh, ow, dx.data() + i * c * h * wd);
          }
          tape.accumulate(xi, dx.data(), dx.size());
          tape.accumulate(wi, dw.data(), dw.size());
          tape.accumulate(bi, db.data(), db.size());
        });
  }
  return result;
}

Tensor maxpool2(const Tensor& x) {
  if (x.rank() != 4) throw std::invalid_argument("maxpool2: expected 4-d input, got " + shape_string(x.shape()));
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) {
    throw std::invalid_argument("maxpool2: spatial extents must be >= 2, got " + shape_string(x.shape()));
  }
  const size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(n * c * oh * ow);
  std::vector<size_t> argmax(out.size());
  const auto& xd = x.data();
  size_t o = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t cc = 0; cc < c; ++cc) {
      const size_t base = (i * c + cc) * h * w;
      for (size_t ph = 0; ph < oh; ++ph) {
        for (size_t pw = 0; pw < ow; ++pw) {
          size_t best = base + (2 * ph) * w + 2 * pw;
          double best_v = xd[best];
          const size_t cand[3] = {base + (2 * ph) * w + 2 * pw + 1, base + (2 * ph + 1) * w + 2 * pw,
                                  base + (2 * ph + 1) * w + 2 * pw + 1};
          for (size_t idx : cand) {
            if (xd[idx] > best_v) {
              best_v = xd[idx];
              best = idx;
            }
          }
          out[o] = best_v;
          argmax[o] = best;
          ++o;
        }
      }
    }
  }
  Tensor result({n, c, oh, ow}, std::move(out));
  if (recording({&x})) {
    auto xi = x.impl();
    Tape::active()->record("maxpool2", {xi}, result.impl(),
                           [xi, argmax = std::move(argmax)](Tape& tape, TapeNode& node) {
                             std::vector<double> dx(xi->data.size(), 0.0);
                             for (size_t i = 0; i < node.grad.size(); ++i) dx[argmax[i]] += node.grad[i];
                             tape.accumulate(xi, dx.data(), dx.size());
                           });
  }
  return result;
}

Tensor log_softmax(const Tensor& z) {
  if (z.rank() != 2) throw std::invalid_argument("log_softmax: expected [N x K], got " + shape_string(z.shape()));
  const size_t n = z.dim(0), k = z.dim(1);
  if (k < 2) throw std::invalid_argument("log_softmax: need K >= 2, got " + shape_string(z.shape()));
  std::vector<double> out(n * k);
  const auto& zd = z.data();
  for (size_t i = 0; i < n; ++i) {
    const double* row = zd.data() + i * k;
    double m = row[0];
    for (size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (size_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
    const double lse = m + std::log(s);
    for (size_t j = 0; j < k; ++j) out[i * k + j] = row[j] - lse;
  }
  Tensor result(z.shape(), std::move(out));
  if (recording({&z})) {
    auto zi = z.impl();
    auto oi = result.impl();
    Tape::active()->record("log_softmax", {zi}, oi, [zi, oi, n, k](Tape& tape, TapeNode& node) {
      std::vector<double> dz(n * k);
      for (size_t i = 0; i < n; ++i) {
        double gsum = 0.0;
        for (size_t j = 0; j < k; ++j) gsum += node.grad[i * k + j];
        for (size_t j = 0; j < k; ++j) {
          dz[i * k + j] = node.grad[i * k + j] - std::exp(oi->data[i * k + j]) * gsum;
        }
      }
      tape.accumulate(zi, dz.data(), dz.size());
    });
  }
  return result;
}

Tensor softmax(const Tensor& z) { return exp_op(log_softmax(z)); }

Tensor permute_rows(const Tensor& t, const std::vector<size_t>& perm) {
  if (t.rank() < 1) throw std::invalid_argument("permute_rows: rank-0 tensor");
  const size_t n = t.dim(0);
  if (perm.size() != n) {
    throw std::invalid_argument("permute_rows: permutation length " + std::to_string(perm.size()) +
                                " does not match leading extent " + std::to_string(n));
  }
  if (Tape::active() && grad_path(t)) {
    throw std::logic_error("permute_rows: value-level helper called on a tensor on the gradient path");
  }
  std::vector<bool> seen(n, false);
  for (size_t p : perm) {
    if (p >= n || seen[p]) throw std::invalid_argument("permute_rows: not a permutation");
    seen[p] = true;
  }
  const size_t row = t.numel() / n;
  std::vector<double> out(t.numel());
  const auto& td = t.data();
  for (size_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * row, td.data() + perm[i] * row, row * sizeof(double));
  }
  return Tensor(t.shape(), std::move(out));
}

bool all_finite(const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace dmrl
