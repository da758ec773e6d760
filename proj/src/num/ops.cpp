#include "traj/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "traj/error.hpp"

namespace traj::num {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw DimensionError(std::string(op) + ": " + what);
}

// Elementwise unary op. df(x, y) returns dy/dx given input x and output y.
template <class F, class DF>
Var unary(const char* op, Var a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y = Tensor::zeros(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const int ia = a.id();
  return a.graph().record(op, std::move(y), {a}, [ia, df](Graph& g, const Tensor& out, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      const Tensor& xv = g.value(ia);
      for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] * df(xv[i], out[i]);
    }
  });
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor y = a.value();
  y += b.value();
  const int ia = a.id(), ib = b.id();
  return a.graph().record("add", std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) *ga += dy;
    if (Tensor* gb = g.grad_buffer(ib)) *gb += dy;
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y = Tensor::zeros(av.rows(), av.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  const int ia = a.id(), ib = b.id();
  return a.graph().record("sub", std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) *ga += dy;
    if (Tensor* gb = g.grad_buffer(ib)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y = Tensor::zeros(av.rows(), av.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return a.graph().record("mul", std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& av = g.value(ia);
    const Tensor& bv = g.value(ib);
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] * bv[i];
    }
    if (Tensor* gb = g.grad_buffer(ib)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i] * av[i];
    }
  });
}

Var div(Var a, Var b) {
  require_same_shape("div", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y = Tensor::zeros(av.rows(), av.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] / bv[i];
  const int ia = a.id(), ib = b.id();
  return a.graph().record("div", std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor& out, const Tensor& dy) {
    const Tensor& bv = g.value(ib);
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] / bv[i];
    }
    if (Tensor* gb = g.grad_buffer(ib)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] -= dy[i] * out[i] / bv[i];
    }
  });
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require(rv.rows() == 1 && rv.cols() == av.cols(), "add_row",
          "row " + rv.shape_string() + " vs matrix " + av.shape_string());
  Tensor y = av;
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] += rv[c];
  }
  const int ia = a.id(), ir = row.id();
  return a.graph().record("add_row", std::move(y), {a, row}, [ia, ir, n](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) *ga += dy;
    if (Tensor* gr = g.grad_buffer(ir)) {
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) (*gr)[c] += dy[r * n + c];
      }
    }
  });
}

Var mul_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require(rv.rows() == 1 && rv.cols() == av.cols(), "mul_row",
          "row " + rv.shape_string() + " vs matrix " + av.shape_string());
  Tensor y = av;
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] *= rv[c];
  }
  const int ia = a.id(), ir = row.id();
  return a.graph().record("mul_row", std::move(y), {a, row}, [ia, ir, n](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& av = g.value(ia);
    const Tensor& rv = g.value(ir);
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += dy[r * n + c] * rv[c];
      }
    }
    if (Tensor* gr = g.grad_buffer(ir)) {
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) (*gr)[c] += dy[r * n + c] * av[r * n + c];
      }
    }
  });
}

Var add_col(Var a, Var col) {
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  require(cv.cols() == 1 && cv.rows() == av.rows(), "add_col",
          "col " + cv.shape_string() + " vs matrix " + av.shape_string());
  Tensor y = av;
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] += cv[r];
  }
  const int ia = a.id(), ic = col.id();
  return a.graph().record("add_col", std::move(y), {a, col}, [ia, ic, n](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) *ga += dy;
    if (Tensor* gc = g.grad_buffer(ic)) {
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) (*gc)[r] += dy[r * n + c];
      }
    }
  });
}

Var mul_col(Var a, Var col) {
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  require(cv.cols() == 1 && cv.rows() == av.rows(), "mul_col",
          "col " + cv.shape_string() + " vs matrix " + av.shape_string());
  Tensor y = av;
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] *= cv[r];
  }
  const int ia = a.id(), ic = col.id();
  return a.graph().record("mul_col", std::move(y), {a, col}, [ia, ic, n](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& av = g.value(ia);
    const Tensor& cv = g.value(ic);
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += dy[r * n + c] * cv[r];
      }
    }
    if (Tensor* gc = g.grad_buffer(ic)) {
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) (*gc)[r] += dy[r * n + c] * av[r * n + c];
      }
    }
  });
}

Var mul_scalar(Var s, Var b) {
  require(s.value().size() == 1, "mul_scalar", "scale must be 1x1, got " + s.value().shape_string());
  const double sv = s.value()[0];
  Tensor y = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= sv;
  const int is = s.id(), ib = b.id();
  return s.graph().record("mul_scalar", std::move(y), {s, b}, [is, ib](Graph& g, const Tensor&, const Tensor& dy) {
    const double sv = g.value(is)[0];
    const Tensor& bv = g.value(ib);
    if (Tensor* gs = g.grad_buffer(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < dy.size(); ++i) acc += dy[i] * bv[i];
      (*gs)[0] += acc;
    }
    if (Tensor* gb = g.grad_buffer(ib)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i] * sv;
    }
  });
}

Var scale(Var a, double s) {
  return unary("scale", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var detach(Var a) { return a.graph().constant(a.value()); }

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.rows(), "matmul", av.shape_string() + " x " + bv.shape_string());
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor y = Tensor::zeros(m, n);
  kernels::gemm_nn(m, k, n, av.data().data(), bv.data().data(), y.data().data(), false);
  const int ia = a.id(), ib = b.id();
  return a.graph().record("matmul", std::move(y), {a, b}, [ia, ib, m, k, n](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& av = g.value(ia);
    const Tensor& bv = g.value(ib);
    // dA = dY B^T ; dB = A^T dY
    if (Tensor* ga = g.grad_buffer(ia)) {
      kernels::gemm_nt(m, n, k, dy.data().data(), bv.data().data(), ga->data().data(), true);
    }
    if (Tensor* gb = g.grad_buffer(ib)) {
      kernels::gemm_tn(k, m, n, av.data().data(), dy.data().data(), gb->data().data(), true);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.cols(), "matmul_nt", av.shape_string() + " x " + bv.shape_string() + "^T");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor y = Tensor::zeros(m, n);
  kernels::gemm_nt(m, k, n, av.data().data(), bv.data().data(), y.data().data(), false);
  const int ia = a.id(), ib = b.id();
  return a.graph().record("matmul_nt", std::move(y), {a, b},
                          [ia, ib, m, k, n](Graph& g, const Tensor&, const Tensor& dy) {
                            const Tensor& av = g.value(ia);
                            const Tensor& bv = g.value(ib);
                            // dA = dY B ; dB = dY^T A
                            if (Tensor* ga = g.grad_buffer(ia)) {
                              kernels::gemm_nn(m, n, k, dy.data().data(), bv.data().data(), ga->data().data(), true);
                            }
                            if (Tensor* gb = g.grad_buffer(ib)) {
                              kernels::gemm_tn(n, m, k, dy.data().data(), av.data().data(), gb->data().data(), true);
                            }
                          });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y = Tensor::zeros(n, m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) y[c * m + r] = av[r * n + c];
  }
  const int ia = a.id();
  return a.graph().record("transpose", std::move(y), {a}, [ia, m, n](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += dy[c * m + r];
      }
    }
  });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var log_sigmoid(Var a) {
  return unary("log_sigmoid", a, [](double x) { return -stable_softplus(-x); },
               [](double x, double) { return stable_sigmoid(-x); });
}

Var softplus(Var a) {
  return unary("softplus", a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw NumericError("log", static_cast<int>(a.graph().size()), "non-positive input");
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const int ia = a.id();
  return a.graph().record("sum", Tensor::scalar(acc), {a}, [ia](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (double& v : ga->data()) v += dy[0];
    }
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_rows(Var a) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y = Tensor::zeros(1, n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) y[c] += av[r * n + c];
  }
  const int ia = a.id();
  return a.graph().record("sum_rows", std::move(y), {a}, [ia, m, n](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += dy[c];
      }
    }
  });
}

Var mean_rows(Var a) { return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows())); }

Var sum_cols(Var a) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y = Tensor::zeros(m, 1);
  for (std::size_t r = 0; r < m; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += av[r * n + c];
    y[r] = acc;
  }
  const int ia = a.id();
  return a.graph().record("sum_cols", std::move(y), {a}, [ia, m, n](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += dy[r];
      }
    }
  });
}

Var segment_mean(Var a, std::size_t length) {
  const Tensor& av = a.value();
  require(length > 0 && av.rows() % length == 0, "segment_mean",
          "rows " + std::to_string(av.rows()) + " not a multiple of " + std::to_string(length));
  const std::size_t segs = av.rows() / length, n = av.cols();
  const double inv = 1.0 / static_cast<double>(length);
  Tensor y = Tensor::zeros(segs, n);
  for (std::size_t s = 0; s < segs; ++s) {
    for (std::size_t i = 0; i < length; ++i) {
      for (std::size_t c = 0; c < n; ++c) y[s * n + c] += av[(s * length + i) * n + c];
    }
    for (std::size_t c = 0; c < n; ++c) y[s * n + c] *= inv;
  }
  const int ia = a.id();
  return a.graph().record("segment_mean", std::move(y), {a},
                          [ia, segs, length, n, inv](Graph& g, const Tensor&, const Tensor& dy) {
                            if (Tensor* ga = g.grad_buffer(ia)) {
                              for (std::size_t s = 0; s < segs; ++s) {
                                for (std::size_t i = 0; i < length; ++i) {
                                  for (std::size_t c = 0; c < n; ++c) (*ga)[(s * length + i) * n + c] += dy[s * n + c] * inv;
                                }
                              }
                            }
                          });
}

Var softmax_rows(Var a) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y = Tensor::zeros(m, n);
  for (std::size_t r = 0; r < m; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, av[r * n + c]);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      y[r * n + c] = std::exp(av[r * n + c] - mx);
      total += y[r * n + c];
    }
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] /= total;
  }
  const int ia = a.id();
  return a.graph().record("softmax", std::move(y), {a}, [ia, m, n](Graph& g, const Tensor& out, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < m; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < n; ++c) dot += dy[r * n + c] * out[r * n + c];
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += out[r * n + c] * (dy[r * n + c] - dot);
      }
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y = Tensor::zeros(m, n);
  for (std::size_t r = 0; r < m; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, av[r * n + c]);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += std::exp(av[r * n + c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < n; ++c) y[r * n + c] = av[r * n + c] - lse;
  }
  const int ia = a.id();
  return a.graph().record("log_softmax", std::move(y), {a}, [ia, m, n](Graph& g, const Tensor& out, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < m; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) total += dy[r * n + c];
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += dy[r * n + c] - std::exp(out[r * n + c]) * total;
      }
    }
  });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  require(gain.value().size() == n && bias.value().size() == n, "layer_norm", "gain/bias width mismatch");
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  // Saved per-row normalized values and inverse std for the backward pass.
  Tensor xhat = Tensor::zeros(m, n);
  std::vector<double> inv_std(m);
  Tensor y = Tensor::zeros(m, n);
  for (std::size_t r = 0; r < m; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += xv[r * n + c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xv[r * n + c] - mu) * (xv[r * n + c] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (xv[r * n + c] - mu) * inv_std[r];
      y[r * n + c] = xhat[r * n + c] * gv[c] + bv[c];
    }
  }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph().record(
      "layer_norm", std::move(y), {x, gain, bias},
      [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Tensor&, const Tensor& dy) {
        const Tensor& gv = g.value(ig);
        if (Tensor* gg = g.grad_buffer(ig)) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) (*gg)[c] += dy[r * n + c] * xhat[r * n + c];
          }
        }
        if (Tensor* gb = g.grad_buffer(ib)) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) (*gb)[c] += dy[r * n + c];
          }
        }
        if (Tensor* gx = g.grad_buffer(ix)) {
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < m; ++r) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double d = dy[r * n + c] * gv[c];
              mean_d += d;
              mean_dx += d * xhat[r * n + c];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t c = 0; c < n; ++c) {
              const double d = dy[r * n + c] * gv[c];
              (*gx)[r * n + c] += inv_std[r] * (d - mean_d - xhat[r * n + c] * mean_dx);
            }
          }
        }
      });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    require(p.rows() == m, "concat_cols", "row count mismatch");
    total += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Tensor y = Tensor::zeros(m, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    const std::size_t w = pv.cols();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < w; ++c) y[r * total + off + c] = pv[r * w + c];
    }
    off += w;
  }
  return parts[0].graph().record("concat_cols", std::move(y), parts,
                                 [ids, widths, m, total](Graph& g, const Tensor&, const Tensor& dy) {
                                   std::size_t off = 0;
                                   for (std::size_t i = 0; i < ids.size(); ++i) {
                                     const std::size_t w = widths[i];
                                     if (Tensor* gp = g.grad_buffer(ids[i])) {
                                       for (std::size_t r = 0; r < m; ++r) {
                                         for (std::size_t c = 0; c < w; ++c) (*gp)[r * w + c] += dy[r * total + off + c];
                                       }
                                     }
                                     off += w;
                                   }
                                 });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> heights;
  for (const Var& p : parts) {
    require(p.cols() == n, "concat_rows", "column count mismatch");
    total += p.rows();
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  std::vector<double> data;
  data.reserve(total * n);
  for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  Tensor y = Tensor::matrix(total, n, std::move(data));
  return parts[0].graph().record("concat_rows", std::move(y), parts, [ids, heights, n](Graph& g, const Tensor&, const Tensor& dy) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t len = heights[i] * n;
      if (Tensor* gp = g.grad_buffer(ids[i])) {
        for (std::size_t j = 0; j < len; ++j) (*gp)[j] += dy[off + j];
      }
      off += len;
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  require(count > 0 && start + count <= n, "slice_cols", "range out of bounds");
  Tensor y = Tensor::zeros(m, count);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < count; ++c) y[r * count + c] = av[r * n + start + c];
  }
  const int ia = a.id();
  return a.graph().record("slice_cols", std::move(y), {a}, [ia, m, n, start, count](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < count; ++c) (*ga)[r * n + start + c] += dy[r * count + c];
      }
    }
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Tensor& av = a.value();
  const std::size_t n = av.cols();
  require(count > 0 && start + count <= av.rows(), "slice_rows", "range out of bounds");
  std::vector<double> data(av.data().begin() + static_cast<std::ptrdiff_t>(start * n),
                           av.data().begin() + static_cast<std::ptrdiff_t>((start + count) * n));
  const int ia = a.id();
  return a.graph().record("slice_rows", Tensor::matrix(count, n, std::move(data)), {a},
                          [ia, n, start](Graph& g, const Tensor&, const Tensor& dy) {
                            if (Tensor* ga = g.grad_buffer(ia)) {
                              for (std::size_t j = 0; j < dy.size(); ++j) (*ga)[start * n + j] += dy[j];
                            }
                          });
}

Var gather_rows(Var a, std::vector<std::size_t> index) {
  const Tensor& av = a.value();
  const std::size_t n = av.cols();
  require(!index.empty(), "gather_rows", "empty index");
  Tensor y = Tensor::zeros(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < av.rows(), "gather_rows", "index out of range");
    for (std::size_t c = 0; c < n; ++c) y[i * n + c] = av[index[i] * n + c];
  }
  const int ia = a.id();
  return a.graph().record("gather_rows", std::move(y), {a}, [ia, n, index = std::move(index)](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t i = 0; i < index.size(); ++i) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[index[i] * n + c] += dy[i * n + c];
      }
    }
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tensor y = a.value().reshaped(rows, cols);
  const int ia = a.id();
  return a.graph().record("reshape", std::move(y), {a}, [ia](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i];
    }
  });
}

Var repeat_rows(Var a, std::size_t times) {
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y = Tensor::zeros(m * times, n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      for (std::size_t c = 0; c < n; ++c) y[(r * times + t) * n + c] = av[r * n + c];
    }
  }
  const int ia = a.id();
  return a.graph().record("repeat_rows", std::move(y), {a}, [ia, m, n, times](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* ga = g.grad_buffer(ia)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t t = 0; t < times; ++t) {
          for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += dy[(r * times + t) * n + c];
        }
      }
    }
  });
}

Var tile_rows(Var a, std::size_t times) {
  const Tensor& av = a.value();
  const std::size_t block = av.size();
  std::vector<double> data;
  data.reserve(block * times);
  for (std::size_t t = 0; t < times; ++t) data.insert(data.end(), av.data().begin(), av.data().end());
  const int ia = a.id();
  return a.graph().record("tile_rows", Tensor::matrix(av.rows() * times, av.cols(), std::move(data)), {a},
                          [ia, block, times](Graph& g, const Tensor&, const Tensor& dy) {
                            if (Tensor* ga = g.grad_buffer(ia)) {
                              for (std::size_t t = 0; t < times; ++t) {
                                for (std::size_t j = 0; j < block; ++j) (*ga)[j] += dy[t * block + j];
                              }
                            }
                          });
}

Var group_vecmat(Var w, Var table) {
  const Tensor& wv = w.value();
  const Tensor& tv = table.value();
  const std::size_t b = wv.rows(), l = wv.cols(), n = tv.cols();
  require(tv.rows() == b * l, "group_vecmat",
          "table " + tv.shape_string() + " incompatible with weights " + wv.shape_string());
  Tensor y = Tensor::zeros(b, n);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      const double wij = wv[i * l + j];
      for (std::size_t c = 0; c < n; ++c) y[i * n + c] += wij * tv[(i * l + j) * n + c];
    }
  }
  const int iw = w.id(), it = table.id();
  return w.graph().record("group_vecmat", std::move(y), {w, table}, [iw, it, b, l, n](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& wv = g.value(iw);
    const Tensor& tv = g.value(it);
    if (Tensor* gw = g.grad_buffer(iw)) {
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < l; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < n; ++c) acc += dy[i * n + c] * tv[(i * l + j) * n + c];
          (*gw)[i * l + j] += acc;
        }
      }
    }
    if (Tensor* gt = g.grad_buffer(it)) {
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < l; ++j) {
          const double wij = wv[i * l + j];
          for (std::size_t c = 0; c < n; ++c) (*gt)[(i * l + j) * n + c] += wij * dy[i * n + c];
        }
      }
    }
  });
}

Var attention(Var q, Var k, Var v, const AttentionShape& s) {
  const Tensor& qv = q.value();
  require(qv.same_shape(k.value()) && qv.same_shape(v.value()), "attention", "q, k, v shapes differ");
  require(s.heads > 0 && s.width % s.heads == 0, "attention", "width not divisible by heads");
  require(qv.rows() == s.sequences * s.length && qv.cols() == s.width, "attention",
          "input " + qv.shape_string() + " does not match sequences*length x width");
  Tensor probs({s.sequences * s.heads * s.length * s.length}, 0.0);
  Tensor y = Tensor::zeros(qv.rows(), qv.cols());
  kernels::attention_forward(s, qv.data().data(), k.value().data().data(), v.value().data().data(),
                             probs.data().data(), y.data().data());
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return q.graph().record("attention", std::move(y), {q, k, v},
                          [iq, ik, iv, s, probs = std::move(probs)](Graph& g, const Tensor&, const Tensor& dy) {
                            const Tensor& qv = g.value(iq);
                            Tensor dq = Tensor::zeros_like(qv), dk = Tensor::zeros_like(qv), dv = Tensor::zeros_like(qv);
                            kernels::attention_backward(s, qv.data().data(), g.value(ik).data().data(),
                                                        g.value(iv).data().data(), probs.data().data(), dy.data().data(),
                                                        dq.data().data(), dk.data().data(), dv.data().data());
                            if (Tensor* gq = g.grad_buffer(iq)) *gq += dq;
                            if (Tensor* gk = g.grad_buffer(ik)) *gk += dk;
                            if (Tensor* gv = g.grad_buffer(iv)) *gv += dv;
                          });
}

Var gumbel_softmax(Var logits, double tau, const Tensor& noise, bool straight_through) {
  if (!(tau > 0.0)) throw Error("gumbel_softmax: temperature must be positive, got " + std::to_string(tau));
  require_same_shape("gumbel_softmax", logits.value(), noise);
  Graph& g = logits.graph();
  Var soft = softmax_rows(scale(add(logits, g.constant(noise)), 1.0 / tau));
  if (!straight_through) return soft;
  const Tensor& sv = soft.value();
  Tensor hard = Tensor::zeros(sv.rows(), sv.cols());
  for (std::size_t r = 0; r < sv.rows(); ++r) {
    auto row = sv.row_span(r);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    hard(r, best) = 1.0;
  }
  // hard + soft - stop_grad(soft): forward value is hard, gradient is soft's.
  return add(soft, g.constant(std::move(hard)) - detach(soft));
}

}  // namespace traj::num
