#include "glitch/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace glitch::nn {
namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

void require_rank(const std::string& op, const char* name, const Tensor& t, std::size_t rank) {
  if (t.ndim() != rank) {
    shape_error(op, std::string(name) + " must have rank " + std::to_string(rank) + ", got shape " +
                        to_string(t.shape()));
  }
}

void accumulate(Tape& tape, int node, std::span<const float> delta) {
  if (node < 0) return;
  auto g = tape.grad(node);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t out_h, out_w;
  int stride, padding;

  std::size_t patch() const { return channels * kernel_h * kernel_w; }
  std::size_t pixels() const { return out_h * out_w; }
};

std::size_t conv_out_dim(std::size_t in, std::size_t kernel, int stride, int padding, const char* axis) {
  const auto padded = static_cast<std::int64_t>(in) + 2 * padding;
  if (padded < static_cast<std::int64_t>(kernel)) {
    shape_error("conv2d", std::string("kernel does not fit padded input along ") + axis);
  }
  const auto span = padded - static_cast<std::int64_t>(kernel);
  if (span % stride != 0) {
    shape_error("conv2d", std::string("non-integer output size along ") + axis + " (" + std::to_string(in) +
                              " + 2*" + std::to_string(padding) + " - " + std::to_string(kernel) +
                              " not divisible by stride " + std::to_string(stride) + ")");
  }
  return static_cast<std::size_t>(span / stride + 1);
}

ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dOptions opt) {
  require_rank("conv2d", "input", x, 4);
  require_rank("conv2d", "weight", w, 4);
  require_rank("conv2d", "bias", b, 1);
  if (opt.stride < 1) shape_error("conv2d", "stride must be >= 1");
  if (opt.padding < 0) shape_error("conv2d", "padding must be >= 0");
  if (w.dim(1) != x.dim(1)) {
    shape_error("conv2d", "weight expects " + std::to_string(w.dim(1)) + " input channels, input has " +
                              std::to_string(x.dim(1)));
  }
  if (b.dim(0) != w.dim(0)) {
    shape_error("conv2d", "bias has " + std::to_string(b.dim(0)) + " entries for " + std::to_string(w.dim(0)) +
                              " output channels");
  }
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.channels = x.dim(1);
  g.height = x.dim(2);
  g.width = x.dim(3);
  g.out_channels = w.dim(0);
  g.kernel_h = w.dim(2);
  g.kernel_w = w.dim(3);
  g.stride = opt.stride;
  g.padding = opt.padding;
  g.out_h = conv_out_dim(g.height, g.kernel_h, opt.stride, opt.padding, "height");
  g.out_w = conv_out_dim(g.width, g.kernel_w, opt.stride, opt.padding, "width");
  return g;
}

// Unfolds one image [C,H,W] into columns [C*KH*KW, OH*OW].
void im2col(const float* image, const ConvGeometry& g, float* col) {
  const auto P = g.pixels();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        float* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::int64_t>(oy) * g.stride + static_cast<std::int64_t>(ky) - g.padding;
          float* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::int64_t>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::int64_t>(ox) * g.stride + static_cast<std::int64_t>(kx) - g.padding;
            dst[ox] = (ix < 0 || ix >= static_cast<std::int64_t>(g.width)) ? 0.0f : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back onto the image, accumulating.
void col2im(const float* col, const ConvGeometry& g, float* image) {
  const auto P = g.pixels();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const float* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::int64_t>(oy) * g.stride + static_cast<std::int64_t>(ky) - g.padding;
          if (iy < 0 || iy >= static_cast<std::int64_t>(g.height)) continue;
          float* dst = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const float* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::int64_t>(ox) * g.stride + static_cast<std::int64_t>(kx) - g.padding;
            if (ix >= 0 && ix < static_cast<std::int64_t>(g.width)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& input, const Var& weight, const Var& bias, Conv2dOptions options) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  const ConvGeometry g = conv_geometry(x, w, b, options);
  const auto K = g.patch();
  const auto P = g.pixels();
  const auto in_stride = g.channels * g.height * g.width;

  std::vector<float> y(g.batch * g.out_channels * P);
  std::vector<float> col(K * P);
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(xd + n * in_stride, g, col.data());
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      float* out = y.data() + (n * g.out_channels + o) * P;
      std::fill(out, out + P, b[o]);
      const float* wrow = wd + o * K;
      for (std::size_t k = 0; k < K; ++k) {
        const float wv = wrow[k];
        const float* crow = col.data() + k * P;
        for (std::size_t p = 0; p < P; ++p) out[p] += wv * crow[p];
      }
    }
  }

  Tensor out({g.batch, g.out_channels, g.out_h, g.out_w}, std::move(y));
  const int xn = input.node(), wn = weight.node(), bn = bias.node();
  return Tape::record(std::move(out), {&input, &weight, &bias},
                      [x, w, g, xn, wn, bn](std::span<const float> gy, Tape& tape) {
                        const auto K = g.patch();
                        const auto P = g.pixels();
                        const auto in_stride = g.channels * g.height * g.width;
                        if (bn >= 0) {
                          auto db = tape.grad(bn);
                          for (std::size_t n = 0; n < g.batch; ++n) {
                            for (std::size_t o = 0; o < g.out_channels; ++o) {
                              const float* go = gy.data() + (n * g.out_channels + o) * P;
                              float s = 0.0f;
                              for (std::size_t p = 0; p < P; ++p) s += go[p];
                              db[o] += s;
                            }
                          }
                        }
                        std::vector<float> col(K * P);
                        if (wn >= 0) {
                          auto dw = tape.grad(wn);
                          for (std::size_t n = 0; n < g.batch; ++n) {
                            im2col(x.data().data() + n * in_stride, g, col.data());
                            for (std::size_t o = 0; o < g.out_channels; ++o) {
                              const float* go = gy.data() + (n * g.out_channels + o) * P;
                              for (std::size_t k = 0; k < K; ++k) {
                                const float* crow = col.data() + k * P;
                                float s = 0.0f;
                                for (std::size_t p = 0; p < P; ++p) s += go[p] * crow[p];
                                dw[o * K + k] += s;
                              }
                            }
                          }
                        }
                        if (xn >= 0) {
                          auto dx = tape.grad(xn);
                          const float* wd = w.data().data();
                          for (std::size_t n = 0; n < g.batch; ++n) {
                            std::fill(col.begin(), col.end(), 0.0f);
                            for (std::size_t o = 0; o < g.out_channels; ++o) {
                              const float* go = gy.data() + (n * g.out_channels + o) * P;
                              for (std::size_t k = 0; k < K; ++k) {
                                const float wv = wd[o * K + k];
                                float* crow = col.data() + k * P;
                                for (std::size_t p = 0; p < P; ++p) crow[p] += wv * go[p];
                              }
                            }
                            col2im(col.data(), g, dx.data() + n * in_stride);
                          }
                        }
                      });
}

Var batchnorm2d(const Var& input, const Var& gamma, const Var& beta, BatchNormStats& stats, bool training,
                BatchNormOptions options) {
  const Tensor& x = input.value();
  require_rank("batchnorm2d", "input", x, 4);
  const auto N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma.value(), &beta.value(), &stats.running_mean,
                                                                &stats.running_var}) {
    if (t->ndim() != 1 || t->dim(0) != C) {
      shape_error("batchnorm2d", "parameter shape " + to_string(t->shape()) + " does not match " +
                                     std::to_string(C) + " channels");
    }
  }
  const auto M = N * HW;
  if (training && M < 2) shape_error("batchnorm2d", "training mode needs at least 2 values per channel");

  auto xhat = std::make_shared<std::vector<float>>(x.size());
  std::vector<float> invstd(C);
  std::vector<float> y(x.size());
  const float* xd = x.data().data();

  if (training) {
    auto mean = stats.running_mean.to_vector();
    auto var = stats.running_var.to_vector();
    for (std::size_t c = 0; c < C; ++c) {
      float s = 0.0f;
      for (std::size_t n = 0; n < N; ++n) {
        const float* p = xd + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
      }
      const float mu = s / static_cast<float>(M);
      float ss = 0.0f;
      for (std::size_t n = 0; n < N; ++n) {
        const float* p = xd + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          const float d = p[i] - mu;
          ss += d * d;
        }
      }
      const float biased = ss / static_cast<float>(M);
      const float unbiased = ss / static_cast<float>(M - 1);
      invstd[c] = 1.0f / std::sqrt(biased + options.epsilon);
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t base = (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) (*xhat)[base + i] = (xd[base + i] - mu) * invstd[c];
      }
      mean[c] = (1.0f - options.momentum) * mean[c] + options.momentum * mu;
      var[c] = (1.0f - options.momentum) * var[c] + options.momentum * unbiased;
    }
    stats.running_mean = Tensor({C}, std::move(mean));
    stats.running_var = Tensor({C}, std::move(var));
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      const float mu = stats.running_mean[c];
      invstd[c] = 1.0f / std::sqrt(stats.running_var[c] + options.epsilon);
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t base = (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) (*xhat)[base + i] = (xd[base + i] - mu) * invstd[c];
      }
    }
  }

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (n * C + c) * HW;
      const float gm = gamma.value()[c], bt = beta.value()[c];
      for (std::size_t i = 0; i < HW; ++i) y[base + i] = gm * (*xhat)[base + i] + bt;
    }
  }

  Tensor out(x.shape(), std::move(y));
  const int xn = input.node(), gn = gamma.node(), bn = beta.node();
  const Tensor gm = gamma.value();
  return Tape::record(
      std::move(out), {&input, &gamma, &beta},
      [xhat, invstd, gm, N, C, HW, M, training, xn, gn, bn](std::span<const float> gy, Tape& tape) {
        std::vector<float> sum_g(C, 0.0f), sum_gx(C, 0.0f);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (n * C + c) * HW;
            float s = 0.0f, sx = 0.0f;
            for (std::size_t i = 0; i < HW; ++i) {
              s += gy[base + i];
              sx += gy[base + i] * (*xhat)[base + i];
            }
            sum_g[c] += s;
            sum_gx[c] += sx;
          }
        }
        if (gn >= 0) accumulate(tape, gn, sum_gx);
        if (bn >= 0) accumulate(tape, bn, sum_g);
        if (xn < 0) return;
        auto dx = tape.grad(xn);
        const float inv_m = 1.0f / static_cast<float>(M);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (n * C + c) * HW;
            const float scale = gm[c] * invstd[c];
            if (training) {
              // d/dx of gamma * (x - mean) / std with batch statistics.
              for (std::size_t i = 0; i < HW; ++i) {
                dx[base + i] += scale * (gy[base + i] - inv_m * sum_g[c] - (*xhat)[base + i] * inv_m * sum_gx[c]);
              }
            } else {
              for (std::size_t i = 0; i < HW; ++i) dx[base + i] += scale * gy[base + i];
            }
          }
        }
      });
}

Var maxpool2d(const Var& input, int size, int stride) {
  const Tensor& x = input.value();
  require_rank("maxpool2d", "input", x, 4);
  if (size < 1 || stride < 1) shape_error("maxpool2d", "size and stride must be >= 1");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto s = static_cast<std::size_t>(size), st = static_cast<std::size_t>(stride);
  if (H < s || W < s || (H - s) % st != 0 || (W - s) % st != 0) {
    shape_error("maxpool2d", "input " + to_string(x.shape()) + " not divisible into " + std::to_string(size) +
                                 "x" + std::to_string(size) + " windows at stride " + std::to_string(stride));
  }
  const auto OH = (H - s) / st + 1, OW = (W - s) / st + 1;
  std::vector<float> y(N * C * OH * OW);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(y.size());
  const float* xd = x.data().data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const float* plane = xd + nc * H * W;
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        std::size_t best = (oy * st) * W + ox * st;
        for (std::size_t ky = 0; ky < s; ++ky) {
          for (std::size_t kx = 0; kx < s; ++kx) {
            const std::size_t idx = (oy * st + ky) * W + ox * st + kx;
            if (plane[idx] > plane[best]) best = idx;
          }
        }
        const std::size_t o = (nc * OH + oy) * OW + ox;
        y[o] = plane[best];
        (*argmax)[o] = static_cast<std::uint32_t>(nc * H * W + best);
      }
    }
  }
  Tensor out({N, C, OH, OW}, std::move(y));
  const int xn = input.node();
  return Tape::record(std::move(out), {&input}, [argmax, xn](std::span<const float> gy, Tape& tape) {
    auto dx = tape.grad(xn);
    for (std::size_t o = 0; o < gy.size(); ++o) dx[(*argmax)[o]] += gy[o];
  });
}

Var linear(const Var& input, const Var& weight, const Var& bias) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  require_rank("linear", "input", x, 2);
  require_rank("linear", "weight", w, 2);
  require_rank("linear", "bias", b, 1);
  const auto N = x.dim(0), IN = x.dim(1), OUT = w.dim(0);
  if (w.dim(1) != IN) {
    shape_error("linear", "weight " + to_string(w.shape()) + " expects " + std::to_string(w.dim(1)) +
                              " inputs, input has " + std::to_string(IN));
  }
  if (b.dim(0) != OUT) shape_error("linear", "bias " + to_string(b.shape()) + " does not match weight");
  std::vector<float> y(N * OUT);
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  for (std::size_t n = 0; n < N; ++n) {
    const float* xr = xd + n * IN;
    for (std::size_t o = 0; o < OUT; ++o) {
      const float* wr = wd + o * IN;
      float s = 0.0f;
      for (std::size_t i = 0; i < IN; ++i) s += xr[i] * wr[i];
      y[n * OUT + o] = s + b[o];
    }
  }
  Tensor out({N, OUT}, std::move(y));
  const int xn = input.node(), wn = weight.node(), bn = bias.node();
  return Tape::record(std::move(out), {&input, &weight, &bias},
                      [x, w, N, IN, OUT, xn, wn, bn](std::span<const float> gy, Tape& tape) {
                        if (bn >= 0) {
                          auto db = tape.grad(bn);
                          for (std::size_t n = 0; n < N; ++n)
                            for (std::size_t o = 0; o < OUT; ++o) db[o] += gy[n * OUT + o];
                        }
                        if (wn >= 0) {
                          auto dw = tape.grad(wn);
                          for (std::size_t n = 0; n < N; ++n) {
                            const float* xr = x.data().data() + n * IN;
                            for (std::size_t o = 0; o < OUT; ++o) {
                              const float g = gy[n * OUT + o];
                              float* dr = dw.data() + o * IN;
                              for (std::size_t i = 0; i < IN; ++i) dr[i] += g * xr[i];
                            }
                          }
                        }
                        if (xn >= 0) {
                          auto dx = tape.grad(xn);
                          for (std::size_t n = 0; n < N; ++n) {
                            float* dr = dx.data() + n * IN;
                            for (std::size_t o = 0; o < OUT; ++o) {
                              const float g = gy[n * OUT + o];
                              const float* wr = w.data().data() + o * IN;
                              for (std::size_t i = 0; i < IN; ++i) dr[i] += g * wr[i];
                            }
                          }
                        }
                      });
}

Var relu(const Var& input) {
  const Tensor& x = input.value();
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
  Tensor out(x.shape(), std::move(y));
  const int xn = input.node();
  return Tape::record(std::move(out), {&input}, [x, xn](std::span<const float> gy, Tape& tape) {
    auto dx = tape.grad(xn);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (x[i] > 0.0f) dx[i] += gy[i];
    }
  });
}

Var flatten(const Var& input) {
  const Tensor& x = input.value();
  if (x.ndim() < 1) shape_error("flatten", "input must have a batch dimension");
  const auto n = x.dim(0);
  Tensor out = x.reshape({n, x.size() / n});
  const int xn = input.node();
  return Tape::record(std::move(out), {&input},
                      [xn](std::span<const float> gy, Tape& tape) { accumulate(tape, xn, gy); });
}

Tensor softmax(const Tensor& logits) {
  if (logits.ndim() != 2) shape_error("softmax", "logits must be [N,K], got " + to_string(logits.shape()));
  const auto N = logits.dim(0), K = logits.dim(1);
  std::vector<float> y(N * K);
  for (std::size_t n = 0; n < N; ++n) {
    const float* z = logits.data().data() + n * K;
    const float m = *std::max_element(z, z + K);
    float s = 0.0f;
    for (std::size_t k = 0; k < K; ++k) {
      y[n * K + k] = std::exp(z[k] - m);
      s += y[n * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) y[n * K + k] /= s;
  }
  return Tensor({N, K}, std::move(y));
}

Var softmax(const Var& logits) {
  Tensor y = softmax(logits.value());
  const auto N = y.dim(0), K = y.dim(1);
  const int zn = logits.node();
  return Tape::record(y, {&logits}, [y, N, K, zn](std::span<const float> gy, Tape& tape) {
    auto dz = tape.grad(zn);
    for (std::size_t n = 0; n < N; ++n) {
      float dot = 0.0f;
      for (std::size_t k = 0; k < K; ++k) dot += gy[n * K + k] * y[n * K + k];
      for (std::size_t k = 0; k < K; ++k) dz[n * K + k] += y[n * K + k] * (gy[n * K + k] - dot);
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.ndim() != 2) shape_error("cross_entropy", "logits must be [N,K], got " + to_string(z.shape()));
  const auto N = z.dim(0), K = z.dim(1);
  if (labels.size() != N) {
    shape_error("cross_entropy", std::to_string(labels.size()) + " labels for batch of " + std::to_string(N));
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= K) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(K) + ")");
    }
  }
  const Tensor p = softmax(z);
  float total = 0.0f;
  for (std::size_t n = 0; n < N; ++n) {
    const float* row = z.data().data() + n * K;
    const float m = *std::max_element(row, row + K);
    float s = 0.0f;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(row[k] - m);
    total += (m + std::log(s)) - row[labels[n]];
  }
  const float loss = total / static_cast<float>(N);
  std::vector<int> lab(labels.begin(), labels.end());
  const int zn = logits.node();
  return Tape::record(Tensor::scalar(loss), {&logits},
                      [p, lab, N, K, zn](std::span<const float> gy, Tape& tape) {
                        auto dz = tape.grad(zn);
                        const float scale = gy[0] / static_cast<float>(N);
                        for (std::size_t n = 0; n < N; ++n) {
                          for (std::size_t k = 0; k < K; ++k) {
                            const float onehot = static_cast<std::size_t>(lab[n]) == k ? 1.0f : 0.0f;
                            dz[n * K + k] += scale * (p[n * K + k] - onehot);
                          }
                        }
                      });
}

Var sum(const Var& input) {
  float s = 0.0f;
  for (float v : input.value().data()) s += v;
  const int xn = input.node();
  return Tape::record(Tensor::scalar(s), {&input}, [xn](std::span<const float> gy, Tape& tape) {
    auto dx = tape.grad(xn);
    for (auto& d : dx) d += gy[0];
  });
}

namespace {

enum class Elementwise { kAdd, kSub, kMul };

Var elementwise(const Var& a, const Var& b, Elementwise kind, const char* name) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) {
    shape_error(name, "shapes " + to_string(x.shape()) + " and " + to_string(y.shape()) + " differ");
  }
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (kind) {
      case Elementwise::kAdd: out[i] = x[i] + y[i]; break;
      case Elementwise::kSub: out[i] = x[i] - y[i]; break;
      case Elementwise::kMul: out[i] = x[i] * y[i]; break;
    }
  }
  const int an = a.node(), bn = b.node();
  return Tape::record(Tensor(x.shape(), std::move(out)), {&a, &b},
                      [x, y, kind, an, bn](std::span<const float> g, Tape& tape) {
                        if (an >= 0) {
                          auto da = tape.grad(an);
                          for (std::size_t i = 0; i < g.size(); ++i) da[i] += kind == Elementwise::kMul ? g[i] * y[i] : g[i];
                        }
                        if (bn >= 0) {
                          auto db = tape.grad(bn);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            db[i] += kind == Elementwise::kMul ? g[i] * x[i] : (kind == Elementwise::kSub ? -g[i] : g[i]);
                          }
                        }
                      });
}

}  // namespace

Var add(const Var& a, const Var& b) { return elementwise(a, b, Elementwise::kAdd, "add"); }
Var sub(const Var& a, const Var& b) { return elementwise(a, b, Elementwise::kSub, "sub"); }
Var mul(const Var& a, const Var& b) { return elementwise(a, b, Elementwise::kMul, "mul"); }

Var select_column(const Var& logits, int column) {
  const Tensor& z = logits.value();
  if (z.ndim() != 2) shape_error("select_column", "logits must be [N,K], got " + to_string(z.shape()));
  const auto N = z.dim(0), K = z.dim(1);
  if (column < 0 || static_cast<std::size_t>(column) >= K) {
    throw std::out_of_range("select_column: column " + std::to_string(column) + " outside [0, " +
                            std::to_string(K) + ")");
  }
  const auto c = static_cast<std::size_t>(column);
  float s = 0.0f;
  for (std::size_t n = 0; n < N; ++n) s += z[n * K + c];
  const int zn = logits.node();
  return Tape::record(Tensor::scalar(s), {&logits}, [N, K, c, zn](std::span<const float> gy, Tape& tape) {
    auto dz = tape.grad(zn);
    for (std::size_t n = 0; n < N; ++n) dz[n * K + c] += gy[0];
  });
}

}  // namespace glitch::nn
