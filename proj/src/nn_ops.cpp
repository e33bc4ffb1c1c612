#include "mouthtrace/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mouthtrace/parallel.hpp"

namespace mouthtrace::nn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Target number of im2col columns per GEMM; images are grouped into fixed
// chunks so that small feature maps still produce reasonably wide products.
constexpr std::int64_t kChunkColumns = 4096;

// Everything is treated as 3-D internally; missing leading axes have extent 1.
struct Geometry {
  std::int64_t n = 0, c_in = 0, c_out = 0;
  std::array<std::int64_t, 3> in{1, 1, 1}, k{1, 1, 1}, out{1, 1, 1}, s{1, 1, 1}, d{1, 1, 1}, p{0, 0, 0};

  std::int64_t in_plane() const { return in[0] * in[1] * in[2]; }
  std::int64_t out_plane() const { return out[0] * out[1] * out[2]; }
  std::int64_t kernel_rows() const { return c_in * k[0] * k[1] * k[2]; }
  std::int64_t images_per_chunk() const {
    return std::clamp<std::int64_t>(kChunkColumns / std::max<std::int64_t>(out_plane(), 1), 1, std::max<std::int64_t>(n, 1));
  }
};

std::vector<std::int64_t> expand(const std::vector<std::int64_t>& v, std::size_t rank, std::int64_t fill,
                                 const char* what) {
  if (v.empty()) return std::vector<std::int64_t>(rank, fill);
  if (v.size() == 1) return std::vector<std::int64_t>(rank, v[0]);
  if (v.size() != rank) throw ShapeError(std::string(what) + " has wrong number of entries");
  return v;
}

void im2col(const float* x, const Geometry& g, float* col, std::int64_t ld) {
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.c_in; ++c) {
    const float* xc = x + c * g.in_plane();
    for (std::int64_t kd = 0; kd < g.k[0]; ++kd)
      for (std::int64_t kh = 0; kh < g.k[1]; ++kh)
        for (std::int64_t kw = 0; kw < g.k[2]; ++kw, ++row) {
          float* dst = col + row * ld;
          std::int64_t idx = 0;
          for (std::int64_t od = 0; od < g.out[0]; ++od) {
            const std::int64_t id = od * g.s[0] - g.p[0] + kd * g.d[0];
            if (id < 0 || id >= g.in[0]) {
              std::fill_n(dst + idx, g.out[1] * g.out[2], 0.0f);
              idx += g.out[1] * g.out[2];
              continue;
            }
            for (std::int64_t oh = 0; oh < g.out[1]; ++oh) {
              const std::int64_t ih = oh * g.s[1] - g.p[1] + kh * g.d[1];
              if (ih < 0 || ih >= g.in[1]) {
                std::fill_n(dst + idx, g.out[2], 0.0f);
                idx += g.out[2];
                continue;
              }
              const float* xrow = xc + (id * g.in[1] + ih) * g.in[2];
              const std::int64_t base = kw * g.d[2] - g.p[2];
              for (std::int64_t ow = 0; ow < g.out[2]; ++ow) {
                const std::int64_t iw = ow * g.s[2] + base;
                dst[idx++] = (iw >= 0 && iw < g.in[2]) ? xrow[iw] : 0.0f;
              }
            }
          }
        }
  }
}

void col2im(const float* col, const Geometry& g, float* dx, std::int64_t ld) {
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.c_in; ++c) {
    float* xc = dx + c * g.in_plane();
    for (std::int64_t kd = 0; kd < g.k[0]; ++kd)
      for (std::int64_t kh = 0; kh < g.k[1]; ++kh)
        for (std::int64_t kw = 0; kw < g.k[2]; ++kw, ++row) {
          const float* src = col + row * ld;
          std::int64_t idx = 0;
          for (std::int64_t od = 0; od < g.out[0]; ++od) {
            const std::int64_t id = od * g.s[0] - g.p[0] + kd * g.d[0];
            if (id < 0 || id >= g.in[0]) {
              idx += g.out[1] * g.out[2];
              continue;
            }
            for (std::int64_t oh = 0; oh < g.out[1]; ++oh) {
              const std::int64_t ih = oh * g.s[1] - g.p[1] + kh * g.d[1];
              if (ih < 0 || ih >= g.in[1]) {
                idx += g.out[2];
                continue;
              }
              float* xrow = xc + (id * g.in[1] + ih) * g.in[2];
              const std::int64_t base = kw * g.d[2] - g.p[2];
              for (std::int64_t ow = 0; ow < g.out[2]; ++ow, ++idx) {
                const std::int64_t iw = ow * g.s[2] + base;
                if (iw >= 0 && iw < g.in[2]) xrow[iw] += src[idx];
              }
            }
          }
        }
  }
}

// im2col for images [first, first+count); image i owns columns [i*P, (i+1)*P).
RowMatrix gather_columns(const float* x, const Geometry& g, std::int64_t first, std::int64_t count) {
  const std::int64_t P = g.out_plane();
  const std::int64_t K = g.kernel_rows();
  RowMatrix col(K, count * P);
  if (count == 1) {
    im2col(x + first * g.c_in * g.in_plane(), g, col.data(), P);
    return col;
  }
  RowMatrix single(K, P);
  for (std::int64_t i = 0; i < count; ++i) {
    im2col(x + (first + i) * g.c_in * g.in_plane(), g, single.data(), P);
    col.middleCols(i * P, P) = single;
  }
  return col;
}

Geometry conv_geometry(const Shape& xs, const Shape& ws, const ConvOptions& opt) {
  if (xs.size() < 3 || xs.size() > 5) throw ShapeError("conv input must be [N, C, spatial...], got " + shape_string(xs));
  const std::size_t rank = xs.size() - 2;
  if (ws.size() != xs.size()) {
    throw ShapeError("conv weight " + shape_string(ws) + " incompatible with input " + shape_string(xs));
  }
  if (ws[1] != xs[1]) {
    throw ShapeError("inconsistent channels: input " + shape_string(xs) + " has " + std::to_string(xs[1]) +
                     " channels, weight " + shape_string(ws) + " expects " + std::to_string(ws[1]));
  }
  Geometry g;
  g.n = xs[0];
  g.c_in = xs[1];
  g.c_out = ws[0];
  auto stride = expand(opt.stride, rank, 1, "stride");
  auto dil = expand(opt.dilation, rank, 1, "dilation");
  auto pad = expand(opt.padding, rank, 0, "padding");
  if (opt.same) {
    for (std::size_t a = 0; a < rank; ++a) {
      if (stride[a] != 1) throw ShapeError("same padding requires stride 1");
      if (ws[2 + a] % 2 == 0) throw ShapeError("same padding requires odd kernel extents");
      pad[a] = dil[a] * (ws[2 + a] - 1) / 2;
    }
  }
  const std::size_t off = 3 - rank;
  for (std::size_t a = 0; a < rank; ++a) {
    if (stride[a] < 1 || dil[a] < 1 || pad[a] < 0) throw ShapeError("invalid stride/dilation/padding");
    g.in[off + a] = xs[2 + a];
    g.k[off + a] = ws[2 + a];
    g.s[off + a] = stride[a];
    g.d[off + a] = dil[a];
    g.p[off + a] = pad[a];
    g.out[off + a] = conv_output_extent(xs[2 + a], ws[2 + a], stride[a], dil[a], pad[a]);
    if (g.out[off + a] < 1) {
      throw ShapeError("kernel larger than padded input: input " + shape_string(xs) + ", weight " + shape_string(ws));
    }
  }
  return g;
}

Shape conv_output_shape(const Shape& xs, const Geometry& g) {
  Shape out{g.n, g.c_out};
  const std::size_t rank = xs.size() - 2;
  for (std::size_t a = 0; a < rank; ++a) out.push_back(g.out[3 - rank + a]);
  return out;
}

std::int64_t channel_inner(const Shape& s) {
  std::int64_t inner = 1;
  for (std::size_t i = 2; i < s.size(); ++i) inner *= s[i];
  return inner;
}

void check_channel_param(const Shape& xs, const Tensor& p, const char* what) {
  if (xs.size() < 2) throw ShapeError(std::string(what) + ": input needs a channel axis, got " + shape_string(xs));
  if (p.rank() != 1 || p.dim(0) != xs[1]) {
    throw ShapeError(std::string(what) + ": parameter " + shape_string(p.shape()) + " does not match " +
                     std::to_string(xs[1]) + " channels of " + shape_string(xs));
  }
}

}  // namespace

std::int64_t conv_output_extent(std::int64_t n, std::int64_t k, std::int64_t stride, std::int64_t dilation,
                                std::int64_t padding) {
  const std::int64_t span = n + 2 * padding - dilation * (k - 1) - 1;
  if (span < 0) return 0;
  return span / stride + 1;
}

Var conv(const Var& input, const Var& weight, const std::optional<Var>& bias, const ConvOptions& options) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const Geometry g = conv_geometry(xs, ws, options);
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != g.c_out)) {
    throw ShapeError("conv bias " + shape_string(bias->shape()) + " does not match " + std::to_string(g.c_out) +
                     " output channels");
  }

  const std::int64_t P = g.out_plane();
  const std::int64_t K = g.kernel_rows();
  const std::int64_t per_chunk = g.images_per_chunk();
  const std::int64_t chunks = (g.n + per_chunk - 1) / per_chunk;

  Tensor y(conv_output_shape(xs, g));
  const float* x = input.value().ptr();
  const float* b = bias ? bias->value().ptr() : nullptr;
  ConstMatMap W(weight.value().ptr(), g.c_out, K);
  float* yp = y.ptr();

  parallel_for(chunks, [&](std::int64_t chunk) {
    const std::int64_t first = chunk * per_chunk;
    const std::int64_t count = std::min(per_chunk, g.n - first);
    const std::int64_t ld = count * P;
    const RowMatrix col = gather_columns(x, g, first, count);
    RowMatrix out(g.c_out, ld);
    out.noalias() = W * col;
    for (std::int64_t i = 0; i < count; ++i)
      for (std::int64_t co = 0; co < g.c_out; ++co) {
        float* dst = yp + ((first + i) * g.c_out + co) * P;
        const float* src = out.data() + co * ld + i * P;
        const float bv = b ? b[co] : 0.0f;
        for (std::int64_t q = 0; q < P; ++q) dst[q] = src[q] + bv;
      }
  });

  std::vector<Var> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return make_result(std::move(y), inputs,
      [g, P, K, per_chunk, chunks, has_bias](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        const auto& xn = parents[0];
        const auto& wn = parents[1];
        const bool want_x = xn->requires_grad;
        const bool want_w = wn->requires_grad;
        const float* x = xn->value.ptr();
        ConstMatMap W(wn->value.ptr(), g.c_out, K);
        const float* dyp = dy.ptr();

        Tensor dx;
        if (want_x) dx = Tensor(xn->value.shape());
        std::vector<RowMatrix> dw_parts(want_w ? chunks : 0);

        parallel_for(chunks, [&](std::int64_t chunk) {
          const std::int64_t first = chunk * per_chunk;
          const std::int64_t count = std::min(per_chunk, g.n - first);
          const std::int64_t ld = count * P;
          RowMatrix dY(g.c_out, ld);
          for (std::int64_t i = 0; i < count; ++i)
            for (std::int64_t co = 0; co < g.c_out; ++co)
              std::copy_n(dyp + ((first + i) * g.c_out + co) * P, P, dY.data() + co * ld + i * P);
          if (want_w) {
            const RowMatrix col = gather_columns(x, g, first, count);
            dw_parts[chunk].noalias() = dY * col.transpose();
          }
          if (want_x) {
            RowMatrix dcol(K, ld);
            dcol.noalias() = W.transpose() * dY;
            for (std::int64_t i = 0; i < count; ++i) {
              float* dxi = dx.ptr() + (first + i) * g.c_in * g.in_plane();
              if (count == 1) {
                col2im(dcol.data(), g, dxi, ld);
              } else {
                RowMatrix single = dcol.middleCols(i * P, P);
                col2im(single.data(), g, dxi, P);
              }
            }
          }
        });

        if (want_x) xn->accumulate(std::move(dx));
        if (want_w) {
          Tensor dw(wn->value.shape());
          MatMap dW(dw.ptr(), g.c_out, K);
          for (const auto& part : dw_parts) dW += part;
          wn->accumulate(std::move(dw));
        }
        if (has_bias && parents[2]->requires_grad) {
          Tensor db(Shape{g.c_out});
          for (std::int64_t co = 0; co < g.c_out; ++co) {
            double acc = 0.0;
            for (std::int64_t n = 0; n < g.n; ++n) {
              const float* src = dyp + (n * g.c_out + co) * P;
              for (std::int64_t q = 0; q < P; ++q) acc += src[q];
            }
            db[co] = static_cast<float>(acc);
          }
          parents[2]->accumulate(std::move(db));
        }
      },
      "conv");
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor* running_mean, Tensor* running_var,
               bool train, float momentum, float eps) {
  const Shape& xs = x.shape();
  check_channel_param(xs, gamma.value(), "batch_norm gamma");
  check_channel_param(xs, beta.value(), "batch_norm beta");
  const std::int64_t N = xs[0], C = xs[1], S = channel_inner(xs);
  const std::int64_t count = N * S;
  if (train && count == 0) throw ShapeError("batch_norm: zero-size batch in train mode");
  if (!train && (!running_mean || !running_var)) throw ShapeError("batch_norm: eval mode needs running statistics");
  if (running_mean) check_channel_param(xs, *running_mean, "batch_norm running_mean");
  if (running_var) check_channel_param(xs, *running_var, "batch_norm running_var");

  const float* xp = x.value().ptr();
  const float* gp = gamma.value().ptr();
  const float* bp = beta.value().ptr();
  Tensor y(xs);
  Tensor xhat(xs);
  std::vector<float> inv_std(C);

  for (std::int64_t c = 0; c < C; ++c) {
    double mu, var;
    if (train) {
      double acc = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* p = xp + (n * C + c) * S;
        for (std::int64_t s = 0; s < S; ++s) acc += p[s];
      }
      mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* p = xp + (n * C + c) * S;
        for (std::int64_t s = 0; s < S; ++s) {
          const double dv = p[s] - mu;
          sq += dv * dv;
        }
      }
      var = sq / static_cast<double>(count);
      if (running_mean && running_var) {
        const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        (*running_mean)[c] = static_cast<float>((1.0 - momentum) * (*running_mean)[c] + momentum * mu);
        (*running_var)[c] = static_cast<float>((1.0 - momentum) * (*running_var)[c] + momentum * unbiased);
      }
    } else {
      mu = (*running_mean)[c];
      var = (*running_var)[c];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = static_cast<float>(is);
    for (std::int64_t n = 0; n < N; ++n) {
      const std::int64_t base = (n * C + c) * S;
      for (std::int64_t s = 0; s < S; ++s) {
        const float h = static_cast<float>((xp[base + s] - mu) * is);
        xhat[base + s] = h;
        y[base + s] = gp[c] * h + bp[c];
      }
    }
  }

  return make_result(std::move(y), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), N, C, S, train](
          const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        const float* g = parents[1]->value.ptr();
        const float* dyp = dy.ptr();
        Tensor dgamma(Shape{C}), dbeta(Shape{C});
        Tensor dx;
        const bool want_x = parents[0]->requires_grad;
        if (want_x) dx = Tensor(parents[0]->value.shape());
        const double count = static_cast<double>(N * S);
        for (std::int64_t c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_h = 0.0;
          for (std::int64_t n = 0; n < N; ++n) {
            const std::int64_t base = (n * C + c) * S;
            for (std::int64_t s = 0; s < S; ++s) {
              sum_dy += dyp[base + s];
              sum_dy_h += static_cast<double>(dyp[base + s]) * xhat[base + s];
            }
          }
          dgamma[c] = static_cast<float>(sum_dy_h);
          dbeta[c] = static_cast<float>(sum_dy);
          if (!want_x) continue;
          const double scale = static_cast<double>(g[c]) * inv_std[c];
          const double mean_dy = sum_dy / count;
          const double mean_dy_h = sum_dy_h / count;
          for (std::int64_t n = 0; n < N; ++n) {
            const std::int64_t base = (n * C + c) * S;
            for (std::int64_t s = 0; s < S; ++s) {
              if (train) {
                dx[base + s] = static_cast<float>(scale * (dyp[base + s] - mean_dy - xhat[base + s] * mean_dy_h));
              } else {
                dx[base + s] = static_cast<float>(scale * dyp[base + s]);
              }
            }
          }
        }
        if (want_x) parents[0]->accumulate(std::move(dx));
        parents[1]->accumulate(std::move(dgamma));
        parents[2]->accumulate(std::move(dbeta));
      },
      "batch_norm");
}

Var prelu(const Var& x, const Var& slope) {
  const Shape& xs = x.shape();
  check_channel_param(xs, slope.value(), "prelu slope");
  const std::int64_t N = xs[0], C = xs[1], S = channel_inner(xs);
  Tensor y(xs);
  const float* xp = x.value().ptr();
  const float* a = slope.value().ptr();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c) {
      const std::int64_t base = (n * C + c) * S;
      for (std::int64_t s = 0; s < S; ++s) {
        const float v = xp[base + s];
        y[base + s] = v > 0.0f ? v : a[c] * v;
      }
    }
  return make_result(std::move(y), {x, slope},
      [N, C, S](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        const float* xp = parents[0]->value.ptr();
        const float* a = parents[1]->value.ptr();
        Tensor dx(parents[0]->value.shape());
        Tensor da(Shape{C});
        std::vector<double> acc(C, 0.0);
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t c = 0; c < C; ++c) {
            const std::int64_t base = (n * C + c) * S;
            for (std::int64_t s = 0; s < S; ++s) {
              const float v = xp[base + s];
              const float g = dy[base + s];
              if (v > 0.0f) {
                dx[base + s] = g;
              } else {
                dx[base + s] = a[c] * g;
                acc[c] += static_cast<double>(g) * v;
              }
            }
          }
        for (std::int64_t c = 0; c < C; ++c) da[c] = static_cast<float>(acc[c]);
        parents[0]->accumulate(std::move(dx));
        parents[1]->accumulate(std::move(da));
      },
      "prelu");
}

Var relu(const Var& x) {
  Tensor y = max0(x.value());
  return make_result(std::move(y), {x},
      [](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        const auto& xv = parents[0]->value;
        Tensor dx(xv.shape());
        for (std::int64_t i = 0; i < xv.numel(); ++i) dx[i] = xv[i] > 0.0f ? dy[i] : 0.0f;
        parents[0]->accumulate(std::move(dx));
      },
      "relu");
}

Var dropout(const Var& x, float p, bool train, Rng* rng) {
  if (p < 0.0f || p >= 1.0f) throw ShapeError("dropout probability must be in [0, 1)");
  if (!train || p == 0.0f) return x;
  if (!rng) throw ShapeError("dropout in train mode needs a random generator");
  const float keep_scale = 1.0f / (1.0f - p);
  Tensor mask(x.shape());
  for (auto& m : mask.data()) m = rng->uniform_float() < p ? 0.0f : keep_scale;
  Tensor y = mul(x.value(), mask);
  return make_result(std::move(y), {x},
      [mask = std::move(mask)](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(mul(dy, mask));
      },
      "dropout");
}

Var max_pool(const Var& x, const std::vector<std::int64_t>& kernel, const std::vector<std::int64_t>& stride,
             const std::vector<std::int64_t>& padding) {
  const Shape& xs = x.shape();
  if (xs.size() < 3 || xs.size() > 5) throw ShapeError("max_pool input must be [N, C, spatial...]");
  const std::size_t rank = xs.size() - 2;
  const auto k = expand(kernel, rank, 1, "kernel");
  const auto s = expand(stride, rank, 1, "stride");
  const auto p = expand(padding, rank, 0, "padding");
  Geometry g;
  g.n = xs[0];
  g.c_in = g.c_out = xs[1];
  const std::size_t off = 3 - rank;
  for (std::size_t a = 0; a < rank; ++a) {
    if (2 * p[a] > k[a]) throw ShapeError("max_pool padding must be at most half the kernel");
    g.in[off + a] = xs[2 + a];
    g.k[off + a] = k[a];
    g.s[off + a] = s[a];
    g.p[off + a] = p[a];
    g.out[off + a] = conv_output_extent(xs[2 + a], k[a], s[a], 1, p[a]);
    if (g.out[off + a] < 1) throw ShapeError("max_pool kernel larger than padded input");
  }
  Shape ys{g.n, g.c_in};
  for (std::size_t a = 0; a < rank; ++a) ys.push_back(g.out[off + a]);
  Tensor y(ys);
  std::vector<std::int32_t> argmax(static_cast<std::size_t>(y.numel()));
  const float* xp = x.value().ptr();
  const std::int64_t planes = g.n * g.c_in;
  parallel_for(planes, [&](std::int64_t plane) {
    const float* src = xp + plane * g.in_plane();
    float* dst = y.ptr() + plane * g.out_plane();
    std::int32_t* arg = argmax.data() + plane * g.out_plane();
    std::int64_t idx = 0;
    for (std::int64_t od = 0; od < g.out[0]; ++od)
      for (std::int64_t oh = 0; oh < g.out[1]; ++oh)
        for (std::int64_t ow = 0; ow < g.out[2]; ++ow, ++idx) {
          float best = -std::numeric_limits<float>::infinity();
          std::int64_t best_at = -1;
          for (std::int64_t kd = 0; kd < g.k[0]; ++kd) {
            const std::int64_t id = od * g.s[0] - g.p[0] + kd;
            if (id < 0 || id >= g.in[0]) continue;
            for (std::int64_t kh = 0; kh < g.k[1]; ++kh) {
              const std::int64_t ih = oh * g.s[1] - g.p[1] + kh;
              if (ih < 0 || ih >= g.in[1]) continue;
              for (std::int64_t kw = 0; kw < g.k[2]; ++kw) {
                const std::int64_t iw = ow * g.s[2] - g.p[2] + kw;
                if (iw < 0 || iw >= g.in[2]) continue;
                const std::int64_t at = (id * g.in[1] + ih) * g.in[2] + iw;
                if (best_at < 0 || src[at] > best) {
                  best = src[at];
                  best_at = at;
                }
              }
            }
          }
          dst[idx] = best;
          arg[idx] = static_cast<std::int32_t>(best_at);
        }
  });
  return make_result(std::move(y), {x},
      [g, argmax = std::move(argmax)](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        Tensor dx(parents[0]->value.shape());
        const std::int64_t planes = g.n * g.c_in;
        for (std::int64_t plane = 0; plane < planes; ++plane) {
          float* dst = dx.ptr() + plane * g.in_plane();
          const float* src = dy.ptr() + plane * g.out_plane();
          const std::int32_t* arg = argmax.data() + plane * g.out_plane();
          for (std::int64_t q = 0; q < g.out_plane(); ++q) dst[arg[q]] += src[q];
        }
        parents[0]->accumulate(std::move(dx));
      },
      "max_pool");
}

Var mean_axis(const Var& x, std::size_t axis) {
  const Shape xs = x.shape();
  Tensor y = reduce(ReduceOp::mean, x.value(), axis);
  return make_result(std::move(y), {x},
      [xs, axis](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        std::int64_t outer = 1, inner = 1;
        for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
        for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
        const std::int64_t n = xs[axis];
        const float inv = 1.0f / static_cast<float>(n);
        Tensor dx(xs);
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t k = 0; k < n; ++k)
            for (std::int64_t i = 0; i < inner; ++i) dx[(o * n + k) * inner + i] = dy[o * inner + i] * inv;
        parents[0]->accumulate(std::move(dx));
      },
      "mean_axis");
}

Var global_avg_pool_spatial(const Var& x) {
  const Shape& xs = x.shape();
  if (xs.size() != 4) throw ShapeError("global_avg_pool_spatial expects [N, C, H, W], got " + shape_string(xs));
  return mean_axis(reshape(x, Shape{xs[0], xs[1], xs[2] * xs[3]}), 2);
}

Var linear(const Var& x, const Var& weight, const std::optional<Var>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
    throw ShapeError("linear: width mismatch between input " + shape_string(xs) + " and weight " + shape_string(ws));
  }
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != ws[0])) {
    throw ShapeError("linear: bias " + shape_string(bias->shape()) + " does not match weight " + shape_string(ws));
  }
  const std::int64_t N = xs[0], in = xs[1], out = ws[0];
  Tensor y(Shape{N, out});
  ConstMatMap X(x.value().ptr(), N, in);
  ConstMatMap W(weight.value().ptr(), out, in);
  MatMap Y(y.ptr(), N, out);
  Y.noalias() = X * W.transpose();
  if (bias) {
    const float* b = bias->value().ptr();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t o = 0; o < out; ++o) y[n * out + o] += b[o];
  }
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return make_result(std::move(y), inputs,
      [N, in, out, has_bias](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        ConstMatMap dY(dy.ptr(), N, out);
        if (parents[0]->requires_grad) {
          Tensor dx(Shape{N, in});
          MatMap(dx.ptr(), N, in).noalias() = dY * ConstMatMap(parents[1]->value.ptr(), out, in);
          parents[0]->accumulate(std::move(dx));
        }
        if (parents[1]->requires_grad) {
          Tensor dw(Shape{out, in});
          MatMap(dw.ptr(), out, in).noalias() = dY.transpose() * ConstMatMap(parents[0]->value.ptr(), N, in);
          parents[1]->accumulate(std::move(dw));
        }
        if (has_bias && parents[2]->requires_grad) {
          Tensor db(Shape{out});
          for (std::int64_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (std::int64_t n = 0; n < N; ++n) acc += dy[n * out + o];
            db[o] = static_cast<float>(acc);
          }
          parents[2]->accumulate(std::move(db));
        }
      },
      "linear");
}

Var add(const Var& a, const Var& b) {
  Tensor y = mouthtrace::add(a.value(), b.value());
  return make_result(std::move(y), {a, b},
      [](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(dy);
        parents[1]->accumulate(dy);
      },
      "add");
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw ShapeError("concat: shape mismatch: " + shape_string(first) + " vs " + shape_string(s));
    out_shape[axis] += s[axis];
  }
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Tensor y(out_shape);
  const std::int64_t out_row = out_shape[axis] * inner;
  std::vector<std::int64_t> widths;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t w = p.shape()[axis] * inner;
    for (std::int64_t o = 0; o < outer; ++o) std::copy_n(p.value().ptr() + o * w, w, y.ptr() + o * out_row + offset);
    widths.push_back(w);
    offset += w;
  }
  return make_result(std::move(y), parts,
      [outer, out_row, widths](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        std::int64_t offset = 0;
        for (std::size_t k = 0; k < parents.size(); ++k) {
          const std::int64_t w = widths[k];
          if (parents[k]->requires_grad) {
            Tensor g(parents[k]->value.shape());
            for (std::int64_t o = 0; o < outer; ++o) std::copy_n(dy.ptr() + o * out_row + offset, w, g.ptr() + o * w);
            parents[k]->accumulate(std::move(g));
          }
          offset += w;
        }
      },
      "concat");
}

Var reshape(const Var& x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return make_result(std::move(y), {x},
      [](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(dy.reshaped(parents[0]->value.shape()));
      },
      "reshape");
}

Tensor permute_tensor(const Tensor& x, const std::vector<std::size_t>& order) {
  const Shape& xs = x.shape();
  if (order.size() != xs.size()) throw ShapeError("permute order rank mismatch for " + shape_string(xs));
  std::vector<bool> seen(order.size(), false);
  for (auto a : order) {
    if (a >= order.size() || seen[a]) throw ShapeError("permute order is not a permutation");
    seen[a] = true;
  }
  const std::size_t r = xs.size();
  std::vector<std::int64_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * xs[i];
  Shape ys(r);
  std::vector<std::int64_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    ys[i] = xs[order[i]];
    src_stride[i] = in_stride[order[i]];
  }
  Tensor y(ys);
  if (y.numel() == 0) return y;
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t src = 0;
  const float* xp = x.ptr();
  float* yp = y.ptr();
  const std::int64_t n = y.numel();
  const std::int64_t last = r ? ys[r - 1] : 1;
  const std::int64_t last_stride = r ? src_stride[r - 1] : 0;
  for (std::int64_t out = 0; out < n; out += last) {
    for (std::int64_t j = 0; j < last; ++j) yp[out + j] = xp[src + j * last_stride];
    // Advance the multi-index over all but the last axis.
    for (std::size_t a = r - 1; a-- > 0;) {
      ++idx[a];
      src += src_stride[a];
      if (idx[a] < ys[a]) break;
      src -= src_stride[a] * ys[a];
      idx[a] = 0;
    }
  }
  return y;
}

Var permute(const Var& x, const std::vector<std::size_t>& order) {
  Tensor y = permute_tensor(x.value(), order);
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = i;
  return make_result(std::move(y), {x},
      [inverse](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(permute_tensor(dy, inverse));
      },
      "permute");
}

Var sum(const Var& x) {
  Tensor y = Tensor::scalar(static_cast<float>(sum_all(x.value())));
  return make_result(std::move(y), {x},
      [](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(Tensor(parents[0]->value.shape(), dy[0]));
      },
      "sum");
}

Var mean(const Var& x) {
  const auto n = static_cast<double>(x.value().numel());
  if (n == 0) throw ShapeError("mean of empty tensor");
  Tensor y = Tensor::scalar(static_cast<float>(sum_all(x.value()) / n));
  return make_result(std::move(y), {x},
      [n](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(Tensor(parents[0]->value.shape(), static_cast<float>(dy[0] / n)));
      },
      "mean");
}

Var dot_constant(const Var& x, const Tensor& weights) {
  if (weights.shape() != x.shape()) {
    throw ShapeError("dot_constant: shape mismatch: " + shape_string(x.shape()) + " vs " + shape_string(weights.shape()));
  }
  double acc = 0.0;
  for (std::int64_t i = 0; i < weights.numel(); ++i) acc += static_cast<double>(weights[i]) * x.value()[i];
  return make_result(Tensor::scalar(static_cast<float>(acc)), {x},
      [weights](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(scale(weights, dy[0]));
      },
      "dot_constant");
}

}  // namespace mouthtrace::nn
