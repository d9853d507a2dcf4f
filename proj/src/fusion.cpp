#include "lvic/fusion.hpp"

#include <array>
#include <cmath>
#include <string>

#include "lvic/errors.hpp"
#include "lvic/parallel.hpp"
#include "lvic/rng.hpp"

namespace lvic {

namespace {

constexpr double INV_SQRT2 = 0.7071067811865475244;
constexpr double INV_SQRT2PI = 0.3989422804014326779;

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x * INV_SQRT2)); }

double activate(Activation act, double x) { return act == Activation::GELU ? gelu(x) : x; }

double activate_derivative(Activation act, double x) {
  return act == Activation::GELU ? gelu_derivative(x) : 1.0;
}

void apply_affine(const AffineLayer& layer, std::span<const double> in, std::span<double> out) {
  for (int i = 0; i < layer.out_dim; ++i) {
    double acc = layer.bias[i];
    const double* w = layer.weights.data() + static_cast<size_t>(i) * layer.in_dim;
    for (int j = 0; j < layer.in_dim; ++j) {
      acc += w[j] * in[j];
    }
    out[i] = acc;
  }
}

// dL/din and parameter gradients for y = W x + b given dL/dy.
void backprop_affine(const AffineLayer& layer, std::span<const double> in,
                     std::span<const double> dout, AffineLayer& grad, std::span<double> din) {
  for (int i = 0; i < layer.out_dim; ++i) {
    const double g = dout[i];
    grad.bias[i] += g;
    double* gw = grad.weights.data() + static_cast<size_t>(i) * layer.in_dim;
    const double* w = layer.weights.data() + static_cast<size_t>(i) * layer.in_dim;
    for (int j = 0; j < layer.in_dim; ++j) {
      gw[j] += g * in[j];
      din[j] += g * w[j];
    }
  }
}

void check_shape(const AffineLayer& layer, int out_dim, int in_dim, const char* name) {
  if (layer.out_dim != out_dim || layer.in_dim != in_dim ||
      layer.weights.size() != static_cast<size_t>(out_dim) * in_dim ||
      layer.bias.size() != static_cast<size_t>(out_dim)) {
    throw ConfigError(std::string("fusion: layer ") + name + " must be " +
                      std::to_string(out_dim) + "x" + std::to_string(in_dim));
  }
}

// Everything the backward pass needs from one forward evaluation.
struct Trace {
  int c = 0;
  bool painted = false;
  bool depth_cue_valid = false;
  std::vector<double> tex_in;   // d
  std::vector<double> va_pre;   // 8, pre-activation
  std::vector<double> va_act;   // 8
  std::vector<double> tex;      // 4, adapter output (ungated)
  std::array<double, 3> pos;
  std::array<double, 4> pe_pre;
  std::array<double, 4> pe_act;
  std::array<double, 4> geo;
  std::array<double, 9> fused_in;
  std::vector<double> out;      // e
};

Trace forward_trace(const FusionParams& params, std::span<const float> row,
                    const PaintLayout& layout) {
  params.validate();
  const int d = params.texture_dim();
  if (layout.d != d) {
    throw ConfigError("fusion: layout d=" + std::to_string(layout.d) +
                      " does not match params d=" + std::to_string(d));
  }
  const int painted_width = layout.total_painted();
  if (static_cast<int>(row.size()) < painted_width + 3) {
    throw ConfigError("fusion: painted row has " + std::to_string(row.size()) +
                      " channels, need at least " + std::to_string(painted_width + 3));
  }

  Trace t;
  t.c = static_cast<int>(row.size()) - painted_width;
  const float u = row[t.c + PaintLayout::U];
  const float v = row[t.c + PaintLayout::V];
  const float z_c = row[t.c + PaintLayout::Z_C];
  const float dz = row[t.c + PaintLayout::DELTA_Z];
  t.painted = !(u == UNPAINTED && v == UNPAINTED && z_c == UNPAINTED && dz == UNPAINTED);
  t.depth_cue_valid = t.painted && depth_valid(z_c);

  t.pos = {row[0], row[1], row[2]};
  apply_affine(params.point1, std::span<const double>(t.pos.data(), 3), t.pe_pre);
  for (int i = 0; i < 4; ++i) {
    t.pe_act[i] = activate(params.activation, t.pe_pre[i]);
  }
  apply_affine(params.point2, t.pe_act, t.geo);

  t.tex_in.resize(d);
  for (int j = 0; j < d; ++j) {
    t.tex_in[j] = row[t.c + PaintLayout::TEXTURE + j];
  }
  t.va_pre.resize(8);
  t.va_act.resize(8);
  t.tex.resize(4);
  apply_affine(params.visual1, t.tex_in, t.va_pre);
  for (int i = 0; i < 8; ++i) {
    t.va_act[i] = activate(params.activation, t.va_pre[i]);
  }
  apply_affine(params.visual2, t.va_act, t.tex);

  for (int i = 0; i < 4; ++i) {
    t.fused_in[i] = t.geo[i];
    t.fused_in[4 + i] = t.painted ? t.tex[i] : 0.0;
  }
  t.fused_in[8] = t.depth_cue_valid ? static_cast<double>(dz) : 0.0;

  t.out.resize(params.embedding_dim());
  apply_affine(params.fuse, t.fused_in, t.out);
  return t;
}

}  // namespace

double gelu(double x) { return x * normal_cdf(x); }

double gelu_derivative(double x) {
  return normal_cdf(x) + x * INV_SQRT2PI * std::exp(-0.5 * x * x);
}

AffineLayer AffineLayer::zeros(int out_dim, int in_dim) {
  AffineLayer layer;
  layer.out_dim = out_dim;
  layer.in_dim = in_dim;
  layer.weights.assign(static_cast<size_t>(out_dim) * in_dim, 0.0);
  layer.bias.assign(static_cast<size_t>(out_dim), 0.0);
  return layer;
}

FusionParams FusionParams::zeros(int d, int e) {
  FusionParams p;
  p.visual1 = AffineLayer::zeros(8, d);
  p.visual2 = AffineLayer::zeros(4, 8);
  p.point1 = AffineLayer::zeros(4, 3);
  p.point2 = AffineLayer::zeros(4, 4);
  p.fuse = AffineLayer::zeros(e, 9);
  return p;
}

FusionParams FusionParams::random_init(int d, int e, uint64_t seed) {
  FusionParams p = zeros(d, e);
  Rng rng(seed);
  for (AffineLayer* layer : {&p.visual1, &p.visual2, &p.point1, &p.point2, &p.fuse}) {
    const double bound = std::sqrt(1.0 / layer->in_dim);
    for (double& w : layer->weights) {
      w = rng.uniform(-bound, bound);
    }
    for (double& b : layer->bias) {
      b = rng.uniform(-bound, bound);
    }
  }
  return p;
}

void FusionParams::validate() const {
  const int d = visual1.in_dim;
  const int e = fuse.out_dim;
  if (d < 1) {
    throw ConfigError("fusion: texture dimension must be >= 1");
  }
  if (e < 1) {
    throw ConfigError("fusion: embedding dimension must be >= 1");
  }
  check_shape(visual1, 8, d, "visual1");
  check_shape(visual2, 4, 8, "visual2");
  check_shape(point1, 4, 3, "point1");
  check_shape(point2, 4, 4, "point2");
  check_shape(fuse, e, 9, "fuse");
}

PointEmbedding fusion_forward(const FusionParams& params, std::span<const float> painted_row,
                              const PaintLayout& layout) {
  return forward_trace(params, painted_row, layout).out;
}

FusionGradients FusionGradients::zeros(const FusionParams& params, int row_width) {
  FusionGradients g;
  g.visual1 = AffineLayer::zeros(params.visual1.out_dim, params.visual1.in_dim);
  g.visual2 = AffineLayer::zeros(params.visual2.out_dim, params.visual2.in_dim);
  g.point1 = AffineLayer::zeros(params.point1.out_dim, params.point1.in_dim);
  g.point2 = AffineLayer::zeros(params.point2.out_dim, params.point2.in_dim);
  g.fuse = AffineLayer::zeros(params.fuse.out_dim, params.fuse.in_dim);
  g.input_row.assign(static_cast<size_t>(row_width), 0.0);
  return g;
}

FusionGradients fusion_backward(const FusionParams& params, std::span<const float> painted_row,
                                const PaintLayout& layout, std::span<const double> upstream) {
  const Trace t = forward_trace(params, painted_row, layout);
  if (static_cast<int>(upstream.size()) != params.embedding_dim()) {
    throw ConfigError("fusion: upstream gradient has " + std::to_string(upstream.size()) +
                      " dims, embedding has " + std::to_string(params.embedding_dim()));
  }
  FusionGradients g = FusionGradients::zeros(params, static_cast<int>(painted_row.size()));

  std::array<double, 9> d_fused_in{};
  backprop_affine(params.fuse, t.fused_in, upstream, g.fuse, d_fused_in);

  // Geometry branch.
  std::array<double, 4> d_geo{};
  for (int i = 0; i < 4; ++i) {
    d_geo[i] = d_fused_in[i];
  }
  std::array<double, 4> d_pe_act{};
  backprop_affine(params.point2, t.pe_act, d_geo, g.point2, d_pe_act);
  std::array<double, 4> d_pe_pre{};
  for (int i = 0; i < 4; ++i) {
    d_pe_pre[i] = d_pe_act[i] * activate_derivative(params.activation, t.pe_pre[i]);
  }
  std::array<double, 3> d_pos{};
  backprop_affine(params.point1, std::span<const double>(t.pos.data(), 3), d_pe_pre, g.point1,
                  d_pos);
  for (int i = 0; i < 3; ++i) {
    g.input_row[i] = d_pos[i];
  }

  // Texture branch; gated to zero for unpainted rows.
  if (t.painted) {
    std::array<double, 4> d_tex{};
    for (int i = 0; i < 4; ++i) {
      d_tex[i] = d_fused_in[4 + i];
    }
    std::vector<double> d_va_act(8, 0.0);
    backprop_affine(params.visual2, t.va_act, d_tex, g.visual2, d_va_act);
    std::vector<double> d_va_pre(8);
    for (int i = 0; i < 8; ++i) {
      d_va_pre[i] = d_va_act[i] * activate_derivative(params.activation, t.va_pre[i]);
    }
    std::vector<double> d_tex_in(params.texture_dim(), 0.0);
    backprop_affine(params.visual1, t.tex_in, d_va_pre, g.visual1, d_tex_in);
    for (int j = 0; j < params.texture_dim(); ++j) {
      g.input_row[t.c + PaintLayout::TEXTURE + j] = d_tex_in[j];
    }
  }

  if (t.depth_cue_valid) {
    g.input_row[t.c + PaintLayout::DELTA_Z] = d_fused_in[8];
  }
  return g;
}

FusionParams sgd_step(const FusionParams& params, const FusionGradients& gradients,
                      double learning_rate) {
  FusionParams next = params;
  const AffineLayer* grads[] = {&gradients.visual1, &gradients.visual2, &gradients.point1,
                                &gradients.point2, &gradients.fuse};
  AffineLayer* layers[] = {&next.visual1, &next.visual2, &next.point1, &next.point2, &next.fuse};
  for (int k = 0; k < 5; ++k) {
    if (grads[k]->weights.size() != layers[k]->weights.size() ||
        grads[k]->bias.size() != layers[k]->bias.size()) {
      throw ConfigError("sgd_step: gradient shapes do not match parameters");
    }
    for (size_t i = 0; i < layers[k]->weights.size(); ++i) {
      layers[k]->weights[i] -= learning_rate * grads[k]->weights[i];
    }
    for (size_t i = 0; i < layers[k]->bias.size(); ++i) {
      layers[k]->bias[i] -= learning_rate * grads[k]->bias[i];
    }
  }
  return next;
}

std::vector<float> embed_cloud(const FusionParams& params, const PaintedCloud& painted,
                               int threads) {
  params.validate();
  if (params.texture_dim() != painted.d) {
    throw ConfigError("embed: weights have d=" + std::to_string(params.texture_dim()) +
                      ", painted cloud has d=" + std::to_string(painted.d));
  }
  const int e = params.embedding_dim();
  const PaintLayout layout{painted.d};
  std::vector<float> out(static_cast<size_t>(painted.n) * e);
  parallel_chunks(painted.n, threads, [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const PointEmbedding emb = fusion_forward(params, painted.row(i), layout);
      for (int k = 0; k < e; ++k) {
        out[i * e + k] = static_cast<float>(emb[k]);
      }
    }
  });
  return out;
}

}  // namespace lvic
