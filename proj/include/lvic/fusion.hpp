#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lvic/painter.hpp"

namespace lvic {

// Exact GELU, x * Phi(x) with the erf-based standard normal CDF.
double gelu(double x);
double gelu_derivative(double x);

// Dense affine layer, y = W x + b. Weights row-major, out_dim x in_dim.
struct AffineLayer {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<double> weights;  // out_dim * in_dim
  std::vector<double> bias;     // out_dim

  static AffineLayer zeros(int out_dim, int in_dim);
};

enum class Activation { GELU, IDENTITY };

// Point-embedding network. Texture runs through the visual adapter
// (d -> 8 -> 4), position through the point encoder (3 -> 4 -> 4), each with
// the activation after its first layer only; one fusion layer maps the
// concatenation (geometry, adapted texture, depth cue) = 4 + 4 + 1 inputs to
// the e-dimensional embedding.
//
// IDENTITY activation exists for tests that need the pure-linear path; real
// configurations use GELU.
struct FusionParams {
  AffineLayer visual1;  // 8 x d
  AffineLayer visual2;  // 4 x 8
  AffineLayer point1;   // 4 x 3
  AffineLayer point2;   // 4 x 4
  AffineLayer fuse;     // e x 9
  Activation activation = Activation::GELU;

  int texture_dim() const { return visual1.in_dim; }
  int embedding_dim() const { return fuse.out_dim; }

  static FusionParams zeros(int d, int e);
  // Uniform in +-sqrt(1/fan_in) per layer, deterministic in seed.
  static FusionParams random_init(int d, int e, uint64_t seed);
  // Throws ConfigError unless the layer shapes chain (d -> 8 -> 4, 3 -> 4 ->
  // 4, 9 -> e).
  void validate() const;
};

using PointEmbedding = std::vector<double>;

// Forward pass over one painted row (c + 4 + d channels). Unpainted rows —
// all four scalar cue channels equal to the -1 marker — have their texture
// branch zeroed and feed 0 as the depth cue; a painted row whose depth
// channels are the -1 invalid marker feeds its real texture but a 0 depth
// cue (the marker is a sentinel, not a measurement).
PointEmbedding fusion_forward(const FusionParams& params, std::span<const float> painted_row,
                              const PaintLayout& layout);

struct FusionGradients {
  AffineLayer visual1, visual2, point1, point2, fuse;
  std::vector<double> input_row;  // same width as the painted row

  static FusionGradients zeros(const FusionParams& params, int row_width);
};

// Exact reverse-mode gradients of fusion_forward with respect to every
// parameter and the input row, contracted with `upstream` (size e).
FusionGradients fusion_backward(const FusionParams& params, std::span<const float> painted_row,
                                const PaintLayout& layout, std::span<const double> upstream);

// params - learning_rate * gradients, elementwise.
FusionParams sgd_step(const FusionParams& params, const FusionGradients& gradients,
                      double learning_rate);

// Convenience batch used by the embed pipeline; parallel over rows.
std::vector<float> embed_cloud(const FusionParams& params, const PaintedCloud& painted,
                               int threads = 0);

}  // namespace lvic
