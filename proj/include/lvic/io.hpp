#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lvic/fusion.hpp"
#include "lvic/geometry.hpp"
#include "lvic/imagery.hpp"
#include "lvic/painter.hpp"

namespace lvic {

// Readers refuse to allocate payloads larger than this unless the caller
// raises the cap; declared sizes beyond it are treated as corrupt headers.
inline constexpr uint64_t DEFAULT_READ_CAP_BYTES = 4ULL << 30;

// All binary formats: little-endian, 4-byte magic, u32 version (currently 1),
// dimension fields, payload. Declared sizes must match the file length
// exactly; anything else throws FormatError. Writers go through a temp file
// renamed into place on success, so a crash never leaves a torn output.

// Headerless raw sweep of f32 values; n is inferred from the file length,
// which must be an exact multiple of 4*c. Positions (channels 0..2) must be
// finite or read_cloud throws DataError naming the row.
PointCloud read_cloud(const std::filesystem::path& path, int c,
                      uint64_t cap_bytes = DEFAULT_READ_CAP_BYTES);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

// "LVDM": u32 width, u32 height, then height*width f32 row-major.
DepthMap read_depth_map(const std::filesystem::path& path,
                        uint64_t cap_bytes = DEFAULT_READ_CAP_BYTES);
void write_depth_map(const std::filesystem::path& path, const DepthMap& m);

// "LVFM": u32 d, u32 grid_h, u32 grid_w, u32 stride, then d planes of
// grid_h*grid_w f32 row-major.
FeatureMap read_feature_map(const std::filesystem::path& path,
                            uint64_t cap_bytes = DEFAULT_READ_CAP_BYTES);
void write_feature_map(const std::filesystem::path& path, const FeatureMap& m);

// "LVPC": u32 n, u32 c, u32 d, then n rows of (c+4+d) f32, then n i32
// camera ids (-1 where unpainted).
PaintedCloud read_painted_cloud(const std::filesystem::path& path,
                                uint64_t cap_bytes = DEFAULT_READ_CAP_BYTES);
void write_painted_cloud(const std::filesystem::path& path, const PaintedCloud& cloud);

// "LVFW": u32 d, u32 e, then the five layers in fixed order (visual 8xd,
// visual 4x8, point 4x3, point 4x4, fusion ex9), each as u32 rows, u32 cols,
// rows*cols f32 weights row-major, rows f32 biases. Weights are stored f32.
FusionParams read_fusion_params(const std::filesystem::path& path,
                                uint64_t cap_bytes = DEFAULT_READ_CAP_BYTES);
void write_fusion_params(const std::filesystem::path& path, const FusionParams& params);

struct EmbeddingMatrix {
  int64_t n = 0;
  int e = 0;
  std::vector<float> values;  // n * e
};

// "LVEM": u32 n, u32 e, then n*e f32 row-major.
EmbeddingMatrix read_embeddings(const std::filesystem::path& path,
                                uint64_t cap_bytes = DEFAULT_READ_CAP_BYTES);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);

// Calibration JSON: {"cameras": [{"id", "width", "height", "fx", "fy",
// "cx", "cy", "R": [9 row-major], "t": [3]}, ...]}. Loading validates the
// rig with a rotation tolerance of 1e-6; any schema or math violation is a
// CalibrationError naming the file.
CameraRig load_calibration(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const CameraRig& rig);

enum class FileKind { DepthMap, FeatureMap, PaintedCloud, FusionWeights, Embeddings };

const char* to_string(FileKind kind);

// Detects the format from the magic bytes and runs the full reader-side
// validation, discarding the payload. Unknown magic is a FormatError.
FileKind validate_file(const std::filesystem::path& path,
                       uint64_t cap_bytes = DEFAULT_READ_CAP_BYTES);

}  // namespace lvic
