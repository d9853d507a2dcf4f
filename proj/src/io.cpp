#include "lvic/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <utility>

#include "lvic/errors.hpp"

namespace lvic {
namespace {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian and read/written natively");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

constexpr uint32_t FORMAT_VERSION = 1;

uint64_t checked_mul(uint64_t a, uint64_t b, const std::string& context) {
  if (a != 0 && b > std::numeric_limits<uint64_t>::max() / a) {
    throw FormatError(context + ": declared size overflows");
  }
  return a * b;
}

std::string printable_magic(const char m[4]) {
  std::string out;
  for (int i = 0; i < 4; ++i) {
    const unsigned char ch = static_cast<unsigned char>(m[i]);
    if (ch >= 0x20 && ch < 0x7f) {
      out += static_cast<char>(ch);
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\x%02x", ch);
      out += buf;
    }
  }
  return out;
}

// Sequential reader over one file with an exact length contract: every
// header-driven read is bounds-checked against the real file size, payload
// allocations are capped, and finish() rejects trailing bytes.
class FileReader {
 public:
  FileReader(const std::filesystem::path& path, uint64_t cap_bytes)
      : path_(path.string()), cap_(cap_bytes) {
    std::error_code ec;
    const uint64_t size = std::filesystem::file_size(path, ec);
    if (ec) {
      throw FormatError(path_ + ": cannot stat: " + ec.message());
    }
    size_ = size;
    in_.open(path, std::ios::binary);
    if (!in_) {
      throw FormatError(path_ + ": cannot open for reading");
    }
  }

  const std::string& path() const { return path_; }
  uint64_t file_size() const { return size_; }

  void expect_magic(const char expected[4]) {
    char found[4];
    read_bytes(found, 4, "magic");
    if (std::memcmp(found, expected, 4) != 0) {
      throw FormatError(path_ + ": magic mismatch: expected \"" + printable_magic(expected) +
                        "\", found \"" + printable_magic(found) + "\"");
    }
  }

  void expect_version() {
    const uint32_t v = read_u32("version");
    if (v != FORMAT_VERSION) {
      throw FormatError(path_ + ": unsupported version " + std::to_string(v) + " (expected " +
                        std::to_string(FORMAT_VERSION) + ")");
    }
  }

  uint32_t read_u32(const char* field) {
    uint32_t v;
    read_bytes(&v, sizeof v, field);
    return v;
  }

  // Validates count elements of elem_size against the cap before the caller
  // allocates for them.
  void check_payload(uint64_t count, uint64_t elem_size, const char* what) {
    const uint64_t bytes = checked_mul(count, elem_size, path_ + ": " + what);
    if (bytes > cap_) {
      throw FormatError(path_ + ": " + what + " declares " + std::to_string(bytes) +
                        " bytes, over the " + std::to_string(cap_) + "-byte cap");
    }
  }

  template <typename T>
  void read_array(std::vector<T>& out, uint64_t count, const char* what) {
    check_payload(count, sizeof(T), what);
    out.resize(count);
    if (count > 0) {
      read_bytes(out.data(), count * sizeof(T), what);
    }
  }

  void finish() {
    if (consumed_ != size_) {
      throw FormatError(path_ + ": trailing data: header describes " + std::to_string(consumed_) +
                        " bytes, file has " + std::to_string(size_));
    }
  }

 private:
  void read_bytes(void* dst, uint64_t nbytes, const char* what) {
    if (consumed_ + nbytes > size_) {
      throw FormatError(path_ + ": truncated reading " + std::string(what) + ": needs " +
                        std::to_string(consumed_ + nbytes) + " bytes, file has " +
                        std::to_string(size_));
    }
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(nbytes));
    if (!in_) {
      throw FormatError(path_ + ": read failed at byte " + std::to_string(consumed_));
    }
    consumed_ += nbytes;
  }

  std::string path_;
  std::ifstream in_;
  uint64_t size_ = 0;
  uint64_t consumed_ = 0;
  uint64_t cap_ = 0;
};

// Writes to <path>.tmp and renames into place in commit(); the destructor
// cleans up the temp file when commit() was never reached.
class AtomicFile {
 public:
  explicit AtomicFile(const std::filesystem::path& path)
      : path_(path), tmp_(path.string() + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) {
      throw FormatError(path_.string() + ": cannot open " + tmp_.string() + " for writing");
    }
  }

  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  void write_bytes(const void* src, uint64_t nbytes) {
    out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(nbytes));
    if (!out_) {
      throw FormatError(tmp_.string() + ": write failed");
    }
  }

  void write_u32(uint32_t v) { write_bytes(&v, sizeof v); }
  void write_magic(const char magic[4]) { write_bytes(magic, 4); }

  template <typename T>
  void write_array(const std::vector<T>& values) {
    if (!values.empty()) {
      write_bytes(values.data(), values.size() * sizeof(T));
    }
  }

  void commit() {
    out_.flush();
    if (!out_) {
      throw FormatError(tmp_.string() + ": flush failed");
    }
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) {
      throw FormatError(path_.string() + ": rename from temp failed: " + ec.message());
    }
    committed_ = true;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

uint32_t to_u32_count(int64_t v, const std::string& context) {
  if (v < 0 || static_cast<uint64_t>(v) > std::numeric_limits<uint32_t>::max()) {
    throw FormatError(context + ": count " + std::to_string(v) + " does not fit the format");
  }
  return static_cast<uint32_t>(v);
}

void check_buffer(size_t actual, uint64_t expected, const std::string& context) {
  if (actual != expected) {
    throw DataError(context + ": buffer holds " + std::to_string(actual) +
                    " values, dimensions require " + std::to_string(expected));
  }
}

// Fusion weight layers travel f32 on disk in this fixed order.
std::vector<AffineLayer*> layer_order(FusionParams& p) {
  return {&p.visual1, &p.visual2, &p.point1, &p.point2, &p.fuse};
}

std::vector<const AffineLayer*> layer_order(const FusionParams& p) {
  return {&p.visual1, &p.visual2, &p.point1, &p.point2, &p.fuse};
}

}  // namespace

PointCloud read_cloud(const std::filesystem::path& path, int c, uint64_t cap_bytes) {
  if (c < 3) {
    throw ConfigError("read_cloud: channel count must be >= 3, got " + std::to_string(c));
  }
  FileReader r(path, cap_bytes);
  const uint64_t row_bytes = static_cast<uint64_t>(c) * 4;
  if (r.file_size() % row_bytes != 0) {
    throw FormatError(r.path() + ": length " + std::to_string(r.file_size()) +
                      " bytes is not a multiple of " + std::to_string(row_bytes) +
                      " (4 bytes x " + std::to_string(c) + " channels)");
  }
  const uint64_t n = r.file_size() / row_bytes;
  PointCloud cloud;
  cloud.c = c;
  cloud.n = static_cast<int64_t>(n);
  r.read_array(cloud.values, n * static_cast<uint64_t>(c), "points");
  r.finish();
  for (int64_t i = 0; i < cloud.n; ++i) {
    const float* row = cloud.values.data() + i * c;
    if (!std::isfinite(row[0]) || !std::isfinite(row[1]) || !std::isfinite(row[2])) {
      throw DataError(r.path() + ": row " + std::to_string(i) + ": non-finite position");
    }
  }
  return cloud;
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  check_buffer(cloud.values.size(),
               checked_mul(static_cast<uint64_t>(cloud.n), static_cast<uint64_t>(cloud.c),
                           path.string()),
               path.string());
  AtomicFile f(path);
  f.write_array(cloud.values);
  f.commit();
}

DepthMap read_depth_map(const std::filesystem::path& path, uint64_t cap_bytes) {
  FileReader r(path, cap_bytes);
  r.expect_magic("LVDM");
  r.expect_version();
  const uint32_t width = r.read_u32("width");
  const uint32_t height = r.read_u32("height");
  if (width == 0 || height == 0) {
    throw FormatError(r.path() + ": width and height must be positive");
  }
  DepthMap m;
  m.width = static_cast<int>(width);
  m.height = static_cast<int>(height);
  r.read_array(m.values, static_cast<uint64_t>(width) * height, "depth values");
  r.finish();
  return m;
}

void write_depth_map(const std::filesystem::path& path, const DepthMap& m) {
  check_buffer(m.values.size(),
               checked_mul(static_cast<uint64_t>(m.width), static_cast<uint64_t>(m.height),
                           path.string()),
               path.string());
  AtomicFile f(path);
  f.write_magic("LVDM");
  f.write_u32(FORMAT_VERSION);
  f.write_u32(to_u32_count(m.width, path.string()));
  f.write_u32(to_u32_count(m.height, path.string()));
  f.write_array(m.values);
  f.commit();
}

FeatureMap read_feature_map(const std::filesystem::path& path, uint64_t cap_bytes) {
  FileReader r(path, cap_bytes);
  r.expect_magic("LVFM");
  r.expect_version();
  const uint32_t d = r.read_u32("d");
  const uint32_t grid_h = r.read_u32("grid_h");
  const uint32_t grid_w = r.read_u32("grid_w");
  const uint32_t stride = r.read_u32("stride");
  if (d == 0 || grid_h == 0 || grid_w == 0 || stride == 0) {
    throw FormatError(r.path() + ": d, grid_h, grid_w and stride must be positive");
  }
  FeatureMap m;
  m.d = static_cast<int>(d);
  m.grid_h = static_cast<int>(grid_h);
  m.grid_w = static_cast<int>(grid_w);
  m.stride = static_cast<int>(stride);
  const uint64_t count =
      checked_mul(checked_mul(d, grid_h, r.path()), grid_w, r.path());
  r.read_array(m.values, count, "feature planes");
  r.finish();
  return m;
}

void write_feature_map(const std::filesystem::path& path, const FeatureMap& m) {
  check_buffer(m.values.size(),
               checked_mul(checked_mul(static_cast<uint64_t>(m.d), static_cast<uint64_t>(m.grid_h),
                                       path.string()),
                           static_cast<uint64_t>(m.grid_w), path.string()),
               path.string());
  AtomicFile f(path);
  f.write_magic("LVFM");
  f.write_u32(FORMAT_VERSION);
  f.write_u32(to_u32_count(m.d, path.string()));
  f.write_u32(to_u32_count(m.grid_h, path.string()));
  f.write_u32(to_u32_count(m.grid_w, path.string()));
  f.write_u32(to_u32_count(m.stride, path.string()));
  f.write_array(m.values);
  f.commit();
}

PaintedCloud read_painted_cloud(const std::filesystem::path& path, uint64_t cap_bytes) {
  FileReader r(path, cap_bytes);
  r.expect_magic("LVPC");
  r.expect_version();
  const uint32_t n = r.read_u32("n");
  const uint32_t c = r.read_u32("c");
  const uint32_t d = r.read_u32("d");
  if (c < 3) {
    throw FormatError(r.path() + ": painted cloud needs c >= 3 original channels, got " +
                      std::to_string(c));
  }
  PaintedCloud cloud;
  cloud.n = n;
  cloud.c = static_cast<int>(c);
  cloud.d = static_cast<int>(d);
  const uint64_t row_width = static_cast<uint64_t>(c) + 4 + d;
  r.read_array(cloud.values, checked_mul(n, row_width, r.path()), "painted rows");
  r.read_array(cloud.camera_ids, n, "camera ids");
  r.finish();
  for (uint32_t i = 0; i < n; ++i) {
    if (cloud.camera_ids[i] < -1) {
      throw DataError(r.path() + ": row " + std::to_string(i) + ": camera id " +
                      std::to_string(cloud.camera_ids[i]) + " is invalid");
    }
  }
  return cloud;
}

void write_painted_cloud(const std::filesystem::path& path, const PaintedCloud& cloud) {
  const uint64_t row_width = static_cast<uint64_t>(cloud.c) + 4 + static_cast<uint64_t>(cloud.d);
  check_buffer(cloud.values.size(),
               checked_mul(static_cast<uint64_t>(cloud.n), row_width, path.string()),
               path.string());
  check_buffer(cloud.camera_ids.size(), static_cast<uint64_t>(cloud.n), path.string());
  AtomicFile f(path);
  f.write_magic("LVPC");
  f.write_u32(FORMAT_VERSION);
  f.write_u32(to_u32_count(cloud.n, path.string()));
  f.write_u32(to_u32_count(cloud.c, path.string()));
  f.write_u32(to_u32_count(cloud.d, path.string()));
  f.write_array(cloud.values);
  f.write_array(cloud.camera_ids);
  f.commit();
}

FusionParams read_fusion_params(const std::filesystem::path& path, uint64_t cap_bytes) {
  FileReader r(path, cap_bytes);
  r.expect_magic("LVFW");
  r.expect_version();
  const uint32_t d = r.read_u32("d");
  const uint32_t e = r.read_u32("e");
  if (d == 0 || e == 0) {
    throw FormatError(r.path() + ": d and e must be positive");
  }
  FusionParams params = FusionParams::zeros(static_cast<int>(d), static_cast<int>(e));
  for (AffineLayer* layer : layer_order(params)) {
    const uint32_t rows = r.read_u32("layer rows");
    const uint32_t cols = r.read_u32("layer cols");
    if (rows != static_cast<uint32_t>(layer->out_dim) ||
        cols != static_cast<uint32_t>(layer->in_dim)) {
      throw FormatError(r.path() + ": layer shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " does not match the declared d=" +
                        std::to_string(d) + ", e=" + std::to_string(e) + " network (expected " +
                        std::to_string(layer->out_dim) + "x" + std::to_string(layer->in_dim) + ")");
    }
    std::vector<float> weights, bias;
    r.read_array(weights, checked_mul(rows, cols, r.path()), "layer weights");
    r.read_array(bias, rows, "layer biases");
    layer->weights.assign(weights.begin(), weights.end());
    layer->bias.assign(bias.begin(), bias.end());
  }
  r.finish();
  params.validate();
  return params;
}

void write_fusion_params(const std::filesystem::path& path, const FusionParams& params) {
  params.validate();
  AtomicFile f(path);
  f.write_magic("LVFW");
  f.write_u32(FORMAT_VERSION);
  f.write_u32(to_u32_count(params.texture_dim(), path.string()));
  f.write_u32(to_u32_count(params.embedding_dim(), path.string()));
  for (const AffineLayer* layer : layer_order(params)) {
    f.write_u32(to_u32_count(layer->out_dim, path.string()));
    f.write_u32(to_u32_count(layer->in_dim, path.string()));
    std::vector<float> weights(layer->weights.begin(), layer->weights.end());
    std::vector<float> bias(layer->bias.begin(), layer->bias.end());
    f.write_array(weights);
    f.write_array(bias);
  }
  f.commit();
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path, uint64_t cap_bytes) {
  FileReader r(path, cap_bytes);
  r.expect_magic("LVEM");
  r.expect_version();
  const uint32_t n = r.read_u32("n");
  const uint32_t e = r.read_u32("e");
  if (e == 0) {
    throw FormatError(r.path() + ": e must be positive");
  }
  EmbeddingMatrix m;
  m.n = n;
  m.e = static_cast<int>(e);
  r.read_array(m.values, checked_mul(n, e, r.path()), "embeddings");
  r.finish();
  return m;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  check_buffer(m.values.size(),
               checked_mul(static_cast<uint64_t>(m.n), static_cast<uint64_t>(m.e), path.string()),
               path.string());
  AtomicFile f(path);
  f.write_magic("LVEM");
  f.write_u32(FORMAT_VERSION);
  f.write_u32(to_u32_count(m.n, path.string()));
  f.write_u32(to_u32_count(m.e, path.string()));
  f.write_array(m.values);
  f.commit();
}

CameraRig load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CalibrationError(path.string() + ": cannot open for reading");
  }
  CameraRig rig;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto& cameras = j.at("cameras");
    if (!cameras.is_array()) {
      throw CalibrationError(path.string() + ": \"cameras\" must be an array");
    }
    for (const auto& jc : cameras) {
      Camera cam;
      cam.id = jc.at("id").get<int>();
      cam.intrinsics.width = jc.at("width").get<int>();
      cam.intrinsics.height = jc.at("height").get<int>();
      cam.intrinsics.fx = jc.at("fx").get<double>();
      cam.intrinsics.fy = jc.at("fy").get<double>();
      cam.intrinsics.cx = jc.at("cx").get<double>();
      cam.intrinsics.cy = jc.at("cy").get<double>();
      const auto R = jc.at("R").get<std::vector<double>>();
      const auto t = jc.at("t").get<std::vector<double>>();
      if (R.size() != 9) {
        throw CalibrationError(path.string() + ": camera " + std::to_string(cam.id) +
                               ": R must have 9 row-major entries, got " +
                               std::to_string(R.size()));
      }
      if (t.size() != 3) {
        throw CalibrationError(path.string() + ": camera " + std::to_string(cam.id) +
                               ": t must have 3 entries, got " + std::to_string(t.size()));
      }
      for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
          cam.extrinsics.rotation(row, col) = R[row * 3 + col];
        }
        cam.extrinsics.translation(row) = t[row];
      }
      rig.cameras.push_back(std::move(cam));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CalibrationError(path.string() + ": " + e.what());
  }
  try {
    validate_rig(rig, 1e-6);
  } catch (const CalibrationError& e) {
    throw CalibrationError(path.string() + ": " + e.what());
  }
  return rig;
}

void save_calibration(const std::filesystem::path& path, const CameraRig& rig) {
  validate_rig(rig, 1e-6);
  nlohmann::json cameras = nlohmann::json::array();
  for (const Camera& cam : rig.cameras) {
    std::vector<double> R(9);
    std::vector<double> t(3);
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        R[row * 3 + col] = cam.extrinsics.rotation(row, col);
      }
      t[row] = cam.extrinsics.translation(row);
    }
    cameras.push_back({{"id", cam.id},
                       {"width", cam.intrinsics.width},
                       {"height", cam.intrinsics.height},
                       {"fx", cam.intrinsics.fx},
                       {"fy", cam.intrinsics.fy},
                       {"cx", cam.intrinsics.cx},
                       {"cy", cam.intrinsics.cy},
                       {"R", R},
                       {"t", t}});
  }
  const std::string text = nlohmann::json{{"cameras", cameras}}.dump(2) + "\n";
  AtomicFile f(path);
  f.write_bytes(text.data(), text.size());
  f.commit();
}

const char* to_string(FileKind kind) {
  switch (kind) {
    case FileKind::DepthMap:
      return "depth map";
    case FileKind::FeatureMap:
      return "feature map";
    case FileKind::PaintedCloud:
      return "painted cloud";
    case FileKind::FusionWeights:
      return "fusion weights";
    case FileKind::Embeddings:
      return "embeddings";
  }
  return "unknown";
}

FileKind validate_file(const std::filesystem::path& path, uint64_t cap_bytes) {
  char magic[4] = {};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw FormatError(path.string() + ": cannot open for reading");
    }
    in.read(magic, 4);
    if (!in) {
      throw FormatError(path.string() + ": shorter than a 4-byte magic");
    }
  }
  if (std::memcmp(magic, "LVDM", 4) == 0) {
    read_depth_map(path, cap_bytes);
    return FileKind::DepthMap;
  }
  if (std::memcmp(magic, "LVFM", 4) == 0) {
    read_feature_map(path, cap_bytes);
    return FileKind::FeatureMap;
  }
  if (std::memcmp(magic, "LVPC", 4) == 0) {
    read_painted_cloud(path, cap_bytes);
    return FileKind::PaintedCloud;
  }
  if (std::memcmp(magic, "LVFW", 4) == 0) {
    read_fusion_params(path, cap_bytes);
    return FileKind::FusionWeights;
  }
  if (std::memcmp(magic, "LVEM", 4) == 0) {
    read_embeddings(path, cap_bytes);
    return FileKind::Embeddings;
  }
  throw FormatError(path.string() + ": unknown magic \"" + printable_magic(magic) + "\"");
}

}  // namespace lvic
