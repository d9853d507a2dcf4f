// Command-line front end for the point-painting pipeline: synthesize
// fixtures, paint clouds, run the miscalibration experiment, embed painted
// points, validate artifacts, and benchmark. Machine-readable JSON goes to
// stdout (one object per run); everything human-readable goes to stderr.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "lvic/errors.hpp"
#include "lvic/fusion.hpp"
#include "lvic/io.hpp"
#include "lvic/painter.hpp"
#include "lvic/parallel.hpp"
#include "lvic/rng.hpp"
#include "lvic/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_painted(const lvic::PaintedCloud& cloud) {
  uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a64(cloud.values.data(), cloud.values.size() * sizeof(float), h);
  h = fnv1a64(cloud.camera_ids.data(), cloud.camera_ids.size() * sizeof(int32_t), h);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct FixtureFlags {
  std::string cloud;
  std::string calib;
  std::string depth_dir;
  std::string feat_dir;
  int channels = 5;
  int dim = 16;
};

void add_fixture_flags(CLI::App* cmd, FixtureFlags& f) {
  cmd->add_option("--cloud", f.cloud, "headerless f32 point cloud file")->required();
  cmd->add_option("--channels", f.channels, "channels per point in --cloud (>= 3)");
  cmd->add_option("--calib", f.calib, "calibration JSON")->required();
  cmd->add_option("--depth-dir", f.depth_dir, "directory of cam<id>.lvdm depth maps")->required();
  cmd->add_option("--feat-dir", f.feat_dir, "directory of cam<id>.lvfm feature maps")->required();
  cmd->add_option("--dim", f.dim, "texture feature dimension d");
}

struct Fixture {
  lvic::PointCloud cloud;
  lvic::CameraRig rig;
  std::vector<lvic::DepthMap> depths;
  std::vector<lvic::FeatureMap> feats;
};

// Loads everything a paint run needs, failing fast with messages that name
// the offending camera or file before any output is produced.
Fixture load_fixture(const FixtureFlags& f) {
  Fixture fx;
  fx.cloud = lvic::read_cloud(f.cloud, f.channels);
  fx.rig = lvic::load_calibration(f.calib);
  for (const lvic::Camera& cam : fx.rig.cameras) {
    const std::string name = "cam" + std::to_string(cam.id);
    const fs::path depth_path = fs::path(f.depth_dir) / (name + ".lvdm");
    if (!fs::exists(depth_path)) {
      throw lvic::ConfigError("camera " + std::to_string(cam.id) + ": missing depth map " +
                              depth_path.string());
    }
    fx.depths.push_back(lvic::read_depth_map(depth_path));
    const fs::path feat_path = fs::path(f.feat_dir) / (name + ".lvfm");
    if (!fs::exists(feat_path)) {
      throw lvic::ConfigError("camera " + std::to_string(cam.id) + ": missing feature map " +
                              feat_path.string());
    }
    fx.feats.push_back(lvic::read_feature_map(feat_path));
    if (fx.feats.back().d != f.dim) {
      throw lvic::ConfigError(feat_path.string() + ": feature dimension " +
                              std::to_string(fx.feats.back().d) + " does not match --dim " +
                              std::to_string(f.dim));
    }
  }
  return fx;
}

std::vector<lvic::NoiseLevel> parse_noise(const std::string& spec) {
  std::vector<lvic::NoiseLevel> levels;
  size_t pos = 0;
  while (pos <= spec.size()) {
    const size_t comma = std::min(spec.find(',', pos), spec.size());
    const std::string token = spec.substr(pos, comma - pos);
    try {
      size_t used = 0;
      const double deg = std::stod(token, &used);
      if (used != token.size()) {
        throw std::invalid_argument(token);
      }
      levels.push_back({deg, 0.0});
    } catch (const std::exception&) {
      throw lvic::ConfigError("--noise: cannot parse \"" + token + "\" as degrees");
    }
    pos = comma + 1;
  }
  return levels;
}

void emit(const json& j) {
  std::printf("%s\n", j.dump().c_str());
}

int cmd_paint(const FixtureFlags& flags, const std::string& out, int threads) {
  const Fixture fx = load_fixture(flags);
  const lvic::PaintLayout layout{flags.dim};
  const lvic::PaintedCloud painted =
      lvic::paint_cloud(fx.cloud, fx.rig, fx.depths, fx.feats, layout, threads);
  lvic::write_painted_cloud(out, painted);

  std::vector<int64_t> per_camera(fx.rig.cameras.size(), 0);
  int64_t painted_count = 0;
  for (int32_t id : painted.camera_ids) {
    if (id >= 0) {
      ++painted_count;
      ++per_camera[static_cast<size_t>(id)];
    }
  }
  std::fprintf(stderr, "painted %lld of %lld points into %s\n",
               static_cast<long long>(painted_count), static_cast<long long>(painted.n),
               out.c_str());
  emit(json{{"command", "paint"},
            {"n", painted.n},
            {"c", painted.c},
            {"d", painted.d},
            {"painted", painted_count},
            {"painted_frac", painted.n > 0 ? static_cast<double>(painted_count) / painted.n : 0.0},
            {"per_camera", per_camera},
            {"out", out}});
  return 0;
}

int cmd_synth(const lvic::SceneConfig& cfg, const std::string& out_dir) {
  const lvic::SynthScene scene = lvic::generate_scene(cfg);
  const fs::path root(out_dir);
  fs::create_directories(root / "depth");
  fs::create_directories(root / "feat");

  lvic::write_cloud(root / "cloud.f32", scene.cloud);
  lvic::save_calibration(root / "calib.json", scene.rig);
  for (const lvic::Camera& cam : scene.rig.cameras) {
    const std::string name = "cam" + std::to_string(cam.id);
    lvic::write_depth_map(root / "depth" / (name + ".lvdm"), scene.depth_maps[cam.id]);
    lvic::write_feature_map(root / "feat" / (name + ".lvfm"), scene.feature_maps[cam.id]);
  }
  const lvic::FusionParams weights = lvic::FusionParams::random_init(
      cfg.feature_dim, 16, lvic::Rng::derive_seed(cfg.seed, 0x77656967687473ULL));
  lvic::write_fusion_params(root / "weights.lvfw", weights);

  std::fprintf(stderr, "synthesized %lld points, %d cameras into %s\n",
               static_cast<long long>(scene.cloud.n), cfg.n_cameras, out_dir.c_str());
  emit(json{{"command", "synth"},
            {"n", scene.cloud.n},
            {"channels", scene.cloud.c},
            {"cameras", cfg.n_cameras},
            {"dim", cfg.feature_dim},
            {"seed", cfg.seed},
            {"out_dir", out_dir},
            {"cloud", (root / "cloud.f32").string()},
            {"calib", (root / "calib.json").string()},
            {"weights", (root / "weights.lvfw").string()}});
  return 0;
}

int cmd_experiment(const lvic::SceneConfig& cfg, const std::string& out_csv) {
  const lvic::ExperimentReport report = lvic::miscalibration_experiment(cfg);
  const std::string csv = report.to_csv();
  {
    const fs::path tmp = out_csv + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f || std::fwrite(csv.data(), 1, csv.size(), f) != csv.size() || std::fclose(f) != 0) {
      if (f) std::fclose(f);
      throw lvic::FormatError(out_csv + ": cannot write report");
    }
    fs::rename(tmp, out_csv);
  }
  json rows = json::array();
  for (const lvic::ExperimentRow& r : report.rows) {
    rows.push_back({{"noise_rot_deg", r.noise_rot_deg},
                    {"noise_trans_m", r.noise_trans_m},
                    {"mean_abs_dz", r.mean_abs_dz},
                    {"exceed_frac", r.exceed_frac},
                    {"painted_frac", r.painted_frac}});
  }
  std::fprintf(stderr, "experiment (%zu noise levels) written to %s\n", report.rows.size(),
               out_csv.c_str());
  emit(json{{"command", "experiment"}, {"seed", cfg.seed}, {"rows", rows}, {"csv", out_csv}});
  return 0;
}

int cmd_embed(const std::string& painted_path, const std::string& weights_path,
              const std::string& out, int threads) {
  const lvic::PaintedCloud painted = lvic::read_painted_cloud(painted_path);
  const lvic::FusionParams params = lvic::read_fusion_params(weights_path);
  if (params.texture_dim() != painted.d) {
    throw lvic::ConfigError(weights_path + ": texture dimension " +
                            std::to_string(params.texture_dim()) + " does not match painted d=" +
                            std::to_string(painted.d) + " in " + painted_path);
  }
  lvic::EmbeddingMatrix m;
  m.n = painted.n;
  m.e = params.embedding_dim();
  m.values = lvic::embed_cloud(params, painted, threads);
  lvic::write_embeddings(out, m);
  std::fprintf(stderr, "embedded %lld points at e=%d into %s\n", static_cast<long long>(m.n), m.e,
               out.c_str());
  emit(json{{"command", "embed"}, {"n", m.n}, {"e", m.e}, {"out", out}});
  return 0;
}

int cmd_validate(const std::vector<std::string>& files) {
  json results = json::array();
  for (const std::string& file : files) {
    std::string kind;
    if (fs::path(file).extension() == ".json") {
      const lvic::CameraRig rig = lvic::load_calibration(file);
      kind = "calibration (" + std::to_string(rig.cameras.size()) + " cameras)";
    } else {
      kind = lvic::to_string(lvic::validate_file(file));
    }
    std::fprintf(stderr, "%s: valid %s\n", file.c_str(), kind.c_str());
    results.push_back({{"path", file}, {"kind", kind}});
  }
  emit(json{{"command", "validate"}, {"files", results}});
  return 0;
}

int cmd_bench(const FixtureFlags& flags, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture fx = load_fixture(flags);
  const double load_s = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  const lvic::PaintLayout layout{flags.dim};
  const lvic::PaintedCloud painted =
      lvic::paint_cloud(fx.cloud, fx.rig, fx.depths, fx.feats, layout, threads);
  const double paint_s = seconds_since(t1);

  const auto t2 = std::chrono::steady_clock::now();
  const std::string hash = hash_painted(painted);
  const double hash_s = seconds_since(t2);

  const double pps = paint_s > 0.0 ? static_cast<double>(painted.n) / paint_s : 0.0;
  std::fprintf(stderr, "painted %lld points in %.3f s (%.0f points/s), hash %s\n",
               static_cast<long long>(painted.n), paint_s, pps, hash.c_str());
  emit(json{{"command", "bench"},
            {"n", painted.n},
            {"cameras", fx.rig.cameras.size()},
            {"threads", lvic::resolve_threads(threads)},
            {"load_seconds", load_s},
            {"paint_seconds", paint_s},
            {"hash_seconds", hash_s},
            {"points_per_second", pps},
            {"hash", hash}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth-aware LiDAR point painting pipeline"};
  app.require_subcommand(1);

  FixtureFlags paint_flags;
  std::string paint_out;
  int paint_threads = 0;
  CLI::App* paint = app.add_subcommand("paint", "project and paint a point cloud");
  add_fixture_flags(paint, paint_flags);
  paint->add_option("--out", paint_out, "output painted cloud (.lvpc)")->required();
  paint->add_option("--threads", paint_threads, "worker threads (0 = all cores)")
      ->envname("LVIC_THREADS");

  lvic::SceneConfig synth_cfg;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic fixture directory");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_cfg.seed, "scene seed");
  synth->add_option("--points", synth_cfg.n_points, "number of points");
  synth->add_option("--cameras", synth_cfg.n_cameras, "number of ring cameras");
  synth->add_option("--channels", synth_cfg.channels, "cloud channels (>= 3)");
  synth->add_option("--dim", synth_cfg.feature_dim, "texture feature dimension");
  synth->add_option("--stride", synth_cfg.feature_stride, "feature grid stride");
  synth->add_option("--threads", synth_cfg.threads, "worker threads (0 = all cores)")
      ->envname("LVIC_THREADS");

  lvic::SceneConfig exp_cfg;
  std::string exp_out;
  std::string exp_noise;
  CLI::App* experiment =
      app.add_subcommand("experiment", "measure the depth cue under calibration noise");
  experiment->add_option("--out", exp_out, "output CSV path")->required();
  experiment->add_option("--seed", exp_cfg.seed, "scene seed");
  experiment->add_option("--points", exp_cfg.n_points, "number of points");
  experiment->add_option("--cameras", exp_cfg.n_cameras, "number of ring cameras");
  experiment->add_option("--channels", exp_cfg.channels, "cloud channels (>= 3)");
  experiment->add_option("--dim", exp_cfg.feature_dim, "texture feature dimension");
  experiment->add_option("--stride", exp_cfg.feature_stride, "feature grid stride");
  experiment->add_option("--noise", exp_noise, "rotation noise schedule, degrees (e.g. 0,0.5,1,2)");
  experiment->add_option("--threshold", exp_cfg.exceed_threshold_m,
                         "|depth discrepancy| exceedance threshold, meters");
  experiment->add_option("--threads", exp_cfg.threads, "worker threads (0 = all cores)")
      ->envname("LVIC_THREADS");

  std::string embed_cloud_path, embed_weights, embed_out;
  int embed_threads = 0;
  CLI::App* embed = app.add_subcommand("embed", "embed a painted cloud through the fusion net");
  embed->add_option("--cloud", embed_cloud_path, "painted cloud (.lvpc)")->required();
  embed->add_option("--weights", embed_weights, "fusion weights (.lvfw)")->required();
  embed->add_option("--out", embed_out, "output embeddings (.lvem)")->required();
  embed->add_option("--threads", embed_threads, "worker threads (0 = all cores)")
      ->envname("LVIC_THREADS");

  std::vector<std::string> validate_files;
  CLI::App* validate = app.add_subcommand("validate", "validate artifact files");
  validate->add_option("files", validate_files, "files to validate")->required();

  FixtureFlags bench_flags;
  int bench_threads = 0;
  CLI::App* bench = app.add_subcommand("bench", "time a full paint run");
  add_fixture_flags(bench, bench_flags);
  bench->add_option("--threads", bench_threads, "worker threads (0 = all cores)")
      ->envname("LVIC_THREADS");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*paint) {
      return cmd_paint(paint_flags, paint_out, paint_threads);
    }
    if (*synth) {
      return cmd_synth(synth_cfg, synth_out);
    }
    if (*experiment) {
      if (!exp_noise.empty()) {
        exp_cfg.noise_schedule = parse_noise(exp_noise);
      }
      return cmd_experiment(exp_cfg, exp_out);
    }
    if (*embed) {
      return cmd_embed(embed_cloud_path, embed_weights, embed_out, embed_threads);
    }
    if (*validate) {
      return cmd_validate(validate_files);
    }
    if (*bench) {
      return cmd_bench(bench_flags, bench_threads);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lvic: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
