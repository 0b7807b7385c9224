#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bevswarm/config.hpp"
#include "bevswarm/oracle.hpp"
#include "bevswarm/platform.hpp"
#include "bevswarm/report.hpp"
#include "bevswarm/rng.hpp"

namespace fs = std::filesystem;
using namespace bevswarm;

namespace {

int cmd_simulate(const std::string& config_path, const std::string& strategy_flag, int window,
                 std::int64_t seed, int frames, const std::string& out_flag,
                 const std::string& range_flag, int threads) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (config_path.empty()) {
    cfg.scene.ego_hint_x = -cfg.ring_radius;
    cfg.scene.ego_hint_z = 0.0;
  }
  if (!strategy_flag.empty()) {
    const auto s = strategy_from_string(strategy_flag);
    if (!s) throw std::invalid_argument("unknown strategy '" + strategy_flag + "'");
    cfg.strategy = *s;
  }
  if (window > 0) cfg.codec_window = window;
  if (seed >= 0) cfg.scene_seed = static_cast<std::uint64_t>(seed);
  if (frames > 0) cfg.scene.frame_count = frames;
  if (!out_flag.empty()) cfg.out_dir = out_flag;
  if (!range_flag.empty()) {
    cfg.range_short = range_flag == "short" || range_flag == "both";
    cfg.range_long = range_flag == "long" || range_flag == "both";
    if (!cfg.range_short && !cfg.range_long)
      throw std::invalid_argument("range must be short, long or both");
  }
  if (threads >= 0) cfg.threads = threads;
  cfg.validate();

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);

  const Scene scene = generate_scene(cfg.scene_seed, cfg.scene);
  save_scene(scene, out_dir / "scene.txt");

  const std::vector<Platform> platforms =
      default_constellation(cfg.intrinsics, cfg.ring_radius);
  for (const Platform& p : platforms)
    save_calibration(p.rig, out_dir / ("calibration_p" + std::to_string(p.id) + ".json"));

  const EpisodeResult episode =
      run_episode(scene, platforms, cfg.strategy, cfg.episode_config());
  const EvalReport report = evaluate_episode(episode, cfg.range_short, cfg.range_long);

  std::ofstream(out_dir / "report.csv") << report.to_csv();
  std::ofstream(out_dir / "report.txt") << report.to_text();
  const std::uint64_t raw_payload = static_cast<std::uint64_t>(cfg.grid.size_x()) *
                                    cfg.grid.size_y() * kFeatureChannels * 4;
  std::ofstream(out_dir / "ledger.csv") << ledger_to_csv(episode.ledger, raw_payload);

  std::cout << report.to_text();
  std::cout << "ledger: " << episode.ledger.entries.size() << " links, "
            << episode.ledger.total_payload() << " payload bytes ("
            << episode.ledger.total_bytes() << " with headers)\n";
  std::cout << "outputs written to " << out_dir.string() << "\n";
  return 0;
}

int cmd_codec_bench() {
  std::printf("window  ratio  formula\n");
  for (int m : {1, 2, 4, 8, 16, 32}) {
    std::printf("%-7d %.3f  (1+1/%d)/2 = %.6f\n", m, transmission_ratio(m), m * m,
                transmission_ratio(m));
  }
  return 0;
}

int cmd_geometry_check(int trials, std::uint64_t seed) {
  if (trials == 0) {
    std::printf("geometry-check: 0 trials requested; vacuous pass\n");
    return 0;
  }
  SplitMix64 rng(seed);
  double worst_rel = 0.0;
  double worst_u = 0.0, worst_v = 0.0, worst_h = 0.0;
  int checked = 0, clamped_ok = 0, skipped = 0;
  std::int64_t attempts = 0;
  const std::int64_t max_attempts = 40LL * trials;
  while (checked < trials && attempts < max_attempts) {
    ++attempts;
    CameraIntrinsics intr;
    intr.width = 192;
    intr.height = 80;
    intr.fx = rng.next_double(80.0, 400.0);
    intr.fy = rng.next_double(80.0, 400.0);
    intr.cx = rng.next_double(0.3, 0.7) * intr.width;
    intr.cy = rng.next_double(0.3, 0.7) * intr.height;
    CameraPose pose;
    // Random proper rotation from a uniform quaternion.
    Eigen::Quaterniond q(rng.next_double(-1, 1), rng.next_double(-1, 1), rng.next_double(-1, 1),
                         rng.next_double(-1, 1));
    if (q.norm() < 1e-3) continue;
    pose.R = q.normalized().toRotationMatrix();
    pose.T = Eigen::Vector3d(rng.next_double(-20, 20), rng.next_double(-20, 20),
                             rng.next_double(-20, 20));
    pose.H = rng.next_double(5.0, 100.0);
    const double u = rng.next_double(0.0, intr.width);
    const double v = rng.next_double(0.0, intr.height);

    const ProjectionCache cache = build_projection_cache(intr, pose);
    if (cache.N.y() + pose.H <= 0.5) continue;  // unphysical: camera at/below ground
    const DepthBound bound = depth_upper_bound(u, v, cache, pose.H);
    const auto reference = oracle::ray_ground_depth(u, v, intr, pose);
    const double slope = oracle::ray_vertical_slope(u, v, intr, pose);

    if (reference && *reference < 1e6 && std::abs(slope) > 1e-6) {
      if (bound.clamped) {
        std::printf("geometry-check: FAIL clamped a below-horizon ray (u=%.17g v=%.17g)\n", u, v);
        return 1;
      }
      const double rel = std::abs(bound.depth - *reference) / *reference;
      if (rel > worst_rel) {
        worst_rel = rel;
        worst_u = u;
        worst_v = v;
        worst_h = pose.H;
      }
      ++checked;
    } else if (!reference) {
      if (!bound.clamped) {
        std::printf("geometry-check: FAIL missing clamp on an above-horizon ray\n");
        return 1;
      }
      ++clamped_ok;
    } else {
      ++skipped;  // grazing rays near the horizon threshold
    }
  }
  if (checked < trials) {
    std::printf("geometry-check: FAIL could only gather %d/%d below-horizon trials\n", checked,
                trials);
    return 1;
  }
  std::printf("geometry-check: %d below-horizon trials, %d clamped, %d grazing skipped\n",
              checked, clamped_ok, skipped);
  std::printf("worst relative error %.3e at u=%.17g v=%.17g H=%.17g\n", worst_rel, worst_u,
              worst_v, worst_h);
  if (worst_rel < 1e-9) {
    std::printf("geometry-check: PASS\n");
    return 0;
  }
  std::printf("geometry-check: FAIL (tolerance 1e-9)\n");
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bevswarm: multi-platform BEV perception sandbox"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a collaborative perception episode");
  std::string config_path, strategy_flag, out_flag, range_flag;
  int window = 0, frames = 0, threads = -1;
  std::int64_t seed = -1;
  sim->add_option("--config", config_path, "config file (key = value)");
  sim->add_option("--strategy", strategy_flag, "none|early|late|full|hlfdc");
  sim->add_option("--window", window, "codec window size M");
  sim->add_option("--seed", seed, "scene seed");
  sim->add_option("--frames", frames, "frame count");
  sim->add_option("--out", out_flag, "output directory");
  sim->add_option("--range", range_flag, "short|long|both");
  sim->add_option("--threads", threads, "worker cap (also BEVSWARM_THREADS)");

  auto* bench = app.add_subcommand("codec-bench", "print the transmission ratio table");

  auto* geo = app.add_subcommand("geometry-check", "depth prior vs ray-marching reference");
  int trials = 10000;
  std::uint64_t geo_seed = 17;
  geo->add_option("--trials", trials, "number of below-horizon trials");
  geo->add_option("--seed", geo_seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(config_path, strategy_flag, window, seed, frames, out_flag, range_flag,
                          threads);
    if (bench->parsed()) return cmd_codec_bench();
    if (geo->parsed()) return cmd_geometry_check(trials, geo_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
