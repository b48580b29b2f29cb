#ifndef AUTOPHOTO_SCENE_HPP_
#define AUTOPHOTO_SCENE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autophoto/rng.hpp"

namespace autophoto::scene {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr int kNumRays = 16;
inline constexpr double kFov = kPi / 2.0;       // 90 degree field of view
inline constexpr double kRayCap = 8.0;          // meters
inline constexpr double kCellSize = 0.25;       // meters
inline constexpr double kWallPenaltyCoeff = 0.5;

// wrap to [-pi, pi)
double wrap_angle(double a);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct AestheticKernel {
  double cx = 0.0;
  double cy = 0.0;
  double preferred_heading = 0.0;  // radians, [-pi, pi)
  double spatial_sigma = 0.5;      // meters, > 0
  double angular_sigma = 0.5;      // radians, > 0
  double weight = 1.0;             // > 0
};

struct SalientObject {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.25;  // meters
};

struct ViewObservation {
  static constexpr int kDims = 2 * kNumRays + 3;  // 35

  std::array<double, kNumRays> depth_rays{};        // [0,1], distance / cap
  std::array<double, kNumRays> hotspot_intensity{}; // >= 0
  double salient_x = -1.0;                          // [0,1] or -1 when absent
  bool salient_present = false;
  double brightness = 1.0;                          // > 0, 1.0 = well exposed

  std::array<double, kDims> flatten() const {
    std::array<double, kDims> v{};
    for (int i = 0; i < kNumRays; ++i) v[i] = depth_rays[i];
    for (int i = 0; i < kNumRays; ++i) v[kNumRays + i] = hotspot_intensity[i];
    v[2 * kNumRays] = salient_x;
    v[2 * kNumRays + 1] = salient_present ? 1.0 : 0.0;
    v[2 * kNumRays + 2] = brightness;
    return v;
  }
};

struct GenParams {
  int width = 32;           // cells, >= 16
  int height = 32;          // cells, >= 16
  int rooms = 3;
  int hotspots = 3;         // >= 1
  int salient_objects = 2;  // >= 0
};

struct SceneSpec {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> occupancy;  // row-major y*width+x, 1 = occupied
  std::vector<AestheticKernel> hotspots;
  std::vector<SalientObject> salient_objects;
  int scene_id = 0;
  std::uint64_t rng_seed = 0;

  bool occupied(int cx, int cy) const {
    if (cx < 0 || cy < 0 || cx >= width || cy >= height) return true;
    return occupancy[static_cast<std::size_t>(cy) * width + cx] != 0;
  }
  bool navigable_point(double x, double y) const {
    return !occupied(static_cast<int>(std::floor(x / kCellSize)),
                     static_cast<int>(std::floor(y / kCellSize)));
  }
  std::vector<std::pair<int, int>> navigable_cells() const;

  std::string to_json() const;
  static SceneSpec from_json(const std::string& text);
  void save(const std::string& path) const;
  static SceneSpec load(const std::string& path);
};

SceneSpec generate_scene(std::uint64_t seed, const GenParams& params);

// First wall hit along `angle` from (x, y), in meters, capped at kRayCap.
double cast_ray(const SceneSpec& scene, double x, double y, double angle);

double true_aesthetic(const SceneSpec& scene, const Pose& pose);

ViewObservation render_view(const SceneSpec& scene, const Pose& pose,
                            double brightness = 1.0);

std::vector<std::pair<Pose, ViewObservation>> sample_views(
    const SceneSpec& scene, int n, std::uint64_t seed);

Pose sample_pose(const SceneSpec& scene, Rng& rng);

std::optional<double> salient_projection(const SceneSpec& scene, const Pose& pose);

}  // namespace autophoto::scene

#endif  // AUTOPHOTO_SCENE_HPP_
