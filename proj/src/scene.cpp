#include "autophoto/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace autophoto::scene {

using nlohmann::json;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

std::vector<std::pair<int, int>> SceneSpec::navigable_cells() const {
  std::vector<std::pair<int, int>> cells;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (!occupied(x, y)) cells.emplace_back(x, y);
  return cells;
}

namespace {

void carve_rect(SceneSpec& s, int x0, int y0, int w, int h) {
  const int x1 = std::min(x0 + w, s.width - 1);
  const int y1 = std::min(y0 + h, s.height - 1);
  for (int y = std::max(y0, 1); y < y1; ++y)
    for (int x = std::max(x0, 1); x < x1; ++x)
      s.occupancy[static_cast<std::size_t>(y) * s.width + x] = 0;
}

void carve_corridor(SceneSpec& s, int x0, int y0, int x1, int y1) {
  int x = x0, y = y0;
  while (x != x1) {
    x += (x1 > x) ? 1 : -1;
    if (x > 0 && x < s.width - 1 && y > 0 && y < s.height - 1)
      s.occupancy[static_cast<std::size_t>(y) * s.width + x] = 0;
  }
  while (y != y1) {
    y += (y1 > y) ? 1 : -1;
    if (x > 0 && x < s.width - 1 && y > 0 && y < s.height - 1)
      s.occupancy[static_cast<std::size_t>(y) * s.width + x] = 0;
  }
}

std::pair<double, double> cell_point(int cx, int cy, Rng& rng) {
  const double ox = rng.uniform(0.15, 0.85);
  const double oy = rng.uniform(0.15, 0.85);
  return {(cx + ox) * kCellSize, (cy + oy) * kCellSize};
}

void compute_depth_rays(const SceneSpec& scene, const Pose& pose,
                        std::array<double, kNumRays>& out) {
  const double spacing = kFov / (kNumRays - 1);
  for (int i = 0; i < kNumRays; ++i) {
    const double rel = kFov / 2.0 - spacing * i;  // ray 0 = left edge
    const double d = cast_ray(scene, pose.x, pose.y, pose.theta + rel);
    out[i] = d / kRayCap;
  }
}

}  // namespace

SceneSpec generate_scene(std::uint64_t seed, const GenParams& params) {
  if (params.width < 16 || params.height < 16)
    throw std::invalid_argument("generate_scene: grid dims must be >= 16");
  if (params.hotspots < 1)
    throw std::invalid_argument("generate_scene: need at least one hotspot");
  if (params.rooms < 1)
    throw std::invalid_argument("generate_scene: need at least one room");

  SceneSpec s;
  s.width = params.width;
  s.height = params.height;
  s.rng_seed = seed;
  s.scene_id = static_cast<int>(seed & 0x7fffffff);
  s.occupancy.assign(static_cast<std::size_t>(s.width) * s.height, 1);

  Rng rng(splitmix64(seed ^ 0xa0705c43ULL));

  std::vector<std::pair<int, int>> centers;
  for (int r = 0; r < params.rooms; ++r) {
    const int maxw = std::min(11, s.width - 4);
    const int maxh = std::min(11, s.height - 4);
    const int w = 5 + rng.index(maxw - 4);
    const int h = 5 + rng.index(maxh - 4);
    const int x0 = 1 + rng.index(s.width - 1 - w);
    const int y0 = 1 + rng.index(s.height - 1 - h);
    carve_rect(s, x0, y0, w, h);
    centers.emplace_back(x0 + w / 2, y0 + h / 2);
  }
  for (std::size_t i = 1; i < centers.size(); ++i)
    carve_corridor(s, centers[i - 1].first, centers[i - 1].second,
                   centers[i].first, centers[i].second);

  const auto cells = s.navigable_cells();
  if (cells.empty()) throw std::runtime_error("generate_scene: no navigable space");

  for (int k = 0; k < params.hotspots; ++k) {
    const auto [cx, cy] = cells[rng.index(static_cast<int>(cells.size()))];
    const auto [px, py] = cell_point(cx, cy, rng);
    AestheticKernel kern;
    kern.cx = px;
    kern.cy = py;
    kern.preferred_heading = wrap_angle(rng.uniform(-kPi, kPi));
    kern.spatial_sigma = rng.uniform(0.4, 0.9);
    kern.angular_sigma = rng.uniform(0.4, 0.8);
    kern.weight = rng.uniform(0.6, 1.4);
    s.hotspots.push_back(kern);
  }
  for (int k = 0; k < params.salient_objects; ++k) {
    const auto [cx, cy] = cells[rng.index(static_cast<int>(cells.size()))];
    const auto [px, py] = cell_point(cx, cy, rng);
    s.salient_objects.push_back({px, py, rng.uniform(0.2, 0.4)});
  }
  return s;
}

double cast_ray(const SceneSpec& scene, double x, double y, double angle) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  int cx = static_cast<int>(std::floor(x / kCellSize));
  int cy = static_cast<int>(std::floor(y / kCellSize));
  if (scene.occupied(cx, cy)) return 0.0;

  const double inf = std::numeric_limits<double>::infinity();
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  const double t_delta_x = dx != 0.0 ? std::abs(kCellSize / dx) : inf;
  const double t_delta_y = dy != 0.0 ? std::abs(kCellSize / dy) : inf;
  double t_max_x = inf, t_max_y = inf;
  if (dx != 0.0) {
    const double next = (dx > 0 ? (cx + 1) * kCellSize : cx * kCellSize);
    t_max_x = (next - x) / dx;
  }
  if (dy != 0.0) {
    const double next = (dy > 0 ? (cy + 1) * kCellSize : cy * kCellSize);
    t_max_y = (next - y) / dy;
  }

  double t = 0.0;
  while (t < kRayCap) {
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_delta_x;
      cx += step_x;
    } else {
      t = t_max_y;
      t_max_y += t_delta_y;
      cy += step_y;
    }
    if (scene.occupied(cx, cy)) return std::min(t, kRayCap);
  }
  return kRayCap;
}

double true_aesthetic(const SceneSpec& scene, const Pose& pose) {
  double score = 0.0;
  for (const auto& k : scene.hotspots) {
    const double ddx = pose.x - k.cx;
    const double ddy = pose.y - k.cy;
    const double d2 = ddx * ddx + ddy * ddy;
    const double dth = wrap_angle(pose.theta - k.preferred_heading);
    score += k.weight * std::exp(-d2 / (2.0 * k.spatial_sigma * k.spatial_sigma)) *
             std::exp(-dth * dth / (2.0 * k.angular_sigma * k.angular_sigma));
  }
  std::array<double, kNumRays> depth;
  compute_depth_rays(scene, pose, depth);
  double mean = 0.0;
  for (double d : depth) mean += d;
  mean /= kNumRays;
  return score - kWallPenaltyCoeff * (1.0 - mean);
}

ViewObservation render_view(const SceneSpec& scene, const Pose& pose,
                            double brightness) {
  if (!(brightness > 0.0))
    throw std::invalid_argument("render_view: brightness must be positive");
  ViewObservation obs;
  compute_depth_rays(scene, pose, obs.depth_rays);

  const double spacing = kFov / (kNumRays - 1);
  for (const auto& k : scene.hotspots) {
    const double ddx = k.cx - pose.x;
    const double ddy = k.cy - pose.y;
    const double d2 = ddx * ddx + ddy * ddy;
    const double rel = wrap_angle(std::atan2(ddy, ddx) - pose.theta);
    // kernels outside the viewport attribute to the nearest edge bin so the
    // summed intensity always accounts for the whole field
    int bin = static_cast<int>(std::lround((kFov / 2.0 - rel) / spacing));
    bin = std::clamp(bin, 0, kNumRays - 1);
    const double dth = wrap_angle(pose.theta - k.preferred_heading);
    obs.hotspot_intensity[bin] +=
        k.weight * std::exp(-d2 / (2.0 * k.spatial_sigma * k.spatial_sigma)) *
        std::exp(-dth * dth / (2.0 * k.angular_sigma * k.angular_sigma));
  }

  if (auto sx = salient_projection(scene, pose)) {
    obs.salient_present = true;
    obs.salient_x = *sx;
  }
  obs.brightness = brightness;
  return obs;
}

Pose sample_pose(const SceneSpec& scene, Rng& rng) {
  const auto cells = scene.navigable_cells();
  const auto [cx, cy] = cells[rng.index(static_cast<int>(cells.size()))];
  Pose p;
  p.x = (cx + rng.uniform()) * kCellSize;
  p.y = (cy + rng.uniform()) * kCellSize;
  p.theta = wrap_angle(rng.uniform(-kPi, kPi));
  return p;
}

std::vector<std::pair<Pose, ViewObservation>> sample_views(
    const SceneSpec& scene, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_views: n must be >= 1");
  Rng rng(splitmix64(seed ^ 0x5a11e57ULL));
  const auto cells = scene.navigable_cells();
  std::vector<std::pair<Pose, ViewObservation>> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto [cx, cy] = cells[rng.index(static_cast<int>(cells.size()))];
    Pose p;
    p.x = (cx + rng.uniform()) * kCellSize;
    p.y = (cy + rng.uniform()) * kCellSize;
    p.theta = wrap_angle(rng.uniform(-kPi, kPi));
    out.emplace_back(p, render_view(scene, p));
  }
  return out;
}

std::optional<double> salient_projection(const SceneSpec& scene, const Pose& pose) {
  double best_dist = std::numeric_limits<double>::infinity();
  double best_x = -1.0;
  for (const auto& obj : scene.salient_objects) {
    const double ddx = obj.x - pose.x;
    const double ddy = obj.y - pose.y;
    const double dist = std::sqrt(ddx * ddx + ddy * ddy);
    if (dist > kRayCap) continue;
    const double rel = wrap_angle(std::atan2(ddy, ddx) - pose.theta);
    if (std::abs(rel) > kFov / 2.0 + 1e-12) continue;
    // occlusion: the wall along the bearing must not be in front of the object
    const double wall = cast_ray(scene, pose.x, pose.y, pose.theta + rel);
    if (wall < dist - obj.radius) continue;
    if (dist < best_dist) {
      best_dist = dist;
      best_x = (kFov / 2.0 - rel) / kFov;  // left edge -> 0, right edge -> 1
    }
  }
  if (best_x < 0.0) return std::nullopt;
  return std::clamp(best_x, 0.0, 1.0);
}

namespace {

std::string pack_occupancy(const std::vector<std::uint8_t>& occ) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve((occ.size() + 3) / 4);
  for (std::size_t i = 0; i < occ.size(); i += 4) {
    int nib = 0;
    for (std::size_t j = 0; j < 4 && i + j < occ.size(); ++j)
      if (occ[i + j]) nib |= 1 << j;
    out.push_back(hex[nib]);
  }
  return out;
}

std::vector<std::uint8_t> unpack_occupancy(const std::string& text, std::size_t n) {
  std::vector<std::uint8_t> occ(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text.at(i / 4);
    const int nib = (c >= 'a') ? c - 'a' + 10 : c - '0';
    occ[i] = (nib >> (i % 4)) & 1;
  }
  return occ;
}

}  // namespace

std::string SceneSpec::to_json() const {
  json j;
  j["format"] = "autophoto-scene/1";
  j["scene_id"] = scene_id;
  j["seed"] = rng_seed;
  j["width"] = width;
  j["height"] = height;
  j["cell_size"] = kCellSize;
  j["fov_rays"] = kNumRays;
  j["ray_cap"] = kRayCap;
  j["occupancy"] = pack_occupancy(occupancy);
  json ks = json::array();
  for (const auto& k : hotspots)
    ks.push_back({{"cx", k.cx},
                  {"cy", k.cy},
                  {"preferred_heading", k.preferred_heading},
                  {"spatial_sigma", k.spatial_sigma},
                  {"angular_sigma", k.angular_sigma},
                  {"weight", k.weight}});
  j["hotspots"] = ks;
  json os = json::array();
  for (const auto& o : salient_objects)
    os.push_back({{"x", o.x}, {"y", o.y}, {"radius", o.radius}});
  j["salient_objects"] = os;
  return j.dump(2);
}

SceneSpec SceneSpec::from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format").get<std::string>() != "autophoto-scene/1")
    throw std::runtime_error("scene file: unknown format tag");
  SceneSpec s;
  s.scene_id = j.at("scene_id").get<int>();
  s.rng_seed = j.at("seed").get<std::uint64_t>();
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.occupancy = unpack_occupancy(j.at("occupancy").get<std::string>(),
                                 static_cast<std::size_t>(s.width) * s.height);
  for (const auto& k : j.at("hotspots")) {
    AestheticKernel kern;
    kern.cx = k.at("cx").get<double>();
    kern.cy = k.at("cy").get<double>();
    kern.preferred_heading = k.at("preferred_heading").get<double>();
    kern.spatial_sigma = k.at("spatial_sigma").get<double>();
    kern.angular_sigma = k.at("angular_sigma").get<double>();
    kern.weight = k.at("weight").get<double>();
    s.hotspots.push_back(kern);
  }
  for (const auto& o : j.at("salient_objects"))
    s.salient_objects.push_back({o.at("x").get<double>(), o.at("y").get<double>(),
                                 o.at("radius").get<double>()});
  return s;
}

void SceneSpec::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open scene file for writing: " + path);
  f << to_json() << "\n";
}

SceneSpec SceneSpec::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open scene file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace autophoto::scene
