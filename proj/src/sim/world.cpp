#include "sylva/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sylva/common/random.hpp"

namespace sylva::sim {

std::string to_string(PatchType type) { return type == PatchType::Bush ? "bush" : "damp"; }

PatchType patch_type_from_string(const std::string& s) {
  if (s == "bush") return PatchType::Bush;
  if (s == "damp") return PatchType::Damp;
  throw ConfigError("unknown patch type '" + s + "'");
}

void WorldSpec::validate() const {
  if (!(extent.width() > 0.0) || !(extent.height() > 0.0)) {
    throw ConfigError("world extent must be positive");
  }
  if (terrain.resolution <= 0.0 || terrain.correlation_length <= 0.0 || terrain.margin < 0.0 ||
      terrain.amplitude < 0.0) {
    throw ConfigError("terrain parameters out of range");
  }
  if (trees.count < 0) {
    throw ConfigError("tree count must be non-negative");
  }
  if (trees.count > 0) {
    if (!(trees.min_spacing > trees.base_diameter.max)) {
      throw ConfigError("min tree spacing must exceed the largest base diameter");
    }
    if (trees.base_diameter.min <= 0.0 || trees.base_diameter.max < trees.base_diameter.min) {
      throw ConfigError("invalid base diameter range");
    }
    if (trees.height.min <= 1.3 || trees.height.max < trees.height.min) {
      throw ConfigError("invalid tree height range");
    }
    if (trees.taper <= 0.0 || trees.base_diameter.min - trees.taper * trees.height.max <= 0.0) {
      throw ConfigError("taper must be positive and leave a positive top diameter");
    }
    if (trees.knot_spacing <= 0.0) {
      throw ConfigError("knot spacing must be positive");
    }
  }
  for (const auto& g : patches) {
    if (g.count < 0 || g.radius.min <= 0.0 || g.radius.max < g.radius.min) {
      throw ConfigError("invalid patch group");
    }
    if (2.0 * g.radius.max > std::min(extent.width(), extent.height())) {
      throw ConfigError("patch radius does not fit inside the extent");
    }
  }
}

namespace {

Json range_json(const Range& r) { return Json::array({r.min, r.max}); }
Range range_from(const Json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  return {a.at(0).get<double>(), a.at(1).get<double>()};
}

}  // namespace

void to_json(Json& j, const WorldSpec& s) {
  j = Json{{"extent", s.extent},
           {"seed", s.seed},
           {"terrain",
            {{"amplitude", s.terrain.amplitude},
             {"correlation_length", s.terrain.correlation_length},
             {"mean_slope", s.terrain.mean_slope},
             {"slope_heading", s.terrain.slope_heading},
             {"resolution", s.terrain.resolution},
             {"margin", s.terrain.margin}}},
           {"trees",
            {{"count", s.trees.count},
             {"min_spacing", s.trees.min_spacing},
             {"base_diameter", range_json(s.trees.base_diameter)},
             {"taper", s.trees.taper},
             {"height", range_json(s.trees.height)},
             {"lean_max", s.trees.lean_max},
             {"knot_spacing", s.trees.knot_spacing},
             {"crown_base_fraction", range_json(s.trees.crown_base_fraction)},
             {"crown_radius", range_json(s.trees.crown_radius)}}}};
  Json patches = Json::array();
  for (const auto& g : s.patches) {
    patches.push_back({{"count", g.count}, {"radius", range_json(g.radius)}, {"type", to_string(g.type)}});
  }
  j["patches"] = patches;
}

void from_json(const Json& j, WorldSpec& s) {
  s = WorldSpec{};
  s.extent = j.at("extent").get<Rect>();
  s.seed = value_or<std::uint64_t>(j, "seed", 1);
  if (j.contains("terrain")) {
    const auto& t = j.at("terrain");
    s.terrain.amplitude = value_or(t, "amplitude", s.terrain.amplitude);
    s.terrain.correlation_length = value_or(t, "correlation_length", s.terrain.correlation_length);
    s.terrain.mean_slope = value_or(t, "mean_slope", s.terrain.mean_slope);
    s.terrain.slope_heading = value_or(t, "slope_heading", s.terrain.slope_heading);
    s.terrain.resolution = value_or(t, "resolution", s.terrain.resolution);
    s.terrain.margin = value_or(t, "margin", s.terrain.margin);
  }
  if (j.contains("trees")) {
    const auto& t = j.at("trees");
    s.trees.count = value_or(t, "count", 0);
    s.trees.min_spacing = value_or(t, "min_spacing", s.trees.min_spacing);
    s.trees.base_diameter = range_from(t, "base_diameter", s.trees.base_diameter);
    s.trees.taper = value_or(t, "taper", s.trees.taper);
    s.trees.height = range_from(t, "height", s.trees.height);
    s.trees.lean_max = value_or(t, "lean_max", s.trees.lean_max);
    s.trees.knot_spacing = value_or(t, "knot_spacing", s.trees.knot_spacing);
    s.trees.crown_base_fraction = range_from(t, "crown_base_fraction", s.trees.crown_base_fraction);
    s.trees.crown_radius = range_from(t, "crown_radius", s.trees.crown_radius);
  }
  if (j.contains("patches")) {
    for (const auto& g : j.at("patches")) {
      PatchGroupSpec group;
      group.count = value_or(g, "count", 0);
      group.radius = range_from(g, "radius", group.radius);
      group.type = patch_type_from_string(value_or<std::string>(g, "type", "bush"));
      s.patches.push_back(group);
    }
  }
}

double GroundTruthTree::diameter_at(double h) const {
  if (knots.empty()) return 0.0;
  if (h <= knots.front().height) return knots.front().diameter;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (h <= knots[i].height) {
      const auto& a = knots[i - 1];
      const auto& b = knots[i];
      const double s = (h - a.height) / (b.height - a.height);
      return a.diameter + s * (b.diameter - a.diameter);
    }
  }
  return 0.0;
}

Vec2 GroundTruthTree::center_at(double h) const {
  if (knots.empty()) return base.head<2>();
  if (h <= knots.front().height) return knots.front().center;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (h <= knots[i].height) {
      const auto& a = knots[i - 1];
      const auto& b = knots[i];
      const double s = (h - a.height) / (b.height - a.height);
      return a.center + s * (b.center - a.center);
    }
  }
  return knots.back().center;
}

GroundTruthTree make_tree(int id, const Vec3& base, double base_diameter, double taper, double height,
                          double lean_direction, double lean_angle, double knot_spacing, double crown_base,
                          double crown_radius) {
  GroundTruthTree tree;
  tree.id = id;
  tree.base = base;
  tree.height = height;
  tree.lean_direction = lean_direction;
  tree.lean_angle = lean_angle;
  tree.crown_base = crown_base;
  tree.crown_radius = crown_radius;
  const Vec2 lean_dir(std::cos(lean_direction), std::sin(lean_direction));
  const double lean_slope = std::tan(lean_angle);
  auto knot = [&](double h) {
    return StemKnot{h, base_diameter - taper * h, base.head<2>() + lean_dir * (lean_slope * h)};
  };
  for (double h = 0.0; h < height - 1e-9; h += knot_spacing) {
    tree.knots.push_back(knot(h));
  }
  tree.knots.push_back(knot(height));
  return tree;
}

Rect World::bounds() const {
  const double res = heightfield_.resolution();
  return {heightfield_.origin().x(), heightfield_.origin().y(),
          heightfield_.origin().x() + (heightfield_.nx() - 1) * res,
          heightfield_.origin().y() + (heightfield_.ny() - 1) * res};
}

double World::terrain_height(double x, double y) const {
  const double res = heightfield_.resolution();
  const int nx = heightfield_.nx();
  const int ny = heightfield_.ny();
  double fx = (x - heightfield_.origin().x()) / res;
  double fy = (y - heightfield_.origin().y()) / res;
  fx = std::clamp(fx, 0.0, static_cast<double>(nx - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(ny - 1));
  int ix = std::min(static_cast<int>(fx), nx - 2);
  int iy = std::min(static_cast<int>(fy), ny - 2);
  const double u = fx - ix;
  const double v = fy - iy;
  const double h00 = heightfield_.at(ix, iy);
  const double h10 = heightfield_.at(ix + 1, iy);
  const double h01 = heightfield_.at(ix, iy + 1);
  const double h11 = heightfield_.at(ix + 1, iy + 1);
  return (1 - v) * ((1 - u) * h00 + u * h10) + v * ((1 - u) * h01 + u * h11);
}

Vec2 World::terrain_gradient(double x, double y) const {
  const double e = 0.5 * heightfield_.resolution();
  return {(terrain_height(x + e, y) - terrain_height(x - e, y)) / (2 * e),
          (terrain_height(x, y + e) - terrain_height(x, y - e)) / (2 * e)};
}

std::optional<std::size_t> World::patch_at(const Vec2& p, std::optional<PatchType> type) const {
  for (std::size_t i = 0; i < patches_.size(); ++i) {
    if ((!type || patches_[i].type == *type) && patches_[i].contains(p)) {
      return i;
    }
  }
  return std::nullopt;
}

bool World::operator==(const World& o) const {
  if (heightfield_ != o.heightfield_ || trees_.size() != o.trees_.size() || patches_.size() != o.patches_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < trees_.size(); ++i) {
    const auto& a = trees_[i];
    const auto& b = o.trees_[i];
    if (a.id != b.id || a.base != b.base || a.height != b.height || a.knots.size() != b.knots.size() ||
        a.crown_base != b.crown_base || a.crown_radius != b.crown_radius) {
      return false;
    }
    for (std::size_t k = 0; k < a.knots.size(); ++k) {
      if (a.knots[k].height != b.knots[k].height || a.knots[k].diameter != b.knots[k].diameter ||
          a.knots[k].center != b.knots[k].center) {
        return false;
      }
    }
  }
  for (std::size_t i = 0; i < patches_.size(); ++i) {
    if (patches_[i].center != o.patches_[i].center || patches_[i].radius != o.patches_[i].radius ||
        patches_[i].type != o.patches_[i].type) {
      return false;
    }
  }
  return true;
}

void World::finalize_terrain() {
  const double res = heightfield_.resolution();
  double sx = 0.0;
  double sy = 0.0;
  max_height_ = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < heightfield_.ny(); ++j) {
    for (int i = 0; i < heightfield_.nx(); ++i) {
      const double h = heightfield_.at(i, j);
      max_height_ = std::max(max_height_, h);
      if (i + 1 < heightfield_.nx()) sx = std::max(sx, std::abs(heightfield_.at(i + 1, j) - h) / res);
      if (j + 1 < heightfield_.ny()) sy = std::max(sy, std::abs(heightfield_.at(i, j + 1) - h) / res);
    }
  }
  slope_bound_ = std::hypot(sx, sy);
}

World World::from_parts(WorldSpec spec, Grid2D<double> heightfield, std::vector<GroundTruthTree> trees,
                        std::vector<Patch> patches) {
  World w;
  w.spec_ = std::move(spec);
  w.heightfield_ = std::move(heightfield);
  w.trees_ = std::move(trees);
  w.patches_ = std::move(patches);
  w.finalize_terrain();
  return w;
}

World generate_world(const WorldSpec& spec, bool allow_partial) {
  spec.validate();
  Rng rng = make_stream(spec.seed, streams::kWorld);
  World world;
  world.spec_ = spec;

  // Terrain: a handful of low-frequency harmonics plus a planar slope.
  struct Harmonic {
    Vec2 k;
    double phase;
    double weight;
  };
  std::vector<Harmonic> harmonics(6);
  double weight_sum = 0.0;
  for (auto& h : harmonics) {
    const double dir = draw_uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double wavelength = spec.terrain.correlation_length * draw_uniform(rng, 1.0, 3.0);
    h.k = Vec2(std::cos(dir), std::sin(dir)) * (2.0 * std::numbers::pi / wavelength);
    h.phase = draw_uniform(rng, 0.0, 2.0 * std::numbers::pi);
    h.weight = draw_uniform(rng, 0.5, 1.0);
    weight_sum += h.weight;
  }
  const Vec2 slope_dir(std::cos(spec.terrain.slope_heading), std::sin(spec.terrain.slope_heading));
  const double slope = std::tan(spec.terrain.mean_slope);
  const Vec2 center(0.5 * (spec.extent.min_x + spec.extent.max_x), 0.5 * (spec.extent.min_y + spec.extent.max_y));

  const Rect hf = spec.extent.inflated(spec.terrain.margin);
  const double res = spec.terrain.resolution;
  const int nx = static_cast<int>(std::ceil(hf.width() / res)) + 1;
  const int ny = static_cast<int>(std::ceil(hf.height() / res)) + 1;
  world.heightfield_ = Grid2D<double>(Vec2(hf.min_x, hf.min_y), res, nx, ny, 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 p(hf.min_x + i * res, hf.min_y + j * res);
      double h = 0.0;
      for (const auto& hm : harmonics) {
        h += hm.weight * std::sin(hm.k.dot(p) + hm.phase);
      }
      h = spec.terrain.amplitude * h / weight_sum + slope * (p - center).dot(slope_dir);
      world.heightfield_.at(i, j) = h;
    }
  }
  world.finalize_terrain();

  // Trees: dart throwing with rejection on minimum spacing.
  const auto& ts = spec.trees;
  const int budget = 10 * ts.count;
  std::vector<Vec2> placed;
  for (int attempt = 0; attempt < budget && static_cast<int>(placed.size()) < ts.count; ++attempt) {
    const Vec2 p(draw_uniform(rng, spec.extent.min_x, spec.extent.max_x),
                 draw_uniform(rng, spec.extent.min_y, spec.extent.max_y));
    const bool clear = std::none_of(placed.begin(), placed.end(), [&](const Vec2& q) {
      return (p - q).norm() < ts.min_spacing;
    });
    if (clear) {
      placed.push_back(p);
    }
  }
  if (static_cast<int>(placed.size()) < ts.count) {
    if (!allow_partial) {
      throw PlacementExhausted(ts.count, static_cast<int>(placed.size()));
    }
    world.shortfall_ = ts.count - static_cast<int>(placed.size());
  }
  for (std::size_t i = 0; i < placed.size(); ++i) {
    const Vec2& p = placed[i];
    const double diameter = draw_uniform(rng, ts.base_diameter.min, ts.base_diameter.max);
    const double height = draw_uniform(rng, ts.height.min, ts.height.max);
    const double lean_dir = draw_uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double lean = draw_uniform(rng, 0.0, ts.lean_max);
    const double crown_base = height * draw_uniform(rng, ts.crown_base_fraction.min, ts.crown_base_fraction.max);
    const double crown_radius = draw_uniform(rng, ts.crown_radius.min, ts.crown_radius.max);
    const Vec3 base(p.x(), p.y(), world.terrain_height(p));
    world.trees_.push_back(make_tree(static_cast<int>(i), base, diameter, ts.taper, height, lean_dir, lean,
                                     ts.knot_spacing, crown_base, crown_radius));
  }

  for (const auto& group : spec.patches) {
    for (int k = 0; k < group.count; ++k) {
      const double r = draw_uniform(rng, group.radius.min, group.radius.max);
      const Vec2 c(draw_uniform(rng, spec.extent.min_x + r, spec.extent.max_x - r),
                   draw_uniform(rng, spec.extent.min_y + r, spec.extent.max_y - r));
      world.patches_.push_back({c, r, group.type});
    }
  }
  return world;
}

}  // namespace sylva::sim
