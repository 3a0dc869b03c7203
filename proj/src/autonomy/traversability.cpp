#include "sylva/autonomy/traversability.hpp"

#include <algorithm>
#include <cmath>

#include "sylva/common/error.hpp"

namespace sylva::autonomy {

double Hinge::operator()(double v) const {
  if (v <= low) return 1.0;
  if (v >= high) return 0.0;
  return (high - v) / (high - low);
}

namespace {

Json hinge_json(const Hinge& h) { return Json::array({h.low, h.high}); }

Hinge hinge_from(const Json& j, const char* key, Hinge fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  Hinge h{v.at(0).get<double>(), v.at(1).get<double>()};
  if (!(h.high > h.low)) throw ConfigError(std::string("hinge '") + key + "' needs low < high");
  return h;
}

}  // namespace

void to_json(Json& j, const TraversabilityParams& p) {
  j = Json{{"slope_deg", Json::array({rad2deg(p.slope.low), rad2deg(p.slope.high)})},
           {"roughness", hinge_json(p.roughness)},
           {"step", hinge_json(p.step)},
           {"obstacle", hinge_json(p.obstacle)},
           {"inflation_radius", p.inflation_radius}};
}

void from_json(const Json& j, TraversabilityParams& p) {
  p = TraversabilityParams{};
  const Hinge deg = hinge_from(j, "slope_deg", {rad2deg(p.slope.low), rad2deg(p.slope.high)});
  p.slope = {deg2rad(deg.low), deg2rad(deg.high)};
  p.roughness = hinge_from(j, "roughness", p.roughness);
  p.step = hinge_from(j, "step", p.step);
  p.obstacle = hinge_from(j, "obstacle", p.obstacle);
  p.inflation_radius = value_or(j, "inflation_radius", p.inflation_radius);
}

TraversabilityLayer score_traversability(const estimation::TerrainMap& map, const TraversabilityParams& params,
                                         ExecPolicy policy) {
  const auto& g = map.grid();
  const int nx = g.nx();
  const int ny = g.ny();
  const double res = g.resolution();
  TraversabilityLayer layer{Grid2D<double>(g.origin(), res, nx, ny, 0.0),
                            Grid2D<std::uint8_t>(g.origin(), res, nx, ny, 0)};
  auto known = [&](int i, int j) { return g.inside(i, j) && g.at(i, j).known; };
  auto elev = [&](int i, int j) { return g.at(i, j).elevation; };

  Grid2D<double> raw(g.origin(), res, nx, ny, 0.0);
  for_each_index(policy, static_cast<std::ptrdiff_t>(g.size()), [&](std::ptrdiff_t idx) {
    const CellIndex c = g.unlinear(static_cast<std::size_t>(idx));
    if (!known(c.x, c.y)) return;
    const double e = elev(c.x, c.y);
    auto derivative = [&](int di, int dj) {
      const bool plus = known(c.x + di, c.y + dj);
      const bool minus = known(c.x - di, c.y - dj);
      if (plus && minus) return (elev(c.x + di, c.y + dj) - elev(c.x - di, c.y - dj)) / (2.0 * res);
      if (plus) return (elev(c.x + di, c.y + dj) - e) / res;
      if (minus) return (e - elev(c.x - di, c.y - dj)) / res;
      return 0.0;
    };
    const double slope = std::atan(std::hypot(derivative(1, 0), derivative(0, 1)));
    double sum = 0.0;
    double sum2 = 0.0;
    double lo = e;
    double hi = e;
    int count = 0;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (!known(c.x + di, c.y + dj)) continue;
        const double v = elev(c.x + di, c.y + dj);
        sum += v;
        sum2 += v * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++count;
      }
    }
    const double mean = sum / count;
    const double roughness = std::sqrt(std::max(sum2 / count - mean * mean, 0.0));
    const double s = params.slope(slope) * params.roughness(roughness) * params.step(hi - lo) *
                     params.obstacle(g.at(c.x, c.y).obstacle);
    raw[static_cast<std::size_t>(idx)] = std::clamp(s, 0.0, 1.0);
  });

  const int reach = static_cast<int>(std::floor(params.inflation_radius / res + 1e-9));
  for_each_index(policy, static_cast<std::ptrdiff_t>(g.size()), [&](std::ptrdiff_t idx) {
    const CellIndex c = g.unlinear(static_cast<std::size_t>(idx));
    if (!known(c.x, c.y)) return;
    layer.known[static_cast<std::size_t>(idx)] = 1;
    double s = raw[static_cast<std::size_t>(idx)];
    for (int dj = -reach; dj <= reach && s > 0.0; ++dj) {
      for (int di = -reach; di <= reach; ++di) {
        if (di * di + dj * dj > reach * reach || !known(c.x + di, c.y + dj)) continue;
        if (raw.at(c.x + di, c.y + dj) <= 0.0) {
          s = 0.0;
          break;
        }
      }
    }
    layer.score[static_cast<std::size_t>(idx)] = s;
  });
  return layer;
}

void CostParams::validate() const {
  if (w_trav < 0.0 || w_unkn < 0.0 || s_unkn < 0.0 || s_unkn > 1.0) {
    throw ConfigError("cost weights must be non-negative and s_unkn in [0, 1]");
  }
}

void to_json(Json& j, const CostParams& p) { j = Json{{"w_trav", p.w_trav}, {"w_unkn", p.w_unkn}, {"s_unkn", p.s_unkn}}; }

void from_json(const Json& j, CostParams& p) {
  p = CostParams{};
  p.w_trav = value_or(j, "w_trav", p.w_trav);
  p.w_unkn = value_or(j, "w_unkn", p.w_unkn);
  p.s_unkn = value_or(j, "s_unkn", p.s_unkn);
  p.validate();
}

Grid2D<double> compute_cost(const TraversabilityLayer& layer, const CostParams& params) {
  params.validate();
  Grid2D<double> cost(layer.score.origin(), layer.score.resolution(), layer.score.nx(), layer.score.ny(), 0.0);
  for (std::size_t i = 0; i < cost.size(); ++i) {
    cost[i] = layer.known[i] ? params.w_trav * (1.0 - layer.score[i]) : params.w_unkn * params.s_unkn;
  }
  return cost;
}

}  // namespace sylva::autonomy
