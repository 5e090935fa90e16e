#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/parallel.hpp"
#include "pmc/sphere.hpp"

namespace pmc {

template <class C>
concept SphereCriterion = requires(const C& c, std::span<const double> beta) {
  { c(beta) } -> std::convertible_to<double>;
};

// Criteria that can restrict themselves to a geodesic ball (exactly, for points
// inside the ball) are evaluated through that restriction each round.
template <class C>
concept FocusableCriterion = SphereCriterion<C> && requires(const C& c, const UnitVector& center, double radius) {
  { c.focused(center, radius) };
};

// Criteria that evaluate a batch of points in one pass over their data.
template <class C>
concept BatchCriterion = SphereCriterion<C> && requires(const C& c, std::span<const UnitVector> b, std::span<double> out) {
  c.evaluate(b, out);
};

// c_hat = kappa * N^{-1/4} * log N
struct CHatRule {
  double kappa = 0.01;
};
using CHat = std::variant<double, CHatRule>;

inline double resolve_c_hat(const CHat& c, int n_agents) {
  if (const auto* v = std::get_if<double>(&c)) {
    if (!(*v >= 0.0)) throw ValidationError("c_hat must be nonnegative");
    return *v;
  }
  const double kappa = std::get<CHatRule>(c).kappa;
  if (!(kappa >= 0.0)) throw ValidationError("c_hat rule constant must be nonnegative");
  if (n_agents < 2) return 0.0;
  const double n = n_agents;
  return kappa * std::pow(n, -0.25) * std::log(n);
}

struct GridConfig {
  int base_grid = 17;            // points per angle dimension and round
  double quantile_alpha = 0.10;  // fraction of distinct criterion values kept per round
  // Grid cells added on each side of the kept set. One full cell keeps every
  // connected zero set that the grid has touched inside the next box.
  double buffer_fraction = 1.0;
  double precision = 1e-3;       // stop once the box's geodesic diameter bound is below this
  int max_rounds = 12;
  // A round that fails to shrink the box is followed by one on a grid of
  // 2M-1 points per dimension, as long as a round stays within this many points.
  std::size_t max_grid_points = 20000;
  CHat c_hat = 0.0;
  unsigned jobs = 1;

  void validate() const {
    if (base_grid < 2) throw ValidationError("base grid must have at least 2 points per dimension");
    if (max_grid_points < 1) throw ValidationError("max grid points must be positive");
    if (!(quantile_alpha > 0.0 && quantile_alpha < 1.0)) throw ValidationError("quantile alpha must lie in (0, 1)");
    if (!(buffer_fraction >= 0.0)) throw ValidationError("buffer fraction must be nonnegative");
    if (!(precision > 0.0)) throw ValidationError("precision must be positive");
    if (max_rounds < 1) throw ValidationError("max rounds must be at least 1");
  }
};

enum class StopReason {
  precision,  // box diameter bound reached the target
  stalled,    // box stopped shrinking at the finest affordable grid
  max_rounds  // round budget exhausted (unconverged)
};

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::precision:
      return "precision";
    case StopReason::stalled:
      return "stalled";
    case StopReason::max_rounds:
      return "max-rounds";
  }
  return "?";
}

struct RoundTrace {
  int round = 0;
  AngleRectangle box;        // region gridded in this round
  int grid = 0;              // points per dimension
  std::size_t evaluations = 0;
  double q_min = 0.0;        // running minimum after this round
  double threshold = 0.0;    // distinct-value quantile of this round
  std::size_t selected = 0;  // points enclosed for the next box
  double diameter = 0.0;     // diameter bound of `box`
};

struct EstimationResult {
  AngleRectangle argmin_enclosure;  // evaluated points with Q == q_min, buffered
  AngleRectangle set_enclosure;     // evaluated points with Q <= q_min + c_hat, buffered
  // Per-coordinate bounds and midpoint of the images beta(theta) of the retained points.
  std::vector<double> beta_lower, beta_upper, beta_mid;
  double q_min = 0.0;
  double c_hat = 0.0;
  std::size_t evaluations = 0;
  int rounds = 0;
  bool converged = false;
  StopReason stop = StopReason::max_rounds;
  std::vector<RoundTrace> trace;
  std::vector<AngleVector> retained;
  std::vector<double> retained_values;
};

namespace detail {

inline std::vector<double> axis_points(const AngleRectangle& box, std::size_t k, int m) {
  std::vector<double> v;
  if (k == 0 && box.full_circle()) {
    for (int q = 0; q < m; ++q) v.push_back(-pi + two_pi * q / m);
    return v;
  }
  const double lo = box.lower()[k], w = box.width(k);
  if (w <= angle_tolerance) return {lo};
  for (int q = 0; q < m; ++q) v.push_back(q + 1 == m ? lo + w : lo + w * q / (m - 1));
  return v;
}

inline double axis_spacing(const AngleRectangle& box, std::size_t k, int m) {
  if (k == 0 && box.full_circle()) return two_pi / m;
  return box.width(k) <= angle_tolerance ? 0.0 : box.width(k) / (m - 1);
}

inline std::vector<AngleVector> make_grid(const AngleRectangle& box, int m) {
  const std::size_t dims = box.size();
  std::vector<std::vector<double>> axes(dims);
  std::size_t total = 1;
  for (std::size_t k = 0; k < dims; ++k) {
    axes[k] = axis_points(box, k, m);
    total *= axes[k].size();
  }
  std::vector<AngleVector> grid;
  grid.reserve(total);
  std::vector<std::size_t> at(dims, 0);
  std::vector<double> theta(dims);
  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t k = 0; k < dims; ++k) theta[k] = axes[k][at[k]];
    grid.emplace_back(theta);
    for (std::size_t k = 0; k < dims; ++k) {
      if (++at[k] < axes[k].size()) break;
      at[k] = 0;
    }
  }
  return grid;
}

inline std::size_t grid_size(const AngleRectangle& box, int m) {
  std::size_t total = 1;
  for (std::size_t k = 0; k < box.size(); ++k) total *= axis_points(box, k, m).size();
  return total;
}

// Value at the alpha-quantile of the sorted distinct values.
inline double distinct_quantile(std::vector<double> values, double alpha) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(alpha * values.size()) - 1.0));
  return values[std::min(idx, values.size() - 1)];
}

template <SphereCriterion C>
std::vector<double> evaluate_grid(const C& criterion, const std::vector<AngleVector>& grid, unsigned jobs) {
  std::vector<double> out(grid.size());
  if constexpr (BatchCriterion<C>) {
    constexpr std::size_t chunk = 32;
    const std::size_t n_chunks = (grid.size() + chunk - 1) / chunk;
    parallel_for(n_chunks, jobs, [&](std::size_t c) {
      const std::size_t lo = c * chunk, hi = std::min(grid.size(), lo + chunk);
      std::vector<UnitVector> b;
      for (std::size_t k = lo; k < hi; ++k) b.push_back(to_unit(grid[k]));
      criterion.evaluate(b, std::span<double>(out.data() + lo, hi - lo));
    });
  } else {
    parallel_for(grid.size(), jobs, [&](std::size_t k) {
      const UnitVector b = to_unit(grid[k]);
      out[k] = static_cast<double>(criterion(b.span()));
    });
  }
  return out;
}

}  // namespace detail

// Set estimate {beta : Q(beta) <= min Q + c_hat} by adaptive grid search over
// angle space. Each round grids the current box with base_grid points per
// dimension, keeps every evaluated point (from any round) within c_hat of the
// running minimum together with this round's points at or below the alpha
// distinct-value quantile, and shrinks the box to their enclosure plus a
// buffer. A round that does not shrink the box is retried on a grid of
// twice the density. Stops when the box's diameter bound drops below
// `precision`, when the box stops shrinking at the finest affordable grid, or
// after max_rounds (flagged unconverged).
//
// `n_agents` resolves a c_hat rule; pass 0 for explicit c_hat values.
template <SphereCriterion C>
EstimationResult set_estimate(const C& criterion, const GridConfig& cfg, int dimension, int n_agents = 0) {
  cfg.validate();
  if (dimension < 2) throw ValidationError("dimension must be at least 2");
  const double c_hat = resolve_c_hat(cfg.c_hat, n_agents);

  EstimationResult res;
  res.c_hat = c_hat;
  std::vector<AngleVector> archive;
  std::vector<double> values;
  double q_min = std::numeric_limits<double>::infinity();
  AngleRectangle box = AngleRectangle::full(dimension);
  std::vector<double> margin(dimension - 1);
  int m = cfg.base_grid;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    const auto grid = detail::make_grid(box, m);
    std::vector<double> vals;
    if constexpr (FocusableCriterion<C>) {
      if (!box.full_circle()) {
        const auto focus = criterion.focused(to_unit(box.center()), box.radius_bound());
        vals = detail::evaluate_grid(focus, grid, cfg.jobs);
      } else {
        vals = detail::evaluate_grid(criterion, grid, cfg.jobs);
      }
    } else {
      vals = detail::evaluate_grid(criterion, grid, cfg.jobs);
    }
    res.evaluations += grid.size();
    archive.insert(archive.end(), grid.begin(), grid.end());
    values.insert(values.end(), vals.begin(), vals.end());
    q_min = std::min(q_min, *std::min_element(vals.begin(), vals.end()));

    const double threshold = detail::distinct_quantile(vals, cfg.quantile_alpha);
    std::vector<AngleVector> selected;
    for (std::size_t k = 0; k < archive.size(); ++k)
      if (values[k] <= q_min + c_hat) selected.push_back(archive[k]);
    for (std::size_t k = 0; k < grid.size(); ++k)
      if (vals[k] <= threshold && !(vals[k] <= q_min + c_hat)) selected.push_back(grid[k]);

    double spacing = 0.0;
    for (std::size_t k = 0; k < margin.size(); ++k) {
      const double h = detail::axis_spacing(box, k, m);
      spacing = std::max(spacing, h);
      margin[k] = cfg.buffer_fraction * h;
    }
    const AngleRectangle next = inflate_within(enclosing_rectangle_within(selected, box), margin, box);

    res.trace.push_back({round, box, m, grid.size(), q_min, threshold, selected.size(), box.diameter_bound()});
    res.rounds = round;

    const double d_next = next.diameter_bound();
    if (d_next <= cfg.precision) {
      res.stop = StopReason::precision;
      break;
    }
    if (d_next >= 0.99 * box.diameter_bound()) {
      const int finer = 2 * m - 1;
      // Stop once the buffer slack is below precision or the finer grid is unaffordable.
      if (spacing * std::max(1.0, 2.0 * cfg.buffer_fraction) <= cfg.precision ||
          detail::grid_size(next, finer) > cfg.max_grid_points) {
        res.stop = StopReason::stalled;
        break;
      }
      m = finer;
    }
    box = next;
  }
  res.converged = res.stop != StopReason::max_rounds;

  res.q_min = q_min;
  for (std::size_t k = 0; k < archive.size(); ++k)
    if (values[k] <= q_min + c_hat) {
      res.retained.push_back(archive[k]);
      res.retained_values.push_back(values[k]);
    }
  // `box` is the last gridded region; by construction it holds every retained point.
  res.set_enclosure = inflate_within(enclosing_rectangle_within(res.retained, box), margin, box);
  if (c_hat == 0.0) {
    res.argmin_enclosure = res.set_enclosure;
  } else {
    std::vector<AngleVector> argmin;
    for (std::size_t k = 0; k < res.retained.size(); ++k)
      if (res.retained_values[k] == q_min) argmin.push_back(res.retained[k]);
    const auto& frame = res.set_enclosure;
    res.argmin_enclosure = inflate_within(enclosing_rectangle_within(argmin, frame), margin, frame);
  }

  res.beta_lower.assign(dimension, std::numeric_limits<double>::infinity());
  res.beta_upper.assign(dimension, -std::numeric_limits<double>::infinity());
  for (const auto& theta : res.retained) {
    const UnitVector b = to_unit(theta);
    for (int d = 0; d < dimension; ++d) {
      res.beta_lower[d] = std::min(res.beta_lower[d], b[d]);
      res.beta_upper[d] = std::max(res.beta_upper[d], b[d]);
    }
  }
  res.beta_mid.resize(dimension);
  for (int d = 0; d < dimension; ++d) res.beta_mid[d] = 0.5 * (res.beta_lower[d] + res.beta_upper[d]);
  return res;
}

// Enclosure of the numerical argmin: set_estimate with c_hat = 0.
template <SphereCriterion C>
EstimationResult minimize(const C& criterion, GridConfig cfg, int dimension) {
  cfg.c_hat = 0.0;
  return set_estimate(criterion, cfg, dimension, 0);
}

}  // namespace pmc
