#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "gsw/linalg.hpp"
#include "gsw/random.hpp"

namespace gsw {

struct SamplerOptions {
  /// Coordinates with |z_i| >= 1 - freeze_tol are snapped to sign(z_i) and frozen.
  double freeze_tol = 1e-9;
};

/// Fractional assignment of the Gram-Schmidt walk with randomized pivots.
template <typename Scalar>
struct DesignState {
  Vector<Scalar> z;
  IndexSet active;
  std::optional<Index> pivot;
  Index t = 0;
  InverseCache<Scalar> cache;
  RandomStream rng{0, 0};
};

template <typename Scalar>
DesignState<Scalar> make_design_state(const CovariateSetup<Scalar>& setup, RandomStream rng) {
  DesignState<Scalar> state;
  state.z = Vector<Scalar>::Zero(setup.n());
  state.active.resize(static_cast<std::size_t>(setup.n()));
  std::iota(state.active.begin(), state.active.end(), Index{0});
  state.cache = init_inverse<Scalar>(setup.y);
  state.rng = rng;
  return state;
}

/// Maps a uniform draw in [0, 1) to the element at position floor(draw * |A|)
/// of the ascending active set.
inline Index pivot_from_draw(const IndexSet& active, double draw) {
  if (active.empty()) throw std::logic_error("pivot requested from an empty active set");
  auto pos = static_cast<std::size_t>(std::floor(draw * static_cast<double>(active.size())));
  pos = std::min(pos, active.size() - 1);
  return active[pos];
}

/// Keeps the previous pivot while it is active, otherwise draws a fresh one
/// (consuming exactly one value from the state's stream).
template <typename Scalar>
Index select_pivot(DesignState<Scalar>& state) {
  if (state.active.empty()) throw std::logic_error("select_pivot on an empty active set");
  if (state.pivot && std::binary_search(state.active.begin(), state.active.end(), *state.pivot)) {
    return *state.pivot;
  }
  const Index p = pivot_from_draw(state.active, state.rng.uniform());
  state.pivot = p;
  return p;
}

template <typename Scalar>
struct FeasibleInterval {
  Scalar delta_plus{0};
  Scalar delta_minus{0};
  /// Coordinates whose face is hit first moving up / down.
  Index plus_face = -1;
  Index minus_face = -1;
};

namespace detail {

template <typename Scalar, typename Range>
FeasibleInterval<Scalar> feasible_interval_over(const Vector<Scalar>& z, const Vector<Scalar>& u, Index p,
                                                const Range& coords) {
  if (!(std::abs(z[p]) < Scalar(1))) throw std::logic_error("pivot coordinate is already frozen");
  FeasibleInterval<Scalar> out;
  out.delta_plus = std::numeric_limits<Scalar>::infinity();
  out.delta_minus = std::numeric_limits<Scalar>::infinity();
  for (Index i : coords) {
    const Scalar ui = u[i];
    if (ui == Scalar(0)) continue;
    // Distance to the +1 face and to the -1 face along +u.
    const Scalar up = ui > 0 ? (Scalar(1) - z[i]) / ui : (Scalar(-1) - z[i]) / ui;
    const Scalar down = ui > 0 ? (Scalar(1) + z[i]) / ui : (z[i] - Scalar(1)) / ui;
    if (up < out.delta_plus) {
      out.delta_plus = up;
      out.plus_face = i;
    }
    if (down < out.delta_minus) {
      out.delta_minus = down;
      out.minus_face = i;
    }
  }
  return out;
}

struct AllCoords {
  Index n;
  struct It {
    Index i;
    Index operator*() const { return i; }
    It& operator++() {
      ++i;
      return *this;
    }
    bool operator!=(const It& o) const { return i != o.i; }
  };
  It begin() const { return {0}; }
  It end() const { return {n}; }
};

}  // namespace detail

/// Largest steps d+ and d- with z + d+ u and z - d- u inside [-1, 1]^n.
template <typename Scalar>
FeasibleInterval<Scalar> feasible_interval(const Vector<Scalar>& z, const StepDirection<Scalar>& dir) {
  return detail::feasible_interval_over(z, dir.u, dir.p, detail::AllCoords{z.size()});
}

/// Same as feasible_interval, scanning only the active coordinates (u vanishes elsewhere).
template <typename Scalar>
FeasibleInterval<Scalar> feasible_interval(const Vector<Scalar>& z, const StepDirection<Scalar>& dir,
                                           const IndexSet& active) {
  return detail::feasible_interval_over(z, dir.u, dir.p, active);
}

/// +d+ when draw <= d- / (d+ + d-), else -d-. Mean zero.
template <typename Scalar>
Scalar sample_step(Scalar delta_plus, Scalar delta_minus, double draw) {
  if (!(delta_plus > Scalar(0) && delta_minus > Scalar(0))) {
    throw std::logic_error("step interval endpoints must be positive");
  }
  return draw <= double(delta_minus / (delta_plus + delta_minus)) ? delta_plus : -delta_minus;
}

/// One realized step of the walk.
template <typename Scalar>
struct StepRecord {
  Index pivot = -1;
  Scalar delta{0};
  Scalar delta_plus{0};
  Scalar delta_minus{0};
  double draw = 0.0;
  IndexSet frozen;
};

/// Moves z by delta * u, snaps and freezes every coordinate within
/// freeze_tol of a face, and downdates the cache for each frozen row.
template <typename Scalar>
void apply_step(const CovariateSetup<Scalar>& setup, DesignState<Scalar>& state, const StepDirection<Scalar>& dir,
                const FeasibleInterval<Scalar>& interval, Scalar delta, const SamplerOptions& opts,
                IndexSet* frozen_out = nullptr) {
  for (Index i : state.active) state.z[i] += delta * dir.u[i];
  // The binding face is hit exactly, whatever rounding says.
  const Index face = delta > 0 ? interval.plus_face : interval.minus_face;
  state.z[face] = state.z[face] >= 0 ? Scalar(1) : Scalar(-1);

  const Scalar limit = Scalar(1) - Scalar(opts.freeze_tol);
  IndexSet kept;
  kept.reserve(state.active.size());
  for (Index i : state.active) {
    if (std::abs(state.z[i]) >= limit) {
      state.z[i] = state.z[i] > 0 ? Scalar(1) : Scalar(-1);
      state.cache = downdate_inverse(std::move(state.cache), setup.y.row(i).transpose());
      if (frozen_out) frozen_out->push_back(i);
    } else {
      kept.push_back(i);
    }
  }
  state.active = std::move(kept);
  state.t += 1;
}

/// One round of the walk: pivot, direction, random step, freeze.
/// `scratch` receives the direction used.
template <typename Scalar>
StepRecord<Scalar> gsw_step(const CovariateSetup<Scalar>& setup, DesignState<Scalar>& state,
                            StepDirection<Scalar>& scratch, const SamplerOptions& opts = {}) {
  StepRecord<Scalar> rec;
  rec.pivot = select_pivot(state);
  step_direction_into(setup, state.active, rec.pivot, state.cache, scratch);
  const auto interval = feasible_interval(state.z, scratch, state.active);
  rec.delta_plus = interval.delta_plus;
  rec.delta_minus = interval.delta_minus;
  rec.draw = state.rng.uniform();
  rec.delta = sample_step(interval.delta_plus, interval.delta_minus, rec.draw);
  apply_step(setup, state, scratch, interval, rec.delta, opts, &rec.frozen);
  return rec;
}

/// Runs the walk to completion on the given stream and returns z in {-1, +1}^n.
template <typename Scalar>
Vector<Scalar> run_gsw(const CovariateSetup<Scalar>& setup, RandomStream rng, const SamplerOptions& opts = {}) {
  auto state = make_design_state(setup, rng);
  StepDirection<Scalar> scratch;
  while (!state.active.empty()) {
    if (state.t >= setup.n()) throw NumericError("walk failed to terminate within n steps");
    gsw_step(setup, state, scratch, opts);
  }
  return state.z;
}

template <typename Scalar>
Vector<Scalar> run_gsw(const CovariateSetup<Scalar>& setup, std::uint64_t seed, const SamplerOptions& opts = {}) {
  return run_gsw(setup, RandomStream(seed, 0), opts);
}

using DesignStated = DesignState<double>;

}  // namespace gsw
