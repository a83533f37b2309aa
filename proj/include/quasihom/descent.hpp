#pragma once

#include <cmath>
#include <vector>

#include "quasihom/common.hpp"
#include "quasihom/matrix.hpp"
#include "quasihom/mesh.hpp"

namespace quasihom {

/// Options for the derivative-free minimizer. The defaults implement the
/// contract used across the modules: stop when the relative energy decrease
/// over a 50-sweep window falls below 1e-6.
struct DescentOptions {
  int max_sweeps = 400;
  int window = 50;
  double rel_tol = 1e-6;
  // Energies above this value are clamped during descent so that infinite
  // branches behave like a plateau the search can walk off instead of an
  // absorbing error state. The reported energy is always the true one.
  double cap = 1e9;
  double init_step_factor = 1.0;  // initial trial step = factor * mesh spacing
  double step_floor = 1e-12;
  double step_ceil_factor = 0.5;  // ceiling = factor * box length
};

struct DescentResult {
  double energy = kInf;         // true total energy of the final field
  double capped_energy = kInf;  // surrogate total used by the search
  int sweeps = 0;
  bool converged = false;
};

/// Pattern/coordinate descent over interior vertex values. Model is any
/// callable (element, G) -> energy density with G the full gradient
/// (macroscopic matrix plus field gradient); densities may be +inf. The
/// method only ever accepts strict improvements of the capped energy, so a
/// finite-energy start can never be lost. A quadratic fit through the three
/// stencil values accelerates the smooth case; rejected steps shrink the
/// per-dof step, accepted ones grow it.
template <class Model>
DescentResult minimize_field(const MatrixMN& xi, const Model& model, DisplacementField& field,
                             const DescentOptions& opts = {}) {
  const CellMesh& mesh = *field.mesh;
  const int m = field.m;
  const double vol = mesh.element_volume();
  const double cap = opts.cap;

  MatrixMN g(m, mesh.dim());
  auto density = [&](int e) -> double {
    mesh.gradient_on(e, field.values, m, xi, g);
    return model(e, g);
  };
  // Search surrogate: models may shape the infinite region (graded plateau);
  // the fallback is a flat clamp.
  auto guided = [&](int e) -> double {
    mesh.gradient_on(e, field.values, m, xi, g);
    if constexpr (requires { model.guided(e, g, cap); }) {
      return model.guided(e, g, cap);
    } else {
      double v = model(e, g);
      return v < cap ? v : cap;
    }
  };

  // Surrogate local energy around vertex v (sum over incident elements).
  auto local = [&](int v) -> double {
    double s = 0.0;
    for (const int* it = mesh.incident_begin(v); it != mesh.incident_end(v); ++it)
      s += guided(*it);
    return s;
  };
  auto total_capped = [&]() {
    double s = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e) s += guided(e);
    return s * vol;
  };

  const auto& interior = mesh.interior_vertices();
  std::vector<double> step(static_cast<size_t>(mesh.vertex_count()) * static_cast<size_t>(m),
                           opts.init_step_factor * mesh.spacing());
  const double step_ceil = opts.step_ceil_factor * mesh.length();

  std::vector<double> history;
  history.reserve(static_cast<size_t>(opts.max_sweeps) + 1);
  history.push_back(total_capped());

  DescentResult res;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (int v : interior) {
      for (int c = 0; c < m; ++c) {
        size_t dof = static_cast<size_t>(v) * static_cast<size_t>(m) + static_cast<size_t>(c);
        double& u = field.values[dof];
        const double u0 = u;
        const double d = step[dof];

        double e0 = local(v);
        u = u0 + d;
        double ep = local(v);
        u = u0 - d;
        double em = local(v);

        double best_e = e0;
        double best_u = u0;
        if (ep < best_e) {
          best_e = ep;
          best_u = u0 + d;
        }
        if (em < best_e) {
          best_e = em;
          best_u = u0 - d;
        }
        // Quadratic fit when the stencil is finite and convex. Densities are
        // nonnegative, so a local sum below the cap means no element was
        // clamped.
        double denom = ep + em - 2.0 * e0;
        if (denom > 0.0 && ep < cap && em < cap && e0 < cap) {
          double dstar = 0.5 * d * (em - ep) / denom;
          if (dstar > 4.0 * d) dstar = 4.0 * d;
          if (dstar < -4.0 * d) dstar = -4.0 * d;
          u = u0 + dstar;
          double es = local(v);
          if (es < best_e) {
            best_e = es;
            best_u = u0 + dstar;
          }
        }

        if (best_e < e0 - 1e-15 * (1.0 + std::fabs(e0))) {
          u = best_u;
          step[dof] = std::min(d * 1.6, step_ceil);
        } else {
          u = u0;
          // On an infinite plateau the signal lies farther out, so expand.
          bool plateau = e0 >= cap;
          step[dof] = plateau ? std::min(d * 1.9, step_ceil)
                              : std::max(d * 0.5, opts.step_floor * mesh.length());
        }
      }
    }
    history.push_back(total_capped());
    res.sweeps = sweep + 1;
    size_t k = history.size() - 1;
    if (static_cast<int>(k) >= opts.window) {
      double drop = history[k - static_cast<size_t>(opts.window)] - history[k];
      if (drop < opts.rel_tol * (1.0 + std::fabs(history[k]))) {
        res.converged = true;
        break;
      }
    }
  }

  res.capped_energy = history.back();
  double true_total = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    double de = density(e);
    if (de == kInf) {
      true_total = kInf;
      break;
    }
    true_total += de;
  }
  res.energy = (true_total == kInf) ? kInf : true_total * vol;
  return res;
}

}  // namespace quasihom
