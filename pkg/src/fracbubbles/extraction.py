"""Iterative bubble extraction from a boundary trace field.

The loop mirrors the first-bubble argument at desk scale: locate the maximal
windowed critical mass (concentration function), select the smallest window
radius holding the configured mass level, fit the known extremal profile on
the window by damped Gauss-Newton, subtract the fitted bubble under a C^2
cutoff, and repeat until the remaining critical energy falls below the
configured fraction of one bubble quantum or the bubble budget is exhausted.

The weak-limit step of the compactness argument is replaced by profile
fitting: on the flat model the solution set is exactly the rescaled bubble
family, so extraction is a parameter-estimation problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .bubbles import Bubble, eval_trace, quintic_cutoff, separation_matrix, trace_mass
from .errors import NoConcentrationError, ParameterError


@dataclass(frozen=True)
class ExtractionSettings:
    """Tunables of the extraction loop.

    eps_select    mass level of the scale selection (must stay below one
                  calibrated bubble's total critical mass)
    t0            reference window radius of the concentration scan
    r_select      reference radius r; the concentration scale is mu = t/(2r)
    m_max         bubble budget
    stop_fraction residual is compact when (g/n)*mass < stop_fraction * E*
    subtract_radius_factor  cutoff radius of the subtraction, in fitted
                  lambda units (quintic taper out to twice that)
    fit_*         Gauss-Newton controls; fit_offset adds a constant nuisance
                  absorbing neighbor-bubble tails under the window
    refine_passes joint re-fit sweeps after the loop (0 disables)
    """

    eps_select: float
    t0: float
    r_select: float
    m_max: int = 8
    stop_fraction: float = 0.5
    fit_max_iter: int = 80
    fit_gtol: float = 1e-11
    fit_window_factor: float = 2.0
    subtract_radius_factor: float = 4.0
    fit_offset: bool = True
    refine_passes: int = 1

    def validate(self, params):
        single = params.kappa ** params.two_star * params.mass_constant
        if not 0.0 < self.eps_select < single:
            raise ParameterError(
                f"eps_select must lie in (0, single-bubble mass {single:.6g}), "
                f"got {self.eps_select}")
        if not 0.0 < self.stop_fraction < 1.0:
            raise ParameterError(f"stop_fraction must lie in (0,1), got {self.stop_fraction}")
        if self.t0 <= 0 or self.r_select <= 0 or self.m_max < 1:
            raise ParameterError("t0, r_select must be positive and m_max >= 1")


def default_settings(params, dx, **overrides):
    """Spec defaults: eps = 0.4 x single-bubble mass, r = 8 cells, t0 = 2r."""
    single = params.kappa ** params.two_star * params.mass_constant
    base = dict(eps_select=0.4 * single, r_select=8.0 * dx, t0=16.0 * dx)
    base.update(overrides)
    return ExtractionSettings(**base)


# --- windowed critical mass -----------------------------------------------------


def _check_lattice(x):
    x = np.asarray(x, dtype=float)
    dx = np.diff(x)
    if len(x) < 8 or not np.allclose(dx, dx[0], rtol=1e-10, atol=0.0):
        raise ParameterError("extraction requires a uniform boundary lattice")
    return x, float(dx[0])


def total_mass(u, dx, two_star):
    """Full-lattice critical mass with the node-sum convention of the scanner."""
    return float(dx * np.sum(np.abs(u) ** two_star))


def _window_masses(u, dx, two_star, h):
    """Windowed masses over all centers for half-width h nodes (prefix sums)."""
    dens = np.abs(u) ** two_star * dx
    P = np.concatenate([[0.0], np.cumsum(dens)])
    n = len(u)
    i = np.arange(n)
    lo = np.maximum(i - h, 0)
    hi = np.minimum(i + h, n - 1)
    return P[hi + 1] - P[lo]


def concentration_function(u, x, t, params):
    """Maximal windowed critical mass over all lattice centers.

    Returns (max mass, argmax point); ties break to the smallest lattice
    index.  The window radius must cover at least 2 boundary cells.
    """
    x, dx = _check_lattice(x)
    h = int(np.floor(t / dx + 1e-9))
    if h < 2:
        raise ParameterError(f"window radius t={t} spans fewer than 2 cells (dx={dx})")
    W = _window_masses(u, dx, params.two_star, h)
    i = int(np.argmax(W))
    return float(W[i]), float(x[i]), i


def select_scale(u, x, i0, settings, params):
    """Smallest lattice radius whose window at x[i0] holds eps_select mass.

    Monotone bisection over the node half-width; also returns the implied
    concentration scale mu = t/(2 r_select).  Raises NoConcentrationError
    when even the full lattice (or the reference window t0) misses the level.
    """
    x, dx = _check_lattice(x)
    eps = settings.eps_select
    if total_mass(u, dx, params.two_star) < eps:
        raise NoConcentrationError(
            f"full-box critical mass below eps_select={eps:.6g}: no concentration")
    h0 = max(int(np.floor(settings.t0 / dx + 1e-9)), 1)
    dens = np.abs(u) ** params.two_star * dx
    P = np.concatenate([[0.0], np.cumsum(dens)])
    n = len(u)

    def mass_at(h):
        lo = max(i0 - h, 0)
        hi = min(i0 + h, n - 1)
        return P[hi + 1] - P[lo]

    if mass_at(h0) < eps:
        raise NoConcentrationError(
            f"window mass {mass_at(h0):.6g} at the reference radius t0 stays below "
            f"eps_select={eps:.6g}: no concentration")
    lo_h, hi_h = 1, h0
    while lo_h < hi_h:
        mid = (lo_h + hi_h) // 2
        if mass_at(mid) >= eps:
            hi_h = mid
        else:
            lo_h = mid + 1
    t = lo_h * dx
    return t, t / (2.0 * settings.r_select)


# --- profile fitting ----------------------------------------------------------


@dataclass(frozen=True)
class BubbleFit:
    """Gauss-Newton output: fitted bubble, offset nuisance, diagnostics."""

    bubble: Bubble
    offset: float
    converged: bool
    n_iter: int
    cost: float
    grad_norm: float
    window: tuple


def _model_and_jacobian(theta, xw, p, with_offset):
    a, loglam, A = theta[0], theta[1], theta[2]
    b = theta[3] if with_offset else 0.0
    lam = np.exp(loglam)
    d = xw - a
    den = d * d + lam * lam
    core = (lam / den) ** p
    m = A * core + b
    cols = [
        A * core * p * 2.0 * d / den,          # d/da
        A * core * p * (d * d - lam * lam) / den,  # d/dloglam (= lam * d/dlam)
        core,                                   # d/dA
    ]
    if with_offset:
        cols.append(np.ones_like(xw))
    return m, np.stack(cols, axis=1)


def fit_bubble(u, x, i0, t, params, settings, init=None):
    """Least-squares fit of the bubble profile on the window around x[i0].

    Damped Gauss-Newton (Levenberg regularization) over (a, log lambda, A)
    plus an optional constant offset; initialized at the window center, half
    the window radius, and the center value times lambda^((n-2g)/2).  The
    fitted amplitude is clamped nonnegative.  Non-convergence returns the
    best iterate flagged, never raises.
    """
    x, dx = _check_lattice(x)
    half = max(int(np.floor(settings.fit_window_factor * t / dx + 1e-9)), 4)
    lo = max(i0 - half, 0)
    hi = min(i0 + half, len(x) - 1)
    xw = x[lo:hi + 1]
    uw = np.asarray(u, dtype=float)[lo:hi + 1]
    p = params.trace_power
    with_offset = settings.fit_offset

    if init is None:
        # multi-start over the scale: on windows comparable to lambda the
        # offset direction is nearly degenerate with (lambda, A) and a single
        # Gauss-Newton basin can undershoot the scale badly
        starts = []
        a0 = x[i0]
        for lam0 in (max(t / 2.0, dx), max(2.0 * t, dx)):
            A0 = max(abs(u[i0]), 1e-12) * lam0 ** p
            starts.append(np.array([a0, np.log(lam0), A0]
                                   + ([0.0] if with_offset else [])))
        best_fit = None
        for theta0 in starts:
            cand = _gauss_newton(theta0, xw, uw, p, with_offset, settings, dx, x,
                                 lo, hi)
            if best_fit is None or cand.cost < best_fit.cost:
                best_fit = cand
        return best_fit
    theta = np.array([init.center[0], np.log(init.lam), init.amplitude]
                     + ([0.0] if with_offset else []))
    return _gauss_newton(theta, xw, uw, p, with_offset, settings, dx, x, lo, hi)


def _gauss_newton(theta, xw, uw, p, with_offset, settings, dx, x, lo, hi):
    theta = np.asarray(theta, dtype=float).copy()
    lm = 1e-8
    m, J = _model_and_jacobian(theta, xw, p, with_offset)
    r = m - uw
    cost = 0.5 * float(r @ r)
    best = (theta.copy(), cost)
    converged = False
    it = 0
    gnorm = np.inf
    scale = max(float(np.max(np.abs(uw))), 1e-12)
    for it in range(1, settings.fit_max_iter + 1):
        g = J.T @ r
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= settings.fit_gtol * scale * len(xw):
            converged = True
            break
        H = J.T @ J
        ok = False
        for _ in range(40):
            try:
                step = np.linalg.solve(H + lm * np.diag(np.maximum(np.diag(H), 1e-14)),
                                       -g)
            except np.linalg.LinAlgError:
                lm *= 10.0
                continue
            trial = theta + step
            trial[1] = np.clip(trial[1], np.log(dx / 4.0), np.log(10.0 * (x[-1] - x[0])))
            mt, Jt = _model_and_jacobian(trial, xw, p, with_offset)
            rt = mt - uw
            ct = 0.5 * float(rt @ rt)
            if ct < cost:
                theta, m, J, r, cost = trial, mt, Jt, rt, ct
                lm = max(lm * 0.3, 1e-12)
                ok = True
                break
            lm *= 10.0
        if not ok:
            break
        if cost < best[1]:
            best = (theta.copy(), cost)
    theta = best[0]
    amp = max(theta[2], 1e-12)
    bubble = Bubble(center=(float(theta[0]),), lam=float(np.exp(theta[1])),
                    amplitude=float(amp))
    return BubbleFit(bubble=bubble, offset=float(theta[3]) if with_offset else 0.0,
                     converged=converged, n_iter=it, cost=best[1],
                     grad_norm=gnorm, window=(int(lo), int(hi)))


def subtract_bubble(u, x, bubble, params, settings):
    """Remainder after removing the fitted bubble under the quintic cutoff.

    An infinite subtract_radius_factor degenerates the cutoff to 1 and removes
    the full fitted trace (useful for towering configurations, where the
    cutoff's leftover tail would sit on top of the next bubble's core).
    """
    vals = eval_trace(bubble, params, np.asarray(x))
    if np.isinf(settings.subtract_radius_factor):
        return np.asarray(u, dtype=float) - vals
    r_cut = settings.subtract_radius_factor * bubble.lam
    eta = quintic_cutoff(np.abs(np.asarray(x) - bubble.center[0]), r_cut)
    return np.asarray(u, dtype=float) - eta * vals


def planted_trace(x, bubble_list, params, r0=None):
    """Sum of cutoff bubble traces on the lattice (planted test inputs)."""
    x = np.asarray(x, dtype=float)
    u = np.zeros_like(x)
    for b in bubble_list:
        vals = eval_trace(b, params, x)
        if r0 is not None:
            vals = vals * quintic_cutoff(np.abs(x - b.center[0]), r0)
        u = u + vals
    return u


# --- the extraction loop ---------------------------------------------------------


@dataclass(frozen=True)
class ExtractionStep:
    index: int
    center: float
    window_radius: float
    mu: float
    mass_before: float
    mass_after: float
    energy_drop: float
    fit_converged: bool

    def as_dict(self):
        return {
            "index": self.index, "center": self.center,
            "window_radius": self.window_radius, "mu": self.mu,
            "mass_before": self.mass_before, "mass_after": self.mass_after,
            "energy_drop": self.energy_drop, "fit_converged": self.fit_converged,
        }


@dataclass
class DecompositionReport:
    """Extraction output: recovered bubbles, residual norms, energy ledger,
    separation matrix of the recovered family, halt reason."""

    bubbles: list
    offsets: list
    fitted_masses: list
    residual_mass: float
    residual_l2: float
    initial_energy: float
    final_energy: float
    steps: list
    separation: np.ndarray
    halt_reason: str
    residual: np.ndarray = dc_field(default=None, repr=False)

    @property
    def m(self):
        return len(self.bubbles)

    def as_dict(self):
        return {
            "m": self.m,
            "bubbles": [
                {"center": list(b.center), "lambda": b.lam, "amplitude": b.amplitude,
                 "fitted_mass": mass, "offset": off}
                for b, mass, off in zip(self.bubbles, self.fitted_masses, self.offsets)
            ],
            "residual_mass": self.residual_mass,
            "residual_l2": self.residual_l2,
            "energy_ledger": {
                "initial": self.initial_energy,
                "per_step_drop": [s.energy_drop for s in self.steps],
                "final": self.final_energy,
            },
            "steps": [s.as_dict() for s in self.steps],
            "separation": [[float(v) for v in row] for row in self.separation],
            "halt_reason": self.halt_reason,
        }


def extract_all(u, x, settings, params):
    """Run the full decomposition loop on a trace field.

    Halt reasons: "compact residual" (remaining critical energy below the
    stop fraction of one quantum), "budget exhausted" (m_max bubbles removed
    with energy still above threshold), "no concentration" (energy above
    threshold but too diffuse for the selection window; surfaced as a halt,
    not an exception).
    """
    settings.validate(params)
    x, dx = _check_lattice(x)
    u0 = np.asarray(u, dtype=float).copy()
    work = u0.copy()
    gn = params.gamma / params.n
    estar = params.energy_quantum
    initial_energy = gn * total_mass(work, dx, params.two_star)

    bubbles, offsets, steps = [], [], []
    halt = "budget exhausted"
    for step_idx in range(1, settings.m_max + 1):
        mass = total_mass(work, dx, params.two_star)
        if gn * mass < settings.stop_fraction * estar:
            halt = "compact residual"
            break
        try:
            _, _, i0 = concentration_function(work, x, settings.t0, params)
            t, mu = select_scale(work, x, i0, settings, params)
        except NoConcentrationError:
            halt = "no concentration"
            break
        fit = fit_bubble(work, x, i0, t, params, settings)
        new_work = subtract_bubble(work, x, fit.bubble, params, settings)
        mass_after = total_mass(new_work, dx, params.two_star)
        if mass_after >= mass:
            halt = "no concentration"
            break
        work = new_work
        bubbles.append(fit.bubble)
        offsets.append(fit.offset)
        steps.append(ExtractionStep(
            index=step_idx, center=fit.bubble.center[0], window_radius=t, mu=mu,
            mass_before=mass, mass_after=mass_after,
            energy_drop=gn * (mass - mass_after), fit_converged=fit.converged))
    else:
        mass = total_mass(work, dx, params.two_star)
        if gn * mass < settings.stop_fraction * estar:
            halt = "compact residual"

    # joint refinement: re-fit each bubble against the input minus the others,
    # then rebuild the remainder (keeps the sequential ledger intact)
    for _ in range(settings.refine_passes if bubbles else 0):
        for j, bj in enumerate(bubbles):
            others = u0.copy()
            for i, bi in enumerate(bubbles):
                if i != j:
                    others = subtract_bubble(others, x, bi, params, settings)
            ij = int(np.argmin(np.abs(x - bj.center[0])))
            refit = fit_bubble(others, x, ij, steps[j].window_radius, params,
                               settings, init=bj)
            if refit.converged:
                bubbles[j] = refit.bubble
                offsets[j] = refit.offset
        work = u0.copy()
        for bi in bubbles:
            work = subtract_bubble(work, x, bi, params, settings)

    residual_mass = total_mass(work, dx, params.two_star)
    return DecompositionReport(
        bubbles=bubbles, offsets=offsets,
        fitted_masses=[trace_mass(b, params) for b in bubbles],
        residual_mass=residual_mass,
        residual_l2=float(np.sqrt(dx * np.sum(work ** 2))),
        initial_energy=initial_energy,
        final_energy=gn * residual_mass,
        steps=steps,
        separation=separation_matrix([b.center for b in bubbles],
                                     [b.lam for b in bubbles]),
        halt_reason=halt,
        residual=work,
    )
