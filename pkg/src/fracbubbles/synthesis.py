"""Synthesis of "solution plus bubbles" Palais-Smale families.

A configuration fixes a background, a list of bubbles (unit reference scale,
center, decreasing scale schedule, cutoff radius) and a boundary-potential
schedule Q_alpha -> Q_inf.  For each schedule index the synthesized field is

    u_alpha = u0 + sum_j eta_j * (mu_j)^(-(n-2g)/2) U((. - x_j)/mu_j)

with eta_j the C^2 half-ball cutoff; extension values come from the Poisson
module's cached table.  The energy ledger records the splitting
I(u_alpha) - I(u0) - m E* and the dual-norm residual along the schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bubbles import Bubble, quintic_cutoff, separation_matrix
from .errors import ConfigError, ParameterError
from .extension import get_extension_table
from .grid import (Field, HalfSpaceGrid, functional_value, ps_residual,
                   sample_bubble_extension, zero_field)
from .params import FracParams

# standing bound |Q_alpha| <= C of the problem class
_Q_BOUND = 50.0


@dataclass(frozen=True)
class BubblePlacement:
    """One bubble of the family: boundary center, decreasing scale schedule
    mu(alpha), cutoff radius r0 (eta = 1 inside r0, 0 outside 2 r0)."""

    center: float
    mu_schedule: tuple
    r0: float
    lam_ref: float = 1.0
    amplitude: float = None  # None -> calibrated kappa

    def __post_init__(self):
        object.__setattr__(self, "mu_schedule", tuple(float(m) for m in self.mu_schedule))
        mus = self.mu_schedule
        if len(mus) < 1 or any(m <= 0 for m in mus):
            raise ConfigError("mu_schedule must be a nonempty list of positive scales")
        if any(mus[i + 1] >= mus[i] for i in range(len(mus) - 1)):
            raise ConfigError("mu_schedule must decrease strictly toward zero")
        if self.r0 <= 0:
            raise ConfigError("cutoff radius must be positive")

    def scale_at(self, alpha):
        return self.mu_schedule[alpha - 1] * self.lam_ref


@dataclass
class BubbleConfig:
    """Generator of a Palais-Smale family indexed by the schedule position."""

    params: FracParams
    grid: HalfSpaceGrid
    placements: list
    background: Field = None  # None -> zero background
    q_mode: str = "zero"  # "zero" | "converging"
    q_amplitude: float = 0.0
    q_width: float = 1.0
    q_center: float = 0.0

    def __post_init__(self):
        if self.grid.kind != "full":
            raise ConfigError("synthesis requires the full boundary lattice (n = 1)")
        if self.q_mode not in ("zero", "converging"):
            raise ConfigError(f"unknown Q mode {self.q_mode!r}")
        lengths = {len(p.mu_schedule) for p in self.placements}
        if len(lengths) > 1:
            raise ConfigError("all mu schedules must have the same length")
        for p in self.placements:
            if 2.0 * p.r0 > self.grid.L / 4.0:
                raise ConfigError(
                    f"cutoff violates 2*r0 <= L/4 (r0={p.r0}, L={self.grid.L})")
            if abs(p.center) + 2.0 * p.r0 > self.grid.L:
                raise ConfigError("cutoff support leaves the box")
        if self.background is not None and self.background.grid is not self.grid:
            raise ConfigError("background field lives on a different grid")
        qa = self.q_trace(1)
        if qa is not None and np.max(np.abs(qa)) > _Q_BOUND:
            raise ConfigError(f"|Q_alpha| exceeds the standing bound {_Q_BOUND}")

    @property
    def n_steps(self):
        if not self.placements:
            return 1
        return len(self.placements[0].mu_schedule)

    @property
    def m(self):
        return len(self.placements)

    # --- potential schedule ---------------------------------------------------

    def q_inf(self):
        """Limit potential Q_inf (zero baseline in the shipped configs)."""
        if self.q_mode == "zero":
            return None
        return np.zeros(self.grid.N)

    def q_trace(self, alpha):
        """Q_alpha = Q_inf + alpha^(-1) * (smooth compactly supported bump)."""
        if self.q_mode == "zero":
            return None
        x = self.grid.x
        t = (x - self.q_center) / self.q_width
        bump = np.zeros_like(x)
        inside = np.abs(t) < 1.0
        bump[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        return self.q_amplitude / alpha * bump

    # --- synthesis --------------------------------------------------------------

    def bubble_at(self, placement, alpha):
        amp = placement.amplitude if placement.amplitude is not None else self.params.kappa
        return Bubble(center=(placement.center,), lam=placement.scale_at(alpha),
                      amplitude=amp)


def synthesize(cfg, alpha, table=None):
    """Field u0 + sum of cutoff rescaled bubble extensions at schedule index alpha.

    Preconditions: 1 <= alpha <= n_steps and every scale covers at least
    4 boundary cells on the grid.
    """
    if not 1 <= alpha <= cfg.n_steps:
        raise ParameterError(f"schedule index {alpha} outside 1..{cfg.n_steps}")
    g = cfg.grid
    for p in cfg.placements:
        if p.scale_at(alpha) < 4.0 * g.dx:
            raise ParameterError(
                f"scale {p.scale_at(alpha):.4g} at alpha={alpha} is below 4 boundary "
                f"cells (dx={g.dx:.4g}); refine the grid or stop the schedule earlier")
    if table is None and cfg.placements:
        table = get_extension_table(cfg.params)
    out = zero_field(g) if cfg.background is None else cfg.background.copy()
    X = g.x[:, None]
    Yv = g.y[None, :]
    for p in cfg.placements:
        b = cfg.bubble_at(p, alpha)
        ext = sample_bubble_extension(g, b, table)
        rho = np.sqrt((X - p.center) ** 2 + Yv ** 2)
        out.samples += quintic_cutoff(rho, p.r0) * ext.samples
    return Field(g, out.samples)


def separation(cfg, alpha):
    """Exact pairwise separation matrix at schedule index alpha (m >= 2)."""
    if cfg.m < 2:
        raise ParameterError("separation needs at least two bubbles")
    centers = [(p.center,) for p in cfg.placements]
    scales = [p.scale_at(alpha) for p in cfg.placements]
    return separation_matrix(centers, scales)


@dataclass(frozen=True)
class LedgerRow:
    """One row of the energy ledger CSV (the documented 7 columns)."""

    alpha: int
    i_total: float
    i_background: float
    quantum_sum: float
    defect: float
    residual: float
    min_separation: float

    def as_dict(self):
        return {
            "alpha": self.alpha, "I_total": self.i_total,
            "I_background": self.i_background, "quantum_sum": self.quantum_sum,
            "defect": self.defect, "residual": self.residual,
            "min_separation": self.min_separation,
        }


def energy_ledger(cfg, alpha, table=None, fld=None):
    """Ledger record (I_total, I_background, m E*, defect, residual, min sep)."""
    if fld is None:
        fld = synthesize(cfg, alpha, table=table)
    i_total = functional_value(fld, cfg.q_trace(alpha))
    background = cfg.background if cfg.background is not None else zero_field(cfg.grid)
    i_back = functional_value(background, cfg.q_inf())
    quantum = cfg.m * cfg.params.energy_quantum
    if cfg.m >= 2:
        sep = separation(cfg, alpha)
        off = sep[~np.eye(cfg.m, dtype=bool)]
        min_sep = float(off.min())
    else:
        min_sep = float("nan")
    return LedgerRow(alpha=alpha, i_total=i_total, i_background=i_back,
                     quantum_sum=quantum, defect=i_total - i_back - quantum,
                     residual=ps_residual(fld, cfg.q_trace(alpha)),
                     min_separation=min_sep)


def run_schedule(cfg, table=None, keep_fields=False, threads=1):
    """Ledger rows over the whole schedule (optionally with the fields).

    Per-index synthesis is independent; threads > 1 maps the schedule over a
    thread pool (outputs are ordered by index either way, so reports are
    byte-identical regardless of the worker count).
    """
    if table is None and cfg.placements:
        table = get_extension_table(cfg.params)
    alphas = list(range(1, cfg.n_steps + 1))

    def one(alpha):
        fld = synthesize(cfg, alpha, table=table)
        return energy_ledger(cfg, alpha, table=table, fld=fld), fld

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        cfg.grid._norm_matrix_lu  # factor once before sharing across workers
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(one, alphas))
    else:
        pairs = [one(a) for a in alphas]
    rows = [r for r, _ in pairs]
    if keep_fields:
        return rows, [f for _, f in pairs]
    return rows


def config_from_dict(doc):
    """Build a BubbleConfig from the documented JSON schema.

    {"n": int, "gamma": float,
     "grid": {"L": float, "N": int, "Y": float, "M": int, "q": float?},
     "background": "zero",
     "bubbles": [{"center": float, "mu_schedule": [..], "r0": float,
                  "lam_ref": float?, "amplitude": float | "kappa"?}],
     "Q": {"mode": "zero"|"converging", "amplitude"?, "width"?, "center"?}}
    """
    try:
        params = FracParams.create(int(doc["n"]), float(doc["gamma"]))
        gspec = doc["grid"]
        grid = HalfSpaceGrid(params=params, L=float(gspec["L"]), N=int(gspec["N"]),
                             Y=float(gspec["Y"]), M=int(gspec["M"]),
                             q=float(gspec["q"]) if "q" in gspec else None,
                             kind="full")
        background = doc.get("background", "zero")
        if background != "zero":
            raise ConfigError("only the zero background is supported in config files; "
                              "precomputed backgrounds are a library-level feature")
        placements = []
        for b in doc.get("bubbles", []):
            amp = b.get("amplitude", "kappa")
            amp = None if amp == "kappa" else float(amp)
            placements.append(BubblePlacement(
                center=float(b["center"]), mu_schedule=tuple(b["mu_schedule"]),
                r0=float(b["r0"]), lam_ref=float(b.get("lam_ref", 1.0)),
                amplitude=amp))
        qspec = doc.get("Q", {"mode": "zero"})
        return BubbleConfig(params=params, grid=grid, placements=placements,
                            background=None, q_mode=qspec.get("mode", "zero"),
                            q_amplitude=float(qspec.get("amplitude", 0.0)),
                            q_width=float(qspec.get("width", 1.0)),
                            q_center=float(qspec.get("center", 0.0)))
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
