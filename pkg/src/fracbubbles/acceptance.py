"""Acceptance suite: one callable per criterion, shared by pytest and the CLI.

Each criterion pins its reference configuration here (grids, parameter pairs,
tolerances) and returns a CriterionResult; the runner prints one PASS/FAIL
line per criterion.  Tolerances are fixed by the build contract, never
calibrated at run time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bubbles import calibrate_amplitude, make_bubble
from .extension import get_extension_table
from .extraction import default_settings, extract_all, planted_trace
from .grid import (HalfSpaceGrid, eps_regularity_audit, functional_value,
                   harmonic_extension, norm_w, random_compact_field,
                   sample_bubble_extension, trace_mass_crit, weighted_dirichlet)
from .params import FracParams
from .synthesis import BubbleConfig, run_schedule

DEFAULT_SEED = 1712


@dataclass
class CriterionResult:
    cid: int
    description: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} criterion {self.cid}: {self.description}"

    def as_dict(self):
        return {"criterion": self.cid, "description": self.description,
                "passed": self.passed, "seconds": self.seconds,
                "details": self.details}


def _params_pairs():
    return FracParams.create(3, 0.5), FracParams.create(1, 0.25)


# --- criterion 1: closed-form constants vs arbitrary-precision oracle -----------


def criterion_1():
    import mpmath as mp
    mp.mp.dps = 40
    p3, _ = _params_pairs()
    d_star_dev = abs(p3.d_star - 1.0)
    S_ref = float(1 / (2 * mp.pi ** mp.mpf("0.5"))
                  * mp.gamma(mp.mpf("0.5")) / mp.gamma(mp.mpf("0.5"))
                  * mp.gamma(1) / mp.gamma(2)
                  * (mp.gamma(3) / mp.gamma(mp.mpf("1.5"))) ** (mp.mpf(1) / 3))
    S_dev = abs(p3.sobolev_S / S_ref - 1.0)
    passed = d_star_dev < 1e-12 and S_dev < 1e-10
    return CriterionResult(1, "d*(1/2) = 1 exactly; S(3, 0.5) matches the "
                              "arbitrary-precision oracle to 1e-10",
                           passed, {"d_star_dev": d_star_dev, "S_dev": S_dev,
                                    "S_ref": S_ref})


# --- criterion 2: calibration cross-check through the spectral oracle ------------


def criterion_2():
    details = {}
    passed = True
    for p in _params_pairs():
        res = calibrate_amplitude(p)  # raises if the oracle disagrees > 1e-2
        lhs = (p.gamma / p.n) * p.sobolev_S ** (-p.n / (2 * p.gamma))
        rhs = (p.gamma / p.n) * p.kappa ** p.two_star * p.mass_constant
        rel = abs(lhs / rhs - 1.0)
        key = f"n{p.n}_g{p.gamma}"
        details[key] = {"identity_rel": rel, "kappa": p.kappa,
                        "oracle_rel_dev": res.rel_dev,
                        "oracle_ratio_spread": res.ratio_spread}
        passed = passed and rel < 1e-4 and res.rel_dev < 1e-2
    return CriterionResult(2, "beta_0 route equals the calibrated-bubble mass route "
                              "to 1e-4 for (3, 0.5) and (1, 0.25), kappa validated "
                              "by the spectral oracle", passed, details)


# --- criterion 3: bubble energy constancy across scales and centers ---------------


def criterion_3():
    p3 = FracParams.create(3, 0.5)
    tab3 = get_extension_table(p3)
    g3 = HalfSpaceGrid(params=p3, L=48.0, N=1536, Y=48.0, M=96, kind="radial")
    vals = []
    for lam in (0.5, 1.0, 2.0):
        fld = sample_bubble_extension(g3, make_bubble(p3, lam=lam), tab3)
        vals.append(functional_value(fld))
    spread3 = (max(vals) - min(vals)) / abs(np.mean(vals))

    p1 = FracParams.create(1, 0.1)
    tab1 = get_extension_table(p1)
    g1 = HalfSpaceGrid(params=p1, L=64.0, N=1024, Y=64.0, M=48, q=15.0, kind="full")
    cvals = []
    for center in (0.0, 5.0):
        fld = sample_bubble_extension(g1, make_bubble(p1, center=(center,), lam=1.0),
                                      tab1)
        cvals.append(functional_value(fld))
    spread1 = abs(cvals[0] - cvals[1]) / abs(np.mean(cvals))

    passed = spread3 < 0.02 and spread1 < 0.02
    return CriterionResult(3, "grid energy of the calibrated bubble extension agrees "
                              "across lambda in {0.5, 1, 2} (radial n=3) and across "
                              "two centers (full n=1) within 2%", passed,
                           {"lambda_sweep_values": vals, "lambda_spread": spread3,
                            "center_values": cvals, "center_spread": spread1,
                            "energy_quantum_n3": p3.energy_quantum})


# --- criterion 4: two-route extension agreement ------------------------------------


def criterion_4():
    p3 = FracParams.create(3, 0.5)
    tab3 = get_extension_table(p3)
    g3 = HalfSpaceGrid(params=p3, L=48.0, N=1536, Y=48.0, M=96, kind="radial")
    fe3 = sample_bubble_extension(g3, make_bubble(p3, lam=1.0), tab3)
    gap3 = _two_route_gap(fe3)

    # thin-tail order and a large box with steep vertical grading: the natural
    # lateral condition relaxes the truncated low-frequency tail energy, a
    # ~5*(lam/L)^(n-2g) effect that only an L/lam in the thousands brings
    # under the stated 2% for the full line
    p1 = FracParams.create(1, 0.1)
    tab1 = get_extension_table(p1)
    g1 = HalfSpaceGrid(params=p1, L=3200.0, N=32000, Y=3200.0, M=64, q=15.0,
                       kind="full")
    fe1 = sample_bubble_extension(g1, make_bubble(p1, lam=1.0), tab1)
    gap1 = _two_route_gap(fe1)

    passed = abs(gap3) < 0.02 and abs(gap1) < 0.02
    return CriterionResult(4, "Poisson-quadrature vs discrete weighted-harmonic "
                              "extension energies agree within 2% (n=3 radial, "
                              "n=1 full grid)", passed,
                           {"gap_n3_radial": gap3, "gap_n1_full": gap1})


def _two_route_gap(fe):
    eq = weighted_dirichlet(fe)
    fh = harmonic_extension(fe.trace, fe.grid)
    eh = weighted_dirichlet(fh)
    return (eq - eh) / eq


# --- criterion 5: trace Sobolev extremality ------------------------------------------


def criterion_5(seed=DEFAULT_SEED):
    p = FracParams.create(1, 0.25)
    tab = get_extension_table(p)
    g = HalfSpaceGrid(params=p, L=16.0, N=512, Y=16.0, M=64, q=4.0, kind="full")
    fe = sample_bubble_extension(g, make_bubble(p, lam=1.0), tab)
    bubble_ratio = trace_mass_crit(fe) ** (2.0 / p.two_star) / weighted_dirichlet(fe)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        fld = random_compact_field(g, rng)
        d = weighted_dirichlet(fld)
        if d <= 0.0:
            continue
        ratio = trace_mass_crit(fld) ** (2.0 / p.two_star) / d
        worst = max(worst, ratio)
    S = p.sobolev_S
    passed = bubble_ratio >= 0.95 * S and worst <= 1.05 * S
    return CriterionResult(5, "bubble attains >= 0.95*S in the discrete trace "
                              "Sobolev quotient; 50 random compact fields stay "
                              "below 1.05*S", passed,
                           {"bubble_ratio_over_S": bubble_ratio / S,
                            "worst_random_over_S": worst / S, "S": S})


# --- criteria 6/7: Palais-Smale synthesis and separation -------------------------------


def shipped_config_json(name):
    """Parsed JSON of a configuration shipped inside the package."""
    import importlib.resources
    import json

    ref = importlib.resources.files("fracbubbles") / "configs" / f"{name}.json"
    return json.loads(ref.read_text())


def shipped_ps_config():
    """The m=2 well-separated schedule used by criteria 6 and 7."""
    from .synthesis import config_from_dict

    return config_from_dict(shipped_config_json("ps_m2_n1"))


def criterion_6():
    cfg = shipped_ps_config()
    rows, fields = run_schedule(cfg, keep_fields=True)
    residuals = [r.residual for r in rows]
    defects = [abs(r.defect) for r in rows]
    norms = [norm_w(f) for f in fields]
    # m = 0 truncation floor: the background-only family has zero defect
    m0 = BubbleConfig(params=cfg.params, grid=cfg.grid, placements=[],
                      q_mode="zero")
    floor = abs(run_schedule(m0)[0].defect)
    ok_resid = residuals[-1] <= 0.5 * residuals[0]
    ok_defect = defects[-1] <= max(0.5 * defects[0], floor)
    ok_bounded = all(np.isfinite(r.i_total) for r in rows) and max(norms) < 1e6
    passed = ok_resid and ok_defect and ok_bounded
    return CriterionResult(6, "shipped m=2 schedule: dual residual and energy "
                              "defect decay to half their initial values, "
                              "functional values uniformly bounded", passed,
                           {"residuals": residuals, "defects": defects,
                            "norm_bound": max(norms), "m0_floor": floor})


def criterion_7():
    cfg = shipped_ps_config()
    prev = None
    strictly = True
    mats = []
    from .synthesis import separation
    for alpha in range(1, cfg.n_steps + 1):
        sep = separation(cfg, alpha)
        off = sep[~np.eye(cfg.m, dtype=bool)]
        mats.append(off.tolist())
        if prev is not None and not np.all(off > prev):
            strictly = False
        prev = off
    return CriterionResult(7, "all off-diagonal separation entries strictly "
                              "increase along the shipped schedule (exact "
                              "arithmetic)", strictly, {"offdiag_by_alpha": mats})


# --- criterion 8: extraction flagship -----------------------------------------------


def flagship_setup():
    """Planted 3-bubble input of the decomposition flagship."""
    p = FracParams.create(1, 0.1)
    x = np.linspace(-8.0, 8.0, 8192)
    planted = [make_bubble(p, center=(-6.0,), lam=0.25),
               make_bubble(p, center=(0.0,), lam=1.0 / 16.0),
               make_bubble(p, center=(6.0,), lam=1.0 / 64.0)]
    u = planted_trace(x, planted, p)
    single = p.kappa ** p.two_star * p.mass_constant
    settings = default_settings(p, x[1] - x[0], eps_select=0.3 * single,
                                r_select=0.1, t0=0.2, subtract_radius_factor=6.0)
    return p, x, u, planted, settings


def criterion_8():
    p, x, u, planted, settings = flagship_setup()
    single = p.kappa ** p.two_star * p.mass_constant
    rep = extract_all(u, x, settings, p)
    param_errs = []
    for b in rep.bubbles:
        pb = min(planted, key=lambda q: abs(q.center[0] - b.center[0]))
        param_errs.append(max(abs(b.center[0] - pb.center[0]) / pb.lam,
                              abs(b.lam - pb.lam) / pb.lam))
    drops = [s.energy_drop / p.energy_quantum for s in rep.steps]
    ok = (rep.m == 3
          and all(e <= 0.05 for e in param_errs)
          and all(0.75 <= d <= 1.25 for d in drops)
          and rep.residual_mass <= 0.5 * single
          and rep.halt_reason == "compact residual")
    return CriterionResult(8, "planted 3-bubble input: m=3 recovered, (a, lambda) "
                              "within 5%, per-step drop within 25% of E*, final "
                              "residual below half a quantum", ok,
                           {"m": rep.m, "param_errs": param_errs, "drops": drops,
                            "residual_over_single": rep.residual_mass / single,
                            "halt": rep.halt_reason})


# --- criterion 9: epsilon-regularity audit --------------------------------------------


def criterion_9(seed=DEFAULT_SEED):
    p = FracParams.create(1, 0.25)
    tab = get_extension_table(p)
    single = p.kappa ** p.two_star * p.mass_constant
    rng = np.random.default_rng(seed)
    windows = [(float(s * rng.uniform(8.0, 11.0) * 0.5), float(rng.uniform(0.6, 1.2)))
               for s in rng.choice([-1.0, 1.0], size=10)]

    def audit_on(N):
        g = HalfSpaceGrid(params=p, L=16.0, N=N, Y=16.0, M=64, q=4.0, kind="full")
        fld = sample_bubble_extension(g, make_bubble(p, lam=0.5), tab)
        return [eps_regularity_audit(fld, c, r, mass_threshold=0.1 * single)
                for (c, r) in windows]

    coarse = audit_on(512)
    fine = audit_on(1024)
    cs = [a.fitted_c for a in coarse]
    ratios = [f.fitted_c / c.fitted_c for c, f in zip(coarse, fine) if c.fitted_c > 0]
    ok_mass = all(a.status == "ok" for a in coarse)
    ok_bound = all(c < 1e3 for c in cs)
    ok_stable = all(0.5 < r < 2.0 for r in ratios)
    passed = ok_mass and ok_bound and ok_stable
    return CriterionResult(9, "fitted local-energy constants over 10 random "
                              "low-mass windows stay below 1e3 and move by "
                              "less than 2x under N -> 2N", passed,
                           {"fitted_c": cs, "refinement_ratios": ratios})


# --- criterion 10: determinism ---------------------------------------------------------


def criterion_10(seed=DEFAULT_SEED, workdir=None):
    import tempfile
    from pathlib import Path

    from .cli import run_cli_lines

    own_tmp = None
    if workdir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix="fracbubbles-accept-")
        workdir = own_tmp.name
    base = Path(workdir)
    digests = []
    try:
        for tag in ("a", "b"):
            out = base / tag
            out.mkdir(parents=True, exist_ok=True)
            run_cli_lines(["constants", "--n", "3", "--gamma", "0.5",
                           "--out", str(out / "constants.json")])
            run_cli_lines(["synthesize", "--config", "shipped:ps_m2_n1",
                           "--out", str(out), "--seed", str(seed)])
            reports = sorted(q for q in out.rglob("*")
                             if q.is_file() and q.name != "manifest.json")
            import hashlib
            h = hashlib.sha256()
            for q in reports:
                h.update(q.name.encode())
                h.update(q.read_bytes())
            digests.append(h.hexdigest())
        passed = digests[0] == digests[1]
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()
    return CriterionResult(10, "repeating a suite with the same seed yields "
                               "byte-identical reports", passed,
                           {"digests": digests})


# --- runner ------------------------------------------------------------------------


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10,
}


def run_criterion(cid, **kwargs):
    t0 = time.time()
    res = CRITERIA[cid](**kwargs)
    res.seconds = time.time() - t0
    return res


def run_suite(ids=None, verbose=True):
    """Run the acceptance criteria, printing one PASS/FAIL line per criterion."""
    results = []
    for cid in sorted(ids or CRITERIA):
        res = run_criterion(cid)
        results.append(res)
        if verbose:
            print(f"{res.line()}  [{res.seconds:.1f}s]", flush=True)
    return results
