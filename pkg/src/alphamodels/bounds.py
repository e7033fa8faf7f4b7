"""Explicit constants of the a priori and convergence estimates, and monitors.

Every estimate carries an unspecified generic constant ``c``.  Here it is a
calibration dial ``c_cal`` (default 1) applied everywhere the generic
constant appears, including inside exponentials.  ``calibrate`` returns the
smallest dial value for which a measured quantity sits under its bound.

Smallness hypotheses on alpha are hard gates: a constant whose hypothesis
fails is reported as ``None`` with a failed :class:`Hypothesis` and is never
evaluated anyway.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from alphamodels.models import ModelKind, SimConfig
from alphamodels.spectral import (
    Lattice,
    SpectralField,
    eval_grid,
    filter_factor,
    inner_hat,
    linf_norm,
    next_shell,
    random_field,
    stokes_norm_sq,
)

QUADRATURE_SLACK = 1e-6


class HypothesisError(ValueError):
    """A theorem's smallness hypothesis does not hold."""


@dataclass(frozen=True)
class Hypothesis:
    name: str
    holds: bool
    detail: str

    def as_dict(self) -> dict:
        return {"name": self.name, "holds": self.holds, "detail": self.detail}


def hypothesis_box(L: float, alpha: float) -> Hypothesis:
    ok = alpha > 0 and L / (2 * math.pi * alpha) >= 1
    return Hypothesis("box_over_alpha", ok, f"L/(2 pi alpha) = {L / (2 * math.pi * alpha) if alpha > 0 else math.inf:.6g} (need >= 1)")


def hypothesis_galerkin(alpha: float, lam_next: float) -> Hypothesis:
    ok = alpha**2 <= 1.0 / lam_next * (1 + 1e-12)
    return Hypothesis("alpha_sq_below_inverse_eigenvalue", ok, f"alpha^2 = {alpha**2:.6g}, 1/lambda_(m+1) = {1 / lam_next:.6g}")


def hypothesis_combined(L: float, alpha: float, lam_next: float) -> Hypothesis:
    lim = 2 * math.pi / (lam_next * L)
    ok = alpha <= lim * (1 + 1e-12)
    return Hypothesis("alpha_below_coupled_limit", ok, f"alpha = {alpha:.6g}, 2 pi/(lambda_(m+1) L) = {lim:.6g}")


@dataclass(frozen=True)
class DataNorms:
    """Squared norms of the data that enter the constants."""

    u0_l2_sq: float
    u0_h1_sq: float
    u0_h2_sq: float
    f_l2t_sq: float  # int_0^T |f|^2
    f_linf_sq: float  # sup_t |f|^2
    lambda1: float
    box_length: float
    horizon: float
    source: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, u0_hat, f_hat, lat: Lattice, horizon: float) -> "DataNorms":
        f_sq = stokes_norm_sq(f_hat, lat, 0) if f_hat is not None else 0.0
        return cls(
            u0_l2_sq=stokes_norm_sq(u0_hat, lat, 0),
            u0_h1_sq=stokes_norm_sq(u0_hat, lat, 1),
            u0_h2_sq=stokes_norm_sq(u0_hat, lat, 2),
            f_l2t_sq=horizon * f_sq,
            f_linf_sq=f_sq,
            lambda1=lat.lambda1,
            box_length=lat.box_length,
            horizon=horizon,
            source={"lattice": [lat.box_length, lat.N], "forcing": "time independent"},
        )

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "DataNorms":
        from alphamodels.models import GalerkinSystem

        sys_ = GalerkinSystem(cfg.with_(cutoff_k2=None))
        return cls.from_arrays(sys_.initial_state(), sys_.forcing, sys_.lattice, cfg.horizon)


def _log_box(L: float, alpha: float) -> float:
    return 1.0 + math.log(L / (2 * math.pi * alpha))


@dataclass
class BoundConstants:
    """All constants for one (nu, alpha, data, cutoff) with dial ``c_cal``."""

    nu: float
    alpha: float
    c_cal: float
    K0_sq: float
    Kt0_sq: float
    Kt01_sq: float
    Kt00_sq: float
    Kt02_sq: float
    eps_sq: float | None
    eps_tilde_sq: float | None
    Q: float | None = None
    R: float | None = None
    U_tilde: float | None = None
    V_tilde: float | None = None
    L_m: float | None = None
    e_sq: float | None = None
    lambda_m: float | None = None
    lambda_next: float | None = None
    c0: float | None = None
    hypotheses: list = field(default_factory=list)

    def require(self, name: str) -> float:
        val = getattr(self, name)
        if val is None:
            failed = [h.detail for h in self.hypotheses if not h.holds]
            raise HypothesisError(f"{name} unavailable: {'; '.join(failed) or 'not requested'}")
        return val

    def as_dict(self) -> dict:
        d = asdict(self)
        d["hypotheses"] = [h.as_dict() for h in self.hypotheses]
        return d


def compute_constants(
    cfg: SimConfig,
    data: DataNorms,
    c_cal: float = 1.0,
    lambda_m: float | None = None,
    lambda_next: float | None = None,
    c0: float | None = None,
) -> BoundConstants:
    """Evaluate every constant by direct substitution with c = c_cal.

    ``lambda_m`` and ``lambda_next`` (the last retained and the first
    discarded eigenvalue) switch on the Galerkin-error constants.
    """
    if c_cal < 0:
        raise ValueError("c_cal must be >= 0")
    nu, a, c = cfg.nu, cfg.alpha, c_cal
    lam1, T, L = data.lambda1, data.horizon, data.box_length
    int_f = data.f_l2t_sq
    K0 = data.u0_l2_sq + int_f / (nu * lam1)
    h1_energy = data.u0_h1_sq + a**2 * data.u0_h2_sq
    Kt0 = h1_energy + int_f / nu
    Kt01 = data.u0_l2_sq + a**2 * data.u0_h1_sq + int_f / (nu * lam1)
    grow = math.exp(c * Kt01 / nu**2)
    Kt00 = grow * h1_energy + grow * int_f / nu
    Kt02 = h1_energy + int_f / nu + c / nu**2 * Kt00 * Kt01
    hyps = []
    eps = eps_t = None
    log_box = None
    if a > 0:
        h = hypothesis_box(L, a)
        hyps.append(h)
        if h.holds:
            log_box = _log_box(L, a)
            pre = c * a**2 / nu * math.exp(c * K0 / nu**2)
            eps = pre * (T * Kt0**2 * log_box + int_f)
            eps_t = pre * (T * Kt02**2 * log_box + int_f)
    out = BoundConstants(nu, a, c, K0, Kt0, Kt01, Kt00, Kt02, eps, eps_t, c0=c0, hypotheses=hyps)
    if lambda_m is not None and lambda_next is not None:
        out.lambda_m, out.lambda_next = lambda_m, lambda_next
        hg = hypothesis_galerkin(a, lambda_next)
        hyps.append(hg)
        if log_box is not None and hg.holds:
            Q = data.u0_h2_sq + c / nu**2 * (data.f_linf_sq + Kt0**2 * log_box)
            R = c / nu**2 * Kt0**2 * log_box
            U = c / nu * (Kt0 * T + Kt0 / (nu * lambda_next) + Kt0**2 * T / (nu**2 * lam1))
            V = c / nu * Kt0 * (Q + R) * T + c / (nu**2 * lambda_next) * Kt0 * (Q + R) + c / nu**2 * Kt0**2
            Lm = 1.0 + math.log(lambda_m / lam1)
            out.Q, out.R, out.U_tilde, out.V_tilde, out.L_m = Q, R, U, V, Lm
            out.e_sq = (Q + R + Lm * U * V) / lambda_next**2
    return out


def alpha_error_bound(model: ModelKind, constants: BoundConstants) -> float:
    """epsilon^2 for Leray-alpha and Bardina, epsilon-tilde^2 for NS-alpha and ML-alpha."""
    if model in (ModelKind.NS_ALPHA, ModelKind.MODIFIED_LERAY_ALPHA):
        return constants.require("eps_tilde_sq")
    if model in (ModelKind.LERAY_ALPHA, ModelKind.SIMPLIFIED_BARDINA):
        return constants.require("eps_sq")
    raise ValueError(f"no alpha-convergence bound for {model}")


def combined_shape(lambda_next: float, lambda1: float) -> float:
    """(lambda_1/lambda_(m+1))^2 log(lambda_(m+1)/lambda_1)."""
    r = lambda_next / lambda1
    return math.log(r) / r**2


def mode_count_shape(m: int) -> float:
    """(1/(m+1))^2 log(m+1)."""
    return math.log(m + 1) / (m + 1) ** 2


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------


def calibrate(bound_of_c, measured: float, c_max: float = 1e6) -> float:
    """Smallest c >= 0 with measured <= bound_of_c(c); bound must increase in c.

    Returns 0 when the bound already holds at c = 0 and inf when it fails
    at ``c_max``.
    """
    def bound(c):
        try:
            return bound_of_c(c)
        except OverflowError:
            return math.inf

    if measured <= 0 or bound(0.0) >= measured:
        return 0.0
    hi = 1e-12
    while bound(hi) < measured:
        if hi >= c_max:
            return math.inf
        hi = min(hi * 10, c_max)
    lo = hi / 10 if hi > 1e-12 else 0.0
    if lo == 0.0:
        return hi
    c = min(brentq(lambda c: math.log(min(bound(c), 1e308)) - math.log(measured), lo, hi, xtol=1e-14, rtol=1e-12), hi)
    # land on the passing side of the root; hi always passes
    step = c * 2.0**-52
    while bound(c) < measured:
        c = min(c + step, hi)
        step *= 2.0
    return c


# --------------------------------------------------------------------------
# trajectory monitors
# --------------------------------------------------------------------------


@dataclass
class EstimateCheck:
    name: str
    bound_name: str
    lhs_max: float
    bound: float | None
    ratio: float | None
    t_worst: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _estimate_specs(model: ModelKind):
    """(name, energy weights, dissipation weights, bound attribute, pointwise)."""
    l2 = ("l2_energy", (0, 1), (1, 2))
    h1 = ("h1_energy", (1, 2), (2, 3))
    if model is ModelKind.NSE:
        return [("energy", (0, None), (1, None), "K0_sq", False)]
    if model in (ModelKind.LERAY_ALPHA, ModelKind.SIMPLIFIED_BARDINA):
        return [(h1[0], h1[1], h1[2], "Kt0_sq", False)]
    return [
        (l2[0], l2[1], l2[2], "Kt01_sq", False),
        ("h1_pointwise", h1[1], None, "Kt00_sq", True),
        (h1[0], h1[1], h1[2], "Kt02_sq", False),
    ]


def _series(traj, key: int) -> np.ndarray:
    return traj.norms[("l2", "h1", "h2", "h3")[key]] ** 2


def monitor_apriori(traj, constants: BoundConstants, slack: float = QUADRATURE_SLACK) -> dict:
    """Check the model's a priori estimates along a sampled trajectory.

    The left side is E(t) + int_0^t D with trapezoid quadrature on the sample
    grid; each must stay below its constant up to ``1 + slack``.
    """
    model = traj.model
    t = traj.times
    a2 = (traj.config.alpha if model.filtered else 0.0) ** 2
    nu = traj.config.nu
    if t.size > 1 and np.max(np.diff(t)) > 10 * traj.meta.get("dt", traj.config.dt) * (1 + 1e-9):
        raise ValueError("sample spacing exceeds 10 dt; quadrature would be unreliable")
    checks = []
    for name, ew, dw, bname, pointwise in _estimate_specs(model):
        energy = _series(traj, ew[0]) + (a2 * _series(traj, ew[1]) if ew[1] is not None else 0.0)
        lhs = energy.copy()
        if not pointwise:
            diss = nu * (_series(traj, dw[0]) + (a2 * _series(traj, dw[1]) if dw[1] is not None else 0.0))
            lhs = lhs + cumulative_trapezoid(diss, t, initial=0.0)
        bound = getattr(constants, bname)
        i = int(np.argmax(lhs))
        ratio = float(lhs[i] / bound) if bound > 0 else (0.0 if lhs[i] == 0 else math.inf)
        ok = bool(np.all(np.isfinite(lhs)) and math.isfinite(bound) and ratio <= 1 + slack)
        checks.append(EstimateCheck(name, bname, float(lhs[i]), float(bound), ratio, float(t[i]), ok))
    return {
        "model": model.value,
        "checks": [c.as_dict() for c in checks],
        "max_ratio": max(c.ratio for c in checks),
        "passed": all(c.passed for c in checks),
    }


# --------------------------------------------------------------------------
# functional inequalities
# --------------------------------------------------------------------------


def brezis_gallouet(u: SpectralField, grid: int | None = None) -> dict:
    """Both sides of the logarithmic sup-norm inequality for one field."""
    lat = u.lattice
    h1 = math.sqrt(stokes_norm_sq(u.hat, lat, 1))
    if h1 == 0:
        raise ValueError("zero field")
    h2 = math.sqrt(stokes_norm_sq(u.hat, lat, 2))
    q = lat.box_length / (2 * math.pi) * h2 / h1
    g = grid or eval_grid(lat)
    lhs = linf_norm(u, g)
    shape = h1 * math.sqrt(1.0 + math.log(q))
    return {
        "lhs": lhs,
        "rhs_shape": shape,
        "ratio": lhs / shape,
        "M_used": math.sqrt(max(q * q - 1.0, 0.0)) + 1.0,
        "grid": g,
    }


def brezis_gallouet_battery(lat: Lattice, fields: int = 200, seed: int = 0, flat: bool = False) -> dict:
    ss = np.random.SeedSequence(seed)
    ratios = []
    for child in ss.spawn(fields):
        s = int(child.generate_state(1)[0])
        ratios.append(brezis_gallouet(random_field(lat, s, flat=flat))["ratio"])
    ratios = np.array(ratios)
    return {"resolution": lat.N, "fields": fields, "seed": seed, "flat": flat, "max_ratio": float(ratios.max()), "mean_ratio": float(ratios.mean())}


def filter_gain_check(lat: Lattice, alpha: float, trials: int = 100, seed: int = 0) -> dict:
    """Operator norm of (alpha^2 A)^(1/2) (I + alpha^2 A)^-1 and the pairing inequality.

    The pairing bound is |(phi - (I + alpha^2 A)^-1 phi, delta)| <= (alpha/2) |phi| ||delta||.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    lam = lat.eigenvalues[lat.mask]
    y = alpha * np.sqrt(lam)
    op = float(np.max(y / (1.0 + y * y)))
    worst = 0.0
    ff = filter_factor(lat, alpha)
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(trials):
        s1, s2 = (int(x) for x in child.generate_state(2))
        phi = random_field(lat, s1, s=2.0)
        delta = random_field(lat, s2, s=2.0)
        lhs = abs(inner_hat(phi.hat - ff * phi.hat, delta.hat, lat))
        rhs = 0.5 * alpha * math.sqrt(stokes_norm_sq(phi.hat, lat, 0) * stokes_norm_sq(delta.hat, lat, 1))
        worst = max(worst, lhs / rhs)
    return {
        "alpha": alpha,
        "resolution": lat.N,
        "operator_norm": op,
        "bound_holds": op <= 0.5 + 1e-15,
        "pairing_max_ratio": worst,
        "pairing_holds": worst <= 1.0,
    }


def linfty_model_bound(traj, constants: BoundConstants, c_cal: float | None = None) -> dict:
    """sup_t ||u(t)||_inf^2 <= c K^2 (1 + log(L/(2 pi alpha))), K = K0-tilde or K02-tilde."""
    cfg = traj.config
    h = hypothesis_box(cfg.box_length, cfg.alpha)
    if not h.holds:
        raise HypothesisError(h.detail)
    model = traj.model
    key = "Kt02_sq" if model in (ModelKind.NS_ALPHA, ModelKind.MODIFIED_LERAY_ALPHA) else "Kt0_sq"
    K = getattr(constants, key)
    log_box = _log_box(cfg.box_length, cfg.alpha)
    sup = float(np.nanmax(traj.norms["linf"] ** 2))
    shape = K * log_box
    c_min = sup / shape if shape > 0 else (0.0 if sup == 0 else math.inf)
    c_use = constants.c_cal if c_cal is None else c_cal
    return {
        "lhs": sup,
        "shape": shape,
        "constant": key,
        "c_min": c_min,
        "c_cal": c_use,
        "bound": c_use * shape,
        "passed": sup <= c_use * shape,
        "hypothesis": h.as_dict(),
    }


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def galerkin_eigenvalues(lat_or_L, cutoff_k2: int) -> tuple[float, float]:
    """(lambda_m, lambda_(m+1)) for a shell cutoff."""
    L = lat_or_L.box_length if isinstance(lat_or_L, Lattice) else float(lat_or_L)
    lam1 = (2 * math.pi / L) ** 2
    return lam1 * cutoff_k2, lam1 * next_shell(cutoff_k2)


def bound_report(traj, constants: BoundConstants, extra: dict | None = None) -> dict:
    """JSON-ready record: every inequality with both sides, ratio and status."""
    rep = {
        "config": traj.config.to_dict(),
        "constants": constants.as_dict(),
        "apriori": monitor_apriori(traj, constants),
    }
    if traj.model.filtered and traj.config.alpha > 0:
        try:
            rep["linfty"] = linfty_model_bound(traj, constants)
        except HypothesisError as exc:
            rep["linfty"] = {"passed": False, "hypothesis_failure": str(exc)}
    if extra:
        rep.update(extra)
    return rep


def dumps(report: dict) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.bool_):
            return bool(o)
        raise TypeError(type(o))

    return json.dumps(report, indent=2, sort_keys=True, default=default, allow_nan=True)
