"""Integrating-factor RK4 for du/dt = -nu A u + G(u, t).

With E = exp(-nu lambda h / 2) per mode, one step of length h is

    k1 = G(u, t)
    k2 = G(E (u + h/2 k1), t + h/2)
    k3 = G(E u + h/2 k2, t + h/2)
    k4 = G(E^2 u + h E k3, t + h)
    u+ = E^2 u + h/6 (E^2 k1 + 2 E (k2 + k3) + k4)

The linear part is exact, so G = 0 gives u+ = E^2 u to round-off.  Steps
have fixed length ``dt``; only the last step before a sample time is
shortened so samples land exactly on the requested times.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from alphamodels.models import GalerkinSystem, ModelKind, NumericalAbort, SimConfig
from alphamodels.spectral import (
    Lattice,
    SpectralVelocity,
    eval_grid,
    stokes_norm_sq,
    to_physical,
    transfer,
)

NORM_KEYS = ("l2", "h1", "h2", "h3", "linf")


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    richardson: bool = False
    max_steps: int = 10_000_000
    order: int = 4

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def stiffness(self, cfg: SimConfig, lat: Lattice | None = None) -> float:
        """dt * nu * lambda_max, reported for diagnostics only."""
        lat = lat or cfg.lattice
        return self.dt * cfg.nu * lat.lambda_max


def sample_times(cfg: SimConfig) -> np.ndarray:
    """Uniform sample grid on [0, T] with spacing at most 10 dt."""
    n = max(cfg.sample_intervals, math.ceil(cfg.horizon / (10 * cfg.dt) - 1e-9))
    return np.linspace(0.0, cfg.horizon, n + 1)


@dataclass
class Trajectory:
    """Samples of one run.

    ``states`` hold coefficients on ``store_lattice`` (the run lattice unless
    a coarser one was requested); ``tail_sq`` holds |u|^2 of the discarded
    modes so L^2 distances stay exact.
    """

    config: SimConfig
    lattice: Lattice
    store_lattice: Lattice
    times: np.ndarray
    states: list
    tail_sq: np.ndarray
    norms: dict
    cutoff_k2: int | None
    steps: int = 0
    wall_seconds: float = 0.0
    forcing: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def model(self) -> ModelKind:
        return self.config.model

    def state(self, i: int) -> SpectralVelocity:
        return SpectralVelocity(self.store_lattice, self.states[i], validate=False)

    @property
    def final(self) -> SpectralVelocity:
        return self.state(-1)

    def sup_norm(self, key: str = "l2") -> float:
        return float(np.max(self.norms[key]))


def distance_series(a: Trajectory, b: Trajectory) -> np.ndarray:
    """|a(t) - b(t)| at the shared sample times.

    Exact when at most one trajectory discarded modes at storage and the
    other stores everything it ran with on a lattice no finer than that
    storage lattice; other combinations are rejected.
    """
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise ValueError("trajectories have different sample grids")
    if a.store_lattice.box_length != b.store_lattice.box_length:
        raise ValueError("trajectories live on different boxes")
    fine, coarse = (a, b) if a.store_lattice.N >= b.store_lattice.N else (b, a)
    if coarse.tail_sq.any() and (fine.tail_sq.any() or fine.store_lattice.N > coarse.store_lattice.N):
        raise ValueError("discarded modes overlap modes of the other trajectory; distance not exact")
    out = np.empty(a.times.size)
    for i in range(a.times.size):
        up = transfer(coarse.states[i], coarse.store_lattice, fine.store_lattice)
        d2 = stokes_norm_sq(fine.states[i] - up, fine.store_lattice, 0)
        out[i] = math.sqrt(d2 + fine.tail_sq[i] + coarse.tail_sq[i])
    return out


class _Stepper:
    def __init__(self, system: GalerkinSystem):
        self.system = system
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def factors(self, h: float):
        f = self._cache.get(h)
        if f is None:
            e = np.exp(-0.5 * h * self.system.decay_rate)
            f = self._cache[h] = (e, e * e)
        return f

    def step(self, u: np.ndarray, t: float, h: float) -> np.ndarray:
        g = self.system.g
        e, e2 = self.factors(h)
        k1 = g(u, t)
        k2 = g(e * (u + 0.5 * h * k1), t + 0.5 * h)
        eu = e * u
        k3 = g(eu + 0.5 * h * k2, t + 0.5 * h)
        k4 = g(e2 * u + h * e * k3, t + h)
        return e2 * u + (h / 6.0) * (e2 * k1 + 2.0 * e * (k2 + k3) + k4)


def _norm_row(uh: np.ndarray, lat: Lattice, with_linf: bool) -> dict:
    row = {key: math.sqrt(stokes_norm_sq(uh, lat, s)) for s, key in enumerate(NORM_KEYS[:4])}
    if with_linf:
        vals = to_physical(uh, lat, eval_grid(lat))
        row["linf"] = float(np.sqrt(np.max(vals[0] ** 2 + vals[1] ** 2)))
    else:
        row["linf"] = float("nan")
    return row


def advance(
    state: np.ndarray,
    system: GalerkinSystem,
    t0: float,
    times: np.ndarray,
    stepper: StepperConfig,
    on_sample=None,
) -> tuple[np.ndarray, int]:
    """Integrate from ``t0`` through every time in ``times`` (ascending, > t0).

    ``on_sample(i, t, u)`` is called at each sample.  Returns the final state
    and the number of steps taken.
    """
    st = _Stepper(system)
    dt = stepper.dt
    u = np.array(state, dtype=np.complex128, copy=True)
    if not np.all(np.isfinite(u)):
        raise NumericalAbort("non-finite initial state", 0)
    t = t0
    steps = 0
    for i, t1 in enumerate(times):
        if t1 < t:
            raise ValueError("sample times must be ascending")
        span = t1 - t
        n_full = int(math.floor(span / dt + 1e-9))
        rest = span - n_full * dt
        if rest <= 1e-12 * dt:
            rest = 0.0
        if steps + n_full + (rest > 0) > stepper.max_steps:
            raise NumericalAbort(f"step budget {stepper.max_steps} exceeded", steps)
        base = t
        for j in range(n_full):
            u = st.step(u, base + j * dt, dt)
            steps += 1
            if not np.isfinite(u).all():
                raise NumericalAbort("non-finite state", steps)
        if rest > 0:
            u = st.step(u, base + n_full * dt, rest)
            steps += 1
            if not np.isfinite(u).all():
                raise NumericalAbort("non-finite state", steps)
        t = float(t1)
        if on_sample is not None:
            on_sample(i, t, u)
    return u, steps


class _Recorder:
    """Collects samples of a run, coarsening to ``store`` when asked."""

    def __init__(self, lat: Lattice, store: Lattice, with_linf: bool):
        if store.box_length != lat.box_length or store.N > lat.N:
            raise ValueError("store lattice must be a coarsening of the run lattice")
        self.lat, self.store, self.with_linf = lat, store, with_linf
        self.states, self.tails, self.rows = [], [], []

    def __call__(self, i, t, u):
        self.rows.append(_norm_row(u, self.lat, self.with_linf))
        if self.store == self.lat:
            self.states.append(u.copy())
            self.tails.append(0.0)
        else:
            kept = transfer(u, self.lat, self.store)
            self.states.append(kept)
            self.tails.append(max(stokes_norm_sq(u, self.lat, 0) - stokes_norm_sq(kept, self.store, 0), 0.0))

    def trajectory(self, cfg, system, times, stepper, steps, start) -> "Trajectory":
        return Trajectory(
            config=cfg,
            lattice=self.lat,
            store_lattice=self.store,
            times=times,
            states=self.states,
            tail_sq=np.array(self.tails),
            norms={k: np.array([r[k] for r in self.rows]) for k in NORM_KEYS},
            cutoff_k2=cfg.cutoff_k2,
            steps=steps,
            wall_seconds=_time.perf_counter() - start,
            forcing=system.forcing_m,
            meta={"dt": stepper.dt, "stiffness": stepper.stiffness(cfg, self.lat)},
        )


def simulate(
    cfg: SimConfig,
    store_lattice: Lattice | None = None,
    with_linf: bool = True,
    times: np.ndarray | None = None,
    system: GalerkinSystem | None = None,
    dt: float | None = None,
) -> Trajectory:
    """Run ``cfg`` from its initial data and record the sample grid."""
    start = _time.perf_counter()
    system = system or GalerkinSystem(cfg)
    rec = _Recorder(system.lattice, store_lattice or system.lattice, with_linf)
    times = sample_times(cfg) if times is None else np.asarray(times, dtype=float)
    stepper = StepperConfig(dt or cfg.dt)
    u0 = system.initial_state()
    rec(0, float(times[0]), u0)
    _, steps = advance(u0, system, float(times[0]), times[1:], stepper, lambda i, t, u: rec(i + 1, t, u))
    return rec.trajectory(cfg, system, times, stepper, steps, start)


@dataclass(frozen=True)
class RichardsonResult:
    dt_used: float
    error_estimate: float
    scale: float
    tolerance: float
    passed: bool
    aborted: bool = False

    def as_dict(self) -> dict:
        return {
            "dt_used": self.dt_used,
            "error_estimate": self.error_estimate,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "aborted": self.aborted,
        }


def richardson_check(
    cfg: SimConfig,
    temporal_tol: float = 1e-9,
    coarse: Trajectory | None = None,
) -> tuple[RichardsonResult, Trajectory | None]:
    """Compare the run at dt with a rerun at dt/2 on the same sample grid.

    Passes when sup_t |u_dt - u_dt/2| <= temporal_tol * sup_t |u_dt/2|.
    Returns the result and the dt/2 trajectory (None if a run aborted).
    ``coarse`` reuses an existing full-resolution dt run.
    """
    if coarse is not None and coarse.store_lattice != coarse.lattice:
        raise ValueError("coarse run was stored below its resolution; use simulate_checked")
    try:
        a = coarse or simulate(cfg, with_linf=False)
        b = simulate(cfg, with_linf=False, times=a.times, dt=cfg.dt / 2)
    except NumericalAbort:
        return RichardsonResult(cfg.dt, float("inf"), float("nan"), temporal_tol, False, True), None
    err = float(np.max(distance_series(a, b)))
    scale = b.sup_norm("l2")
    tol = temporal_tol * scale if scale > 0 else temporal_tol
    ok = bool(np.isfinite(err) and err <= tol)
    return RichardsonResult(cfg.dt, err, scale, tol, ok), b


def simulate_checked(
    cfg: SimConfig,
    temporal_tol: float = 1e-9,
    store_lattice: Lattice | None = None,
    with_linf: bool = True,
) -> tuple[Trajectory, RichardsonResult]:
    """Run at dt and dt/2 in lockstep; compare at full resolution at every sample.

    Returns the dt trajectory (stored on ``store_lattice``) and the step
    halving verdict.  The dt trajectory is identical to ``simulate(cfg)``.
    """
    start = _time.perf_counter()
    system = GalerkinSystem(cfg)
    lat = system.lattice
    rec = _Recorder(lat, store_lattice or lat, with_linf)
    times = sample_times(cfg)
    sa, sb = StepperConfig(cfg.dt), StepperConfig(cfg.dt / 2)
    ua = system.initial_state()
    ub = ua.copy()
    rec(0, float(times[0]), ua)
    err, scale, steps, aborted = 0.0, math.sqrt(stokes_norm_sq(ub, lat, 0)), 0, False
    t = float(times[0])
    for i, t1 in enumerate(times[1:]):
        ua, n = advance(ua, system, t, times[i + 1 : i + 2], sa)
        steps += n
        rec(i + 1, float(t1), ua)
        if not aborted:
            try:
                ub, _ = advance(ub, system, t, times[i + 1 : i + 2], sb)
            except NumericalAbort:
                aborted = True
            else:
                err = max(err, math.sqrt(stokes_norm_sq(ua - ub, lat, 0)))
                scale = max(scale, math.sqrt(stokes_norm_sq(ub, lat, 0)))
        t = float(t1)
    traj = rec.trajectory(cfg, system, times, sa, steps, start)
    if aborted:
        return traj, RichardsonResult(cfg.dt, float("inf"), float("nan"), temporal_tol, False, True)
    tol = temporal_tol * scale if scale > 0 else temporal_tol
    return traj, RichardsonResult(cfg.dt, err, scale, tol, bool(math.isfinite(err) and err <= tol))
