"""Bilinear terms B(u, w) = P((u.grad) w) and Bt(u, w) = -P(u x curl w).

Products are evaluated pseudo-spectrally on a grid zero-padded to at least
3N/2, so the quadratic product of two lattice fields is alias-free on the
retained modes: the result equals the exact Galerkin value.  The 2D curl is
the scalar ``omega = d1 w2 - d2 w1`` and ``u x (curl w) = (u2 omega, -u1 omega)``.

``convolution_oracle`` evaluates the same quantities by a direct sum over
mode pairs and is used to validate the fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from alphamodels import _kernels
from alphamodels.spectral import (
    Lattice,
    LatticeMismatch,
    SpectralField,
    SpectralVelocity,
    h1_norm,
    h2_norm,
    inner,
    l2_norm,
    leray_project_hat,
    linf_norm,
    random_field,
    stokes_apply,
)


class BilinearWorkspace:
    """Transform plans and index maps for one lattice.

    ``padding=False`` evaluates products on the unpadded N-grid; it exists
    only as a negative control (the result is aliased).

    Transforms are pruned: the padded spectrum is nonzero only in the first
    kmax+1 half-plane columns, so the row transform runs on those alone.
    """

    def __init__(self, lattice: Lattice, padding: bool = True):
        self.lattice = lattice
        self.padding = padding
        self.grid = lattice.padded_resolution if padding else lattice.N
        n, m, kmax = lattice.N, self.grid, lattice.kmax
        self.cols = kmax + 1
        # (source rows on N, destination rows on the grid) for k >= 0 and k < 0
        self._blocks = (
            (slice(0, kmax + 1), slice(0, kmax + 1)),
            (slice(n - kmax, n), slice(m - kmax, m)),
        )
        # row i of the full array holds -k of row flip[i]
        self._flip = (-np.arange(n)) % n
        s = lattice.scale
        self.ikx = (1j * s * lattice.k)[:, None]
        self.iky = (1j * s * lattice.k)[None, :]

    def to_physical(self, hat: np.ndarray) -> np.ndarray:
        c, m, kc = hat.shape[0], self.grid, self.cols
        half = np.zeros((c, m, kc), dtype=np.complex128)
        for src, dst in self._blocks:
            half[:, dst, :] = hat[:, src, :kc]
        half = sfft.ifft(half, axis=1, norm="forward", overwrite_x=True)
        return sfft.irfft(half, n=m, axis=2, norm="forward")

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        """Forward transform truncated to the lattice (full array, reality restored)."""
        n, kc = self.lattice.N, self.cols
        half = sfft.rfft(values, axis=2, norm="forward")[:, :, :kc]
        half = sfft.fft(half, axis=1, norm="forward", overwrite_x=True)
        out = np.zeros((values.shape[0], n, n), dtype=np.complex128)
        for src, dst in self._blocks:
            out[:, src, :kc] = half[:, dst, :]
        # negative ky columns by reality: out[:, kx, -ky] = conj(out[:, -kx, ky])
        np.conjugate(out[:, self._flip, kc - 1 : 0 : -1], out=out[:, :, n - kc + 1 :])
        out[:, 0, 0] = 0
        return out


_WORKSPACES: dict[tuple, BilinearWorkspace] = {}


def workspace_for(lat: Lattice, padding: bool = True) -> BilinearWorkspace:
    key = (lat.key(), padding)
    ws = _WORKSPACES.get(key)
    if ws is None:
        ws = _WORKSPACES[key] = BilinearWorkspace(lat, padding)
    return ws


def advective_hat(uh: np.ndarray, wh: np.ndarray, ws: BilinearWorkspace) -> np.ndarray:
    """Coefficients of P((u.grad) w) on the lattice.

    Uses the flux form d_j (u_j w_i), equal to (u.grad) w because div u = 0;
    the quadratic products are alias-free on the padded grid.
    """
    div = np.empty_like(uh)
    if uh is wh:
        # symmetric flux: u0 u1 appears twice, transform it once
        f = ws.to_spectral(_kernels.flux_product_sym(ws.to_physical(uh)))
        div[0] = ws.ikx * f[0] + ws.iky * f[1]
        div[1] = ws.ikx * f[1] + ws.iky * f[2]
    else:
        phys = ws.to_physical(np.concatenate([uh, wh]))
        f = ws.to_spectral(_kernels.flux_product(phys[:2], phys[2:]))
        div[0] = ws.ikx * f[0] + ws.iky * f[1]
        div[1] = ws.ikx * f[2] + ws.iky * f[3]
    return leray_project_hat(div, ws.lattice)


def rotational_hat(uh: np.ndarray, wh: np.ndarray, ws: BilinearWorkspace) -> np.ndarray:
    """Coefficients of -P(u x curl w) on the lattice."""
    omega_h = ws.ikx[None] * wh[1:2] - ws.iky[None] * wh[0:1]
    phys = ws.to_physical(np.concatenate([uh, omega_h]))
    prod = _kernels.rotational_product(phys[:2], phys[2])
    return leray_project_hat(ws.to_spectral(prod), ws.lattice)


def _check_pair(u: SpectralField, w: SpectralField) -> Lattice:
    if u.lattice != w.lattice:
        raise LatticeMismatch(f"{u.lattice} vs {w.lattice}")
    return u.lattice


def advective_B(u: SpectralField, w: SpectralField, workspace: BilinearWorkspace | None = None):
    lat = _check_pair(u, w)
    ws = workspace or workspace_for(lat)
    return SpectralVelocity(lat, advective_hat(u.hat, w.hat, ws), validate=False)


def rotational_B(u: SpectralField, w: SpectralField, workspace: BilinearWorkspace | None = None):
    lat = _check_pair(u, w)
    ws = workspace or workspace_for(lat)
    return SpectralVelocity(lat, rotational_hat(u.hat, w.hat, ws), validate=False)


# --------------------------------------------------------------------------
# direct convolution oracle
# --------------------------------------------------------------------------

ORACLE_MODE_BUDGET = 1500


def convolution_oracle(
    u: SpectralField, w: SpectralField, form: str = "advective", max_modes: int = ORACLE_MODE_BUDGET
) -> SpectralVelocity:
    """O(M^2) sum over mode pairs, truncated to the lattice and Leray-projected."""
    if form not in ("advective", "rotational"):
        raise ValueError(f"unknown form {form!r}")
    lat = _check_pair(u, w)
    if lat.mode_count > max_modes:
        raise ValueError(f"{lat.mode_count} modes exceeds the oracle budget of {max_modes}")
    kv = lat.wavevectors
    idx = (kv[:, 0] % lat.N, kv[:, 1] % lat.N)
    uhat = np.ascontiguousarray(u.hat[:, idx[0], idx[1]].T)
    what = np.ascontiguousarray(w.hat[:, idx[0], idx[1]].T)
    offset = 2 * lat.kmax
    table = np.full((4 * lat.kmax + 1,) * 2, -1, dtype=np.int64)
    table[kv[:, 0] + offset, kv[:, 1] + offset] = np.arange(kv.shape[0])
    conv = _kernels.convolution(
        np.ascontiguousarray(kv), table, offset, uhat, what, lat.scale, form == "rotational"
    )
    hat = np.zeros((2, lat.N, lat.N), dtype=np.complex128)
    hat[:, idx[0], idx[1]] = conv.T
    return SpectralVelocity(lat, leray_project_hat(hat, lat), validate=False)


# --------------------------------------------------------------------------
# identity and inequality battery
# --------------------------------------------------------------------------


def _rel(value: float, scale: float) -> float:
    return abs(value) / scale if scale > 0 else abs(value)


def _grad_linf(w: SpectralField, grid: int) -> float:
    lat = w.lattice
    s = lat.scale
    g = np.concatenate([(1j * s * lat.k)[:, None] * w.hat, (1j * s * lat.k)[None, :] * w.hat])
    from alphamodels.spectral import to_physical

    vals = to_physical(g, lat, grid)
    return float(np.sqrt(np.max(np.sum(vals**2, axis=0))))


@dataclass
class IdentityReport:
    lattice: Lattice
    trials: int
    seed: int
    padding: bool
    violations: dict = field(default_factory=dict)
    worst_trial: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def passed(self, tol: float = 1e-12) -> bool:
        return all(v <= tol for v in self.violations.values()) and all(
            math.isfinite(c) for c in self.constants.values()
        )

    def as_dict(self) -> dict:
        return {
            "box_length": self.lattice.box_length,
            "resolution": self.lattice.N,
            "trials": self.trials,
            "seed": self.seed,
            "padding": self.padding,
            "violations": dict(self.violations),
            "worst_trial": dict(self.worst_trial),
            "constants": dict(self.constants),
        }


def identity_suite(lat: Lattice, trials: int = 100, seed: int = 0, padding: bool = True) -> IdentityReport:
    """Relative violations of the exact identities and empirical inequality constants.

    Trial ``t`` uses fields seeded from ``seed`` so a failure can be replayed.
    Relative violations divide by the natural product of norms, e.g.
    ``|(B(p,p), Ap)| / (|B(p,p)| |Ap|)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ws = workspace_for(lat, padding)
    B = lambda a, b: SpectralVelocity(lat, advective_hat(a.hat, b.hat, ws), validate=False)
    Bt = lambda a, b: SpectralVelocity(lat, rotational_hat(a.hat, b.hat, ws), validate=False)
    ss = np.random.SeedSequence(seed)
    viol = {k: 0.0 for k in ("antisymmetry", "energy_orthogonality", "enstrophy", "rotational_orthogonality", "rotational_decomposition")}
    worst = {k: None for k in viol}
    const = {k: 0.0 for k in ("trilinear_interpolated", "trilinear_linf_first", "trilinear_grad_linf", "trilinear_linf_third", "enstrophy_transfer", "log_first", "log_third", "rotational_trilinear")}
    grid = 2 * lat.padded_resolution
    lam1 = lat.lambda1
    for t, child in enumerate(ss.spawn(trials)):
        s1, s2, s3 = (int(x) for x in child.generate_state(3))
        w1 = random_field(lat, s1, l2=1.0)
        w2 = random_field(lat, s2, l2=1.0)
        w3 = random_field(lat, s3, l2=1.0)
        b12, b13, b32 = B(w1, w2), B(w1, w3), B(w3, w2)
        t123, t132 = inner(b12, w3), inner(b13, w2)
        checks = {
            "antisymmetry": _rel(t123 + t132, l2_norm(b12) * l2_norm(w3) + l2_norm(b13) * l2_norm(w2)),
            "energy_orthogonality": _rel(inner(b12, w2), l2_norm(b12) * l2_norm(w2)),
        }
        b11 = B(w1, w1)
        aw1 = stokes_apply(w1)
        checks["enstrophy"] = _rel(inner(b11, aw1), l2_norm(b11) * l2_norm(aw1))
        bt12 = Bt(w1, w2)
        checks["rotational_orthogonality"] = _rel(inner(bt12, w1), l2_norm(bt12) * l2_norm(w1))
        lhs = inner(bt12, w3)
        rhs = t123 - inner(b32, w1)
        scale = l2_norm(bt12) * l2_norm(w3) + l2_norm(b12) * l2_norm(w3) + l2_norm(b32) * l2_norm(w1)
        checks["rotational_decomposition"] = _rel(lhs - rhs, scale)
        for k, v in checks.items():
            if v > viol[k]:
                viol[k], worst[k] = v, t

        n1 = (l2_norm(w1), h1_norm(w1), h2_norm(w1))
        n2 = (l2_norm(w2), h1_norm(w2), h2_norm(w2))
        n3 = (l2_norm(w3), h1_norm(w3), h2_norm(w3))
        inf1, inf3 = linf_norm(w1, grid), linf_norm(w3, grid)
        ratios = {
            "trilinear_interpolated": abs(t123) / (math.sqrt(n1[0] * n1[1]) * n2[1] * math.sqrt(n3[0] * n3[1])),
            "trilinear_linf_first": abs(t123) / (inf1 * n2[1] * n3[0]),
            "trilinear_grad_linf": abs(t123) / (n1[0] * _grad_linf(w2, grid) * n3[0]),
            "trilinear_linf_third": abs(t123) / (n1[0] * n2[1] * inf3),
            "log_first": abs(t123)
            / (n1[1] * n2[1] * n3[0] * math.sqrt(1 + math.log(n1[2] ** 2 / (n1[1] ** 2 * lam1)))),
            "log_third": abs(t123)
            / (n1[0] * n2[1] * n3[1] * math.sqrt(1 + math.log(n3[2] ** 2 / (n3[1] ** 2 * lam1)))),
            "rotational_trilinear": abs(lhs) / (math.sqrt(n1[0] * n1[1]) * n2[1] * math.sqrt(n3[0] * n3[1])),
        }
        bw = B(w3, w1)
        ratios["enstrophy_transfer"] = abs(inner(bw, aw1)) / (n3[1] * n1[1] * n1[2])
        for k, v in ratios.items():
            const[k] = max(const[k], v)
    return IdentityReport(lat, trials, seed, padding, viol, worst, const)
