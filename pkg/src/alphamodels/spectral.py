"""Periodic lattice, spectral velocity fields and the diagonal operators.

Conventions
-----------
A field on the box ``[0, L]^2`` is stored by its Fourier coefficients

    u(x) = sum_k  uhat_k exp(2 pi i k.x / L)

in a full ``(2, N, N)`` complex array indexed ``[component, ix, iy]`` in FFT
ordering (``k = fftfreq(N) * N``).  Physical values are therefore exact sums
of the stored coefficients, and every norm carries the measure factor L^2:

    |u|^2      = L^2 sum |uhat_k|^2
    ||u||^2    = L^2 sum lambda(k) |uhat_k|^2,   lambda(k) = (2 pi / L)^2 |k|^2
    |A^s u|^2  = L^2 sum lambda(k)^(2s) |uhat_k|^2

Retained modes are ``|k_x|, |k_y| <= N/2 - 1`` without the origin.  The
Nyquist row and column are always zero so the set is closed under k -> -k
and the reality condition is an exact invariant.

Galerkin cutoffs are unions of complete eigenvalue shells.  A cutoff is
given as an integer shell ``|k|^2`` (``cutoff_k2``); the associated mode
count ``m`` counts one slot per wavevector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from alphamodels import _kernels

TOL_DIV = 1e-12


class LatticeMismatch(ValueError):
    """Two fields live on incompatible lattices."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def is_sum_of_two_squares(n: int) -> bool:
    if n < 0:
        return False
    r = math.isqrt(n)
    for a in range(r + 1):
        b2 = n - a * a
        b = math.isqrt(b2)
        if b * b == b2:
            return True
    return False


def next_shell(k2: int) -> int:
    """Smallest shell |k|^2 strictly above ``k2`` (independent of any lattice)."""
    n = int(k2) + 1
    while not is_sum_of_two_squares(n):
        n += 1
    return n


def shell_mode_count(k2: int) -> int:
    """Number of nonzero integer wavevectors with |k|^2 <= k2."""
    k2 = int(k2)
    r = math.isqrt(k2)
    count = 0
    for a in range(-r, r + 1):
        count += 2 * math.isqrt(k2 - a * a) + 1
    return count - 1


class Lattice:
    """Truncated wavevector lattice of resolution ``N`` on a box of side ``L``."""

    __slots__ = ("box_length", "resolution", "__dict__")

    def __init__(self, box_length: float, resolution: int):
        self.box_length = float(box_length)
        self.resolution = int(resolution)

    @property
    def L(self) -> float:
        return self.box_length

    @property
    def N(self) -> int:
        return self.resolution

    @property
    def kmax(self) -> int:
        return self.resolution // 2 - 1

    @property
    def scale(self) -> float:
        return 2.0 * math.pi / self.box_length

    @property
    def lambda1(self) -> float:
        return self.scale**2

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers along one axis in FFT order (float array)."""
        return _readonly(np.fft.fftfreq(self.N, 1.0 / self.N))

    @cached_property
    def k2(self) -> np.ndarray:
        """Integer |k|^2 table, shape (N, N)."""
        k = self.k.astype(np.int64)
        return _readonly(k[:, None] ** 2 + k[None, :] ** 2)

    @cached_property
    def mask(self) -> np.ndarray:
        k = np.abs(self.k)
        box = (k[:, None] <= self.kmax) & (k[None, :] <= self.kmax)
        box[0, 0] = False
        return _readonly(box)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """lambda(k) on retained modes, zero elsewhere."""
        lam = self.lambda1 * self.k2 * self.mask
        return _readonly(lam.astype(float))

    @cached_property
    def inv_k2(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            inv = np.where(self.k2 > 0, 1.0 / np.maximum(self.k2, 1), 0.0)
        return _readonly(inv)

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues.max())

    @property
    def disk_k2(self) -> int:
        """Largest shell fully contained in the rectangular truncation."""
        return self.kmax**2

    @cached_property
    def padded_resolution(self) -> int:
        m = -(-3 * self.N // 2)
        return m + (m % 2)

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Retained integer wavevectors, shape (M, 2), in array order."""
        ii, jj = np.nonzero(self.mask)
        kv = np.stack([self.k[ii], self.k[jj]], axis=1).astype(np.int64)
        return _readonly(kv)

    @property
    def mode_count(self) -> int:
        return int(self.mask.sum())

    def index(self, kx: int, ky: int) -> tuple[int, int]:
        if max(abs(kx), abs(ky)) > self.kmax:
            raise IndexError(f"wavevector ({kx}, {ky}) outside lattice N={self.N}")
        return kx % self.N, ky % self.N

    def cutoff_mask(self, cutoff_k2: int | None) -> np.ndarray:
        if cutoff_k2 is None:
            return self.mask
        return self.mask & (self.k2 <= cutoff_k2)

    def key(self) -> tuple[float, int]:
        return (self.box_length, self.resolution)

    def __eq__(self, other):
        return isinstance(other, Lattice) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Lattice(L={self.box_length!r}, N={self.resolution})"


def build_lattice(L: float, N: int) -> Lattice:
    if not (isinstance(N, (int, np.integer)) and N >= 4 and N % 2 == 0):
        raise ValueError(f"resolution must be an even integer >= 4, got {N!r}")
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"box length must be positive, got {L!r}")
    return Lattice(float(L), int(N))


def stokes_eigenvalues(lat: Lattice) -> list[tuple[float, int]]:
    """Ascending distinct eigenvalues with multiplicity (one slot per wavevector)."""
    k2 = lat.k2[lat.mask]
    values, counts = np.unique(k2, return_counts=True)
    return [(float(lat.lambda1 * v), int(c)) for v, c in zip(values, counts)]


def sorted_eigenvalues(lat: Lattice) -> np.ndarray:
    return np.sort(lat.eigenvalues[lat.mask])


def weyl_constant(lat: Lattice, disk_only: bool = True) -> float:
    """Smallest c0 with j/c0 <= lambda_j/lambda_1 <= c0 j on the lattice.

    With ``disk_only`` the count stops at the largest complete shell, which
    keeps the ordering independent of the box corners.
    """
    lam = sorted_eigenvalues(lat) / lat.lambda1
    if disk_only:
        lam = lam[lam <= lat.disk_k2]
    j = np.arange(1, lam.size + 1)
    return float(max(np.max(lam / j), np.max(j / lam)))


def cutoff_from_mode_count(m: int) -> int:
    """Shell ``|k|^2`` holding exactly the first ``m`` modes; rejects split shells."""
    if m < 1:
        raise ValueError("mode count must be >= 1")
    k2 = 1
    while True:
        count = shell_mode_count(k2)
        if count == m:
            return k2
        if count > m:
            raise ValueError(f"m={m} splits the degenerate shell |k|^2={k2}")
        k2 = next_shell(k2)


def check_cutoff(lat: Lattice, cutoff_k2: int | None) -> int | None:
    """Validate a shell cutoff against a lattice; returns it unchanged."""
    if cutoff_k2 is None:
        return None
    if int(cutoff_k2) != cutoff_k2 or not is_sum_of_two_squares(int(cutoff_k2)) or cutoff_k2 < 1:
        raise ValueError(f"cutoff |k|^2={cutoff_k2} is not a shell boundary")
    if cutoff_k2 > lat.disk_k2:
        raise ValueError(
            f"cutoff |k|^2={cutoff_k2} exceeds the largest complete shell {lat.disk_k2} of N={lat.N}"
        )
    return int(cutoff_k2)


def lattice_for_cutoff(L: float, cutoff_k2: int) -> Lattice:
    """Smallest even resolution whose complete shells contain ``cutoff_k2``."""
    kmax = math.isqrt(int(cutoff_k2))
    if kmax * kmax < cutoff_k2:
        kmax += 1
    n = 2 * (kmax + 1)
    return build_lattice(L, max(4, n))


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------


class SpectralField:
    """Real two-component field on a lattice (reality and zero mean enforced)."""

    __slots__ = ("lattice", "hat")

    def __init__(self, lattice: Lattice, hat: np.ndarray, validate: bool = True):
        hat = np.asarray(hat, dtype=np.complex128)
        if hat.shape != (2, lattice.N, lattice.N):
            raise ValueError(f"expected shape (2, {lattice.N}, {lattice.N}), got {hat.shape}")
        if validate:
            self._validate(lattice, hat)
        if hat.flags.writeable:
            hat = hat.copy()
            hat.setflags(write=False)
        self.lattice = lattice
        self.hat = hat

    @staticmethod
    def _validate(lat: Lattice, hat: np.ndarray) -> None:
        scale = float(np.max(np.abs(hat))) if hat.size else 0.0
        if not np.all(np.isfinite(hat)):
            raise ValueError("field has non-finite coefficients")
        if np.any(hat[:, ~lat.mask] != 0):
            raise ValueError("field has energy outside the retained modes")
        conj = np.conj(np.roll(hat[:, ::-1, ::-1], 1, axis=(1, 2)))
        if np.max(np.abs(hat - conj), initial=0.0) > 1e-13 * max(scale, 1e-300):
            raise ValueError("field violates the reality condition")

    @classmethod
    def zeros(cls, lattice: Lattice):
        return cls(lattice, np.zeros((2, lattice.N, lattice.N), complex), validate=False)

    def _check_same(self, other: "SpectralField") -> None:
        if self.lattice != other.lattice:
            raise LatticeMismatch(f"{self.lattice} vs {other.lattice}")

    def _wrap(self, hat):
        return type(self)(self.lattice, hat, validate=False)

    def __add__(self, other):
        self._check_same(other)
        return self._wrap(self.hat + other.hat)

    def __sub__(self, other):
        self._check_same(other)
        return self._wrap(self.hat - other.hat)

    def __mul__(self, scalar):
        return self._wrap(self.hat * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.hat)

    def divergence(self) -> np.ndarray:
        """Per-mode |k . uhat_k| (integer k)."""
        k = self.lattice.k
        return np.abs(k[:, None] * self.hat[0] + k[None, :] * self.hat[1])

    def physical(self, grid: int | None = None) -> np.ndarray:
        """Values on a uniform ``grid x grid`` mesh (default: padded resolution)."""
        return to_physical(self.hat, self.lattice, grid or self.lattice.padded_resolution)

    def __repr__(self):
        return f"{type(self).__name__}({self.lattice!r}, |u|={l2_norm(self):.6g})"


class SpectralVelocity(SpectralField):
    """Divergence-free, zero-mean, real velocity field."""

    __slots__ = ()

    @staticmethod
    def _validate(lat, hat):
        SpectralField._validate(lat, hat)
        k = lat.k
        div = np.abs(k[:, None] * hat[0] + k[None, :] * hat[1])
        amp = np.sqrt(np.abs(hat[0]) ** 2 + np.abs(hat[1]) ** 2)
        tol = TOL_DIV * max(float(amp.max(initial=0.0)), 1e-300)
        if np.any(div > tol * np.maximum(np.sqrt(lat.k2), 1)):
            raise ValueError("field is not divergence-free")


def as_field(lat: Lattice, hat: np.ndarray) -> SpectralVelocity:
    return SpectralVelocity(lat, hat, validate=False)


def symmetrize(hat: np.ndarray, lat: Lattice) -> np.ndarray:
    """Project an arbitrary coefficient array onto real, retained-mode fields."""
    conj = np.conj(np.roll(hat[:, ::-1, ::-1], 1, axis=(1, 2)))
    out = 0.5 * (hat + conj)
    out[:, ~lat.mask] = 0
    return out


def from_physical(lat: Lattice, values: np.ndarray) -> SpectralField:
    """Coefficients of a sampled real field, truncated to the lattice.

    ``values`` has shape (2, M, M) on a uniform grid with M >= N; for trig
    polynomials supported on the lattice the result is exact.
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[-1]
    full = sfft.fft2(values, axes=(1, 2), norm="forward")
    idx = np.asarray(lat.k, dtype=np.int64) % m
    hat = full[:, idx[:, None], idx[None, :]]
    hat[:, ~lat.mask] = 0
    return SpectralField(lat, symmetrize(hat, lat), validate=False)


def to_physical(hat: np.ndarray, lat: Lattice, grid: int) -> np.ndarray:
    if grid < lat.N:
        raise ValueError("evaluation grid coarser than the lattice")
    c = hat.shape[0]
    half = np.zeros((c, grid, grid // 2 + 1), dtype=np.complex128)
    kx = lat.k.astype(np.int64)
    rows = kx[np.abs(kx) <= lat.kmax]
    src = rows % lat.N
    half[:, (rows % grid)[:, None], np.arange(lat.kmax + 1)[None, :]] = hat[
        :, src[:, None], np.arange(lat.kmax + 1)[None, :]
    ]
    return sfft.irfft2(half, s=(grid, grid), axes=(1, 2), norm="forward")


def transfer(hat: np.ndarray, src: Lattice, dst: Lattice) -> np.ndarray:
    """Copy coefficients between lattices of equal box length (truncating)."""
    if src.box_length != dst.box_length:
        raise LatticeMismatch("box lengths differ")
    kmin = min(src.kmax, dst.kmax)
    ks = np.arange(-kmin, kmin + 1)
    out = np.zeros(hat.shape[:-2] + (dst.N, dst.N), dtype=np.complex128)
    out[..., (ks % dst.N)[:, None], (ks % dst.N)[None, :]] = hat[
        ..., (ks % src.N)[:, None], (ks % src.N)[None, :]
    ]
    out[..., 0, 0] = 0
    return out


# --------------------------------------------------------------------------
# diagonal operators
# --------------------------------------------------------------------------


def leray_project_hat(hat: np.ndarray, lat: Lattice) -> np.ndarray:
    return _kernels.leray_project(hat, lat.k, lat.k, lat.inv_k2)


def leray_project(w: SpectralField) -> SpectralVelocity:
    """Helmholtz-Leray projection: remove the component of each mode along k."""
    return SpectralVelocity(w.lattice, leray_project_hat(w.hat, w.lattice), validate=False)


def filter_factor(lat: Lattice, alpha: float) -> np.ndarray:
    """Per-mode multiplier of (I + alpha^2 A)^-1."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return 1.0 / (1.0 + alpha**2 * lat.eigenvalues)


def helmholtz_filter(v: SpectralField, alpha: float) -> SpectralVelocity:
    """Solve u + alpha^2 A u = v."""
    return SpectralVelocity(v.lattice, v.hat * filter_factor(v.lattice, alpha), validate=False)


def helmholtz_apply(u: SpectralField, alpha: float) -> SpectralVelocity:
    """v = u + alpha^2 A u."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return SpectralVelocity(
        u.lattice, u.hat * (1.0 + alpha**2 * u.lattice.eigenvalues), validate=False
    )


def stokes_apply(u: SpectralField, power: float = 1.0) -> SpectralVelocity:
    """A^power u."""
    lam = u.lattice.eigenvalues
    return SpectralVelocity(u.lattice, u.hat * lam**power, validate=False)


def galerkin_project(u: SpectralField, cutoff_k2: int | None, complement: bool = False):
    """P_m (or I - P_m) for the shell cutoff ``|k|^2 <= cutoff_k2``."""
    lat = u.lattice
    if cutoff_k2 is not None:
        if int(cutoff_k2) != cutoff_k2 or not is_sum_of_two_squares(int(cutoff_k2)):
            raise ValueError(f"cutoff |k|^2={cutoff_k2} splits a shell")
    keep = lat.cutoff_mask(cutoff_k2)
    if complement:
        keep = lat.mask & ~keep
    return type(u)(lat, u.hat * keep, validate=False)


# --------------------------------------------------------------------------
# inner products and norms
# --------------------------------------------------------------------------


def inner(u: SpectralField, w: SpectralField) -> float:
    """L^2 inner product (u, w)."""
    u._check_same(w)
    return inner_hat(u.hat, w.hat, u.lattice)


def inner_hat(a: np.ndarray, b: np.ndarray, lat: Lattice) -> float:
    return float(lat.box_length**2 * np.vdot(b, a).real)


def _weighted(hat: np.ndarray, lat: Lattice, power: float) -> float:
    w = lat.eigenvalues**power if power else lat.mask.astype(float)
    return float(lat.box_length**2 * np.sum(w * (hat.real**2 + hat.imag**2)))


def stokes_norm_sq(hat: np.ndarray, lat: Lattice, s: float) -> float:
    """|A^(s/2) u|^2 for s = 0 (|u|), 1 (||u||), 2 (|Au|), 3 (|A^3/2 u|)."""
    return _weighted(hat, lat, s)


def l2_norm(u: SpectralField) -> float:
    return math.sqrt(stokes_norm_sq(u.hat, u.lattice, 0))


def h1_norm(u: SpectralField) -> float:
    return math.sqrt(stokes_norm_sq(u.hat, u.lattice, 1))


def h2_norm(u: SpectralField) -> float:
    return math.sqrt(stokes_norm_sq(u.hat, u.lattice, 2))


def hs_norm(u: SpectralField, s: float) -> float:
    """(2pi/L)^(2(s-1)) sum (1 + |k|^2)^s |uhat|^2, times the L^2 measure."""
    lat = u.lattice
    w = (1.0 + lat.k2) ** s * lat.mask
    val = lat.scale ** (2 * (s - 1)) * np.sum(w * np.abs(u.hat) ** 2)
    return math.sqrt(lat.box_length**2 * val)


def eval_grid(lat: Lattice) -> int:
    """Grid used for sup and L^4 norms: twice the padded resolution."""
    return 2 * lat.padded_resolution


def linf_norm(u: SpectralField, grid: int | None = None) -> float:
    vals = u.physical(grid or eval_grid(u.lattice))
    return float(np.sqrt(np.max(vals[0] ** 2 + vals[1] ** 2)))


def l4_norm(u: SpectralField, grid: int | None = None) -> float:
    g = grid or eval_grid(u.lattice)
    vals = u.physical(g)
    mag2 = vals[0] ** 2 + vals[1] ** 2
    return float((np.mean(mag2**2) * u.lattice.box_length**2) ** 0.25)


@dataclass(frozen=True)
class Norms:
    l2: float
    h1: float
    h2: float
    linf: float
    l4: float
    grid: int
    field: SpectralField

    def hs(self, s: float) -> float:
        return hs_norm(self.field, s)


def norms(u: SpectralField) -> Norms:
    g = eval_grid(u.lattice)
    return Norms(l2_norm(u), h1_norm(u), h2_norm(u), linf_norm(u, g), l4_norm(u, g), g, u)


def l2_distance(a: SpectralField, b: SpectralField) -> float:
    """|a - b| for fields on lattices of the same box length."""
    return math.sqrt(l2_distance_sq_hat(a.hat, a.lattice, b.hat, b.lattice))


def l2_distance_sq_hat(a, lat_a: Lattice, b, lat_b: Lattice) -> float:
    if lat_a == lat_b:
        return stokes_norm_sq(a - b, lat_a, 0)
    big, small, hb, hs_ = (lat_a, lat_b, a, b) if lat_a.N >= lat_b.N else (lat_b, lat_a, b, a)
    return stokes_norm_sq(hb - transfer(hs_, small, big), big, 0)


# --------------------------------------------------------------------------
# field constructors
# --------------------------------------------------------------------------


def _canonical_order(lat: Lattice) -> np.ndarray:
    """Half-plane wavevectors ordered by (|k|^2, kx, ky): resolution independent."""
    kv = lat.wavevectors
    half = (kv[:, 0] > 0) | ((kv[:, 0] == 0) & (kv[:, 1] > 0))
    kv = kv[half]
    order = np.lexsort((kv[:, 1], kv[:, 0], kv[:, 0] ** 2 + kv[:, 1] ** 2))
    return kv[order]


def random_field(
    lat: Lattice,
    seed: int,
    s: float = 4.0,
    l2: float | None = 1.0,
    cutoff_k2: int | None = None,
    flat: bool = False,
) -> SpectralVelocity:
    """Seeded divergence-free field, |uhat_k| ~ (1 + |k|^2)^(-s/2), random phases.

    Draws follow the (|k|^2, kx, ky) order, so two lattices agree on every
    shell they both contain completely.  ``flat`` gives equal amplitude on
    all modes.  ``l2`` rescales to that L^2 norm (None keeps raw amplitudes).
    """
    rng = np.random.default_rng(seed)
    kv = _canonical_order(lat)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=kv.shape[0])
    k2 = (kv**2).sum(axis=1).astype(float)
    amp = np.ones_like(k2) if flat else (1.0 + k2) ** (-s / 2.0)
    a = amp * np.exp(1j * phases)
    kn = np.sqrt(k2)
    perp = np.stack([-kv[:, 1] / kn, kv[:, 0] / kn])
    hat = np.zeros((2, lat.N, lat.N), dtype=np.complex128)
    i, j = kv[:, 0] % lat.N, kv[:, 1] % lat.N
    hat[:, i, j] = a * perp
    # reality: uhat_{-k} = conj(uhat_k), and perp(k) is real
    hat[:, (-kv[:, 0]) % lat.N, (-kv[:, 1]) % lat.N] = np.conj(a) * perp
    if cutoff_k2 is not None:
        hat *= lat.cutoff_mask(cutoff_k2)
    u = SpectralVelocity(lat, hat, validate=False)
    if l2 is not None:
        n = l2_norm(u)
        if n > 0:
            u = u * (l2 / n)
    return u


def shear_field(lat: Lattice, amplitude: float = 1.0, wavenumber: int = 1) -> SpectralVelocity:
    """u = (A sin(2 pi n y / L), 0)."""
    hat = np.zeros((2, lat.N, lat.N), dtype=np.complex128)
    i, j = lat.index(0, wavenumber)
    hat[0, i, j] = -0.5j * amplitude
    i, j = lat.index(0, -wavenumber)
    hat[0, i, j] = 0.5j * amplitude
    return SpectralVelocity(lat, hat)


def taylor_green_field(lat: Lattice, amplitude: float = 1.0) -> SpectralVelocity:
    """Stream function psi = A cos(kx) cos(ky), u = (dpsi/dy, -dpsi/dx), k = 2pi/L."""
    hat = np.zeros((2, lat.N, lat.N), dtype=np.complex128)
    # cos a cos b = (1/4) sum over sign pairs of exp(i(+-a +-b))
    for sx in (1, -1):
        for sy in (1, -1):
            i, j = lat.index(sx, sy)
            psi = 0.25 * amplitude
            hat[0, i, j] = 1j * lat.scale * sy * psi
            hat[1, i, j] = -1j * lat.scale * sx * psi
    return SpectralVelocity(lat, hat)
