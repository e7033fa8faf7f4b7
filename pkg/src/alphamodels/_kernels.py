"""Pointwise and convolution kernels with a numba path and a pure-numpy path.

The backend is chosen once at import from the ``ALPHAMODELS_NUMBA``
environment variable ("0", "false", "off", "no" disable numba).  When numba
is not importable the numpy path is used regardless.  ``use_backend`` switches
at runtime; callers must go through the module attributes
(``_kernels.flux_product`` etc.), never bind the functions locally.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_DISABLED = {"0", "false", "off", "no"}


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def _leray_project_numpy(hat, kx, ky, inv_k2):
    dot = kx[:, None] * hat[0] + ky[None, :] * hat[1]
    dot *= inv_k2
    out = np.empty_like(hat)
    out[0] = hat[0] - kx[:, None] * dot
    out[1] = hat[1] - ky[None, :] * dot
    return out


def _flux_product_numpy(u, w):
    # rows: u0 w0, u1 w0, u0 w1, u1 w1, so (u.grad) w_i = d_j (u_j w_i)
    out = np.empty((4,) + u.shape[1:], dtype=u.dtype)
    np.multiply(u[0], w[0], out=out[0])
    np.multiply(u[1], w[0], out=out[1])
    np.multiply(u[0], w[1], out=out[2])
    np.multiply(u[1], w[1], out=out[3])
    return out


def _flux_product_sym_numpy(u):
    # rows: u0 u0, u0 u1, u1 u1
    out = np.empty((3,) + u.shape[1:], dtype=u.dtype)
    np.multiply(u[0], u[0], out=out[0])
    np.multiply(u[0], u[1], out=out[1])
    np.multiply(u[1], u[1], out=out[2])
    return out


def _rotational_product_numpy(u, omega):
    out = np.empty_like(u)
    np.multiply(u[1], omega, out=out[0])
    np.negative(out[0], out=out[0])
    np.multiply(u[0], omega, out=out[1])
    return out


def _convolution_numpy(kvec, table, offset, uhat, what, scale, rotational):
    """Direct sum over mode pairs p + q = k for every retained k."""
    m = kvec.shape[0]
    out = np.zeros((m, 2), dtype=np.complex128)
    size = table.shape[0]
    for ip in range(m):
        up = uhat[ip]
        if up[0] == 0 and up[1] == 0:
            continue
        q = kvec - kvec[ip]
        qi = q[:, 0] + offset
        qj = q[:, 1] + offset
        ok = (qi >= 0) & (qi < size) & (qj >= 0) & (qj < size)
        iq = np.full(m, -1, dtype=np.int64)
        iq[ok] = table[qi[ok], qj[ok]]
        ok = iq >= 0
        wq = what[iq[ok]]
        q1 = scale * q[ok, 0]
        q2 = scale * q[ok, 1]
        if rotational:
            omega = 1j * (q1 * wq[:, 1] - q2 * wq[:, 0])
            out[ok, 0] += -up[1] * omega
            out[ok, 1] += up[0] * omega
        else:
            adv = 1j * (up[0] * q1 + up[1] * q2)
            out[ok, 0] += adv * wq[:, 0]
            out[ok, 1] += adv * wq[:, 1]
    return out


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _leray_project_numba(hat, kx, ky, inv_k2):
        n0 = hat.shape[1]
        n1 = hat.shape[2]
        out = np.empty_like(hat)
        for i in range(n0):
            a = kx[i]
            for j in range(n1):
                b = ky[j]
                h0 = hat[0, i, j]
                h1 = hat[1, i, j]
                d = (a * h0 + b * h1) * inv_k2[i, j]
                out[0, i, j] = h0 - a * d
                out[1, i, j] = h1 - b * d
        return out

    @numba.njit(cache=True)
    def _flux_product_numba(u, w):
        n0 = u.shape[1]
        n1 = u.shape[2]
        out = np.empty((4, n0, n1), dtype=u.dtype)
        for i in range(n0):
            for j in range(n1):
                a = u[0, i, j]
                b = u[1, i, j]
                c = w[0, i, j]
                d = w[1, i, j]
                out[0, i, j] = a * c
                out[1, i, j] = b * c
                out[2, i, j] = a * d
                out[3, i, j] = b * d
        return out

    @numba.njit(cache=True)
    def _flux_product_sym_numba(u):
        n0 = u.shape[1]
        n1 = u.shape[2]
        out = np.empty((3, n0, n1), dtype=u.dtype)
        for i in range(n0):
            for j in range(n1):
                a = u[0, i, j]
                b = u[1, i, j]
                out[0, i, j] = a * a
                out[1, i, j] = a * b
                out[2, i, j] = b * b
        return out

    @numba.njit(cache=True)
    def _rotational_product_numba(u, omega):
        n0, n1 = omega.shape
        out = np.empty_like(u)
        for i in range(n0):
            for j in range(n1):
                w = omega[i, j]
                out[0, i, j] = -u[1, i, j] * w
                out[1, i, j] = u[0, i, j] * w
        return out

    @numba.njit(cache=True)
    def _convolution_numba(kvec, table, offset, uhat, what, scale, rotational):
        m = kvec.shape[0]
        size = table.shape[0]
        out = np.zeros((m, 2), dtype=np.complex128)
        for ik in range(m):
            k0 = kvec[ik, 0]
            k1 = kvec[ik, 1]
            acc0 = 0j
            acc1 = 0j
            for ip in range(m):
                qi = k0 - kvec[ip, 0] + offset
                qj = k1 - kvec[ip, 1] + offset
                if qi < 0 or qi >= size or qj < 0 or qj >= size:
                    continue
                iq = table[qi, qj]
                if iq < 0:
                    continue
                q1 = scale * (k0 - kvec[ip, 0])
                q2 = scale * (k1 - kvec[ip, 1])
                if rotational:
                    omega = 1j * (q1 * what[iq, 1] - q2 * what[iq, 0])
                    acc0 += -uhat[ip, 1] * omega
                    acc1 += uhat[ip, 0] * omega
                else:
                    adv = 1j * (uhat[ip, 0] * q1 + uhat[ip, 1] * q2)
                    acc0 += adv * what[iq, 0]
                    acc1 += adv * what[iq, 1]
            out[ik, 0] = acc0
            out[ik, 1] = acc1
        return out


_IMPLS = {
    "numpy": {
        "leray_project": _leray_project_numpy,
        "flux_product": _flux_product_numpy,
        "flux_product_sym": _flux_product_sym_numpy,
        "rotational_product": _rotational_product_numpy,
        "convolution": _convolution_numpy,
    },
}
if HAVE_NUMBA:
    _IMPLS["numba"] = {
        "leray_project": _leray_project_numba,
        "flux_product": _flux_product_numba,
        "flux_product_sym": _flux_product_sym_numba,
        "rotational_product": _rotational_product_numba,
        "convolution": _convolution_numba,
    }

BACKEND = "numpy"
leray_project = _leray_project_numpy
flux_product = _flux_product_numpy
flux_product_sym = _flux_product_sym_numpy
rotational_product = _rotational_product_numpy
convolution = _convolution_numpy


def use_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global BACKEND, leray_project, flux_product, flux_product_sym, rotational_product, convolution
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(_IMPLS)}")
    impl = _IMPLS[name]
    leray_project = impl["leray_project"]
    flux_product = impl["flux_product"]
    flux_product_sym = impl["flux_product_sym"]
    rotational_product = impl["rotational_product"]
    convolution = impl["convolution"]
    BACKEND = name


def available_backends() -> list[str]:
    return sorted(_IMPLS)


def _default_backend() -> str:
    flag = os.environ.get("ALPHAMODELS_NUMBA", "1").strip().lower()
    if flag in _DISABLED or not HAVE_NUMBA:
        return "numpy"
    return "numba"


use_backend(_default_backend())
