"""Norms of spectral fields.

All norms act on fields frozen at one time (``field.at(t)``) and integrate
over frequency with the lattice measure: counting measure on torus
directions and the quadrature cell on non-periodic ones.

Available: Sobolev ``H^s``, the box-summed modulation norms ``M_A`` and
``M^rho_A``, the anisotropic modulation norm with thin last-direction boxes,
the dyadic-block norms ``D^{[alpha]}_{p,q}`` and ``D^s_{p,q}``, the
low-frequency ``L^2`` mass and the auxiliary quantity ``f_s(A)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "NormSpec",
    "evaluate_norm",
    "l2_norm",
    "hs_norm",
    "modulation_norm",
    "m_rho_norm",
    "aniso_mod_norm",
    "d_norm",
    "f_s",
    "lowfreq_l2",
]

BOX_NUDGE = 1e-9


def _static(field, t=None):
    if t is not None:
        field = field.at(t)
    idx, val = field.values()
    return field.domain.coords_of(idx), val, field.measure_weight


def l2_norm(field, t=None):
    _, val, w = _static(field, t)
    return float(np.sqrt(w * np.sum(np.abs(val) ** 2)))


def hs_norm(field, s, t=None):
    """``(sum_xi w <xi>^{2s} |u(xi)|^2)^{1/2}`` with ``<xi>^2 = 1 + |xi|^2``."""
    x, val, w = _static(field, t)
    jb = 1.0 + np.sum(x * x, axis=1)
    return float(np.sqrt(w * np.sum(jb ** s * np.abs(val) ** 2)))


def _box_sum(x, val, w, widths, rho):
    if val.size == 0:
        return 0.0
    box = np.floor(x / widths + 0.5 + BOX_NUDGE).astype(np.int64)
    _, inv = np.unique(box, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mass = np.bincount(inv, weights=w * np.abs(val) ** rho)
    return float(np.sum(mass ** (1.0 / rho)))


def modulation_norm(field, A, t=None):
    """``sum over boxes xi + [-A/2, A/2)^d, xi in A Z^d, of the L^2 mass``."""
    if A <= 0:
        raise ValueError("A must be positive")
    x, val, w = _static(field, t)
    return _box_sum(x, val, w, np.full(field.domain.d, float(A)), 2.0)


def m_rho_norm(field, rho, A, t=None):
    """``sum over intervals xi + [-A/2, A/2), xi in A Z, of the L^rho norm`` (d = 1)."""
    if field.domain.d != 1:
        raise ValueError("M^rho_A is defined for d = 1")
    if rho < 1:
        raise ValueError("rho must be at least 1")
    x, val, w = _static(field, t)
    return _box_sum(x, val, w, np.array([float(A)]), float(rho))


def aniso_mod_norm(field, N, t=None):
    """Box sum over ``Z^{d-1} x N^{-1} Z`` with boxes of side 1 and ``1/N`` in the last direction."""
    if field.domain.is_exact:
        raise ValueError("anisotropic modulation norm needs a non-periodic direction")
    if not 1 <= field.domain.d <= 3:
        raise ValueError("anisotropic modulation norm needs 1 <= d <= 3")
    x, val, w = _static(field, t)
    widths = np.ones(field.domain.d)
    widths[-1] = 1.0 / N
    return _box_sum(x, val, w, widths, 2.0)


def lowfreq_l2(field, cutoff=1.0, t=None):
    """``L^2`` mass restricted to ``|xi| <= cutoff``."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    x, val, w = _static(field, t)
    keep = np.sqrt(np.sum(x * x, axis=1)) <= cutoff * (1 + 1e-12)
    return float(np.sqrt(w * np.sum(np.abs(val[keep]) ** 2)))


def dyadic_block(x):
    """Block index ``j`` with ``2^j <= <xi> < 2^{j+1}`` (exact for integers)."""
    sq = 1.0 + np.sum(np.asarray(x) ** 2, axis=-1)
    j = np.floor(0.5 * np.log2(sq)).astype(np.int64)
    # correct rounding at block edges: need 4^j <= sq < 4^{j+1}
    j = np.where(4.0 ** j > sq, j - 1, j)
    j = np.where(4.0 ** (j + 1) <= sq, j + 1, j)
    return j


def log_bracket(N):
    """``<log N> = (1 + (log N)^2)^{1/2}``, natural logarithm."""
    return np.sqrt(1.0 + np.log(N) ** 2)


def d_norm(field, p, q, alpha=None, s=None, t=None):
    """Dyadic-block norm.

    With ``alpha`` the block weight is ``N^{-1/p} <log N>^alpha``
    (``D^{[alpha]}_{p,q}``); with ``s`` it is ``N^s`` (``D^s_{p,q}``).
    Blocks are ``{N <= <xi> < 2N}``, ``N = 1, 2, 4, ...``; ``q = inf``
    takes the supremum.
    """
    if (alpha is None) == (s is None):
        raise ValueError("give exactly one of alpha (bracket form) or s (plain form)")
    if not 1 <= p < math.inf:
        raise ValueError("need 1 <= p < inf")
    if not q >= 1:
        raise ValueError("need q >= 1")
    if field.domain.d != 1:
        raise ValueError("D-norms are defined for d = 1")
    x, val, w = _static(field, t)
    if val.size == 0:
        return 0.0
    j = dyadic_block(x)
    blocks, inv = np.unique(j, return_inverse=True)
    lp = np.bincount(inv.reshape(-1), weights=w * np.abs(val) ** p) ** (1.0 / p)
    N = 2.0 ** blocks
    if alpha is not None:
        weight = N ** (-1.0 / p) * log_bracket(N) ** alpha
    else:
        weight = N ** s
    terms = weight * lp
    if math.isinf(q):
        return float(np.max(terms))
    return float(np.sum(terms ** q) ** (1.0 / q))


def f_s(A, s, d=1):
    """``(int_{|xi| <= A} (1 + |xi|^2)^s dxi)^{1/2}`` by adaptive quadrature."""
    if s >= 0:
        raise ValueError("f_s is used for s < 0")
    if A <= 0:
        raise ValueError("A must be positive")
    sphere = 2 * math.pi ** (d / 2) / special.gamma(d / 2)
    val, _ = integrate.quad(lambda r: (1 + r * r) ** s * r ** (d - 1), 0.0, A,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return math.sqrt(sphere * val)


@dataclass(frozen=True)
class NormSpec:
    """A norm choice; ``kind`` is one of the class-level names below."""

    kind: str
    params: tuple = ()

    KINDS = ("Hs", "ModA", "ModRhoA", "AnisoMod", "DBracket", "DS", "LowFreqL2", "L2")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        params = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", params)
        if self.kind in ("DBracket", "DS"):
            _, p, q = params
            if not (1 <= p < math.inf and q >= 1):
                raise ValueError("need 1 <= p < inf and 1 <= q <= inf")
        if self.kind in ("ModA", "LowFreqL2", "AnisoMod") and params[0] <= 0:
            raise ValueError("parameter must be positive")

    @classmethod
    def Hs(cls, s):
        return cls("Hs", (s,))

    @classmethod
    def ModA(cls, A):
        return cls("ModA", (A,))

    @classmethod
    def ModRhoA(cls, rho, A):
        return cls("ModRhoA", (rho, A))

    @classmethod
    def AnisoMod(cls, N):
        return cls("AnisoMod", (N,))

    @classmethod
    def DBracket(cls, alpha, p, q):
        return cls("DBracket", (alpha, p, q))

    @classmethod
    def DS(cls, s, p, q):
        return cls("DS", (s, p, q))

    @classmethod
    def LowFreqL2(cls, cutoff=1.0):
        return cls("LowFreqL2", (cutoff,))

    def label(self):
        return self.kind + ("(" + ",".join(f"{v:g}" for v in self.params) + ")" if self.params else "")

    def to_dict(self):
        return {"kind": self.kind, "params": [("inf" if math.isinf(v) else v) for v in self.params]}

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], tuple(float(v) for v in data.get("params", ())))

    def __call__(self, field, t=None):
        return evaluate_norm(field, self, t)


def evaluate_norm(field, spec, t=None):
    k, a = spec.kind, spec.params
    if k == "Hs":
        return hs_norm(field, a[0], t)
    if k == "ModA":
        return modulation_norm(field, a[0], t)
    if k == "ModRhoA":
        return m_rho_norm(field, a[0], a[1], t)
    if k == "AnisoMod":
        return aniso_mod_norm(field, a[0], t)
    if k == "DBracket":
        return d_norm(field, a[1], a[2], alpha=a[0], t=t)
    if k == "DS":
        return d_norm(field, a[1], a[2], s=a[0], t=t)
    if k == "LowFreqL2":
        return lowfreq_l2(field, a[0], t)
    return l2_norm(field, t)
