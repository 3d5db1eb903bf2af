"""Exponential polynomials in time.

An :class:`ExpPoly` is a finite sum

.. math::

    f(t) = \\sum_j c_j \\, (t/\\tau)^{m_j} \\, e^{i \\theta_j t}

with complex coefficients, nonnegative integer powers and real phase rates.
``tau`` (``t_scale``) only rescales the polynomial part; it keeps
coefficients of high powers representable when the time horizon is tiny.

The algebra is closed under products, conjugation and the Duhamel integral
``t -> int_0^t e^{i s shift} f(s) ds``, which is all the Picard engine needs.
The array kernels at the bottom of this module (``merge_terms``,
``duhamel_terms``) are shared with the sparse field engine.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "ExpPoly",
    "TermCapError",
    "phase_integral",
    "ep_multiply",
    "ep_duhamel",
    "merge_terms",
    "duhamel_terms",
    "PHASE_TOL",
    "PRUNE_ABS",
    "DEFAULT_TERM_CAP",
]

PHASE_TOL = 1e-12
PRUNE_ABS = 1e-300
DEFAULT_TERM_CAP = 10**6

# |rate * horizon| below this switches a constant term to the power series.
SERIES_SWITCH_M0 = 1e-4
SERIES_TOL = 1e-17


class TermCapError(RuntimeError):
    """Raised when an exact computation would exceed its term budget."""


# ---------------------------------------------------------------------------
# array kernels
# ---------------------------------------------------------------------------

def merge_terms(ikeys, theta, coef, tol=PHASE_TOL, prune=PRUNE_ABS):
    """Merge rows with equal integer keys and (nearly) equal phase.

    ``ikeys`` is an ``(n, k)`` integer array (for instance frequency indices
    followed by the power).  Rows are sorted lexicographically by
    ``(ikeys, theta)``; consecutive rows whose phases differ by at most
    ``tol * max(1, |theta|)`` are summed.  The sort is stable, so summation
    order only depends on the input order.
    """
    ikeys = np.asarray(ikeys, dtype=np.int64)
    theta = np.asarray(theta, dtype=np.float64)
    coef = np.asarray(coef, dtype=np.complex128)
    n = coef.shape[0]
    if ikeys.ndim == 1:
        ikeys = ikeys[:, None]
    if n == 0:
        return ikeys.reshape(0, ikeys.shape[1]), theta[:0], coef[:0]
    k = ikeys.shape[1]
    order = np.lexsort((theta,) + tuple(ikeys[:, j] for j in range(k - 1, -1, -1)))
    ik = ikeys[order]
    th = theta[order]
    c = coef[order]
    new = np.empty(n, dtype=bool)
    new[0] = True
    if n > 1:
        gap = np.abs(th[1:] - th[:-1]) > tol * np.maximum(1.0, np.abs(th[1:]))
        new[1:] = gap | np.any(ik[1:] != ik[:-1], axis=1)
    starts = np.flatnonzero(new)
    c = np.add.reduceat(c, starts)
    ik = ik[starts]
    th = th[starts]
    keep = np.abs(c) >= prune
    if not keep.all():
        ik, th, c = ik[keep], th[keep], c[keep]
    return ik, th, c


def _balanced_switch(m):
    # Closed form loses about eps * m! (m+1) / x^(m+1), the series about
    # eps * e^x; switch where the two estimates cross.
    target = math.lgamma(m + 1.0) + math.log(m + 1.0)
    lo, hi = 1e-6, 50.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid + (m + 1) * math.log(mid) < target:
            lo = mid
        else:
            hi = mid
    return lo


_SWITCH = np.array([SERIES_SWITCH_M0] + [_balanced_switch(m) for m in range(1, 171)])


def series_switch(power):
    """Threshold on ``|rate * horizon|`` below which the series branch is used."""
    return _SWITCH[np.minimum(np.asarray(power), _SWITCH.size - 1)]


_FALLING_CACHE: dict[int, np.ndarray] = {}


def _falling_table(mmax):
    """``table[m, j] = m! / (m - j)!`` as floats, for ``0 <= j <= m <= mmax``."""
    size = 1
    while size <= mmax:
        size *= 2
    tab = _FALLING_CACHE.get(size)
    if tab is None:
        if size > 170:
            raise TermCapError(f"polynomial degree {mmax} too large for exact mode")
        tab = np.zeros((size + 1, size + 1))
        for m in range(size + 1):
            acc = 1.0
            tab[m, 0] = 1.0
            for j in range(1, m + 1):
                acc *= m - j + 1
                tab[m, j] = acc
        _FALLING_CACHE[size] = tab
    return tab


def _segment_index(counts):
    """For repeat counts ``counts`` return (source row, position in segment)."""
    counts = np.asarray(counts, dtype=np.int64)
    src = np.repeat(np.arange(counts.size), counts)
    offsets = np.cumsum(counts) - counts
    pos = np.arange(src.size) - np.repeat(offsets, counts)
    return src, pos


def duhamel_terms(coef, power, rate, t_scale, horizon, rate_scale=None):
    """Integrate rows ``c (s/tau)^m e^{i rate s}`` from 0 to t, termwise.

    Returns ``(src, coef, power, theta)`` where ``src`` maps every output row
    back to the input row it came from.  ``rate`` is the total phase rate of
    each row (the row phase plus the Duhamel shift).  Three branches:

    * ``|rate|`` at rounding level: ``c tau t^{m+1}/(m+1)`` (secular growth);
    * ``|rate * horizon|`` small: truncated power series in t (phase 0);
    * otherwise the closed form from repeated integration by parts.

    The series branch keeps the representation well conditioned when the
    horizon is short compared to the oscillation period.
    """
    coef = np.asarray(coef, dtype=np.complex128)
    power = np.asarray(power, dtype=np.int64)
    rate = np.asarray(rate, dtype=np.float64)
    if rate_scale is None:
        rate_scale = np.abs(rate)
    tau = float(t_scale)
    h = float(horizon) / tau
    x = rate * tau
    xh = np.abs(x) * h

    resonant = np.abs(rate) <= PHASE_TOL * np.maximum(1.0, rate_scale)
    switch = series_switch(power)
    series = ~resonant & (xh < switch)
    closed = ~resonant & ~series

    srcs, cs, ms, ths = [], [], [], []

    idx = np.flatnonzero(resonant)
    if idx.size:
        m = power[idx]
        srcs.append(idx)
        cs.append(coef[idx] * tau / (m + 1))
        ms.append(m + 1)
        ths.append(np.zeros(idx.size))

    idx = np.flatnonzero(series)
    if idx.size:
        # smallest n with xh^n / n! < SERIES_TOL, per row
        xr = xh[idx]
        nterms = np.ones(idx.size, dtype=np.int64)
        term = np.ones(idx.size)
        for n in range(1, 60):
            term = term * xr / n
            nterms = np.where(term >= SERIES_TOL, n + 1, nterms)
            if not (term >= SERIES_TOL).any():
                break
        rep, n = _segment_index(nterms)
        rows = idx[rep]
        m = power[rows]
        logfact = np.array([math.lgamma(v + 1.0) for v in range(int(n.max()) + 1)])
        ix = 1j * x[rows]
        c = coef[rows] * tau * ix ** n / np.exp(logfact[n]) / (m + n + 1)
        srcs.append(rows)
        cs.append(c)
        ms.append(m + n + 1)
        ths.append(np.zeros(rows.size))

    idx = np.flatnonzero(closed)
    if idx.size:
        m = power[idx]
        tab = _falling_table(int(m.max()))
        rep, j = _segment_index(m + 1)
        rows = idx[rep]
        mr = power[rows]
        ix = 1j * x[rows]
        sign = np.where(j % 2 == 0, 1.0, -1.0)
        c = coef[rows] * tau * sign * tab[mr, j] / ix ** (j + 1)
        srcs.append(rows)
        cs.append(c)
        ms.append(mr - j)
        ths.append(rate[rows])
        # constant of integration
        sign0 = np.where(m % 2 == 0, 1.0, -1.0)
        c0 = -coef[idx] * tau * sign0 * tab[m, m] / (1j * x[idx]) ** (m + 1)
        srcs.append(idx)
        cs.append(c0)
        ms.append(np.zeros(idx.size, dtype=np.int64))
        ths.append(np.zeros(idx.size))

    if not srcs:
        empty = np.zeros(0)
        return np.zeros(0, dtype=np.int64), empty.astype(complex), empty.astype(np.int64), empty
    return (np.concatenate(srcs), np.concatenate(cs),
            np.concatenate(ms).astype(np.int64), np.concatenate(ths))


# ---------------------------------------------------------------------------
# ExpPoly value type
# ---------------------------------------------------------------------------

class ExpPoly:
    """Finite sum of ``c (t/t_scale)^m exp(i theta t)`` terms.

    Parameters
    ----------
    terms : iterable of (c, m, theta)
        Terms; they are canonicalized (merged, zero terms dropped).
    t_scale : float
        Time unit of the polynomial part.
    """

    __slots__ = ("coef", "power", "phase", "t_scale")

    def __init__(self, terms=(), t_scale=1.0):
        terms = list(terms)
        if terms:
            c, m, th = zip(*terms)
        else:
            c, m, th = (), (), ()
        self._set(np.array(c, dtype=complex), np.array(m, dtype=np.int64),
                  np.array(th, dtype=float), t_scale, canonical=False)

    def _set(self, coef, power, phase, t_scale, canonical):
        if not canonical:
            if np.any(power < 0):
                raise ValueError("powers must be nonnegative")
            ik, phase, coef = merge_terms(power[:, None], phase, coef)
            power = ik[:, 0]
        self.coef = coef
        self.power = power
        self.phase = phase
        self.t_scale = float(t_scale)

    @classmethod
    def from_arrays(cls, coef, power, phase, t_scale=1.0, canonical=False):
        obj = cls.__new__(cls)
        obj._set(np.asarray(coef, dtype=complex), np.asarray(power, dtype=np.int64),
                 np.asarray(phase, dtype=float), t_scale, canonical)
        return obj

    @classmethod
    def constant(cls, c, t_scale=1.0):
        return cls([(c, 0, 0.0)], t_scale=t_scale)

    def __len__(self):
        return self.coef.size

    def terms(self):
        return [(complex(c), int(m), float(th)) for c, m, th in zip(self.coef, self.power, self.phase)]

    def is_zero(self):
        return self.coef.size == 0

    def is_constant(self):
        return bool(np.all(self.power == 0) and np.all(self.phase == 0.0))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = t[..., None] / self.t_scale
        vals = self.coef * s ** self.power * np.exp(1j * self.phase * t[..., None])
        out = vals.sum(axis=-1)
        return complex(out) if out.ndim == 0 else out

    def rescaled(self, t_scale):
        """Same function with a different polynomial time unit."""
        factor = (t_scale / self.t_scale) ** self.power
        return ExpPoly.from_arrays(self.coef * factor, self.power, self.phase, t_scale, canonical=True)

    def conj(self):
        return ExpPoly.from_arrays(self.coef.conj(), self.power, -self.phase, self.t_scale, canonical=True)

    def __neg__(self):
        return ExpPoly.from_arrays(-self.coef, self.power, self.phase, self.t_scale, canonical=True)

    def _aligned(self, other):
        if not isinstance(other, ExpPoly):
            other = ExpPoly.constant(other, self.t_scale)
        if other.t_scale != self.t_scale:
            other = other.rescaled(self.t_scale)
        return other

    def __add__(self, other):
        other = self._aligned(other)
        return ExpPoly.from_arrays(np.concatenate([self.coef, other.coef]),
                                   np.concatenate([self.power, other.power]),
                                   np.concatenate([self.phase, other.phase]), self.t_scale)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._aligned(other))

    def __mul__(self, other):
        if isinstance(other, ExpPoly):
            return ep_multiply(self, other)
        return ExpPoly.from_arrays(self.coef * other, self.power, self.phase, self.t_scale)

    __rmul__ = __mul__

    def __repr__(self):
        body = " + ".join(f"({c:.6g})·s^{m}·e^(i{th:g}t)" for c, m, th in self.terms()[:6])
        more = "" if len(self) <= 6 else f" + … ({len(self)} terms)"
        return f"ExpPoly[{body or '0'}{more}; s=t/{self.t_scale:g}]"


def phase_integral(phi, T):
    """``int_0^T exp(i phi t) dt``, accurate also for tiny ``phi * T``."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    x = phi * T
    if x == 0.0:
        return complex(T)
    if abs(x) < SERIES_SWITCH_M0:
        # T * sum (i x)^n / (n+1)!, four terms reach 1e-16 relative
        ix = 1j * x
        return complex(T * (1 + ix / 2 + ix**2 / 6 + ix**3 / 24 + ix**4 / 120))
    return complex((np.exp(1j * x) - 1.0) / (1j * phi))


def ep_multiply(a, b, cap=DEFAULT_TERM_CAP):
    """Termwise product; raises :class:`TermCapError` past ``cap`` terms."""
    if b.t_scale != a.t_scale:
        b = b.rescaled(a.t_scale)
    c = np.multiply.outer(a.coef, b.coef).ravel()
    m = np.add.outer(a.power, b.power).ravel()
    th = np.add.outer(a.phase, b.phase).ravel()
    out = ExpPoly.from_arrays(c, m, th, a.t_scale)
    if len(out) > cap:
        raise TermCapError(f"product has {len(out)} terms (cap {cap})")
    return out


def ep_duhamel(inner, shift, t_max=None):
    """ExpPoly of ``t -> int_0^t exp(i tau shift) inner(tau) dtau``.

    ``t_max`` is the largest time at which the result will be used; it
    selects the power-series branch for slowly rotating terms.  Defaults to
    ``inner.t_scale``.
    """
    if t_max is None:
        t_max = inner.t_scale
    rate = inner.phase + shift
    scale = np.abs(inner.phase) + abs(shift)
    _, c, m, th = duhamel_terms(inner.coef, inner.power, rate, inner.t_scale, t_max, scale)
    return ExpPoly.from_arrays(c, m, th, inner.t_scale)
