"""Frequency lattices and sparse spectral fields.

Frequencies live on the lattice ``L = prod_i step_i * Z``.  They are stored as
integer index tuples, so every convolution is exact integer arithmetic; the
physical coordinate of index ``n`` in direction ``i`` is ``n * step_i``.

Direction ordering follows ``Z = R^{d1} x T^{d2}``: the ``d1 = d - d2``
non-periodic directions come first, the periodic ones last.  Periodic
directions have step ``2 pi / period`` (so the default period ``2 pi`` gives
integer frequencies).  Non-periodic directions are sampled with a quadrature
cell; integrals over them become Riemann sums, which is an approximation and
is labelled as such (``DomainSpec.is_exact``).

A :class:`SpectralField` is a columnar table of rows
``(index, power m, phase rate theta, coefficient c)``.  The amplitude at a
frequency is the exponential polynomial formed by its rows.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np

from .exppoly import ExpPoly, TermCapError, merge_terms, PRUNE_ABS

__all__ = [
    "DomainSpec",
    "SpectralField",
    "LatticeMismatchError",
    "torus",
    "minkowski_sum",
    "signed_sumset",
    "support_bound_check",
    "SupportCheck",
    "field_multiply",
    "field_sum",
    "MAX_PAIRS",
    "CHUNK_PAIRS",
]

MAX_PAIRS = 20_000_000
CHUNK_PAIRS = 1 << 21
INDEX_RTOL = 1e-12


class LatticeMismatchError(ValueError):
    """Fields on different lattices were combined."""


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of ``R^{d - d2} x T^{d2}``.

    Parameters
    ----------
    d : int
        Total dimension, 1 to 4.
    d2 : int
        Number of periodic directions (the last ``d2`` ones).
    periods : tuple of float, optional
        Torus periods, default ``2 pi`` each.
    quadrature_cell : tuple of float, optional
        Frequency grid spacing per non-periodic direction.  Required iff
        ``d2 < d``.
    """

    d: int
    d2: int
    periods: tuple = None
    quadrature_cell: tuple = None

    def __post_init__(self):
        if not 1 <= self.d <= 4:
            raise ValueError("d must be in 1..4")
        if not 0 <= self.d2 <= self.d:
            raise ValueError("d2 must be in 0..d")
        periods = self.periods
        if periods is None:
            periods = (2 * math.pi,) * self.d2
        periods = tuple(float(x) for x in periods)
        if len(periods) != self.d2 or any(x <= 0 for x in periods):
            raise ValueError("need d2 positive periods")
        object.__setattr__(self, "periods", periods)
        d1 = self.d - self.d2
        cell = self.quadrature_cell
        if d1 == 0:
            if cell not in (None, ()):
                raise ValueError("quadrature_cell only allowed with non-periodic directions")
            cell = ()
        else:
            if cell is None:
                raise ValueError("quadrature_cell required for non-periodic directions")
            if np.isscalar(cell):
                cell = (cell,) * d1
            cell = tuple(float(x) for x in cell)
            if len(cell) != d1 or any(x <= 0 for x in cell):
                raise ValueError("need one positive quadrature cell per non-periodic direction")
        object.__setattr__(self, "quadrature_cell", cell)

    @property
    def d1(self):
        return self.d - self.d2

    @property
    def steps(self):
        return np.array(self.quadrature_cell + tuple(2 * math.pi / p for p in self.periods))

    @property
    def is_exact(self):
        """True on a pure torus, where sums over frequencies are exact."""
        return self.d2 == self.d

    @property
    def measure_weight(self):
        """Weight of one lattice point: product of the quadrature cells."""
        return float(np.prod(self.quadrature_cell)) if self.quadrature_cell else 1.0

    def index_of(self, coords):
        """Integer indices of physical frequencies (rows of ``coords``)."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if coords.shape[1] != self.d:
            raise ValueError(f"expected {self.d} coordinates")
        q = coords / self.steps
        n = np.rint(q)
        if np.any(np.abs(q - n) > INDEX_RTOL * np.maximum(1.0, np.abs(q))):
            raise ValueError("frequency not on the lattice")
        return n.astype(np.int64)

    def coords_of(self, idx):
        return np.asarray(idx, dtype=float) * self.steps

    def sq_norm(self, idx):
        """``|xi|^2`` for index rows."""
        x = self.coords_of(idx)
        return np.sum(x * x, axis=-1)

    def to_dict(self):
        return {"d": self.d, "d2": self.d2, "periods": list(self.periods),
                "quadrature_cell": list(self.quadrature_cell)}

    @classmethod
    def from_dict(cls, data):
        cell = data.get("quadrature_cell") or None
        return cls(int(data["d"]), int(data["d2"]), tuple(data.get("periods") or ()) or None,
                   tuple(cell) if cell else None)


def torus(d=1):
    """The ``2 pi``-periodic torus of dimension ``d``."""
    return DomainSpec(d, d)


def _as_index_array(S, d=None):
    arr = np.array(sorted(tuple(np.atleast_1d(s)) for s in S), dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, d or 1), dtype=np.int64)
    return arr.reshape(len(S), -1)


def _as_keys(arr):
    return {tuple(int(v) for v in row) for row in arr}


def minkowski_sum(S, T, signs=(1, 1)):
    """``{s1 * a + s2 * b : a in S, b in T}`` for sets of index tuples."""
    if not S or not T:
        return set()
    a = _as_index_array(S)
    b = _as_index_array(T)
    out = signs[0] * a[:, None, :] + signs[1] * b[None, :, :]
    return _as_keys(out.reshape(-1, a.shape[1]))


def signed_sumset(Sigma, k):
    """``S_k``: sums of ``k`` elements of ``Sigma`` or ``-Sigma``."""
    base = set(tuple(s) for s in Sigma) | {tuple(-v for v in s) for s in Sigma}
    cur = set(base)
    for _ in range(k - 1):
        cur = minkowski_sum(cur, base)
    return cur


class SupportCheck(NamedTuple):
    ok: bool
    witness: tuple | None
    n_centers: int

    def __bool__(self):
        return self.ok


def support_bound_check(k, Sigma, field):
    """Check that the support lies in the union of ``eta + Q_{kA}``, eta in S_k.

    ``Sigma`` holds index tuples.  Boxes are taken closed, because conjugate
    factors flip the half-open box edges.  Returns a :class:`SupportCheck`
    that is truthy on success and carries the first offending index otherwise.
    """
    centers = np.array(sorted(signed_sumset(Sigma, k)), dtype=np.int64)
    supp = field.idx_unique()
    if supp.shape[0] == 0:
        return SupportCheck(True, None, len(centers))
    dom = field.domain
    half = k * field.cell_size / 2 * (1 + 1e-12)
    cx = dom.coords_of(centers)
    for start in range(0, supp.shape[0], 4096):
        x = dom.coords_of(supp[start:start + 4096])
        dist = np.max(np.abs(x[:, None, :] - cx[None, :, :]), axis=2)
        bad = np.flatnonzero(dist.min(axis=1) > half)
        if bad.size:
            return SupportCheck(False, tuple(int(v) for v in supp[start + bad[0]]), len(centers))
    return SupportCheck(True, None, len(centers))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Sparse frequency-indexed amplitudes, possibly time dependent.

    Rows ``(idx[j], power[j], theta[j], coef[j])`` stand for the term
    ``coef (t/t_scale)^power exp(i theta t)`` at lattice index ``idx[j]``.
    ``twisted`` marks interaction-picture storage, where the physical
    amplitude is ``exp(-i t |xi|^2)`` times the stored one.

    Use :meth:`from_entries`, :meth:`static` or :meth:`from_rows`; those
    canonicalize (merge equal ``(idx, m, theta)``, drop zeros).
    """

    domain: DomainSpec
    cell_size: float
    idx: np.ndarray
    power: np.ndarray
    theta: np.ndarray
    coef: np.ndarray
    t_scale: float = 1.0
    twisted: bool = False
    _cache: dict = dc_field(default_factory=dict, repr=False, compare=False)

    # construction ---------------------------------------------------------

    @classmethod
    def from_rows(cls, domain, cell_size, idx, power, theta, coef, t_scale=1.0,
                  twisted=False, canonical=False):
        idx = np.asarray(idx, dtype=np.int64).reshape(-1, domain.d)
        power = np.asarray(power, dtype=np.int64).reshape(-1)
        theta = np.asarray(theta, dtype=float).reshape(-1)
        coef = np.asarray(coef, dtype=complex).reshape(-1)
        if not canonical:
            keys = np.concatenate([idx, power[:, None]], axis=1)
            keys, theta, coef = merge_terms(keys, theta, coef)
            idx, power = keys[:, :-1], keys[:, -1]
        for a in (idx, power, theta, coef):
            a.setflags(write=False)
        return cls(domain, float(cell_size), idx, power, theta, coef, float(t_scale), bool(twisted))

    @classmethod
    def static(cls, domain, cell_size, idx, values):
        """Time-independent field with the given amplitudes."""
        idx = np.asarray(idx, dtype=np.int64).reshape(-1, domain.d)
        n = idx.shape[0]
        return cls.from_rows(domain, cell_size, idx, np.zeros(n, dtype=np.int64), np.zeros(n),
                             np.broadcast_to(np.asarray(values, dtype=complex), (n,)))

    @classmethod
    def from_entries(cls, domain, cell_size, entries, t_scale=1.0, twisted=False):
        """Build from a mapping ``index tuple -> ExpPoly`` (or number)."""
        idx, pw, th, cf = [], [], [], []
        for key, val in entries.items():
            key = tuple(np.atleast_1d(key))
            if not isinstance(val, ExpPoly):
                val = ExpPoly.constant(val, t_scale)
            elif val.t_scale != t_scale:
                val = val.rescaled(t_scale)
            for c, m, t in zip(val.coef, val.power, val.phase):
                idx.append(key)
                pw.append(m)
                th.append(t)
                cf.append(c)
        return cls.from_rows(domain, cell_size, np.array(idx, dtype=np.int64).reshape(-1, domain.d),
                             pw, th, cf, t_scale, twisted)

    @classmethod
    def zeros(cls, domain, cell_size, t_scale=1.0, twisted=False):
        return cls.from_rows(domain, cell_size, np.zeros((0, domain.d), dtype=np.int64), [], [], [],
                             t_scale, twisted, canonical=True)

    def _like(self, idx, power, theta, coef, canonical=False, **kw):
        args = dict(t_scale=self.t_scale, twisted=self.twisted)
        args.update(kw)
        return SpectralField.from_rows(self.domain, self.cell_size, idx, power, theta, coef,
                                       canonical=canonical, **args)

    # inspection -----------------------------------------------------------

    @property
    def n_rows(self):
        return self.coef.size

    @property
    def measure_weight(self):
        return self.domain.measure_weight

    def is_static(self):
        return bool(np.all(self.power == 0) and np.all(self.theta == 0.0)) and not (
            self.twisted and self.n_rows and np.any(self.domain.sq_norm(self.idx) != 0))

    def idx_unique(self):
        if "uidx" not in self._cache:
            self._cache["uidx"] = (np.unique(self.idx, axis=0) if self.n_rows
                                   else np.zeros((0, self.domain.d), dtype=np.int64))
        return self._cache["uidx"]

    def support(self):
        """Set of index tuples carrying a nonzero amplitude."""
        return _as_keys(self.idx_unique())

    @property
    def entries(self):
        """Mapping ``index tuple -> ExpPoly`` (stored representation)."""
        if "entries" not in self._cache:
            out = {}
            if self.n_rows:
                starts = np.flatnonzero(np.r_[True, np.any(self.idx[1:] != self.idx[:-1], axis=1)])
                ends = np.r_[starts[1:], self.n_rows]
                for a, b in zip(starts, ends):
                    out[tuple(int(v) for v in self.idx[a])] = ExpPoly.from_arrays(
                        self.coef[a:b], self.power[a:b], self.theta[a:b], self.t_scale)
            self._cache["entries"] = out
        return self._cache["entries"]

    def values(self):
        """``(idx, amplitude)`` of a static field, one row per frequency."""
        if not self.is_static():
            raise ValueError("field depends on time; evaluate it with at(t) first")
        return self.idx, self.coef

    def at(self, t):
        """Physical (untwisted) field frozen at time ``t``."""
        t = float(t)
        val = self.coef * (t / self.t_scale) ** self.power * np.exp(1j * self.theta * t)
        if self.twisted:
            val = val * np.exp(-1j * t * self.domain.sq_norm(self.idx))
        n = self.n_rows
        return SpectralField.from_rows(self.domain, self.cell_size, self.idx,
                                       np.zeros(n, dtype=np.int64), np.zeros(n), val)

    def value_at(self, index, t):
        """Physical amplitude at one index and time."""
        index = np.asarray(index, dtype=np.int64).reshape(1, -1)
        mask = np.all(self.idx == index, axis=1)
        if not mask.any():
            return 0j
        sub = SpectralField(self.domain, self.cell_size, self.idx[mask], self.power[mask],
                            self.theta[mask], self.coef[mask], self.t_scale, self.twisted)
        return complex(sub.at(t).coef.sum())

    # algebra --------------------------------------------------------------

    def _check(self, other):
        if other.domain != self.domain:
            raise LatticeMismatchError("fields live on different lattices")
        if other.twisted != self.twisted:
            raise ValueError("cannot mix twisted and physical fields")

    def rescaled(self, t_scale):
        if t_scale == self.t_scale:
            return self
        factor = (t_scale / self.t_scale) ** self.power
        return self._like(self.idx, self.power, self.theta, self.coef * factor, canonical=True,
                          t_scale=t_scale)

    def scale(self, c):
        return self._like(self.idx, self.power, self.theta, self.coef * c)

    def __add__(self, other):
        return field_sum([self, other])

    def __sub__(self, other):
        return field_sum([self, other.scale(-1.0)])

    def untwisted(self):
        """Same function with the free-evolution phase folded into ``theta``."""
        if not self.twisted:
            return self
        th = self.theta - self.domain.sq_norm(self.idx)
        return self._like(self.idx, self.power, th, self.coef, canonical=True, twisted=False)

    def twisted_form(self):
        if self.twisted:
            return self
        th = self.theta + self.domain.sq_norm(self.idx)
        return self._like(self.idx, self.power, th, self.coef, canonical=True, twisted=True)

    def conj(self):
        """Fourier coefficients of the complex conjugate function."""
        if self.twisted:
            raise ValueError("conjugate the physical form (untwisted()) instead")
        return self._like(-self.idx, self.power, -self.theta, self.coef.conj())

    def with_cell_size(self, A):
        return SpectralField(self.domain, float(A), self.idx, self.power, self.theta, self.coef,
                             self.t_scale, self.twisted)

    def __repr__(self):
        kind = "twisted" if self.twisted else "physical"
        return (f"SpectralField({len(self.idx_unique())} freqs, {self.n_rows} rows, {kind}, "
                f"A={self.cell_size:g}, d={self.domain.d}, d2={self.domain.d2})")


def field_sum(fields):
    """Sum of fields on one lattice (rows concatenated, then merged)."""
    fields = list(fields)
    first = fields[0]
    ts = first.t_scale
    parts = []
    for f in fields:
        first._check(f)
        parts.append(f.rescaled(ts))
    return SpectralField.from_rows(
        first.domain, first.cell_size,
        np.concatenate([f.idx for f in parts]), np.concatenate([f.power for f in parts]),
        np.concatenate([f.theta for f in parts]), np.concatenate([f.coef for f in parts]),
        ts, first.twisted)


def _product_chunk(f, g, lo, hi, weight):
    a = slice(lo, hi)
    idx = (f.idx[a, None, :] + g.idx[None, :, :]).reshape(-1, f.domain.d)
    pw = (f.power[a, None] + g.power[None, :]).reshape(-1)
    th = (f.theta[a, None] + g.theta[None, :]).reshape(-1)
    cf = (f.coef[a, None] * g.coef[None, :]).reshape(-1)
    if weight != 1.0:
        cf = cf * weight
    keys, th, cf = merge_terms(np.concatenate([idx, pw[:, None]], axis=1), th, cf)
    return keys, th, cf


def field_multiply(f, g, workers=1, max_pairs=MAX_PAIRS):
    """Fourier coefficients of the pointwise product of two physical fields.

    The convolution runs over row pairs in fixed chunks of ``f``; each chunk
    is merged on its own and the chunk results are merged in order, so the
    output does not depend on ``workers``.  On quadrature directions each
    pair carries the cell volume (Riemann sum of the convolution integral).
    """
    f._check(g)
    if f.twisted:
        raise ValueError("multiply physical (untwisted) fields")
    if f.n_rows == 0 or g.n_rows == 0:
        return SpectralField.zeros(f.domain, f.cell_size, f.t_scale)
    g = g.rescaled(f.t_scale)
    npairs = f.n_rows * g.n_rows
    if npairs > max_pairs:
        raise TermCapError(f"product needs {npairs} row pairs (cap {max_pairs})")
    step = max(1, CHUNK_PAIRS // g.n_rows)
    bounds = [(lo, min(lo + step, f.n_rows)) for lo in range(0, f.n_rows, step)]
    weight = f.domain.measure_weight
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _product_chunk(f, g, b[0], b[1], weight), bounds))
    else:
        parts = [_product_chunk(f, g, lo, hi, weight) for lo, hi in bounds]
    if len(parts) == 1:
        keys, th, cf = parts[0]
    else:
        keys, th, cf = merge_terms(np.concatenate([p[0] for p in parts]),
                                   np.concatenate([p[1] for p in parts]),
                                   np.concatenate([p[2] for p in parts]))
    return SpectralField.from_rows(f.domain, f.cell_size, keys[:, :-1], keys[:, -1], th, cf,
                                   f.t_scale, False, canonical=True)
