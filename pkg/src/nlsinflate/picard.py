"""Picard iterates of ``i u_t + Lap u = F(u, conj u)``.

With ``F = sum_j nu_j u^{q_j} conj(u)^{p_j - q_j}`` the iterates are

    U_1 = exp(i t Lap) phi,
    U_k = -i sum_j nu_j sum_{k_1 + ... + k_p = k}
          int_0^t exp(i (t - s) Lap) mu_{p,q}(U_{k_1}, ..., U_{k_p})(s) ds.

Iterates are stored in interaction-picture form
``tilde U_k(xi, t) = exp(i t |xi|^2) hat U_k(xi, t)``.  Then ``tilde U_1`` is
constant in time and each Duhamel step is an ExpPoly integral with shift
``+|xi|^2``; the phase rate attached to a product of first iterates is the
resonance function ``|xi|^2 - sum_{l <= q} |xi_l|^2 + sum_{m > q} |xi_m|^2``.

Fourier convention: coefficient sequences on the torus (no ``2 pi`` factors),
so the constant in front of the first nonlinear iterate is ``-i nu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exppoly import TermCapError, duhamel_terms
from .lattice import SpectralField, field_multiply, field_sum, LatticeMismatchError

__all__ = [
    "NonlinearitySpec",
    "IterateTable",
    "DivergenceError",
    "SequenceHypothesisError",
    "mu_convolve",
    "field_duhamel",
    "next_iterate",
    "first_iterate",
    "series_sum",
    "series_decompose",
    "sequence_a",
    "verify_sequence_bound",
    "gauge_phase_action",
    "CONVERGENCE_TRUST",
]

CONVERGENCE_TRUST = 0.9


class DivergenceError(ArithmeticError):
    """Measured geometric ratio of the iterates is at least 1."""

    def __init__(self, message, rho_hat=None, partial=None):
        super().__init__(message)
        self.rho_hat = rho_hat
        self.partial = partial


class SequenceHypothesisError(ValueError):
    """A sequence does not satisfy the recursive inequality it is claimed to."""

    def __init__(self, message, k):
        super().__init__(message)
        self.k = k


@dataclass(frozen=True)
class NonlinearitySpec:
    """``F(u, conj u) = sum nu_j u^{q_j} conj(u)^{p_j - q_j}``.

    ``terms`` is a sequence of ``(p, q, nu)`` with ``p >= 2``,
    ``0 <= q <= p``, ``nu != 0`` and distinct ``(p, q)``.
    """

    terms: tuple

    def __post_init__(self):
        terms = tuple((int(p), int(q), complex(nu)) for p, q, nu in self.terms)
        if not terms:
            raise ValueError("nonlinearity needs at least one term")
        seen = set()
        for p, q, nu in terms:
            if p < 2:
                raise ValueError(f"degree p={p} must be at least 2")
            if not 0 <= q <= p:
                raise ValueError(f"q={q} must lie in [0, {p}]")
            if nu == 0:
                raise ValueError("coefficients must be nonzero")
            if (p, q) in seen:
                raise ValueError(f"duplicate term (p, q) = ({p}, {q})")
            seen.add((p, q))
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, p, q, nu=1.0):
        return cls(((p, q, nu),))

    @property
    def p_max(self):
        return max(p for p, _, _ in self.terms)

    @property
    def degrees(self):
        return sorted({p for p, _, _ in self.terms})

    def top_terms(self):
        """``{q: nu_{p,q}}`` for the terms of maximal degree."""
        pm = self.p_max
        return {q: nu for p, q, nu in self.terms if p == pm}

    def lower_part(self):
        rest = tuple(t for t in self.terms if t[0] < self.p_max)
        return NonlinearitySpec(rest) if rest else None

    def is_gauge_invariant(self):
        return all(p == 2 * q - 1 for p, q, _ in self.terms)

    def to_list(self):
        return [[p, q, [nu.real, nu.imag]] for p, q, nu in self.terms]

    @classmethod
    def from_list(cls, data):
        terms = []
        for p, q, nu in data:
            if isinstance(nu, (list, tuple)):
                nu = complex(nu[0], nu[1])
            terms.append((p, q, nu))
        return cls(tuple(terms))

    def orders(self, K):
        """Orders ``k <= K`` that can carry a nonzero iterate."""
        steps = {p - 1 for p in self.degrees}
        ok = {1}
        for k in range(2, K + 1):
            if any((k - s) in ok for s in steps):
                ok.add(k)
        return sorted(ok)


# ---------------------------------------------------------------------------
# multilinear products and Duhamel integral on fields
# ---------------------------------------------------------------------------

def _physical(f, t_twist):
    if t_twist:
        if not f.twisted:
            raise ValueError("t_twist expects interaction-picture fields")
        return f.untwisted()
    if f.twisted:
        raise ValueError("physical fields expected when t_twist is false")
    return f


def mu_convolve(fields, q, t_twist=True, workers=1):
    """Fourier coefficients of ``prod_{l <= q} u_l prod_{m > q} conj(u_m)``.

    With ``t_twist`` the inputs are interaction-picture fields; their free
    phases are folded into the rows so the output (a physical field) is
    ready for :func:`field_duhamel`.
    """
    fields = list(fields)
    p = len(fields)
    if not 0 <= q <= p:
        raise ValueError("q out of range")
    dom = fields[0].domain
    for f in fields:
        if f.domain != dom:
            raise LatticeMismatchError("fields live on different lattices")
    factors = [_physical(f, t_twist) for f in fields[:q]]
    factors += [_physical(f, t_twist).conj() for f in fields[q:]]
    out = factors[0]
    for g in factors[1:]:
        out = field_multiply(out, g, workers=workers)
    return out


def field_duhamel(nonlin, horizon):
    """``exp(i t |xi|^2) int_0^t exp(-i (t - s) |xi|^2) N(s) ds`` per frequency.

    ``nonlin`` is a physical field (for instance from :func:`mu_convolve`);
    the result is in interaction-picture form.
    """
    if nonlin.twisted:
        raise ValueError("Duhamel input must be a physical field")
    w = nonlin.domain.sq_norm(nonlin.idx)
    rate = nonlin.theta + w
    src, c, m, th = duhamel_terms(nonlin.coef, nonlin.power, rate, nonlin.t_scale, horizon,
                                  np.abs(nonlin.theta) + w)
    return SpectralField.from_rows(nonlin.domain, nonlin.cell_size, nonlin.idx[src], m, th, c,
                                   nonlin.t_scale, twisted=True)


def _compositions(k, p):
    """Compositions of ``k`` into ``p`` positive parts, lexicographic."""
    if p == 1:
        yield (k,)
        return
    for first in range(1, k - p + 2):
        for rest in _compositions(k - first, p - 1):
            yield (first,) + rest


def composition_classes(k, p, q, available):
    """Group compositions by the multisets of plain and conjugated orders.

    Returns ``[(plain, conj, count)]`` in lexicographic order of the first
    composition in each class, restricted to orders in ``available``.
    """
    classes = {}
    order = []
    for comp in _compositions(k, p):
        if not all(c in available for c in comp):
            continue
        key = (tuple(sorted(comp[:q])), tuple(sorted(comp[q:])))
        if key not in classes:
            classes[key] = 0
            order.append(key)
        classes[key] += 1
    return [(a, b, classes[(a, b)]) for a, b in order]


# ---------------------------------------------------------------------------
# iterate table
# ---------------------------------------------------------------------------

class IterateTable:
    """Interaction-picture Picard iterates of one datum.

    Parameters
    ----------
    data : SpectralField
        Static physical initial datum ``phi``.
    nonlinearity : NonlinearitySpec
    horizon : float
        Largest time of interest; also the polynomial time unit.
    workers : int
        Thread count for the pair products (results do not depend on it).
    """

    def __init__(self, data, nonlinearity, horizon, workers=1):
        if not data.is_static() or data.twisted:
            raise ValueError("initial datum must be a static physical field")
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        self.data = data
        self.nonlinearity = nonlinearity
        self.horizon = float(horizon)
        self.workers = int(workers)
        u1 = SpectralField.from_rows(data.domain, data.cell_size, data.idx, data.power, data.theta,
                                     data.coef, t_scale=self.horizon, twisted=True, canonical=True)
        self.by_order = {1: u1}
        self._physical = {}

    @classmethod
    def build(cls, data, nonlinearity, horizon, K, workers=1):
        table = cls(data, nonlinearity, horizon, workers)
        table.extend(K)
        return table

    @property
    def depth(self):
        return self._depth if hasattr(self, "_depth") else 1

    def extend(self, K):
        for k in range(self.depth + 1, K + 1):
            next_iterate(self, k)
        return self

    def get(self, k):
        """Iterate ``k`` (twisted); zero field when absent."""
        if k > self.depth:
            raise KeyError(f"order {k} not computed (depth {self.depth})")
        f = self.by_order.get(k)
        if f is None:
            return SpectralField.zeros(self.data.domain, self.data.cell_size, self.horizon, True)
        return f

    def physical(self, k, conj=False):
        key = (k, conj)
        if key not in self._physical:
            f = self.by_order[k].untwisted()
            self._physical[key] = f.conj() if conj else f
        return self._physical[key]

    def orders(self):
        return sorted(self.by_order)

    def at(self, k, t):
        return self.get(k).at(t)


def _product_of_orders(table, plain, conj):
    factors = [table.physical(k) for k in plain] + [table.physical(k, True) for k in conj]
    out = factors[0]
    for g in factors[1:]:
        out = field_multiply(out, g, workers=table.workers)
    return out


def next_iterate(table, k):
    """Compute, store and return the twisted iterate ``U_k``.

    All nonlinearity terms and compositions are summed (each scaled by
    ``-i nu_j`` and its multiplicity) before a single Duhamel integral.
    Orders that vanish identically are left out of ``table.by_order``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if table.depth < k - 1:
        raise ValueError(f"orders below {k} are not populated")
    available = set(table.by_order)
    parts = []
    for j, (p, q, nu) in enumerate(table.nonlinearity.terms):
        for plain, conj, count in composition_classes(k, p, q, available):
            try:
                prod = _product_of_orders(table, plain, conj)
            except TermCapError as exc:
                raise TermCapError(f"order k={k}, term j={j} (p={p}, q={q}): {exc}") from exc
            parts.append(prod.scale(-1j * nu * count))
    table._depth = k
    if not parts:
        table.by_order.pop(k, None)
        return table.get(k)
    total = field_sum(parts)
    try:
        uk = field_duhamel(total, table.horizon)
    except TermCapError as exc:
        raise TermCapError(f"order k={k}: {exc}") from exc
    if uk.n_rows:
        table.by_order[k] = uk
    return table.get(k)


def first_iterate(data, p, q, horizon, workers=1):
    """``G_q[phi] = -i Duhamel(mu_{p,q}(U_1, ..., U_1))`` in twisted form."""
    table = IterateTable(data, NonlinearitySpec.single(p, q), horizon, workers)
    u1 = table.by_order[1]
    prod = mu_convolve([u1] * p, q, t_twist=True, workers=workers)
    return field_duhamel(prod.scale(-1j), horizon)


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------

def _norm_MA(field, A):
    from .norms import modulation_norm
    return modulation_norm(field, A)


def geometric_ratio(norms, step=1):
    """Per-order growth ratio from ``{k: norm}``.

    Orders ``k >= 2`` are grouped into blocks ``b = ceil((k - 1) / step)``
    (block 0 is ``k = 1``) and the norms summed per block.  The ratio
    ``(B_b / B_{b-1})^{1/step}`` is formed for the last two complete blocks
    and the larger one is returned.  With ``step = p_max - 1`` each block
    holds one step of the top-degree chain, so mixed nonlinearities whose
    lower terms populate the orders in between do not make the estimate
    alternate.
    """
    if not norms:
        return 0.0
    kmax = max(norms)
    last = (kmax - 1) // step
    blocks = [0.0] * (last + 1)
    for k, v in norms.items():
        b = -(-(k - 1) // step)
        if b <= last:
            blocks[b] += v
    ratios = []
    for b in range(1, last + 1):
        if blocks[b - 1] > 0:
            ratios.append((blocks[b] / blocks[b - 1]) ** (1.0 / step))
    if not ratios:
        return 0.0
    return max(ratios[-2:])


def series_sum(table, T, K, A=None, strict=True):
    """Partial sum ``sum_{k <= K} U_k(T)`` and the measured ratio.

    The ratio ``rho_hat`` is the geometric growth per unit order of the
    ``M_A`` norms over the last two populated orders (see
    :func:`geometric_ratio`).  Results are trustworthy when ``rho_hat < 0.9``; with ``strict``
    a ratio of at least 1 raises :class:`DivergenceError`.
    """
    if T > table.horizon * (1 + 1e-12):
        raise ValueError("T beyond the table horizon")
    table.extend(K)
    A = table.data.cell_size if A is None else A
    parts, norms = [], {}
    for k in table.orders():
        if k > K:
            continue
        f = table.get(k).at(T)
        parts.append(f)
        norms[k] = _norm_MA(f, A)
    total = field_sum(parts)
    rho_hat = geometric_ratio(norms, table.nonlinearity.p_max - 1)
    if strict and rho_hat >= 1.0:
        raise DivergenceError(f"outside empirical convergence radius (rho_hat={rho_hat:.3g})",
                              rho_hat, total)
    return total, rho_hat


@dataclass
class SeriesParts:
    U1: SpectralField
    U_low: SpectralField
    U_main: SpectralField
    U_high: SpectralField

    def __iter__(self):
        return iter((self.U1, self.U_low, self.U_main, self.U_high))

    def total(self):
        return field_sum(list(self))


def main_part(data, nonlinearity, T, horizon=None, workers=1):
    """``sum_q nu_{p,q} G_q[phi]`` at time ``T`` (``p`` the top degree)."""
    horizon = T if horizon is None else horizon
    p = nonlinearity.p_max
    parts = []
    for q, nu in sorted(nonlinearity.top_terms().items()):
        parts.append(first_iterate(data, p, q, horizon, workers).at(T).scale(nu))
    return field_sum(parts)


def series_decompose(table, T, K):
    """Split the partial sum into ``U_1 + U_low + U_main + U_high`` at ``T``.

    ``U_main`` collects the first iterates of the top-degree terms,
    ``U_low`` the remaining orders ``2..p`` and ``U_high`` orders above ``p``.
    """
    table.extend(K)
    p = table.nonlinearity.p_max
    U1 = table.get(1).at(T)
    zero = SpectralField.zeros(U1.domain, U1.cell_size)
    umain = zero
    if K >= p:
        umain = main_part(table.data, table.nonlinearity, T, table.horizon, table.workers)
    low = [table.get(k).at(T) for k in table.orders() if 2 <= k <= min(p, K)]
    high = [table.get(k).at(T) for k in table.orders() if p < k <= K]
    ulow = field_sum([zero] + low + [umain.scale(-1.0)])
    uhigh = field_sum([zero] + high)
    return SeriesParts(U1, ulow, umain, uhigh)


# ---------------------------------------------------------------------------
# the a_k sequence
# ---------------------------------------------------------------------------

def sequence_a(p, kmax):
    """Exact values ``[a_1, ..., a_kmax]`` of

    ``a_1 = 1``, ``a_k = (p-1)/(k-1) sum_{k_1+...+k_p = k} a_{k_1} ... a_{k_p}``.

    The composition sum is the coefficient of ``x^k`` in ``A(x)^p``; with
    ``A = x B`` it equals ``[x^{k-p}] B^p``, whose coefficients follow from
    the power recurrence ``c_n = sum_j ((p+1) j - n) b_j c_{n-j} / (n b_0)``.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    if not 1 <= kmax <= 200:
        raise ValueError("kmax must be in 1..200")
    a = [Fraction(0), Fraction(1)]       # a[0] unused
    c = [Fraction(1)]                    # coefficients of B^p, B = a_1 + a_2 x + ...
    for k in range(2, kmax + 1):
        n = k - p
        if n < 0:
            a.append(Fraction(0))
            continue
        if n > 0:
            s = sum(((p + 1) * j - n) * a[j + 1] * c[n - j] for j in range(1, n + 1))
            c.append(s / n)
        a.append(Fraction(p - 1, k - 1) * c[n])
    return a[1:]


def composition_sums(b, p):
    """``s_k = sum_{k_1+...+k_p = k} b_{k_1} ... b_{k_p}`` for ``k = 1..len(b)``."""
    b = np.asarray([float(x) for x in b])
    n = b.size
    poly = np.concatenate([[0.0], b])     # coefficient of x^k at index k
    acc = poly.copy()
    for _ in range(p - 1):
        acc = np.convolve(acc, poly)[: n + 1]
    return acc[1:]


def verify_sequence_bound(b, p, C):
    """Check ``b_k <= b_1 C_0^{k-1}`` with ``C_0 = (pi^2/6) (C p^2)^{1/(p-1)} b_1``.

    The hypothesis ``b_k <= C sum_{k_1+...+k_p=k} b_{k_1}...b_{k_p}`` (k >= 2)
    is checked first; a violation raises :class:`SequenceHypothesisError`
    naming the first failing ``k``.
    """
    vals = [float(x) for x in b]
    if not vals:
        return True
    if any(v < 0 for v in vals):
        raise SequenceHypothesisError("sequence must be nonnegative", 1)
    sums = composition_sums(vals, p)
    for k in range(2, len(vals) + 1):
        if vals[k - 1] > C * sums[k - 1] * (1 + 1e-12):
            raise SequenceHypothesisError(
                f"recursive bound fails at k={k}: {vals[k - 1]:.6g} > {C * sums[k - 1]:.6g}", k)
    b1 = vals[0]
    if b1 == 0:
        return True
    C0 = math.pi ** 2 / 6 * (C * p * p) ** (1.0 / (p - 1)) * b1
    return all(v <= b1 * C0 ** (k - 1) * (1 + 1e-12) for k, v in enumerate(vals, start=1))


# ---------------------------------------------------------------------------
# gauge action
# ---------------------------------------------------------------------------

def relative_deviation(f, g):
    """``max |f - g| / max |g|`` over frequencies of two static fields."""
    diff = field_sum([f, g.scale(-1.0)])
    ref = np.max(np.abs(g.coef)) if g.n_rows else 0.0
    err = np.max(np.abs(diff.coef)) if diff.n_rows else 0.0
    if ref == 0.0:
        return float(err)
    return float(err / ref)


def gauge_phase_action(table, zeta, T=None):
    """Max deviation of ``G_q[zeta phi]`` from ``zeta^{2q-p} G_q[phi]``.

    Checked at time ``T`` (default: the horizon) for the first iterate of
    every term of the nonlinearity.  Returns ``{(p, q): deviation}`` and the
    maximum.
    """
    if abs(abs(zeta) - 1) > 1e-12:
        raise ValueError("zeta must be unimodular")
    T = table.horizon if T is None else T
    rotated = table.data.scale(zeta)
    out = {}
    for p, q, _ in table.nonlinearity.terms:
        g0 = first_iterate(table.data, p, q, table.horizon, table.workers).at(T)
        g1 = first_iterate(rotated, p, q, table.horizon, table.workers).at(T)
        out[(p, q)] = relative_deviation(g1, g0.scale(zeta ** (2 * q - p)))
    return max(out.values()), out
