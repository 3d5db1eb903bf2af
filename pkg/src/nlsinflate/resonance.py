"""Resonant frequency tuples.

A tuple ``(k_1, ..., k_{2nu+1})`` of integer vectors is resonant for the
output ``k`` when

    k     = sum_m (-1)^{m+1} k_m,
    |k|^2 = sum_m (-1)^{m+1} |k_m|^2

(odd slots enter with ``+``, even slots with ``-``).  For ``d = 1``,
``nu = 2`` and ``k = 0`` the resonant quintuples are exactly those with

    {k_1, k_3, k_5} = {ap, bq, (a+b)(p+q)},
    {k_2, k_4}      = {ap + (a+b)q, (a+b)p + bq}

for integers ``a, b, p, q``; :func:`verify_characterization` checks this
against brute force on a box.  All arithmetic here is exact integer
arithmetic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ResonantTuple",
    "QuinticParam",
    "EnumerationGuardError",
    "enumerate_resonant",
    "enumerate_resonant_array",
    "parametrize_quintic",
    "parametrized_array",
    "verify_characterization",
    "CharacterizationReport",
    "constraint_tuples",
    "constraint_tuple_count",
    "ENUMERATION_LIMIT",
]

ENUMERATION_LIMIT = 10**9
CHUNK_ROWS = 1 << 20


class EnumerationGuardError(ValueError):
    """The requested brute-force enumeration is too large."""


def _vec(k, d):
    k = tuple(int(v) for v in np.atleast_1d(k))
    if len(k) != d:
        raise ValueError(f"expected a {d}-vector, got {k}")
    return k


@dataclass(frozen=True, order=True)
class ResonantTuple:
    """Frequency tuple with its output frequency and phase ``Phi``.

    ``freqs`` holds ``d``-tuples of ints.  ``phase`` is
    ``|k|^2 - sum_m (-1)^{m+1} |k_m|^2`` (zero for exact resonance).
    """

    freqs: tuple
    output: tuple
    phase: int = 0

    @classmethod
    def make(cls, freqs, output=None):
        freqs = tuple(tuple(int(v) for v in np.atleast_1d(f)) for f in freqs)
        d = len(freqs[0])
        signs = [1 if m % 2 == 0 else -1 for m in range(len(freqs))]
        conv = tuple(sum(s * f[i] for s, f in zip(signs, freqs)) for i in range(d))
        if output is None:
            output = conv
        output = _vec(output, d)
        if conv != output:
            raise ValueError("convolution constraint violated")
        phase = sum(x * x for x in output) - sum(s * sum(x * x for x in f) for s, f in zip(signs, freqs))
        return cls(freqs, output, int(phase))

    @property
    def ints(self):
        """Flat tuple of the ``k_m`` when ``d = 1``."""
        return tuple(f[0] for f in self.freqs)

    @property
    def resonant(self):
        return self.phase == 0


@dataclass(frozen=True)
class QuinticParam:
    a: int
    b: int
    p: int
    q: int

    def odd(self):
        a, b, p, q = self.a, self.b, self.p, self.q
        return (a * p, b * q, (a + b) * (p + q))

    def even(self):
        a, b, p, q = self.a, self.b, self.p, self.q
        return (a * p + (a + b) * q, (a + b) * p + b * q)


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------

def enumeration_size(d, nu, K):
    """Number of candidate tuples after solving the last slot from the constraint."""
    return (2 * K + 1) ** (2 * nu * d)


def enumerate_resonant_array(d, nu, k, K):
    """Resonant tuples as an int array of shape ``(n, 2nu+1, d)``, sorted."""
    if d < 1 or nu < 1 or K < 0:
        raise ValueError("need d >= 1, nu >= 1, K >= 0")
    size = enumeration_size(d, nu, K)
    if size > ENUMERATION_LIMIT:
        raise EnumerationGuardError(
            f"enumeration of {size:.3g} candidates exceeds {ENUMERATION_LIMIT:.0e}; use a smaller range")
    k = np.array(_vec(k, d), dtype=np.int64)
    n = 2 * nu + 1
    free = n - 1
    vals = np.arange(-K, K + 1, dtype=np.int64)
    vecs = np.array(list(itertools.product(vals, repeat=d)), dtype=np.int64).reshape(-1, d)
    nv = vecs.shape[0]
    signs = np.array([1 if m % 2 == 0 else -1 for m in range(free)], dtype=np.int64)
    # split the free slots into an outer loop and a vectorized inner block
    inner = free
    while inner > 1 and nv ** inner > CHUNK_ROWS:
        inner -= 1
    outer = free - inner
    inner_ids = np.indices((nv,) * inner).reshape(inner, -1).T
    found = []
    for head in itertools.product(range(nv), repeat=outer):
        ids = np.concatenate([np.broadcast_to(np.array(head, dtype=np.int64), (inner_ids.shape[0], outer)),
                              inner_ids], axis=1) if outer else inner_ids
        tup = vecs[ids]                                   # (rows, free, d)
        partial = np.einsum("m,rmd->rd", signs, tup)
        last = k - partial                                # last slot is odd: + sign
        ok = np.all(np.abs(last) <= K, axis=1)
        if not ok.any():
            continue
        tup, last = tup[ok], last[ok]
        sq = np.sum(tup * tup, axis=2)
        energy = sq @ signs + np.sum(last * last, axis=1)
        res = energy == np.sum(k * k)
        if res.any():
            found.append(np.concatenate([tup[res], last[res][:, None, :]], axis=1))
    if not found:
        return np.zeros((0, n, d), dtype=np.int64)
    out = np.concatenate(found)
    flat = out.reshape(out.shape[0], -1)
    order = np.lexsort(flat.T[::-1])
    return out[order]


def enumerate_resonant(d, nu, k, K):
    """All resonant ``(2nu+1)``-tuples with every coordinate in ``[-K, K]``.

    Raises :class:`EnumerationGuardError` when ``(2K+1)^{2 nu d}`` exceeds
    ``10^9``.
    """
    arr = enumerate_resonant_array(d, nu, k, K)
    out = _vec(k, d)
    return {ResonantTuple(tuple(tuple(int(v) for v in f) for f in row), out, 0) for row in arr}


# ---------------------------------------------------------------------------
# quintic parametrization
# ---------------------------------------------------------------------------

_ODD_PERMS = list(itertools.permutations(range(3)))
_EVEN_PERMS = [(0, 1), (1, 0)]


def parametrize_quintic(param):
    """All slot orderings of the quintuple generated by ``(a, b, p, q)``."""
    odd, even = param.odd(), param.even()
    out = set()
    for po in _ODD_PERMS:
        for pe in _EVEN_PERMS:
            ks = (odd[po[0]], even[pe[0]], odd[po[1]], even[pe[1]], odd[po[2]])
            out.add(ResonantTuple.make([(v,) for v in ks], (0,)))
    return out


def parametrized_array(K, P=None):
    """Parametrized quintuples with all entries in ``[-K, K]``.

    Parameters range over ``|a|, |b|, |p|, |q| <= P`` (default ``2K``).
    Returns a sorted, de-duplicated ``(n, 5)`` int array.
    """
    P = 2 * K if P is None else P
    r = np.arange(-P, P + 1, dtype=np.int64)
    a, b = np.meshgrid(r, r, indexing="ij")
    a, b = a.ravel(), b.ravel()
    rows = []
    for p in r:
        for q in r:
            o1, o2, o3 = a * p, b * q, (a + b) * (p + q)
            e1, e2 = a * p + (a + b) * q, (a + b) * p + b * q
            stack = np.stack([o1, o2, o3, e1, e2], axis=1)
            ok = np.all(np.abs(stack) <= K, axis=1)
            if ok.any():
                rows.append(stack[ok])
    if not rows:
        return np.zeros((0, 5), dtype=np.int64)
    base = np.unique(np.concatenate(rows), axis=0)
    out = []
    for po in _ODD_PERMS:
        for pe in _EVEN_PERMS:
            out.append(base[:, [po[0], 3 + pe[0], po[1], 3 + pe[1], po[2]]])
    return np.unique(np.concatenate(out), axis=0)


@dataclass
class CharacterizationReport:
    K: int
    brute_count: int
    param_count: int
    equal: bool
    brute_only: list = field(default_factory=list)
    param_only: list = field(default_factory=list)

    def summary(self):
        return (f"K={self.K} brute_count={self.brute_count} param_count={self.param_count} "
                f"equal={str(self.equal).lower()}")


def _encode(arr, K):
    base = 2 * K + 1
    code = np.zeros(arr.shape[0], dtype=np.int64)
    for j in range(arr.shape[1]):
        code = code * base + (arr[:, j] + K)
    return code


def verify_characterization(K, witnesses=5):
    """Compare brute-forced quintic resonances at ``k = 0`` with the parametrization.

    Brute force covers ``[-K, K]^5``; parameters range over
    ``|a|, |b|, |p|, |q| <= 2K``.  Mismatches are reported (up to
    ``witnesses`` per direction), never asserted.
    """
    if not 0 <= K <= 16:
        raise ValueError("K must be in 0..16")
    brute = enumerate_resonant_array(1, 2, (0,), K)[:, :, 0]
    param = parametrized_array(K)
    cb, cp = _encode(brute, K), _encode(param, K)
    only_b = brute[~np.isin(cb, cp)]
    only_p = param[~np.isin(cp, cb)]
    return CharacterizationReport(
        K, int(brute.shape[0]), int(param.shape[0]), bool(only_b.size == 0 and only_p.size == 0),
        [tuple(int(v) for v in row) for row in only_b[:witnesses]],
        [tuple(int(v) for v in row) for row in only_p[:witnesses]])


# ---------------------------------------------------------------------------
# counts over a frequency set
# ---------------------------------------------------------------------------

def constraint_tuples(Sigma, p, q, output):
    """Tuples in ``Sigma^p`` whose signed sum equals ``output``, with phases.

    The first ``q`` slots enter with ``+``, the rest with ``-``; the phase is
    ``|out|^2 - sum_{l<=q} |xi_l|^2 + sum_{m>q} |xi_m|^2``.  Returns a list of
    ``(tuple, phase)`` in lexicographic order.
    """
    pts = sorted(tuple(int(v) for v in np.atleast_1d(s)) for s in Sigma)
    d = len(pts[0])
    out = _vec(output, d)
    sq_out = sum(v * v for v in out)
    res = []
    for tup in itertools.product(pts, repeat=p):
        total = tuple(sum(tup[l][i] for l in range(q)) - sum(tup[m][i] for m in range(q, p))
                      for i in range(d))
        if total != out:
            continue
        phase = (sq_out - sum(sum(v * v for v in tup[l]) for l in range(q))
                 + sum(sum(v * v for v in tup[m]) for m in range(q, p)))
        res.append((tup, phase))
    return res


def constraint_tuple_count(Sigma, p, q, output):
    """``(count, resonant_count)`` of :func:`constraint_tuples`."""
    tuples = constraint_tuples(Sigma, p, q, output)
    return len(tuples), sum(1 for _, ph in tuples if ph == 0)
