"""Initial data families, parameter schedules and inflation reports.

A :class:`Scenario` fixes the domain, the nonlinearity, the regularity ``s``
and the parameters ``(N, r, A, T, Sigma)`` of one experiment.
:func:`schedule_case` fills them in from the log-based schedules of the
inflation cases; ``overrides`` replace any of them with direct choices for
desk-scale runs (the scenario is then flagged ``override``).
:func:`run_inflation` runs the Picard engine and evaluates the target norm of
every piece of the series.

Data forms (amplitudes on the lattice points of each box):

``box_family``     ``r A^{-d/2} N^{-s}`` on ``Sigma + [-A/2, A/2)^d``
``thin_box``       ``r N^{1/2-s}`` on ``N e_d + [-1/2, 1/2)^{d-1} x [-1/(2N), 1/(2N))``
``unit_boxes``     ``r N^{-s}`` on ``Sigma + [-1/2, 1/2)^d``
``interval_pair``  ``r A^{-1/l} N^{1/l}`` on ``(N + I_A) u (2N + I_A)`` (``l`` = D-norm exponent)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .lattice import DomainSpec, SpectralField, torus, support_bound_check
from .norms import NormSpec, evaluate_norm, hs_norm
from .picard import (NonlinearitySpec, IterateTable, DivergenceError, series_sum,
                     series_decompose, main_part, relative_deviation, CONVERGENCE_TRUST)
from .lattice import field_sum

__all__ = [
    "Scenario",
    "InflationReport",
    "CASE_IDS",
    "build_phi",
    "schedule_case",
    "run_inflation",
    "gauge_separation_check",
    "quartic_zero_mode",
    "dyadic_floor",
    "s_critical",
]

DATA_FORMS = ("box_family", "thin_box", "unit_boxes", "interval_pair")


def s_critical(d, p):
    """Scale-critical regularity ``d/2 - 2/(p-1)``."""
    return d / 2 - 2 / (p - 1)


def dyadic_floor(x):
    """Largest power of two not exceeding ``x`` (``x > 0``)."""
    if x <= 0:
        raise ValueError("x must be positive")
    return 2.0 ** math.floor(math.log2(x) + 1e-12)


def _is_dyadic(x):
    return x > 0 and abs(math.log2(x) - round(math.log2(x))) < 1e-12


@dataclass(frozen=True)
class Scenario:
    """One inflation experiment.

    ``Sigma`` holds physical frequency centers (tuples of length ``d``).
    ``lp``, ``qexp`` and ``alpha`` parametrize the D-norm schedules;
    ``override`` lists the parameters replaced by hand.
    """

    case_id: str
    domain: DomainSpec
    nonlinearity: NonlinearitySpec
    s: float
    N: int
    r: float
    A: float
    T: float
    Sigma: tuple
    data_form: str = "box_family"
    gauge_j: int = 0
    norm: NormSpec = None
    override: tuple = ()
    lp: float = 2.0
    qexp: float = 2.0
    alpha: float = 0.0
    claims_dominance: bool = False
    data_norm: NormSpec = None

    def __post_init__(self):
        if self.data_form not in DATA_FORMS:
            raise ValueError(f"unknown data form {self.data_form!r}")
        if not (self.r > 0 and self.A > 0 and self.T > 0):
            raise ValueError("r, A and T must be positive")
        if not _is_dyadic(self.N):
            raise ValueError("N must be a power of two")
        sig = tuple(tuple(float(v) for v in np.atleast_1d(c)) for c in self.Sigma)
        if any(len(c) != self.domain.d for c in sig):
            raise ValueError("Sigma centers must have d coordinates")
        object.__setattr__(self, "Sigma", sig)
        object.__setattr__(self, "override", tuple(self.override))
        if self.norm is None:
            object.__setattr__(self, "norm", NormSpec.Hs(self.s))
        if self.data_norm is None:
            object.__setattr__(self, "data_norm", self.norm)

    @property
    def p_max(self):
        return self.nonlinearity.p_max

    @property
    def box_volume(self):
        """Frequency volume of one data box (``A^d``; ``1/N`` for the thin box)."""
        if self.data_form == "thin_box":
            return 1.0 / self.N
        if self.data_form == "unit_boxes":
            return 1.0
        return self.A ** self.domain.d

    @property
    def rho(self):
        """``r A^{d/2} N^{-s} T^{1/(p-1)}`` (box volume in place of ``A^d``).

        For ``interval_pair`` data the natural small quantity is
        ``r (T N^2)^{1/2} (A/N)^{1 - 1/l}`` and that is returned instead.
        """
        if self.data_form == "interval_pair":
            return self.r * math.sqrt(self.T * self.N ** 2) * (self.A / self.N) ** (1 - 1 / self.lp)
        return (self.r * math.sqrt(self.box_volume) * self.N ** (-self.s)
                * self.T ** (1.0 / (self.p_max - 1)))

    @property
    def is_override(self):
        return bool(self.override)

    def to_dict(self):
        return {
            "schema": "nlsinflate.scenario/1",
            "case_id": self.case_id,
            "domain": self.domain.to_dict(),
            "nonlinearity": self.nonlinearity.to_list(),
            "s": self.s, "N": self.N, "r": self.r, "A": self.A, "T": self.T,
            "Sigma": [list(c) for c in self.Sigma],
            "data_form": self.data_form,
            "gauge_j": self.gauge_j,
            "norm": self.norm.to_dict(),
            "override": list(self.override),
            "lp": self.lp, "qexp": _enc(self.qexp), "alpha": self.alpha,
            "claims_dominance": self.claims_dominance,
            "data_norm": self.data_norm.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            case_id=data["case_id"],
            domain=DomainSpec.from_dict(data["domain"]),
            nonlinearity=NonlinearitySpec.from_list(data["nonlinearity"]),
            s=float(data["s"]), N=int(data["N"]), r=float(data["r"]), A=float(data["A"]),
            T=float(data["T"]),
            Sigma=tuple(tuple(c) for c in data["Sigma"]),
            data_form=data.get("data_form", "box_family"),
            gauge_j=int(data.get("gauge_j", 0)),
            norm=NormSpec.from_dict(data["norm"]) if data.get("norm") else None,
            override=tuple(data.get("override", ())),
            lp=float(data.get("lp", 2.0)), qexp=float(data.get("qexp", 2.0)),
            alpha=float(data.get("alpha", 0.0)),
            claims_dominance=bool(data.get("claims_dominance", False)),
            data_norm=NormSpec.from_dict(data["data_norm"]) if data.get("data_norm") else None,
        )

    def with_params(self, **kw):
        """Copy with some parameters replaced and flagged as overrides."""
        extra = tuple(k for k in kw if k not in self.override and k in
                      ("r", "T", "A", "s", "Sigma", "nonlinearity", "domain", "gauge_j"))
        return replace(self, override=self.override + extra, **kw)


def _enc(x):
    return "inf" if math.isinf(x) else x


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

def _box_indices(domain, center, widths):
    """Lattice indices in ``center + prod [-w/2, w/2)`` (half-open)."""
    steps = domain.steps
    ranges = []
    for c, w, h in zip(center, widths, steps):
        lo = math.ceil((c - w / 2) / h - 1e-9)
        hi = math.ceil((c + w / 2) / h - 1e-9) - 1
        ranges.append(np.arange(lo, hi + 1, dtype=np.int64))
    grid = np.meshgrid(*ranges, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def build_phi(sc):
    """Characteristic-function datum of the scenario, times its gauge phase."""
    dom = sc.domain
    d = dom.d
    N, A = sc.N, sc.A
    if sc.data_form == "thin_box":
        widths = np.ones(d)
        widths[-1] = 1.0 / N
        centers = [tuple([0.0] * (d - 1) + [float(N)])]
        amp = sc.r * N ** (0.5 - sc.s)
        cell = 1.0 / N
    elif sc.data_form == "unit_boxes":
        widths = np.ones(d)
        centers = sc.Sigma
        amp = sc.r * N ** (-sc.s)
        cell = 1.0
    elif sc.data_form == "interval_pair":
        if d != 1:
            raise ValueError("interval_pair data live in d = 1")
        widths = np.array([A])
        centers = sc.Sigma
        if sc.norm.kind == "DS":
            # r N^{-s} on the unit intervals at N and 2N (one lattice point each)
            amp = sc.r * N ** (-sc.s)
        else:
            amp = sc.r * A ** (-1 / sc.lp) * N ** (1 / sc.lp)
        cell = A
    else:
        widths = np.full(d, float(A))
        centers = sc.Sigma
        if len(centers) > 3:
            raise ValueError("box family uses at most three centers")
        amp = sc.r * A ** (-d / 2) * N ** (-sc.s)
        cell = A
    if sc.data_form != "thin_box" and A >= N:
        raise ValueError("A must be smaller than N")
    c = np.array(centers, dtype=float)
    for i in range(len(c)):
        for j in range(i):
            if np.max(np.abs(c[i] - c[j]) / widths) < 1 - 1e-12:
                raise ValueError("data boxes overlap")
    idx = np.concatenate([_box_indices(dom, ctr, widths) for ctr in centers])
    if idx.shape[0] == 0:
        raise ValueError("data boxes contain no lattice points")
    phase = 1.0
    if sc.gauge_j:
        phase = np.exp(1j * sc.gauge_j * math.pi / (sc.p_max + 1))
    return SpectralField.static(dom, cell, idx, amp * phase)


def quartic_zero_mode(r, N, s, T):
    """``3 r^4 N^{-4s} T``: modulus of the quartic first iterate at frequency 0."""
    return 3 * r ** 4 * N ** (-4 * s) * T


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def _nl(*terms):
    return NonlinearitySpec(tuple(terms))


_DEFAULTS = {
    # case: (domain factory, nonlinearity, default s, admissible s-range text)
    "case1": (lambda N: torus(1), _nl((3, 1, 1.0)), -0.75),
    "case2": (lambda N: torus(1), _nl((2, 2, 1.0)), -1.25),
    "case3": (lambda N: torus(1), _nl((3, 2, 1.0)), -0.5),
    "case4": (lambda N: torus(2), _nl((2, 2, 1.0)), -1.0),
    "case5": (lambda N: torus(1), _nl((2, 1, 1.0)), -0.25),
    "case6": (lambda N: torus(1), _nl((4, 1, 1.0)), -1.0 / 6),
    "case7": (lambda N: DomainSpec(1, 0, quadrature_cell=(1.0 / (8 * N),)), _nl((2, 1, 1.0)), -0.5),
    "sec4_case1": (lambda N: torus(1), _nl((3, 1, 1.0), (2, 2, 1.0)), -0.75),
    "sec4_case3": (lambda N: torus(1), _nl((3, 2, 1.0), (2, 2, 1.0)), -0.5),
    "sec4_case6": (lambda N: torus(1), _nl((4, 1, 1.0), (4, 3, 1.0), (2, 2, 1.0)), -1.0 / 6),
    "appA_cubic1d": (lambda N: torus(1), _nl((3, 2, 1.0)), -0.8),
    "appA_cubic2d": (lambda N: torus(2), _nl((3, 2, 1.0)), -0.1),
    "appA_quintic": (lambda N: torus(1), _nl((5, 3, 1.0)), -0.1),
    "appB_bracket": (lambda N: torus(1), _nl((3, 2, 1.0)), -0.5),
    "appB_bracket_neg": (lambda N: torus(1), _nl((3, 2, 1.0)), -0.5),
    "appB_small_p": (lambda N: torus(1), _nl((3, 2, 1.0)), -0.5),
    "appB_ds": (lambda N: torus(1), _nl((3, 2, 1.0)), -0.8),
}

CASE_IDS = tuple(_DEFAULTS)


def _s_range_ok(case, d, p, s, d2):
    if case in ("case1", "sec4_case1"):
        return s < min(s_critical(d, p), 0)
    if case == "case2":
        return -1.5 <= s < -1
    if case in ("case3", "sec4_case3"):
        return s == -0.5
    if case == "case4":
        return s == -1
    if case == "case5":
        return d / 2 - 2 <= s < 0
    if case in ("case6", "sec4_case6"):
        return -1 / 6 <= s < 0
    if case == "case7":
        return d / 2 - 2 <= s < -0.25
    if case == "appA_cubic1d":
        return s < -2 / 3
    if case.startswith("appA"):
        return s < 0
    if case == "appB_ds":
        return s < -2 / 3
    return True


def _clamp_A(A, N):
    return min(max(dyadic_floor(A), 1.0), N / 4)


def schedule_case(case_id, N, overrides=None):
    """Scenario with the schedule of ``case_id`` at frequency scale ``N``.

    ``overrides`` may set ``s``, ``nonlinearity``, ``domain``, ``Sigma``,
    ``A``, ``r``, ``T``, ``rho`` (solves for ``T``), ``gauge_j``, ``lp``,
    ``qexp``, ``alpha``.  Parameters outside the case's regularity range only
    warn.
    """
    if case_id not in _DEFAULTS:
        raise ValueError(f"unknown case_id {case_id!r}; choose from {', '.join(CASE_IDS)}")
    if not _is_dyadic(N) or N < 4:
        raise ValueError("N must be a power of two, at least 4")
    ov = dict(overrides or {})
    flagged = [k for k in ("s", "nonlinearity", "domain", "Sigma", "A", "r", "T", "rho")
               if k in ov]
    dom_f, nl, s = _DEFAULTS[case_id]
    s = float(ov.pop("s", s))
    nl = ov.pop("nonlinearity", nl)
    if not isinstance(nl, NonlinearitySpec):
        nl = NonlinearitySpec.from_list(nl) if isinstance(nl, list) else NonlinearitySpec(tuple(nl))
    dom = ov.pop("domain", None) or dom_f(N)
    if isinstance(dom, dict):
        dom = DomainSpec.from_dict(dom)
    d, p = dom.d, nl.p_max
    L = math.log(N)
    LL = math.log(L)
    lp = float(ov.pop("lp", 2.0 if case_id != "appB_small_p" and case_id != "appB_ds" else 1.2))
    qexp = float(ov.pop("qexp", 2.0))
    alpha = float(ov.pop("alpha", -0.25 if case_id == "appB_bracket_neg" else 0.1))
    e_d = tuple([0.0] * (d - 1) + [1.0])
    ed = np.array(e_d)
    form = "box_family"
    norm = NormSpec.Hs(s)
    data_norm = None
    claims = case_id.startswith("case") or case_id.startswith("sec4")

    if case_id in ("case1", "sec4_case1"):
        r = 1 / L
        A = _clamp_A(L ** (-(p + 1) / abs(s)) * N, N)
        T = (A ** (-d / 2) * N ** s) ** (p - 1)
        Sigma = [N * ed, -N * ed, 2 * N * ed]
    elif case_id == "case2":
        r, A, T = 1 / L, 1.0, N ** -2.0 / L
        Sigma = [N * ed, -N * ed, 2 * N * ed]
    elif case_id in ("case3", "sec4_case3"):
        r = L ** (-1 / 12)
        A = _clamp_A(L ** (-0.25) * N, N)
        T = L ** (-1 / 12) * N ** -2.0
        Sigma = [N * ed, -N * ed, 2 * N * ed]
    elif case_id == "case4":
        r = L ** (-1 / 12)
        A = _clamp_A(L ** (-0.25) * N, N)
        T = L ** (-1 / 6) * N ** -2.0
        Sigma = [N * ed, -N * ed, 2 * N * ed]
    elif case_id == "case5":
        r, A, T = 1 / L, 1.0, float(N) ** s
        Sigma = [N * ed]
    elif case_id in ("case6", "sec4_case6"):
        r, A, T = 1 / L, 1.0, float(N) ** (3 * s)
        Sigma = [-N * ed, 2 * N * ed, 3 * N * ed]
    elif case_id == "case7":
        r, A, T = 1 / L, 1.0 / N, L ** 3 * float(N) ** (2 * s + 0.5)
        Sigma = [N * ed]
        form = "thin_box"
    elif case_id.startswith("appA"):
        nu = (p - 1) // 2
        form = "unit_boxes"
        A = 1.0
        norm = NormSpec.LowFreqL2(1.0)
        data_norm = NormSpec.Hs(s)
        claims = False
        if case_id == "appA_cubic1d":
            Sigma = [N * ed, 2 * N * ed]
        elif case_id == "appA_cubic2d":
            e1 = np.zeros(d)
            e1[-2] = 1.0
            Sigma = [N * e1, N * ed, N * (e1 + ed)]
        else:
            Sigma = [N * ed, 3 * N * ed, 4 * N * ed]
        if d == 1 and nu == 1:
            r, T = N ** (s + 2 / 3) * L, N ** -2.0 / L
        elif (nu == 1 and d >= 2 and dom.d2 <= 1) or (nu >= 2 and dom.d2 == 0):
            r, T = N ** (s + 1 / (2 * nu + 1)) * L, 1 / (N * L)
        else:
            r, T = N ** s * L, L ** (-(2 * nu + 0.5))
    elif case_id.startswith("appB"):
        if d != 1:
            raise ValueError("D-norm schedules live in d = 1")
        form = "interval_pair"
        claims = False
        Sigma = [N * ed, 2 * N * ed]
        T = N ** -2.0 / 100
        if case_id == "appB_bracket":
            r = L ** (-alpha) / LL
            A = _clamp_A(N / LL, N)
            norm = NormSpec.DBracket(alpha, lp, qexp)
        elif case_id == "appB_bracket_neg":
            r = L ** (-alpha) / LL
            A = _clamp_A(N * L ** (alpha / (1 - 1 / lp)), N)
            norm = NormSpec.DBracket(alpha, lp, qexp)
        elif case_id == "appB_small_p":
            r = L ** (min(-alpha, 0) - 1)
            A = _clamp_A(math.sqrt(N), N)
            norm = NormSpec.DBracket(alpha, lp, qexp)
        else:
            r = N ** (s + 2 / 3) * L
            A = 1.0
            norm = NormSpec.DS(s, lp, qexp)
    else:  # pragma: no cover - guarded above
        raise ValueError(case_id)

    if "Sigma" in ov:
        Sigma = [np.atleast_1d(np.asarray(c, dtype=float)) for c in ov.pop("Sigma")]
    if "A" in ov:
        A = float(ov.pop("A"))
    if "r" in ov:
        r = float(ov.pop("r"))
    if "T" in ov:
        T = float(ov.pop("T"))
    gauge_j = int(ov.pop("gauge_j", 0))
    rho_target = ov.pop("rho", None)
    if "norm" in ov:
        norm = ov.pop("norm")
        if isinstance(norm, dict):
            norm = NormSpec.from_dict(norm)
    if ov:
        raise ValueError(f"unknown overrides: {sorted(ov)}")

    sc = Scenario(case_id, dom, nl, s, int(N), float(r), float(A), float(T),
                  tuple(tuple(c) for c in Sigma), form, gauge_j, norm, tuple(flagged),
                  lp, qexp, alpha, claims, data_norm)
    if rho_target is not None:
        base = sc.rho / sc.T ** (1.0 / (p - 1)) if form != "interval_pair" else sc.rho / math.sqrt(sc.T)
        T = (rho_target / base) ** (p - 1) if form != "interval_pair" else (rho_target / base) ** 2
        sc = replace(sc, T=float(T))
    if not _s_range_ok(case_id, d, p, s, dom.d2):
        warnings.warn(f"s={s:g} lies outside the regularity range of {case_id}", stacklevel=2)
    return sc


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class InflationReport:
    scenario: Scenario
    K: int
    norm_label: str
    norm_phi: float
    norm_U1: float
    norm_Umain: float
    norm_Ulow: float
    norm_Uhigh: float
    norm_u: float
    ratio: float
    rho: float
    rho_hat: float
    valid: bool
    verified: bool
    diverged: bool
    dominance_claimed: bool
    dominance_holds: bool
    recomposition_error: float
    discretization_error: float | None = None
    exact_mode: bool = True
    flags: list = field(default_factory=list)

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if k != "scenario"}
        out["scenario"] = self.scenario.to_dict()
        return out

    def csv_row(self):
        sc = self.scenario
        return {
            "case_id": sc.case_id, "N": sc.N, "s": sc.s, "r": sc.r, "A": sc.A, "T": sc.T,
            "rho": self.rho, "rho_hat": self.rho_hat, "norm_phi": self.norm_phi,
            "norm_U1": self.norm_U1, "norm_Umain": self.norm_Umain, "norm_Ulow": self.norm_Ulow,
            "norm_Uhigh": self.norm_Uhigh, "norm_u": self.norm_u, "ratio": self.ratio,
            "valid": self.valid,
        }


def _refined(sc):
    dom = sc.domain
    cells = tuple(c / 2 for c in dom.quadrature_cell)
    return replace(sc, domain=DomainSpec(dom.d, dom.d2, dom.periods, cells))


def _evaluate(sc, K, workers):
    phi = build_phi(sc)
    table = IterateTable.build(phi, sc.nonlinearity, sc.T, K, workers)
    total, rho_hat = series_sum(table, sc.T, K, strict=False)
    parts = series_decompose(table, sc.T, K)
    u = parts.total()
    norm = sc.norm
    vals = [evaluate_norm(phi, sc.data_norm)]
    vals += [evaluate_norm(f, norm) for f in (parts.U1, parts.U_main, parts.U_low, parts.U_high, u)]
    rec = relative_deviation(u, total) if total.n_rows else 0.0
    return vals, rho_hat, rec


def run_inflation(sc, K=None, workers=1, strict=True, refine=True):
    """Build the datum, expand to order ``K`` and measure every piece at ``T``.

    ``K`` defaults to ``3 (p - 1) + 1``.  A measured ratio ``rho_hat >= 1``
    raises :class:`DivergenceError` (with the report attached as ``.report``)
    unless ``strict`` is false.  On quadrature domains the run is repeated with
    halved cells and the change in ``norm_u`` is reported as the
    discretization error.
    """
    p = sc.p_max
    K = 3 * (p - 1) + 1 if K is None else int(K)
    vals, rho_hat, rec = _evaluate(sc, K, workers)
    n_phi, n_u1, n_main, n_low, n_high, n_u = vals
    disc = None
    exact = sc.domain.is_exact
    if not exact and refine:
        vals2, _, _ = _evaluate(_refined(sc), K, workers)
        disc = abs(vals2[5] - n_u)
    diverged = rho_hat >= 1.0
    rho = sc.rho
    valid = (rho < CONVERGENCE_TRUST) and (rho_hat < CONVERGENCE_TRUST) and not diverged
    dom_holds = n_main > 2 * (n_u1 + n_low + n_high)
    flags = []
    if sc.is_override:
        flags.append("override")
    if not exact:
        flags.append("quadrature")
    if diverged:
        flags.append("outside empirical convergence radius")
    if sc.claims_dominance and not dom_holds:
        flags.append("dominance not observed")
    rep = InflationReport(
        scenario=sc, K=K, norm_label=sc.norm.label(),
        norm_phi=n_phi, norm_U1=n_u1, norm_Umain=n_main, norm_Ulow=n_low, norm_Uhigh=n_high,
        norm_u=n_u, ratio=n_u / n_phi if n_phi else float("inf"),
        rho=rho, rho_hat=rho_hat, valid=valid, verified=valid and exact, diverged=diverged,
        dominance_claimed=sc.claims_dominance, dominance_holds=dom_holds,
        recomposition_error=rec, discretization_error=disc, exact_mode=exact, flags=flags)
    if diverged and strict:
        err = DivergenceError(f"outside empirical convergence radius (rho_hat={rho_hat:.3g})", rho_hat)
        err.report = rep
        raise err
    return rep


def gauge_separation_check(sc, q_star, T=None):
    """Max relative deviation in the gauge separation identity.

    With ``zeta = exp(i pi / (p+1))`` and ``p`` the top degree,
    ``sum_j zeta^{(p - 2 q*) j} U_main[zeta^j phi] = (p+1) nu_{p,q*} G_{q*}[phi]``.
    (``G_q[zeta phi] = zeta^{2q - p} G_q[phi]``, so this weight isolates ``q*``.)
    """
    nl = sc.nonlinearity
    p = nl.p_max
    top = nl.top_terms()
    if q_star not in top:
        raise ValueError(f"nu_(p, q*) vanishes for q*={q_star}")
    T = sc.T if T is None else T
    zeta = np.exp(1j * math.pi / (p + 1))
    phi = build_phi(replace(sc, gauge_j=0))
    lhs = []
    for j in range(p + 1):
        um = main_part(phi.scale(zeta ** j), nl, T)
        lhs.append(um.scale(zeta ** ((p - 2 * q_star) * j)))
    lhs = field_sum(lhs)
    rhs = main_part(phi, NonlinearitySpec.single(p, q_star, top[q_star]), T).scale(p + 1)
    return relative_deviation(lhs, rhs)
