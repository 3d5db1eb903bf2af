"""Spectral laboratory for norm inflation in semilinear Schrodinger equations.

The solution of ``i u_t + Laplacian u = sum nu_{p,q} u^q conj(u)^{p-q}`` is
expanded in Picard iterates ``U_k``, each stored exactly as a sparse field of
exponential polynomials in time.  Norms, resonance enumeration, schedules
and an independent time stepper sit on top of that engine.
"""
from .exppoly import ExpPoly, TermCapError, ep_duhamel, ep_multiply, phase_integral
from .lattice import (DomainSpec, SpectralField, field_multiply, field_sum, minkowski_sum,
                      signed_sumset, support_bound_check, torus)
from .norms import (NormSpec, aniso_mod_norm, d_norm, evaluate_norm, f_s, hs_norm, l2_norm,
                    lowfreq_l2, m_rho_norm, modulation_norm)
from .picard import (DivergenceError, IterateTable, NonlinearitySpec, SequenceHypothesisError,
                     first_iterate, gauge_phase_action, mu_convolve, next_iterate, sequence_a,
                     series_decompose, series_sum, verify_sequence_bound)
from .resonance import (EnumerationGuardError, ResonantTuple, constraint_tuples,
                        enumerate_resonant, parametrize_quintic, verify_characterization)
from .scenarios import (CASE_IDS, InflationReport, Scenario, build_phi, gauge_separation_check,
                        run_inflation, schedule_case)
from .solver import SolverBlowupError, SolverConfig, compare_series, evolve

__version__ = "0.1.0"
