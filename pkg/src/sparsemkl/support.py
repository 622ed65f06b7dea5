"""Supports, certificates, qualification, and identification checks.

Two set-valued observables drive everything here. The *support* of a
coefficient matrix is the set of groups with a nonzero column. The
*extended support* is read off the residual instead: the groups whose
dual certificate norm :math:`\\sqrt{r^T K_g r}/\\lambda` reaches 1. At a
minimizer the support always sits inside the extended support, and the
two coincide exactly when the qualification (irrepresentability)
condition holds. Iterates of the solver are eventually *sandwiched*
between the two sets, which :func:`sandwich_check` verifies on a trace.
"""

from dataclasses import dataclass

import numpy as np

from .core import DualCoefficients, group_dual_norm, residual
from .errors import ContractViolation
from .solver import SolverConfig, SolveTrace, solve

__all__ = [
    "SupportReport",
    "SandwichVerdict",
    "support_of",
    "certificate_norms",
    "extended_support",
    "qualification_check",
    "sandwich_check",
    "last_support_change",
    "reference_solve",
]

#: Default relative tolerance band around the certificate level 1.
DEFAULT_EPS_REL = 1e-4


@dataclass(frozen=True, eq=False)
class SupportReport:
    """Support structure of an (approximate) solution.

    Attributes
    ----------
    support : frozenset of int
        0-based groups with nonzero coefficient columns.
    extended_support : frozenset of int
        Groups whose certificate norm is within `eps_rel` of 1.
    certificate_norms : (G,) ndarray
        ``sqrt(r' K_g r) / lambda`` per group.
    qc_holds : bool
        Qualification: every off-support certificate norm stays below
        1 by more than `eps_rel`. Equivalent, at the same tolerance, to
        the extended support collapsing onto the support.
    qc_margin : float
        ``1 - max(certificate norm over off-support groups)``; 1.0 when
        every group is in the support.
    eps_rel : float
        Tolerance the set memberships were decided with.

    Notes
    -----
    ``support <= extended_support`` holds whenever the report is taken at
    a point satisfying the solver's stationarity check; at arbitrary
    coefficient matrices neither inclusion is guaranteed.
    """

    support: frozenset
    extended_support: frozenset
    certificate_norms: np.ndarray
    qc_holds: bool
    qc_margin: float
    eps_rel: float

    def __post_init__(self):
        norms = np.asarray(self.certificate_norms, dtype=np.float64)
        if norms.ndim != 1 or not np.isfinite(norms).all():
            raise ContractViolation("certificate_norms must be finite 1-D")
        norms.setflags(write=False)
        object.__setattr__(self, "support", frozenset(int(g) for g in self.support))
        object.__setattr__(
            self, "extended_support",
            frozenset(int(g) for g in self.extended_support),
        )
        object.__setattr__(self, "certificate_norms", norms)
        object.__setattr__(self, "qc_holds", bool(self.qc_holds))
        object.__setattr__(self, "qc_margin", float(self.qc_margin))
        object.__setattr__(self, "eps_rel", float(self.eps_rel))


@dataclass(frozen=True)
class SandwichVerdict:
    """Outcome of a sandwich check over a trace.

    `first_violation` is the 1-based iteration number of the earliest
    recorded entry violating the inclusion, or `None` on a pass.
    """

    passed: bool
    first_violation: int | None = None

    def __bool__(self):
        return self.passed


def support_of(coeffs):
    """Groups with a nonzero coefficient column (0-based indices).

    Relies on the solver's exact-zero convention: removed columns are
    identically zero, so no tolerance is involved.
    """
    if not isinstance(coeffs, DualCoefficients):
        raise ContractViolation("coeffs must be a DualCoefficients")
    nz = np.any(coeffs.alpha != 0.0, axis=0)
    return set(int(g) for g in np.flatnonzero(nz))


def certificate_norms(coeffs, problem):
    """Scaled dual certificate norms ``sqrt(r' K_g r) / lambda``.

    Parameters
    ----------
    coeffs : DualCoefficients
    problem : ProblemInstance

    Returns
    -------
    (G,) ndarray
    """
    r = residual(coeffs, problem.gram, problem.dataset.responses)
    lam = problem.effective_lambda
    K = problem.gram.blocks
    quad = np.einsum("i,gij,j->g", r, K, r)
    return np.sqrt(np.maximum(quad, 0.0)) / lam


def extended_support(coeffs, problem, eps_rel=DEFAULT_EPS_REL):
    """Groups whose certificate norm reaches 1 within `eps_rel`.

    At a minimizer these are the active constraints of the dual problem;
    away from minimizers the set is still defined but carries no
    guarantee. 0-based indices.
    """
    eps_rel = float(eps_rel)
    if not (0.0 <= eps_rel < 1.0):
        raise ContractViolation(f"eps_rel must lie in [0, 1), got {eps_rel!r}")
    norms = certificate_norms(coeffs, problem)
    return set(int(g) for g in np.flatnonzero(norms >= 1.0 - eps_rel))


def qualification_check(coeffs, problem, eps_rel=DEFAULT_EPS_REL):
    """Full support report at an approximate solution.

    Parameters
    ----------
    coeffs : DualCoefficients
        Should approximate a minimizer for the report to be meaningful.
    problem : ProblemInstance
    eps_rel : float
        Band around the certificate level 1 deciding extended-support
        membership, and the strictness margin required for `qc_holds`.

    Returns
    -------
    SupportReport
    """
    eps_rel = float(eps_rel)
    if not (0.0 <= eps_rel < 1.0):
        raise ContractViolation(f"eps_rel must lie in [0, 1), got {eps_rel!r}")
    supp = support_of(coeffs)
    norms = certificate_norms(coeffs, problem)
    esupp = set(int(g) for g in np.flatnonzero(norms >= 1.0 - eps_rel))
    off = [g for g in range(problem.n_groups) if g not in supp]
    if off:
        margin = 1.0 - float(norms[off].max())
    else:
        margin = 1.0
    # strictness is tested against the same eps_rel as esupp membership,
    # so qc_holds == (extended_support == support) at any near-KKT point
    return SupportReport(
        support=supp,
        extended_support=esupp,
        certificate_norms=norms,
        qc_holds=margin > eps_rel,
        qc_margin=margin,
        eps_rel=eps_rel,
    )


def sandwich_check(trace, reference_report, burn_in=0):
    """Verify the support sandwich on every recorded iteration.

    Checks that for each recorded iteration n >= `burn_in`,

        reference support <= trace support at n <= reference esupp.

    Parameters
    ----------
    trace : SolveTrace
    reference_report : SupportReport
        Taken at a well-converged reference solution of the same problem.
    burn_in : int
        1-based iteration number before which records are ignored; the
        identification statement only promises the inclusions from some
        finite iteration onward.

    Returns
    -------
    SandwichVerdict
    """
    if not isinstance(trace, SolveTrace):
        raise ContractViolation("trace must be a SolveTrace")
    burn_in = int(burn_in)
    if trace.n_recorded == 0:
        raise ContractViolation("trace has no recorded iterations")
    if burn_in > int(trace.iterations[-1]):
        raise ContractViolation(
            f"burn_in {burn_in} is beyond the last recorded iteration "
            f"{int(trace.iterations[-1])}"
        )
    lo = _encode(reference_report.support)
    hi = _encode(reference_report.extended_support)
    masks = trace.supports
    sel = trace.iterations >= burn_in
    m = masks[sel]
    ok = ((lo & ~m) == 0) & ((m & ~hi) == 0)
    if ok.all():
        return SandwichVerdict(True, None)
    first = int(trace.iterations[sel][np.flatnonzero(~ok)[0]])
    return SandwichVerdict(False, first)


def _encode(groups):
    mask = 0
    for g in groups:
        mask |= 1 << int(g)
    return mask


def last_support_change(trace):
    """1-based iteration of the last recorded support change.

    Returns the first recorded iteration when the support never changes
    across the trace. Useful as the `burn_in` of
    :func:`sandwich_check`: from this iteration on, the traced support
    is constant.
    """
    if not isinstance(trace, SolveTrace):
        raise ContractViolation("trace must be a SolveTrace")
    if trace.n_recorded == 0:
        raise ContractViolation("trace has no recorded iterations")
    masks = trace.supports
    changed = np.flatnonzero(masks[1:] != masks[:-1])
    if changed.size == 0:
        return int(trace.iterations[0])
    return int(trace.iterations[changed[-1] + 1])


def reference_solve(problem, config, budget_factor=10):
    """Well-converged same-family reference for identification checks.

    Reruns the solver from zero with `budget_factor` times the
    configured iteration budget and a step-norm stop of 1e-12, trace
    off. This is deliberately a same-algorithm reference; independent
    ground truth lives in the oracle module.

    Returns
    -------
    DualCoefficients
    """
    if not isinstance(config, SolverConfig):
        raise ContractViolation("config must be a SolverConfig")
    budget_factor = int(budget_factor)
    if budget_factor < 1:
        raise ContractViolation(f"budget_factor must be >= 1, got {budget_factor!r}")
    ref_cfg = SolverConfig(
        tau_factor=config.tau_factor,
        max_iters=config.max_iters * budget_factor,
        stop_tol=1e-12,
        record_trace=False,
        trace_stride=1,
    )
    coeffs, _ = solve(problem, ref_cfg)
    return coeffs
