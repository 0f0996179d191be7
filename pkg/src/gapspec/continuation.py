"""Branches lambda_k^{tau,±} of A_tau = A_0 + tau V and checks of the continuation hypotheses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, ValidationError
from .operator_model import DecomposedOperator, GapProfile, gap_profile
from .solver import PDE_TOL, SIDES, LevelResult, Status, solve_level

_STATUS_RANK = {Status.CLAMPED_AT_A: 0, Status.INTERIOR: 1, Status.CLAMPED_AT_B: 2}


@dataclass(frozen=True)
class SweepConfig:
    """tau grid on [0, tau_max], the (side, k) pairs to track and the perturbation.

    The perturbation must already be expressed on the splitting of A_0
    (for the Dirac model: compressed with the same free rotation).
    v_sup bounds the operator norm of V; it feeds the Lipschitz check.
    """

    tau_values: tuple[float, ...]
    k_set: tuple[tuple[str, int], ...]
    perturbation: DecomposedOperator
    v_sup: float

    def __post_init__(self):
        taus = tuple(float(t) for t in self.tau_values)
        object.__setattr__(self, "tau_values", taus)
        object.__setattr__(self, "k_set", tuple((s, int(k)) for s, k in self.k_set))
        if not taus or taus[0] != 0.0:
            raise ValidationError("tau_values must start at 0")
        if any(t1 <= t0 for t0, t1 in zip(taus, taus[1:])):
            raise ValidationError("tau_values must be strictly increasing")
        if not self.k_set:
            raise ValidationError("k_set is empty")
        for side, k in self.k_set:
            if side not in SIDES or k < 1:
                raise ValidationError(f"invalid (side, k) pair {(side, k)!r}")
        if not self.v_sup >= 0:
            raise ValidationError(f"v_sup must be >= 0, got {self.v_sup!r}")


@dataclass(frozen=True)
class TauDiagnostics:
    """Spectral data of A_tau at one sweep point.

    a_minus / a_plus are the block bounds at this tau. The first_above /
    last_below / n_* fields refer to the full spectrum and to the declared
    (uniform) a-, a+ of the sweep profile; n_below_own counts eigenvalues
    <= a_minus(tau), n_above_own those >= a_plus(tau).
    """

    tau: float
    a_minus: float
    a_plus: float
    first_above_declared: float
    last_below_declared: float
    n_below_declared: int
    n_above_declared: int
    n_below_own: int
    n_above_own: int


@dataclass
class Branch:
    side: str
    k: int
    points: list[tuple[float, LevelResult]] = field(default_factory=list)
    hypothesis_report: list[TauDiagnostics] = field(default_factory=list)

    @property
    def taus(self) -> np.ndarray:
        return np.array([t for t, _ in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for _, r in self.points])

    @property
    def statuses(self) -> list[Status]:
        return [r.status for _, r in self.points]


def uniform_profile(
    op0: DecomposedOperator,
    perturbation: DecomposedOperator,
    tau_values: Sequence[float],
    b_minus: float,
    b_plus: float,
) -> GapProfile:
    """a- = max over the tau grid of a-(tau), a+ = min of a+(tau): the uniform bounds of the hypotheses.

    Sampled on the grid only; between grid points the bounds are not certified.
    """
    a_m, a_p = -math.inf, math.inf
    for tau in tau_values:
        op = op0 if tau == 0 else op0 + tau * perturbation
        a_m = max(a_m, op.a_minus)
        a_p = min(a_p, op.a_plus)
    return GapProfile(a_minus=a_m, a_plus=a_p, b_minus=b_minus, b_plus=b_plus)


def _diagnostics(op: DecomposedOperator, tau: float, declared: GapProfile, tol: float) -> TauDiagnostics:
    eigs = op.spectrum()
    above = eigs[eigs > declared.a_minus + tol]
    below = eigs[eigs < declared.a_plus - tol]
    return TauDiagnostics(
        tau=tau,
        a_minus=op.a_minus,
        a_plus=op.a_plus,
        first_above_declared=float(above[0]) if above.size else math.inf,
        last_below_declared=float(below[-1]) if below.size else -math.inf,
        n_below_declared=int(np.count_nonzero(eigs <= declared.a_minus + tol)),
        n_above_declared=int(np.count_nonzero(eigs >= declared.a_plus - tol)),
        n_below_own=int(np.count_nonzero(eigs <= op.a_minus + tol)),
        n_above_own=int(np.count_nonzero(eigs >= op.a_plus - tol)),
    )


def sweep(
    op0: DecomposedOperator,
    config: SweepConfig,
    profile: GapProfile,
    tol: float = PDE_TOL,
    *,
    diagnostics: bool = True,
) -> list[Branch]:
    """Solve every tracked level at every tau.

    Each solve uses the block bounds of A_tau itself and the continuum
    edges declared in `profile`. With diagnostics=True the full matrix is
    diagonalized at each tau (desk scale) to support verify_uniform_bounds.
    """
    p = config.perturbation
    if (p.n_plus, p.n_minus) != (op0.n_plus, op0.n_minus):
        raise ValidationError("perturbation is not expressed on the splitting of op0")
    branches = {key: Branch(*key) for key in config.k_set}
    reports = []
    for tau in config.tau_values:
        op = op0 if tau == 0.0 else op0 + tau * p
        prof = gap_profile(op, profile.b_minus, profile.b_plus)
        for (side, k), br in branches.items():
            try:
                res = solve_level(op, prof, k, side, tol)
            except ConvergenceError as exc:
                exc.tau = tau
                raise ConvergenceError(f"tau={tau!r}: {exc}", bracket=exc.bracket, tau=tau) from exc
            br.points.append((tau, res))
        if diagnostics:
            reports.append(_diagnostics(op, tau, profile, tol))
    out = list(branches.values())
    for br in out:
        br.hypothesis_report = reports
    return out


def lipschitz_violations(branch: Branch, v_sup: float, tol: float) -> list[tuple[float, float]]:
    """Consecutive interior points with |Δλ| > v_sup |Δτ| + 2 tol."""
    bad = []
    for (t0, r0), (t1, r1) in zip(branch.points, branch.points[1:]):
        if r0.status == Status.INTERIOR and r1.status == Status.INTERIOR:
            if abs(r1.value - r0.value) > v_sup * (t1 - t0) + 2 * tol:
                bad.append((t0, t1))
    return bad


def status_sequence_monotone(branch: Branch) -> bool:
    """Statuses move monotonically along clamped_at_a < interior < clamped_at_b."""
    ranks = [_STATUS_RANK[s] for s in branch.statuses]
    inc = all(r1 >= r0 for r0, r1 in zip(ranks, ranks[1:]))
    dec = all(r1 <= r0 for r0, r1 in zip(ranks, ranks[1:]))
    return inc or dec


def dichotomy_holds(branch: Branch) -> bool:
    """Once interior, the level stays interior or sits at the continuum edge."""
    started = False
    for s in branch.statuses:
        if s == Status.INTERIOR:
            started = True
        elif started and s == Status.CLAMPED_AT_A:
            return False
    return True


def _crossings(reports: Sequence[TauDiagnostics], attr: str) -> list[tuple[float, float]]:
    out = []
    for r0, r1 in zip(reports, reports[1:]):
        if getattr(r0, attr) != getattr(r1, attr):
            out.append((r0.tau, r1.tau))
    return out


@dataclass
class UniformBoundsReport:
    jj_minus: bool
    jj_plus: bool
    a1_minus: float
    a1_plus: float
    a1_minus_ok: bool
    a1_plus_ok: bool
    a1_minus_failures: list[tuple[float, float]]
    a1_plus_failures: list[tuple[float, float]]
    exits_plus: list[tuple[float, float]]
    exits_minus: list[tuple[float, float]]
    start_plus: bool
    start_minus: bool
    dichotomy: dict[tuple[str, int], bool]
    lipschitz: dict[tuple[str, int], list[tuple[float, float]]]
    monotone_status: dict[tuple[str, int], bool]

    @property
    def hypotheses_plus(self) -> bool:
        return self.jj_minus and self.a1_minus_ok and self.start_plus

    @property
    def hypotheses_minus(self) -> bool:
        return self.jj_plus and self.a1_plus_ok and self.start_minus

    def hypotheses_hold(self, side: str) -> bool:
        return self.hypotheses_plus if side == "plus" else self.hypotheses_minus

    @property
    def ok(self) -> bool:
        sides = {side for side, _ in self.dichotomy}
        return (
            all(self.hypotheses_hold(s) for s in sides)
            and all(self.dichotomy.values())
            and not any(self.lipschitz.values())
        )

    def to_dict(self) -> dict:
        key = lambda sk: f"{sk[0]}:{sk[1]}"
        return {
            "ok": self.ok,
            "hypotheses_plus": self.hypotheses_plus,
            "hypotheses_minus": self.hypotheses_minus,
            "jj_minus": self.jj_minus,
            "jj_plus": self.jj_plus,
            "a1_minus": self.a1_minus,
            "a1_plus": self.a1_plus,
            "a1_minus_ok": self.a1_minus_ok,
            "a1_plus_ok": self.a1_plus_ok,
            "a1_minus_failures": self.a1_minus_failures,
            "a1_plus_failures": self.a1_plus_failures,
            "exits_plus": self.exits_plus,
            "exits_minus": self.exits_minus,
            "start_plus": self.start_plus,
            "start_minus": self.start_minus,
            "dichotomy": {key(k): v for k, v in self.dichotomy.items()},
            "lipschitz_violations": {key(k): v for k, v in self.lipschitz.items()},
            "monotone_status": {key(k): v for k, v in self.monotone_status.items()},
        }


def verify_uniform_bounds(
    branches: Sequence[Branch],
    profile: GapProfile,
    v_sup: float | None = None,
    tol: float = PDE_TOL,
) -> UniformBoundsReport:
    """Check the continuation hypotheses against the declared a-, a+ of `profile`.

    Uniform block bounds: sup_tau a-(tau) <= a- and inf_tau a+(tau) >= a+.
    a1-: the lowest eigenvalue above a- over all tau must stay above a-;
    an eigenvalue crossing a- between two sweep points also fails it,
    since by continuity the infimum then reaches a-. Mirror for a1+.
    exits_plus/minus locate crossings of the per-tau a-(tau)/a+(tau),
    i.e. where a branch leaves the window through its a-edge.
    """
    if not branches:
        raise ValidationError("no branches to verify")
    reports = branches[0].hypothesis_report
    if not reports:
        raise ValidationError("branches carry no diagnostics; run sweep(..., diagnostics=True)")
    jj_minus = max(r.a_minus for r in reports) <= profile.a_minus + tol
    jj_plus = min(r.a_plus for r in reports) >= profile.a_plus - tol
    a1_minus = min(r.first_above_declared for r in reports)
    a1_plus = max(r.last_below_declared for r in reports)
    fail_m = _crossings(reports, "n_below_declared")
    fail_p = _crossings(reports, "n_above_declared")

    def start(side):
        # lambda^{0,+}_{k0} > a- (resp. lambda^{0,-}_{k0} < a+) for some tracked k
        at0 = [br.points[0][1] for br in branches if br.side == side]
        if side == "plus":
            return any(r.value > profile.a_minus + tol for r in at0)
        return any(r.value < profile.a_plus - tol for r in at0)

    return UniformBoundsReport(
        jj_minus=jj_minus,
        jj_plus=jj_plus,
        a1_minus=a1_minus,
        a1_plus=a1_plus,
        a1_minus_ok=a1_minus > profile.a_minus + tol and not fail_m,
        a1_plus_ok=a1_plus < profile.a_plus - tol and not fail_p,
        a1_minus_failures=fail_m,
        a1_plus_failures=fail_p,
        exits_plus=_crossings(reports, "n_below_own"),
        exits_minus=_crossings(reports, "n_above_own"),
        start_plus=start("plus"),
        start_minus=start("minus"),
        dichotomy={(br.side, br.k): dichotomy_holds(br) for br in branches},
        lipschitz={
            (br.side, br.k): (lipschitz_violations(br, v_sup, tol) if v_sup is not None else [])
            for br in branches
        },
        monotone_status={(br.side, br.k): status_sequence_monotone(br) for br in branches},
    )
