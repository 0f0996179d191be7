"""Two-sided min-max levels via the Schur-complement fixed point.

For lambda > a_minus the sup over H- in the plus-side min-max can be done in
closed form, which leaves the nonlinear eigenproblem

    S(lambda) = app - apm (amm - lambda)^{-1} apm^H,   mu_k(S(lambda)) = lambda.

f_k(lambda) = mu_k(S(lambda)) - lambda has slope <= -1, so its root is
unique, and |f_k(x)| <= tol already places x within tol of the root. The
minus-side levels are the plus-side levels of negate_and_swap(A), negated.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize, minimize_scalar

from . import _linalg
from .errors import ConvergenceError, PreconditionError, ValidationError
from .operator_model import DecomposedOperator, GapProfile, gap_profile, negate_and_swap

MATRIX_TOL = 1e-10
PDE_TOL = 1e-8
MAX_ITER = 200
_INFINITE_EDGE = 1e9


class Status(str, Enum):
    INTERIOR = "interior"
    CLAMPED_AT_B = "clamped_at_b"
    CLAMPED_AT_A = "clamped_at_a"


SIDES = ("plus", "minus")


@dataclass(frozen=True)
class LevelResult:
    side: str
    k: int
    value: float
    status: Status
    residual: float
    iterations: int


def _check_side(side: str) -> str:
    if side not in SIDES:
        raise ValidationError(f"side must be 'plus' or 'minus', got {side!r}")
    return side


# --- Schur complement --------------------------------------------------------


class _SchurPencil:
    """Cached eigendecomposition amm = U diag(m) U^H with W = apm U."""

    def __init__(self, op: DecomposedOperator):
        # keep arrays only: a back-reference to op would make a reference cycle
        # through op.__dict__ and delay freeing large operators
        self.app = op.app
        self.decoupled = op.is_decoupled
        if not self.decoupled:
            self.m, u = np.linalg.eigh(op.amm)
            self.w = op.apm @ u
        self.a_minus = op.a_minus

    @cached_property
    def app_eigs(self) -> np.ndarray:
        return _linalg.eigvalsh(self.app)

    def matrix(self, lam: float) -> np.ndarray:
        if self.decoupled:
            return self.app
        # (lam - m) > 0 on the admissible range
        ww = self.w / (lam - self.m)
        s = self.app + ww @ self.w.conj().T
        return 0.5 * (s + s.conj().T)

    def mu(self, lam: float, k: int) -> float:
        if self.decoupled:
            return float(self.app_eigs[k - 1])
        s = self.matrix(lam)
        if s.shape[0] == 1:
            return float(s[0, 0].real)
        return float(_linalg.eigvalsh(s, k - 1, k - 1)[0])


def _pencil(op: DecomposedOperator) -> _SchurPencil:
    # stored on the (frozen) operator instance, like functools.cached_property does
    p = op.__dict__.get("_schur_pencil")
    if p is None:
        p = _SchurPencil(op)
        op.__dict__["_schur_pencil"] = p
    return p


def schur_complement(op: DecomposedOperator, lam: float) -> np.ndarray:
    """S(lam) = app - apm (amm - lam I)^{-1} apm^H, defined for lam > a_minus."""
    if not lam > op.a_minus:
        raise PreconditionError(f"Schur complement needs lambda > a_minus={op.a_minus!r}, got {lam!r}")
    if op.is_decoupled:
        return op.app.copy()
    return _pencil(op).matrix(lam)


def level_objective(op: DecomposedOperator, k: int, lam: float) -> float:
    """f_k(lam) = mu_k(S(lam)) - lam, mu_k the k-th smallest eigenvalue."""
    if not 1 <= k <= op.n_plus:
        raise ValidationError(f"level index k={k} out of range 1..{op.n_plus}")
    if not lam > op.a_minus:
        raise PreconditionError(f"level objective needs lambda > a_minus={op.a_minus!r}, got {lam!r}")
    return _pencil(op).mu(lam, k) - lam


# --- root-find -----------------------------------------------------------------


def _left_offset(a_minus: float) -> float:
    return 1e-9 * (1.0 + abs(a_minus))


def solve_level(
    op: DecomposedOperator,
    profile: GapProfile,
    k: int,
    side: str = "plus",
    tol: float = MATRIX_TOL,
    *,
    method: str = "illinois",
    max_iter: int = MAX_ITER,
) -> LevelResult:
    """Compute lambda_k^+ (side='plus') or lambda_k^- (side='minus').

    The root of f_k is bracketed in (a_minus + eps, b_minus]. A level with
    f_k(a_minus + eps) <= 0 is not characterized and is reported as
    clamped_at_a with value a_minus; one with f_k(b_minus) >= 0 is
    reported as clamped_at_b with value b_minus. Otherwise the bracket is
    refined until |f_k| <= tol.

    method: 'illinois' (regula falsi with the Illinois modification and
    bisection safeguard) or 'bisect'.
    """
    _check_side(side)
    if not tol > 0:
        raise ValidationError(f"tolerance must be positive, got {tol!r}")
    if side == "minus":
        res = solve_level(op.negated, profile.mirrored(), k, "plus", tol, method=method, max_iter=max_iter)
        return replace(res, side="minus", value=-res.value)
    if method not in ("illinois", "bisect"):
        raise ValidationError(f"unknown root-finding method {method!r}")
    if not 1 <= k <= op.n_plus:
        raise ValidationError(f"level index k={k} out of range 1..{op.n_plus}")

    a = profile.a_minus
    if a < op.a_minus - 1e-12 * (1.0 + abs(op.a_minus)):
        raise PreconditionError(f"profile a_minus={a!r} is below the operator's a_minus={op.a_minus!r}")
    a = max(a, op.a_minus)
    pencil = _pencil(op)

    def f(lam: float) -> float:
        return pencil.mu(lam, k) - lam

    lo = a + _left_offset(a)
    f_lo = f(lo)
    if f_lo <= 0.0:
        return LevelResult("plus", k, a, Status.CLAMPED_AT_A, abs(f_lo), 1)

    b = profile.b_minus
    b_eff = b if math.isfinite(b) else _INFINITE_EDGE
    bound = op.norm_bound + 1.0
    if b_eff <= lo:
        # the window is empty: the level sits at the edge
        return LevelResult("plus", k, b, Status.CLAMPED_AT_B, abs(f_lo), 1)
    if b_eff <= bound:
        hi = b_eff
        f_hi = f(hi)
        if f_hi >= 0.0:
            return LevelResult("plus", k, b, Status.CLAMPED_AT_B, abs(f_hi), 2)
    else:
        # every level is below the spectral radius bound, so f < 0 there
        hi = bound
        f_hi = f(hi)
    value, res, it = _bracketed_root(f, lo, f_lo, hi, f_hi, tol, method, max_iter)
    return LevelResult("plus", k, value, Status.INTERIOR, res, it + 2)


def _bracketed_root(f, lo, f_lo, hi, f_hi, tol, method, max_iter):
    """Root of a decreasing f with f(lo) > 0 > f(hi), to |f| <= tol."""
    side_kept = 0
    widths = [hi - lo]
    for it in range(1, max_iter + 1):
        if method == "bisect" or (len(widths) > 3 and widths[-1] > 0.5 * widths[-4]):
            x = 0.5 * (lo + hi)
        else:
            x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            if not lo < x < hi:
                x = 0.5 * (lo + hi)
        fx = f(x)
        if abs(fx) <= tol:
            return x, abs(fx), it
        if fx > 0:
            lo, f_lo = x, fx
            if side_kept == 1:
                f_hi *= 0.5
            side_kept = 1
        else:
            hi, f_hi = x, fx
            if side_kept == -1:
                f_lo *= 0.5
            side_kept = -1
        widths.append(hi - lo)
        if not lo < 0.5 * (lo + hi) < hi:
            break
    raise ConvergenceError(
        f"no root with |f| <= {tol:g} after {it} iterations; bracket [{lo!r}, {hi!r}]", bracket=(lo, hi)
    )


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("GAPSPEC_THREADS", "1") or 1)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def solve_levels(
    op: DecomposedOperator,
    profile: GapProfile,
    n_levels: int,
    side: str = "plus",
    tol: float = MATRIX_TOL,
    *,
    workers: int | None = None,
    method: str = "illinois",
) -> list[LevelResult]:
    """Levels k = 1..n_levels on one side, checked for monotonicity in k."""
    _check_side(side)
    n_avail = op.n_plus if side == "plus" else op.n_minus
    if not 1 <= n_levels <= n_avail:
        raise ValidationError(f"n_levels={n_levels} out of range 1..{n_avail}")
    # build the shared cache once before any fan-out
    _pencil(op if side == "plus" else op.negated)
    ks = range(1, n_levels + 1)
    nw = _resolve_workers(workers)
    if nw > 1 and n_levels > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(lambda k: solve_level(op, profile, k, side, tol, method=method), ks))
    else:
        results = [solve_level(op, profile, k, side, tol, method=method) for k in ks]
    check_ordering(results, tol)
    return results


def check_ordering(results: Sequence[LevelResult], tol: float) -> None:
    """lambda_k^+ nondecreasing and lambda_k^- nonincreasing in k."""
    by_side: dict[str, list[LevelResult]] = {}
    for r in results:
        by_side.setdefault(r.side, []).append(r)
    for side, rs in by_side.items():
        rs = sorted(rs, key=lambda r: r.k)
        sgn = 1.0 if side == "plus" else -1.0
        for r0, r1 in zip(rs, rs[1:]):
            if sgn * (r1.value - r0.value) < -2 * tol:
                raise ConvergenceError(
                    f"ordering violated on side {side}: level {r0.k}={r0.value!r} then {r1.k}={r1.value!r}"
                )


def first_admissible(results: Iterable[LevelResult]) -> int | None:
    """k0: first index whose level escapes [a+, a-] (status other than clamped_at_a)."""
    for r in sorted(results, key=lambda r: r.k):
        if r.status != Status.CLAMPED_AT_A:
            return r.k
    return None


def solve_both_sides(
    op: DecomposedOperator,
    profile: GapProfile,
    n_levels: int,
    tol: float = MATRIX_TOL,
    *,
    workers: int | None = None,
) -> tuple[GapProfile, list[LevelResult], list[LevelResult]]:
    """Plus and minus batches plus the profile with k0 filled in."""
    plus = solve_levels(op, profile, min(n_levels, op.n_plus), "plus", tol, workers=workers)
    minus = solve_levels(op, profile, min(n_levels, op.n_minus), "minus", tol, workers=workers)
    prof = replace(profile, k0_plus=first_admissible(plus), k0_minus=first_admissible(minus))
    return prof, plus, minus


# --- brute-force oracle ------------------------------------------------------


def _compression_top(a_vv, a_vr, a_rr, q):
    """Largest eigenvalue (and vector) of the compression to span(q) (+) rest."""
    top = np.block([[q.T @ a_vv @ q, q.T @ a_vr], [a_vr.T @ q, a_rr]])
    w, v = np.linalg.eigh(top)
    return w[-1], v[:, -1]


def brute_force_oracle(
    op: DecomposedOperator,
    k: int,
    side: str = "plus",
    *,
    restarts: int = 64,
    seed: int = 0,
) -> float:
    """Evaluate the inf-sup (side='plus') or sup-inf (side='minus') definition directly.

    For side='plus' the inner sup over V (+) H- is the top eigenvalue of
    the compression of A to that subspace; the outer inf over
    k-dimensional V in H+ is searched over the Grassmannian from random
    orthonormal frames, each polished by gradient descent in a local chart
    and then by sweeps of plane rotations. Only for small real instances.
    """
    _check_side(side)
    if op.dim > 16:
        raise ValidationError(f"brute-force oracle is limited to dimension <= 16, got {op.dim}")
    if np.iscomplexobj(op.app) or np.iscomplexobj(op.apm):
        raise ValidationError("brute-force oracle supports real matrices only")
    if side == "plus":
        a_vv, a_vr, a_rr, sgn = op.app, op.apm, op.amm, 1.0
    else:
        # sup-inf of A = -(inf-sup of -A); written out on the blocks directly
        a_vv, a_vr, a_rr, sgn = -op.amm, -op.apm.T, -op.app, -1.0
    n = a_vv.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"level index k={k} out of range 1..{n}")
    if k == n:
        return sgn * float(np.linalg.eigvalsh(np.block([[a_vv, a_vr], [a_vr.T, a_rr]]))[-1])

    rng = np.random.default_rng(seed)
    candidates = []
    for _ in range(restarts):
        q, _ = np.linalg.qr(rng.standard_normal((n, k)))
        q, val = _polish_chart(a_vv, a_vr, a_rr, q, rounds=1, maxiter=25, gtol=1e-6)
        candidates.append((val, q))
    candidates.sort(key=lambda c: c[0])
    best, best_q = math.inf, None
    for _, q in candidates[:4]:
        q, val = _polish_chart(a_vv, a_vr, a_rr, q)
        if val < best:
            best, best_q = val, q
    for _ in range(4):
        q, val = _rotation_sweep(a_vv, a_vr, a_rr, best_q)
        q, val = _polish_chart(a_vv, a_vr, a_rr, q)
        improved = val < best - 1e-14
        if val < best:
            best, best_q = val, q
        if not improved:
            break
    return sgn * float(best)


def _complement(q):
    n, k = q.shape
    full, _ = np.linalg.qr(np.hstack([q, np.eye(n)]))
    return full[:, k:n]


def _chart_value_and_grad(a_vv, a_vr, a_rr, y):
    """Top eigenvalue of the compression to span(y) (+) rest and its gradient in y."""
    k = y.shape[1]
    linv = np.linalg.inv(np.linalg.cholesky(y.T @ y))
    yo = y @ linv.T  # orthonormal basis of span(y)
    top = np.block([[yo.T @ a_vv @ yo, yo.T @ a_vr], [a_vr.T @ yo, a_rr]])
    w, v = np.linalg.eigh(top)
    lam = w[-1]
    c_y = linv.T @ v[:k, -1]
    c_r = v[k:, -1]
    yc = y @ c_y
    g_rows = a_vv @ yc + a_vr @ c_r - lam * yc
    return lam, 2.0 * np.outer(g_rows, c_y)


def _polish_chart(a_vv, a_vr, a_rr, q, rounds: int = 3, maxiter: int | None = None, gtol: float = 1e-11):
    """Gradient descent on the Grassmannian in the chart span(q + p z), re-centred each round."""
    n, k = q.shape
    val = _compression_top(a_vv, a_vr, a_rr, q)[0]
    opts = {"gtol": gtol}
    if maxiter is not None:
        opts["maxiter"] = maxiter
    for _ in range(rounds):
        p = _complement(q)

        def fun(z):
            lam, g = _chart_value_and_grad(a_vv, a_vr, a_rr, q + p @ z.reshape(n - k, k))
            return lam, (p.T @ g).ravel()

        res = minimize(fun, np.zeros((n - k) * k), jac=True, method="BFGS", options=opts)
        q_new, _ = np.linalg.qr(q + p @ res.x.reshape(n - k, k))
        new_val = _compression_top(a_vv, a_vr, a_rr, q_new)[0]
        if new_val <= val:
            q, val = q_new, new_val
        else:
            break
    return q, val


def _rotation_sweep(a_vv, a_vr, a_rr, q):
    """One pass of plane rotations mixing each basis vector of V with each vector of its complement."""
    n, k = q.shape
    p = _complement(q)
    val = _compression_top(a_vv, a_vr, a_rr, q)[0]
    for i in range(k):
        for j in range(n - k):

            def rotated(theta, i=i, j=j):
                qq = q.copy()
                qq[:, i] = math.cos(theta) * q[:, i] + math.sin(theta) * p[:, j]
                return qq

            res = minimize_scalar(
                lambda t: _compression_top(a_vv, a_vr, a_rr, rotated(t))[0],
                bounds=(-0.5 * math.pi, 0.5 * math.pi),
                method="bounded",
                options={"xatol": 1e-10},
            )
            if res.fun < val:
                qi, pj = q[:, i].copy(), p[:, j].copy()
                c, s = math.cos(res.x), math.sin(res.x)
                q = q.copy()
                p = p.copy()
                q[:, i] = c * qi + s * pj
                p[:, j] = -s * qi + c * pj
                val = res.fun
    return q, val


# --- spectrum check ----------------------------------------------------------


@dataclass
class SpectrumReport:
    """Outcome of comparing computed levels against a full diagonalization."""

    matched: list[tuple[str, int, float, float]] = field(default_factory=list)
    mismatched: list[tuple[str, int, float, float | None]] = field(default_factory=list)
    missed: list[tuple[str, float]] = field(default_factory=list)
    not_characterized: list[float] = field(default_factory=list)
    window_counts: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.mismatched and not self.missed

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "matched": [dict(side=s, k=k, value=v, eigenvalue=e) for s, k, v, e in self.matched],
            "mismatched": [dict(side=s, k=k, value=v, eigenvalue=e) for s, k, v, e in self.mismatched],
            "missed": [dict(side=s, eigenvalue=e) for s, e in self.missed],
            "not_characterized": list(self.not_characterized),
            "window_counts": dict(self.window_counts),
        }


def spectrum_check(
    op: DecomposedOperator,
    profile: GapProfile,
    results: Sequence[LevelResult],
    tol: float = 1e-8,
) -> SpectrumReport:
    """Diagonalize the assembled matrix and match the computed levels against it.

    Interior levels on the plus side must enumerate, in order and with
    multiplicity, the eigenvalues in (a-, b-) starting at position
    k - k0+ + 1; mirror statement on the minus side. Eigenvalues inside
    [a+, a-] are listed as not characterized.
    """
    eigs = op.spectrum()
    return match_levels(eigs, profile, results, tol)


def match_levels(
    eigs: np.ndarray, profile: GapProfile, results: Sequence[LevelResult], tol: float = 1e-8
) -> SpectrumReport:
    """Core of spectrum_check, usable with eigenvalues merged from several channels."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    rep = SpectrumReport()
    a_m, a_p = profile.a_minus, profile.a_plus
    windows = {
        "plus": eigs[(eigs > a_m + tol) & (eigs < profile.b_minus)],
        "minus": eigs[(eigs < a_p - tol) & (eigs > profile.b_plus)][::-1],
    }
    for side in SIDES:
        window = windows[side]
        rep.window_counts[side] = int(window.size)
        rs = sorted((r for r in results if r.side == side), key=lambda r: r.k)
        if not rs:
            continue
        k0 = first_admissible(rs)
        matched_pos = set()
        last_interior = None
        for r in rs:
            if r.status == Status.CLAMPED_AT_A:
                if k0 is not None and r.k > k0:
                    rep.mismatched.append((side, r.k, r.value, None))
                continue
            pos = r.k - k0  # zero-based position in the window
            if r.status == Status.INTERIOR:
                eig = float(window[pos]) if pos < window.size else None
                if eig is not None and abs(eig - r.value) <= tol * max(1.0, abs(eig)):
                    rep.matched.append((side, r.k, r.value, eig))
                    matched_pos.add(pos)
                    last_interior = r.value
                else:
                    rep.mismatched.append((side, r.k, r.value, eig))
            else:  # clamped at the continuum edge: no window eigenvalue may be left at this position
                if pos < window.size:
                    rep.mismatched.append((side, r.k, r.value, float(window[pos])))
        if last_interior is not None:
            sgn = 1.0 if side == "plus" else -1.0
            for pos, e in enumerate(window):
                if sgn * (e - last_interior) <= tol and pos not in matched_pos:
                    rep.missed.append((side, float(e)))
    lo, hi = min(a_p, a_m), max(a_p, a_m)
    if a_p <= a_m:
        inside = eigs[(eigs >= lo - tol) & (eigs <= hi + tol)]
        rep.not_characterized = [float(e) for e in inside]
    return rep


# --- channel merging ---------------------------------------------------------


@dataclass(frozen=True)
class MergedLevel:
    """One channel level placed in the global, multiplicity-aware ordering.

    k is the first global index occupied by the level; it repeats
    `multiplicity` times.
    """

    side: str
    k: int
    value: float
    status: Status
    residual: float
    iterations: int
    multiplicity: int
    channel: str


def merged_profile(profiles: Sequence[GapProfile]) -> GapProfile:
    """Profile of a direct sum of channels: a- is the max, a+ the min over channels."""
    return GapProfile(
        a_minus=max(p.a_minus for p in profiles),
        a_plus=min(p.a_plus for p in profiles),
        b_minus=min(p.b_minus for p in profiles),
        b_plus=max(p.b_plus for p in profiles),
    )


def merge_channels(
    channel_results: Sequence[tuple[str, int, Sequence[LevelResult]]],
    profile: GapProfile,
    side: str,
) -> list[MergedLevel]:
    """Merge per-channel levels of a direct sum into one ordered list.

    channel_results holds (label, multiplicity, levels) per channel.
    Levels at or beyond the global a-/a+ become clamped_at_a. The list is
    cut where completeness stops being guaranteed: past the smallest
    last-computed level over channels (largest, on the minus side), an
    uncomputed level of some channel could come first.
    """
    _check_side(side)
    sgn = 1.0 if side == "plus" else -1.0
    a_edge = profile.a_minus if side == "plus" else profile.a_plus
    b_edge = profile.b_minus if side == "plus" else profile.b_plus
    entries = []
    cutoff = math.inf
    for label, mult, levels in channel_results:
        levels = sorted((r for r in levels if r.side == side), key=lambda r: r.k)
        if not levels:
            continue
        last = levels[-1]
        if last.status != Status.CLAMPED_AT_B:
            cutoff = min(cutoff, sgn * last.value)
        for r in levels:
            entries.append((label, mult, r))
    keep = [e for e in entries if sgn * e[2].value <= cutoff]
    keep.sort(key=lambda e: (sgn * e[2].value, e[0]))
    merged = []
    k = 1
    for label, mult, r in keep:
        status, value = r.status, r.value
        if status != Status.CLAMPED_AT_B and sgn * (value - a_edge) <= 0:
            status, value = Status.CLAMPED_AT_A, a_edge
        elif status == Status.CLAMPED_AT_B:
            value = b_edge
        merged.append(MergedLevel(side, k, value, status, r.residual, r.iterations, mult, label))
        k += mult
    return merged


def expand_merged(merged: Sequence[MergedLevel]) -> list[LevelResult]:
    """One LevelResult per global index, repeating degenerate levels."""
    out = []
    for m in merged:
        for j in range(m.multiplicity):
            out.append(LevelResult(m.side, m.k + j, m.value, m.status, m.residual, m.iterations))
    return out


def merged_spectrum_check(
    channels: Sequence[tuple[DecomposedOperator, int]],
    profile: GapProfile,
    results: Sequence[LevelResult],
    tol: float = 1e-8,
) -> SpectrumReport:
    """spectrum_check for a direct sum of channels, each repeated `multiplicity` times."""
    eigs = np.concatenate([np.repeat(op.spectrum(), mult) for op, mult in channels])
    return match_levels(eigs, profile, results, tol)


__all__ = [
    "LevelResult",
    "MergedLevel",
    "SpectrumReport",
    "Status",
    "brute_force_oracle",
    "expand_merged",
    "first_admissible",
    "gap_profile",
    "level_objective",
    "match_levels",
    "merge_channels",
    "merged_profile",
    "merged_spectrum_check",
    "schur_complement",
    "solve_both_sides",
    "solve_level",
    "solve_levels",
    "spectrum_check",
]
