"""Block representation of a self-adjoint matrix relative to a splitting H = H+ (+) H-.

In finite dimension the core F is the whole space, so the form-domain
conditions on F+ and F- hold trivially and are not checked anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _linalg
from .errors import ValidationError

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class DecomposedOperator:
    """Self-adjoint matrix stored as the blocks (app, apm, amm).

    The block Λ-AΛ+ is apm^H and is never stored. Build instances with
    :func:`from_blocks`, which validates and symmetrizes.
    """

    app: np.ndarray
    apm: np.ndarray
    amm: np.ndarray
    basis_note: str = ""

    @property
    def n_plus(self) -> int:
        return self.app.shape[0]

    @property
    def n_minus(self) -> int:
        return self.amm.shape[0]

    @property
    def dim(self) -> int:
        return self.n_plus + self.n_minus

    def assembled(self) -> np.ndarray:
        return np.block([[self.app, self.apm], [self.apm.conj().T, self.amm]])

    def spectrum(self) -> np.ndarray:
        """Ascending eigenvalues of the assembled matrix."""
        return _linalg.block_spectrum(self.app, self.apm, self.amm)

    @cached_property
    def is_decoupled(self) -> bool:
        return not np.any(self.apm)

    @cached_property
    def a_minus(self) -> float:
        return _linalg.extreme_eigenvalue(self.amm, "max")

    @cached_property
    def a_plus(self) -> float:
        return _linalg.extreme_eigenvalue(self.app, "min")

    @cached_property
    def norm_bound(self) -> float:
        """Frobenius norm of the assembled matrix; an upper bound for every |eigenvalue|."""
        return math.sqrt(
            np.linalg.norm(self.app) ** 2
            + 2.0 * np.linalg.norm(self.apm) ** 2
            + np.linalg.norm(self.amm) ** 2
        )

    @cached_property
    def negated(self) -> "DecomposedOperator":
        return negate_and_swap(self)

    def shifted(self, c: float) -> "DecomposedOperator":
        """A + cI."""
        return from_blocks(
            self.app + c * np.eye(self.n_plus),
            self.apm,
            self.amm + c * np.eye(self.n_minus),
            basis_note=self.basis_note,
        )

    def __add__(self, other: "DecomposedOperator") -> "DecomposedOperator":
        if not isinstance(other, DecomposedOperator):
            return NotImplemented
        if (self.n_plus, self.n_minus) != (other.n_plus, other.n_minus):
            raise ValidationError(
                f"splitting mismatch: ({self.n_plus}, {self.n_minus}) vs ({other.n_plus}, {other.n_minus})"
            )
        return from_blocks(
            self.app + other.app, self.apm + other.apm, self.amm + other.amm, basis_note=self.basis_note
        )

    def __mul__(self, t: float) -> "DecomposedOperator":
        return from_blocks(t * self.app, t * self.apm, t * self.amm, basis_note=self.basis_note)

    __rmul__ = __mul__


@dataclass(frozen=True)
class GapProfile:
    """Window diagnostics: a-/a+ from the diagonal blocks, caller-declared continuum edges b-/b+.

    k0_plus / k0_minus are None until a solve batch has located the first
    level that escapes [a+, a-].
    """

    a_minus: float
    a_plus: float
    b_minus: float
    b_plus: float
    k0_plus: int | None = None
    k0_minus: int | None = None

    @property
    def edges_consistent(self) -> bool:
        return self.b_plus <= self.a_plus and self.a_minus <= self.b_minus

    @property
    def ordering(self) -> str:
        """'a+ > a-' (open gap between the block bounds) or 'a+ <= a-' (overlap)."""
        return "a+ > a-" if self.a_plus > self.a_minus else "a+ <= a-"

    def problems(self) -> list[str]:
        out = []
        if self.b_plus > self.a_plus:
            out.append(f"b_plus={self.b_plus!r} exceeds a_plus={self.a_plus!r}")
        if self.a_minus > self.b_minus:
            out.append(f"a_minus={self.a_minus!r} exceeds b_minus={self.b_minus!r}")
        return out

    def mirrored(self) -> "GapProfile":
        """Profile of negate_and_swap(A): the minus family becomes the plus family."""
        return GapProfile(
            a_minus=-self.a_plus,
            a_plus=-self.a_minus,
            b_minus=-self.b_plus,
            b_plus=-self.b_minus,
            k0_plus=self.k0_minus,
            k0_minus=self.k0_plus,
        )

    def with_k0(self, k0_plus: int | None = None, k0_minus: int | None = None) -> "GapProfile":
        return replace(
            self,
            k0_plus=self.k0_plus if k0_plus is None else k0_plus,
            k0_minus=self.k0_minus if k0_minus is None else k0_minus,
        )


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d matrix, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.complexfloating):
        a = a.astype(float)
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def _check_hermitian(a: np.ndarray, name: str) -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValidationError(f"{name} must have dimension >= 1")
    defect = _linalg.hermitian_defect(a)
    if defect > HERMITIAN_RTOL:
        raise ValidationError(f"non-Hermitian block {name}: max relative asymmetry {defect:.3e}")
    return 0.5 * (a + a.conj().T)


def from_blocks(app, apm, amm, basis_note: str = "") -> DecomposedOperator:
    """Validate, symmetrize and wrap the three stored blocks."""
    app = _check_hermitian(_as_matrix(app, "app"), "app")
    amm = _check_hermitian(_as_matrix(amm, "amm"), "amm")
    apm = _as_matrix(apm, "apm")
    if apm.shape != (app.shape[0], amm.shape[0]):
        raise ValidationError(
            f"dimension mismatch: apm has shape {apm.shape}, expected {(app.shape[0], amm.shape[0])}"
        )
    dtype = np.result_type(app, apm, amm)
    apm = _zero_coupling(apm.shape, dtype) if not np.any(apm) else apm.astype(dtype, copy=False)
    return DecomposedOperator(app.astype(dtype, copy=False), apm, amm.astype(dtype, copy=False), basis_note)


def _zero_coupling(shape, dtype) -> np.ndarray:
    # read-only zero-stride view: block-diagonal models do not pay for an N x N zero block
    return np.broadcast_to(np.zeros((), dtype=dtype), shape)


def from_matrix(a, n_plus: int, basis_note: str = "coordinate splitting") -> DecomposedOperator:
    """Split a full Hermitian matrix along its first n_plus coordinates."""
    a = _as_matrix(a, "matrix")
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValidationError(f"matrix must be square, got shape {a.shape}")
    if not 1 <= n_plus < n:
        raise ValidationError(f"need 1 <= n_plus < {n}, got n_plus={n_plus}")
    defect = _linalg.hermitian_defect(a)
    if defect > HERMITIAN_RTOL:
        raise ValidationError(f"non-Hermitian matrix: max relative asymmetry {defect:.3e}")
    return from_blocks(a[:n_plus, :n_plus], a[:n_plus, n_plus:], a[n_plus:, n_plus:], basis_note)


def gap_profile(op: DecomposedOperator, b_minus: float = math.inf, b_plus: float = -math.inf) -> GapProfile:
    """a- = largest eigenvalue of amm, a+ = smallest eigenvalue of app; edges as declared."""
    try:
        a_minus, a_plus = op.a_minus, op.a_plus
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ValidationError(f"eigendecomposition of a diagonal block failed: {exc}") from exc
    return GapProfile(a_minus=a_minus, a_plus=a_plus, b_minus=float(b_minus), b_plus=float(b_plus))


def negate_and_swap(op: DecomposedOperator) -> DecomposedOperator:
    """-A with H+ and H- exchanged, so the minus family of A is the plus family of the result."""
    if op.is_decoupled:
        apm = _zero_coupling((op.n_minus, op.n_plus), op.apm.dtype)
    else:
        apm = -op.apm.conj().T
    return DecomposedOperator(-op.amm, apm, -op.app, op.basis_note)


def read_matrix_file(path: str | Path) -> DecomposedOperator:
    """Read the text format: 'n_plus n_minus' then (n_plus+n_minus)^2 reals, row-major."""
    path = Path(path)
    try:
        tokens = path.read_text().split()
    except FileNotFoundError:
        raise ValidationError(f"matrix file not found: {path}") from None
    if len(tokens) < 2:
        raise ValidationError(f"{path}: missing 'n_plus n_minus' header")
    try:
        n_plus, n_minus = int(tokens[0]), int(tokens[1])
        values = np.array([float(t) for t in tokens[2:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if n_plus < 1 or n_minus < 1:
        raise ValidationError(f"{path}: need n_plus, n_minus >= 1")
    n = n_plus + n_minus
    if values.size != n * n:
        raise ValidationError(f"{path}: expected {n * n} entries, found {values.size}")
    return from_matrix(values.reshape(n, n), n_plus, basis_note=f"matrix file {path.name}")


def write_matrix_file(path: str | Path, op: DecomposedOperator) -> None:
    a = op.assembled()
    if np.iscomplexobj(a):
        raise ValidationError("complex matrices cannot be written in the text format")
    lines = [f"{op.n_plus} {op.n_minus}"]
    lines += [" ".join(format(x, ".17g") for x in row) for row in a]
    Path(path).write_text("\n".join(lines) + "\n")
