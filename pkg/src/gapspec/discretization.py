"""Radial channel builders for the Pauli-type block model and the Dirac operator with a scalar potential.

Units: c = m = hbar = 1, so the free continuum edges sit at -1 and +1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .operator_model import DecomposedOperator, from_blocks

MIN_NODES = 16


@dataclass(frozen=True)
class RadialGrid:
    """Uniform mesh r_i = i*h, i = 1..N, with h = R/(N+1) and Dirichlet ends at 0 and R."""

    R: float = 80.0
    N: int = 4000

    def __post_init__(self):
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValidationError(f"grid radius must be positive and finite, got R={self.R!r}")
        if int(self.N) != self.N or self.N < MIN_NODES:
            raise ValidationError(f"grid too coarse: need N >= {MIN_NODES} interior nodes, got N={self.N!r}")

    @property
    def h(self) -> float:
        return self.R / (self.N + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.N + 1)

    @property
    def midpoints(self) -> np.ndarray:
        """r_{i+1/2}, i = 1..N."""
        return self.nodes + 0.5 * self.h

    def lower_points(self, kappa: int) -> np.ndarray:
        """Where the lower Dirac component lives: r_i + h/2 for kappa < 0, r_i - h/2 for kappa > 0."""
        return self.nodes + (0.5 if kappa < 0 else -0.5) * self.h

    def halved(self) -> "RadialGrid":
        """Same R with the mesh width (approximately) halved."""
        return RadialGrid(self.R, 2 * self.N + 1)


@dataclass(frozen=True)
class ChannelSpec:
    model: str
    nu: float = 0.0
    l: int = 0
    kappa: int = -1

    def __post_init__(self):
        if self.model not in ("pauli", "dirac"):
            raise ValidationError(f"unknown model {self.model!r}")
        if self.nu < 0:
            raise ValidationError(f"coupling must be >= 0, got nu={self.nu!r}")
        if self.model == "pauli" and (int(self.l) != self.l or self.l < 0):
            raise ValidationError(f"orbital momentum must be an integer >= 0, got l={self.l!r}")
        if self.model == "dirac" and (int(self.kappa) != self.kappa or self.kappa == 0):
            raise ValidationError(f"invalid relativistic quantum number kappa={self.kappa!r}")

    @property
    def multiplicity(self) -> int:
        return 2 * self.l + 1 if self.model == "pauli" else 2 * abs(self.kappa)

    @property
    def label(self) -> str:
        return f"l={self.l}" if self.model == "pauli" else f"kappa={self.kappa}"


@dataclass(frozen=True)
class PotentialSpec:
    """Radial scalar potential.

    kind is one of 'coulomb' (V = -nu/r), 'constant' (V = c), 'table'
    (samples at the grid nodes, linearly interpolated in between) or
    'sum' (terms added).
    """

    kind: str
    nu: float = 0.0
    c: float = 0.0
    samples: tuple[float, ...] = ()
    terms: tuple["PotentialSpec", ...] = ()

    def __post_init__(self):
        if self.kind not in ("coulomb", "constant", "table", "sum"):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "coulomb" and not (self.nu >= 0 and math.isfinite(self.nu)):
            raise ValidationError(f"coulomb strength must be >= 0, got nu={self.nu!r}")
        if self.kind == "table" and not self.samples:
            raise ValidationError("table potential needs samples")

    @classmethod
    def coulomb(cls, nu: float) -> "PotentialSpec":
        return cls("coulomb", nu=float(nu))

    @classmethod
    def constant(cls, c: float) -> "PotentialSpec":
        return cls("constant", c=float(c))

    @classmethod
    def table(cls, samples: Sequence[float]) -> "PotentialSpec":
        return cls("table", samples=tuple(float(s) for s in samples))

    @classmethod
    def sum(cls, *terms: "PotentialSpec") -> "PotentialSpec":
        return cls("sum", terms=tuple(terms))

    def components(self):
        if self.kind == "sum":
            for t in self.terms:
                yield from t.components()
        else:
            yield self

    @property
    def coulomb_strength(self) -> float:
        return sum(t.nu for t in self.components() if t.kind == "coulomb")

    @property
    def constant_offset(self) -> float:
        """Sum of the constant components: the value of V at infinity."""
        return sum(t.c for t in self.components() if t.kind == "constant")

    def evaluate(self, r: np.ndarray, grid: RadialGrid) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "coulomb":
            return -self.nu / r
        if self.kind == "constant":
            return np.full_like(r, self.c)
        if self.kind == "table":
            s = np.asarray(self.samples)
            if s.size != grid.N:
                raise ValidationError(f"table potential has {s.size} samples, grid has N={grid.N} nodes")
            return np.interp(r, grid.nodes, s)
        out = np.zeros_like(r)
        for t in self.terms:
            out = out + t.evaluate(r, grid)
        return out

    def sup_norm(self, grid: RadialGrid) -> float:
        """max |V| over the nodes and half-nodes (both staggering directions) used by the builders."""
        pts = (grid.nodes, grid.nodes + 0.5 * grid.h, grid.nodes - 0.5 * grid.h)
        vals = np.concatenate([self.evaluate(r, grid) for r in pts])
        return float(np.max(np.abs(vals)))

    @classmethod
    def from_config(cls, cfg: dict, base_dir: Path | None = None) -> "PotentialSpec":
        """Parse the JSON form, e.g. {"kind": "coulomb", "nu": 0.5}. Unknown keys are errors."""
        if not isinstance(cfg, dict) or "kind" not in cfg:
            raise ValidationError(f"potential must be an object with a 'kind' key, got {cfg!r}")
        kind = cfg["kind"]
        allowed = {
            "coulomb": {"kind", "nu"},
            "constant": {"kind", "c"},
            "table": {"kind", "file", "values"},
            "sum": {"kind", "terms"},
        }
        if kind not in allowed:
            raise ValidationError(f"unknown potential kind {kind!r}")
        extra = set(cfg) - allowed[kind]
        if extra:
            raise ValidationError(f"unknown keys in {kind} potential: {sorted(extra)}")
        if kind == "coulomb":
            return cls.coulomb(_number(cfg, "nu"))
        if kind == "constant":
            return cls.constant(_number(cfg, "c"))
        if kind == "sum":
            terms = cfg.get("terms")
            if not isinstance(terms, list) or not terms:
                raise ValidationError("sum potential needs a non-empty 'terms' list")
            return cls.sum(*(cls.from_config(t, base_dir) for t in terms))
        if ("file" in cfg) == ("values" in cfg):
            raise ValidationError("table potential needs exactly one of 'file' or 'values'")
        if "values" in cfg:
            return cls.table(cfg["values"])
        path = Path(cfg["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            samples = np.loadtxt(path, dtype=float, ndmin=1)
        except FileNotFoundError:
            raise ValidationError(f"potential table file not found: {path}") from None
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None
        return cls.table(samples)


def _number(cfg: dict, key: str) -> float:
    try:
        return float(cfg[key])
    except KeyError:
        raise ValidationError(f"missing key {key!r} in {cfg!r}") from None
    except (TypeError, ValueError):
        raise ValidationError(f"{key!r} must be a number, got {cfg[key]!r}") from None


# --- Pauli-type model --------------------------------------------------------


def build_schrodinger_radial(nu: float, l: int, grid: RadialGrid) -> np.ndarray:
    """1 - d^2/dr^2 + l(l+1)/r^2 - nu/r on reduced radial functions, central differences."""
    if l < 0:
        raise ValidationError(f"orbital momentum must be >= 0, got l={l}")
    h, r = grid.h, grid.nodes
    diag = 1.0 + 2.0 / h**2 + l * (l + 1) / r**2 - nu / r
    m = np.diag(diag)
    off = np.full(grid.N - 1, -1.0 / h**2)
    m[np.arange(grid.N - 1), np.arange(1, grid.N)] = off
    m[np.arange(1, grid.N), np.arange(grid.N - 1)] = off
    return m


def build_pauli_channel(nu: float, l: int, grid: RadialGrid) -> DecomposedOperator:
    """diag(1 - Δ - nu/|x|, -(1 - Δ - nu/|x|)) restricted to the l-channel; zero coupling."""
    ChannelSpec("pauli", nu=nu, l=l)
    s = build_schrodinger_radial(nu, l, grid)
    return from_blocks(s, np.zeros_like(s), -s, basis_note=f"pauli nu={nu} l={l} R={grid.R} N={grid.N}")


def pauli_perturbation(pot: PotentialSpec, l: int, grid: RadialGrid) -> DecomposedOperator:
    """The block perturbation diag(V, -V): adds V to the Schrodinger part of both components.

    With V = coulomb(1) this turns A_nu into A_{nu + tau} along a sweep.
    """
    v = np.diag(pot.evaluate(grid.nodes, grid))
    return from_blocks(v, np.zeros_like(v), -v, basis_note=f"pauli perturbation l={l}")


def analytic_pauli_level(nu: float, n: int, sign: str | int) -> float:
    """±(1 - nu^2/(4 n^2)): hydrogen-like levels of the two components."""
    if n < 1:
        raise ValidationError(f"principal quantum number must be >= 1, got n={n}")
    if nu < 0:
        raise ValidationError(f"coupling must be >= 0, got nu={nu}")
    s = _sign(sign)
    return s * (1.0 - nu**2 / (4.0 * n**2))


def pauli_threshold(n: int) -> float:
    """Largest coupling for which the n-th level still lies above a-: sqrt(8n^2/(n^2+1))."""
    return math.sqrt(8.0 * n**2 / (n**2 + 1))


def _sign(sign) -> int:
    if sign in ("+", "plus", 1, +1):
        return 1
    if sign in ("-", "minus", -1):
        return -1
    raise ValidationError(f"sign must be '+' or '-', got {sign!r}")


# --- Dirac model -------------------------------------------------------------


def dirac_derivative_block(kappa: int, grid: RadialGrid) -> np.ndarray:
    """D_kappa = d/dr + kappa/r, mapping the upper component (nodes) to the lower one (half-nodes).

    Staggered difference with kappa/r taken at the half-node and applied
    to the average of the two neighbouring nodes. The staggering keeps the
    discrete free operator free of doubled modes. Its direction follows
    the sign of kappa: the continuum kernel r^(-kappa) of D_kappa is
    excluded by the boundary at infinity when kappa < 0 and at the origin
    when kappa > 0, so the difference is anchored at that end. Anchoring
    at the wrong end leaves a near-kernel vector (a discrete r^(-kappa)
    piled up at the first node) inside the positive free subspace.
    """
    n, h = grid.N, grid.h
    kr = kappa / grid.lower_points(kappa)
    d = np.zeros((n, n))
    i = np.arange(n)
    if kappa < 0:
        # row i sits at r_i + h/2 and couples u_i, u_{i+1}; u_{N+1} = 0
        d[i, i] = -1.0 / h + 0.5 * kr
        d[i[:-1], i[:-1] + 1] = 1.0 / h + 0.5 * kr[:-1]
    else:
        # row i sits at r_i - h/2 and couples u_{i-1}, u_i; u_0 = 0
        d[i, i] = 1.0 / h + 0.5 * kr
        d[i[1:], i[1:] - 1] = -1.0 / h + 0.5 * kr[1:]
    return d


@dataclass(frozen=True, eq=False)
class FreeDiracBasis:
    """Eigenbasis of the free radial channel [[I, D^T], [D, -I]].

    From the SVD D = U diag(s) W^T each singular triple spans a 2-d
    invariant subspace with eigenvalues ±sqrt(1 + s^2). Positive
    eigenvectors are (cos t w, sin t u), negative ones (-sin t w, cos t u),
    with tan 2t = s.
    """

    w: np.ndarray  # upper-component singular vectors (columns)
    u: np.ndarray  # lower-component singular vectors (columns)
    cos: np.ndarray
    sin: np.ndarray
    energy: np.ndarray  # sqrt(1 + s^2), one per pair

    def rotation(self) -> np.ndarray:
        """Q = [Q+ | Q-] as a dense 2N x 2N orthogonal matrix."""
        return np.block(
            [[self.w * self.cos, -self.w * self.sin], [self.u * self.sin, self.u * self.cos]]
        )


@lru_cache(maxsize=4)
def free_dirac_basis(kappa: int, grid: RadialGrid) -> FreeDiracBasis:
    if kappa == 0:
        raise ValidationError("invalid relativistic quantum number kappa=0")
    d = dirac_derivative_block(kappa, grid)
    u, s, wt = np.linalg.svd(d)
    theta = 0.5 * np.arctan(s)
    basis = FreeDiracBasis(
        w=wt.T.copy(), u=u, cos=np.cos(theta), sin=np.sin(theta), energy=np.sqrt(1.0 + s**2)
    )
    for a in (basis.w, basis.u, basis.cos, basis.sin, basis.energy):
        a.setflags(write=False)
    return basis


def _check_dirac_potential(pot: PotentialSpec) -> None:
    for t in pot.components():
        if t.kind == "coulomb" and not 0.0 <= t.nu < 1.0:
            raise ValidationError(f"coulomb strength must lie in [0, 1) for the Dirac model, got nu={t.nu}")


def compress_dirac_potential(pot: PotentialSpec, kappa: int, grid: RadialGrid) -> DecomposedOperator:
    """Q^T diag(V_nodes, V_half_nodes) Q in the free eigenbasis of channel kappa."""
    if kappa == 0:
        raise ValidationError("invalid relativistic quantum number kappa=0")
    _check_dirac_potential(pot)
    fb = free_dirac_basis(int(kappa), grid)
    vg = pot.evaluate(grid.nodes, grid)
    vf = pot.evaluate(grid.lower_points(kappa), grid)
    gg = fb.w.T @ (vg[:, None] * fb.w)
    ff = fb.u.T @ (vf[:, None] * fb.u)
    c, s = fb.cos, fb.sin
    app = c[:, None] * gg * c + s[:, None] * ff * s
    apm = -c[:, None] * gg * s + s[:, None] * ff * c
    amm = s[:, None] * gg * s + c[:, None] * ff * c
    return from_blocks(app, apm, amm, basis_note=f"dirac kappa={kappa} free-basis compression")


def build_dirac_radial(pot: PotentialSpec, kappa: int, grid: RadialGrid) -> DecomposedOperator:
    """H0 + V for channel kappa, split by the sign of the free energy.

    The upper component lives at the nodes, the lower one at the
    half-nodes chosen by grid.lower_points(kappa); V is added to both diagonal entries. H+ is spanned by the
    free eigenvectors with positive energy, which is the matrix-level
    version of the free spectral projector.
    """
    v = compress_dirac_potential(pot, kappa, grid)
    fb = free_dirac_basis(int(kappa), grid)
    app = v.app + np.diag(fb.energy)
    amm = v.amm - np.diag(fb.energy)
    return from_blocks(app, v.apm, amm, basis_note=f"dirac kappa={kappa} R={grid.R} N={grid.N}")


def build_dirac_full(pot: PotentialSpec, kappa: int, grid: RadialGrid) -> np.ndarray:
    """The unrotated 2N x 2N channel matrix [[I + V, D^T], [D, -I + V]]."""
    if kappa == 0:
        raise ValidationError("invalid relativistic quantum number kappa=0")
    _check_dirac_potential(pot)
    d = dirac_derivative_block(kappa, grid)
    vg = pot.evaluate(grid.nodes, grid)
    vf = pot.evaluate(grid.lower_points(kappa), grid)
    return np.block([[np.diag(1.0 + vg), d.T], [d, np.diag(-1.0 + vf)]])


def analytic_dirac_coulomb_level(nu: float, kappa: int, n_r: int) -> float:
    """Bound-state energy of -nu/r: [1 + nu^2/(n_r + sqrt(kappa^2 - nu^2))^2]^(-1/2)."""
    if not 0.0 <= nu < 1.0:
        raise ValidationError(f"need 0 <= nu < 1, got nu={nu}")
    if kappa == 0 or int(kappa) != kappa:
        raise ValidationError(f"invalid relativistic quantum number kappa={kappa}")
    if n_r < 0 or (kappa > 0 and n_r < 1):
        raise ValidationError(f"invalid quantum numbers kappa={kappa}, n_r={n_r}")
    gamma = math.sqrt(kappa**2 - nu**2)
    return 1.0 / math.sqrt(1.0 + nu**2 / (n_r + gamma) ** 2)
