import numpy as np
import pytest

from gapspec import ConvergenceError, Status, ValidationError, from_blocks, gap_profile, solve_level
from gapspec import continuation as cont
from gapspec import discretization as disc
from gapspec.discretization import PotentialSpec, RadialGrid

from conftest import random_gapped

TAUS = tuple(np.round(np.linspace(0.0, 1.0, 11), 12))


def _zero_like(op):
    return from_blocks(np.zeros_like(op.app), np.zeros_like(op.apm), np.zeros_like(op.amm))


def test_config_validation(two_by_two):
    z = _zero_like(two_by_two)
    with pytest.raises(ValidationError, match="start at 0"):
        cont.SweepConfig((0.1, 0.2), (("plus", 1),), z, 0.0)
    with pytest.raises(ValidationError, match="increasing"):
        cont.SweepConfig((0.0, 0.2, 0.2), (("plus", 1),), z, 0.0)
    with pytest.raises(ValidationError):
        cont.SweepConfig((0.0, 1.0), (("up", 1),), z, 0.0)
    with pytest.raises(ValidationError):
        cont.SweepConfig((0.0, 1.0), (), z, 0.0)
    with pytest.raises(ValidationError):
        cont.SweepConfig((0.0, 1.0), (("plus", 1),), z, -1.0)


def test_perturbation_must_share_the_splitting(two_by_two):
    other = from_blocks(np.zeros((2, 2)), np.zeros((2, 1)), [[0.0]])
    cfg = cont.SweepConfig((0.0, 1.0), (("plus", 1),), other, 0.0)
    with pytest.raises(ValidationError, match="splitting"):
        cont.sweep(two_by_two, cfg, gap_profile(two_by_two))


def test_null_perturbation_gives_constant_branches(rng):
    op = random_gapped(rng, 4, 3)
    ks = (("plus", 1), ("plus", 2), ("minus", 1))
    cfg = cont.SweepConfig(TAUS, ks, _zero_like(op), 0.0)
    prof = cont.uniform_profile(op, cfg.perturbation, TAUS, np.inf, -np.inf)
    branches = cont.sweep(op, cfg, prof, tol=1e-10)
    for br in branches:
        assert len(br.points) == len(TAUS)
        np.testing.assert_array_equal(br.values, br.values[0])
    rep = cont.verify_uniform_bounds(branches, prof, v_sup=0.0, tol=1e-10)
    assert rep.ok and rep.hypotheses_plus and rep.hypotheses_minus
    assert all(rep.dichotomy.values())


def test_branch_starts_at_unperturbed_level(rng):
    op = random_gapped(rng, 4, 3)
    v = random_gapped(rng, 4, 3, shift=0.0) * 0.1
    cfg = cont.SweepConfig(TAUS, (("plus", 1), ("minus", 2)), v, float(np.linalg.norm(v.assembled(), 2)))
    prof = cont.uniform_profile(op, v, TAUS, np.inf, -np.inf)
    p0 = gap_profile(op)
    for br in cont.sweep(op, cfg, prof, tol=1e-12):
        ref = solve_level(op, p0, br.k, br.side, 1e-12)
        assert br.points[0][1].value == pytest.approx(ref.value, abs=1e-12)


def test_lipschitz_bound_on_random_family(rng):
    op = random_gapped(rng, 5, 5)
    v = random_gapped(rng, 5, 5, shift=0.0)
    v_sup = float(np.linalg.norm(v.assembled(), 2))
    cfg = cont.SweepConfig(TAUS, tuple(("plus", k) for k in range(1, 4)), v, v_sup)
    prof = cont.uniform_profile(op, v, TAUS, np.inf, -np.inf)
    branches = cont.sweep(op, cfg, prof, tol=1e-10)
    assert all(cont.lipschitz_violations(br, v_sup, 1e-10) == [] for br in branches)


def test_lipschitz_detects_a_jump():
    from gapspec.solver import LevelResult

    br = cont.Branch("plus", 1)
    br.points = [(0.0, LevelResult("plus", 1, 0.5, Status.INTERIOR, 0, 1)),
                 (0.1, LevelResult("plus", 1, 0.9, Status.INTERIOR, 0, 1))]
    assert cont.lipschitz_violations(br, 1.0, 1e-10) == [(0.0, 0.1)]


def test_status_helpers():
    from gapspec.solver import LevelResult

    def branch(statuses):
        br = cont.Branch("plus", 1)
        br.points = [(float(i), LevelResult("plus", 1, 0.0, s, 0, 1)) for i, s in enumerate(statuses)]
        return br

    A, I, B = Status.CLAMPED_AT_A, Status.INTERIOR, Status.CLAMPED_AT_B
    assert cont.dichotomy_holds(branch([A, I, I, B]))
    assert not cont.dichotomy_holds(branch([I, I, A]))
    assert cont.status_sequence_monotone(branch([A, I, B]))
    assert not cont.status_sequence_monotone(branch([I, B, I]))


def test_solver_errors_carry_tau(rng, monkeypatch):
    op = random_gapped(rng, 3, 3)
    cfg = cont.SweepConfig((0.0, 0.5), (("plus", 1),), _zero_like(op), 0.0)

    def boom(*args, **kwargs):
        raise ConvergenceError("no luck", bracket=(0.0, 1.0))

    monkeypatch.setattr(cont, "solve_level", boom)
    with pytest.raises(ConvergenceError) as info:
        cont.sweep(op, cfg, gap_profile(op))
    assert info.value.tau == 0.0 and info.value.bracket == (0.0, 1.0)


def test_bounded_negative_potential_small_tau():
    grid = RadialGrid(30.0, 300)
    op0 = disc.build_dirac_radial(PotentialSpec.constant(0.0), -1, grid)
    pot = PotentialSpec.table(-1.0 / (1.0 + grid.nodes))
    v = disc.compress_dirac_potential(pot, -1, grid)
    taus = (0.0, 0.05, 0.1, 0.15, 0.2)
    cfg = cont.SweepConfig(taus, (("plus", 1), ("minus", 1)), v, pot.sup_norm(grid))
    prof = cont.uniform_profile(op0, v, taus, 1.0, -1.0)
    branches = cont.sweep(op0, cfg, prof)
    rep = cont.verify_uniform_bounds(branches, prof, v_sup=cfg.v_sup)
    assert rep.ok
    for br in branches:
        assert all(s in (Status.INTERIOR, Status.CLAMPED_AT_B) for s in br.statuses)


def test_pauli_sweep_through_threshold():
    # A_nu = A_0 + nu * diag(-1/r, 1/r): the plus ground level leaves through a- near nu = 2
    grid = RadialGrid(80.0, 1000)
    op0 = disc.build_pauli_channel(0.0, 0, grid)
    v = disc.pauli_perturbation(PotentialSpec.coulomb(1.0), 0, grid)
    taus = (0.0, 0.5, 1.0, 1.5, 1.8, 2.0, 2.2, 2.4)
    cfg = cont.SweepConfig(taus, (("plus", 1),), v, 1.0 / grid.h)
    prof = cont.uniform_profile(op0, v, taus, 1.0, -1.0)
    (br,) = cont.sweep(op0, cfg, prof)
    statuses = br.statuses
    assert statuses[taus.index(2.0)] == Status.INTERIOR
    assert statuses[taus.index(2.2)] == Status.CLAMPED_AT_A
    rep = cont.verify_uniform_bounds([br], prof, v_sup=cfg.v_sup)
    assert rep.exits_plus == [(2.0, 2.2)]
    assert not rep.a1_minus_ok and not rep.hypotheses_plus
    # the hypothesis already fails at or before the point where the branch exits
    assert rep.a1_minus_failures and rep.a1_minus_failures[0][1] <= 2.2
    assert not rep.dichotomy[("plus", 1)]
    assert not rep.ok
