import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jellium.errors import DomainError, NotAGroundStateError
from jellium.field import assemble_rho, charge, energy
from jellium.groundstate import IonArrangement, make_ground_state, structure_factor, verify_flat_density
from jellium.lattice import LatticeSpec

PI = np.pi


def brute_structure_factor(N, q, k):
    """Oracle: the defining sum, evaluated literally ion by ion."""
    xi = 2 * PI * np.asarray(k) / N
    total = 0j
    for n, qn in zip(LatticeSpec(N).ion_sites(), q):
        total += np.exp(1j * xi @ (n + qn))
    return total


def test_ground_state_values(ground, designer, params, modes):
    assert energy(ground, designer, params) <= 1e-12
    assert charge(ground) == pytest.approx(8.0)
    assert ground.psi[modes.zero] == pytest.approx(1.0)
    assert np.count_nonzero(ground.psi) == 1
    S = make_ground_state(PI / 2, IonArrangement.periodic(2, (0.3, 0, 0)), designer, params, modes)
    assert energy(S, designer, params) <= 1e-12
    assert S.psi[modes.zero] == pytest.approx(1j)


def test_ground_state_residual(designer, params, modes, rng):
    for _ in range(5):
        S = make_ground_state(rng.uniform(0, 2 * PI), IonArrangement.periodic(2, rng.uniform(0, 2, 3)), designer, params, modes)
        assert np.abs(assemble_rho(S, designer, params).spec).max() <= 1e-12 * designer.eZ


def test_sigma1_staircase_ground_states(sigma1, params, modes, rng):
    for _ in range(5):
        a = IonArrangement.staircase(2, rng.uniform(0, 2, 3), rng.uniform(0, 2, (2, 2)))
        rep = verify_flat_density(sigma1, a)
        assert rep.passed and rep.residual <= 1e-10
        S = make_ground_state(0.0, a, sigma1, params, modes)
        assert energy(S, sigma1, params) <= 1e-10


def test_designer_rejects_staircase(designer, params, modes):
    a = IonArrangement.staircase(2, (0, 0, 0), [[0.0, 0.5], [0.25, 0.0]])
    rep = verify_flat_density(designer, a)
    assert not rep.passed and rep.worst_k is not None
    with pytest.raises(NotAGroundStateError) as info:
        make_ground_state(0.0, a, designer, params, modes)
    assert info.value.residual == pytest.approx(rep.residual)


def test_constant_staircase_is_periodic(designer):
    a = IonArrangement.staircase(2, (0.1, 0.2, 0.3), np.full((2, 2), 0.4))
    assert verify_flat_density(designer, a).passed


def test_structure_factor_examples():
    p = IonArrangement.periodic(2)
    assert structure_factor(p, (0, 0, 0)) == 8
    assert structure_factor(p, (1, 0, 0)) == 0
    s = IonArrangement.staircase(2, (0, 0, 0), [[0.1, 0.7], [1.3, 0.2]])
    assert structure_factor(s, (0, 0, 1)) == 0
    assert f"{structure_factor(p, (1, 0, 0)).real:.17g}" == "0"


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 3),
    st.tuples(*[st.integers(-4, 4)] * 3),
    st.tuples(*[st.floats(0, 3)] * 3),
    st.lists(st.floats(0, 3), min_size=9, max_size=9),
)
def test_structure_factor_matches_direct_sum(N, k, r, tau):
    tau = np.array(tau[: N * N]).reshape(N, N)
    for a in (IonArrangement.periodic(N, r), IonArrangement.staircase(N, r, tau)):
        got = structure_factor(a, k)
        want = brute_structure_factor(N, a.displacements(), k)
        assert abs(got - want) <= 1e-11
        custom = IonArrangement.custom(N, a.displacements())
        assert abs(structure_factor(custom, k) - want) <= 1e-11


def test_arrangement_validation():
    with pytest.raises(DomainError):
        IonArrangement("zigzag", 2)
    with pytest.raises(DomainError):
        IonArrangement("staircase", 2)
    a = IonArrangement.custom(2, np.full((8, 3), 5.5))
    assert np.allclose(a.q, 1.5)
