import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jellium.density import check_wiener
from jellium.errors import InvalidExpansionPointError
from jellium.field import assemble_rho, discretization, psi_to_grid, grid_to_spec
from jellium.groundstate import IonArrangement, make_ground_state
from jellium.hessian import (
    Tangent,
    assemble_hessian,
    constrained_min_eig,
    coords_to_tangent,
    displaced_state,
    energy_second_difference,
    quadratic_form,
    real_basis,
    spectrum,
    tangent_to_coords,
    wiener_identity_check,
)
from jellium.lattice import LatticeSpec, build_mode_set

PI = np.pi


@pytest.fixture(scope="module")
def H(ground, designer, params):
    return assemble_hessian(ground, designer, params)


@pytest.fixture(scope="module")
def sigma1_setup(sigma1, params, modes):
    S = make_ground_state(0.0, IonArrangement.periodic(2), sigma1, params, modes)
    return S, assemble_hessian(S, sigma1, params)


def test_real_basis_orthonormal(modes):
    W = real_basis(modes)
    assert np.allclose(8 * W.conj().T @ W, np.eye(modes.n_modes), atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_coordinate_roundtrip(seed):
    ms = build_mode_set(2, 2)
    y = np.random.default_rng(seed).normal(size=2 * ms.n_modes + 48)
    assert np.allclose(tangent_to_coords(ms, coords_to_tangent(ms, y)), y, atol=1e-13)


def test_symmetric_and_psd(H):
    M = H.matrix
    assert np.abs(M - M.T).max() <= 1e-12 * H.norm
    assert np.linalg.eigvalsh(M)[0] >= -1e-10 * H.norm


def test_pp_block(H, params):
    assert np.array_equal(H.block("p", "p"), np.eye(24) / params.M)
    assert not H.block("psi2", "q").any() and not H.block("psi1", "p").any()


def test_psi2_block_single_mode(H, modes):
    i = modes.position((0, 1, 1))  # canonical mode: its column is the cosine
    y = np.zeros(modes.n_modes)
    y[i] = 1.0
    assert np.allclose(H.block("psi2", "psi2") @ y, 2 * PI**2 * y, atol=1e-12)


def test_three_routes(ground, designer, params, H, rng):
    for _ in range(8):
        y = rng.normal(size=H.dim)
        a = y @ H.matrix @ y
        b = 2 * quadratic_form(ground, y, designer, params)
        c = energy_second_difference(ground, y, designer, params)
        assert b == pytest.approx(a, rel=1e-10)
        assert c == pytest.approx(a, rel=1e-6)


def test_symmetry_tangents_are_null(ground, designer, params, modes):
    zeros = np.zeros((8, 3))
    Y = Tangent(0.7j * ground.psi, np.tile([0.2, -0.1, 0.4], (8, 1)), zeros)
    assert abs(quadratic_form(ground, Y, designer, params)) <= 1e-14
    pi = np.arange(24.0).reshape(8, 3)
    Y = Tangent(np.zeros(modes.n_modes), zeros, pi)
    assert quadratic_form(ground, Y, designer, params) == pytest.approx((pi**2).sum() / (2 * params.M))


def test_kernel_and_nu_designer(ground, params, H):
    sp = spectrum(H)
    assert sp.kernel_dim == 5
    nu = constrained_min_eig(H, ground, params)
    assert nu > 0
    assert nu == pytest.approx(sp.eigenvalues[5], rel=1e-9)


def test_kernel_sigma1(sigma1, params, sigma1_setup):
    S, H1 = sigma1_setup
    d = check_wiener(sigma1, 2).kernel_dim
    assert spectrum(H1).kernel_dim == 5 + d == 14
    assert abs(constrained_min_eig(H1, S, params)) <= 1e-9 * spectrum(H1).norm


def test_kernel_covariance(designer, params, modes, H):
    S = make_ground_state(1.3, IonArrangement.periodic(2, (0.4, 1.7, 0.2)), designer, params, modes)
    Hs = assemble_hessian(S, designer, params)
    assert spectrum(Hs).kernel_dim == 5
    assert np.allclose(spectrum(Hs).eigenvalues, spectrum(H).eigenvalues, atol=1e-12)
    y = np.random.default_rng(0).normal(size=Hs.dim)
    assert 2 * quadratic_form(S, y, designer, params) == pytest.approx(y @ Hs.matrix @ y, rel=1e-10)


def test_invalid_expansion_point(ground, designer, params):
    with pytest.raises(InvalidExpansionPointError):
        assemble_hessian(ground.replace(p=np.full((8, 3), 0.1)), designer, params)
    q = ground.q.copy()
    q[0, 0] = 0.3
    with pytest.raises(InvalidExpansionPointError):
        assemble_hessian(ground.replace(q=q), designer, params)


def test_wiener_identity(designer, sigma1):
    lhs, rhs = wiener_identity_check(designer, np.tile([1.0, 2.0, -0.5], (8, 1)))
    assert abs(lhs) <= 1e-20 and abs(rhs) <= 1e-20
    # a single Brillouin mode theta = (pi, 0, 0)
    sites = LatticeSpec(2).ion_sites()
    kappa = np.outer(np.cos(PI * sites[:, 0]), [0.3, -0.2, 0.5])
    lhs, rhs = wiener_identity_check(designer, kappa)
    assert lhs > 0 and lhs == pytest.approx(rhs, rel=1e-10)
    # for sigma_1, e_2 at theta = (pi, 0, 0) is a kernel vector of Sigma
    kappa = np.outer(np.cos(PI * sites[:, 0]), [0.0, 1.0, 0.0])
    lhs, _ = wiener_identity_check(sigma1, kappa)
    assert abs(lhs) <= 1e-20


def test_second_order_density(ground, designer, params, modes, rng):
    """rho(S + tY) - t rho1 = t^2 (sigma2 - e|phi|^2) + O(t^3)."""
    disc = discretization(modes, designer)
    sites = LatticeSpec(2).ion_sites()
    Y = coords_to_tangent(modes, rng.normal(size=2 * modes.n_modes + 48))
    xi, cs, idx = disc.sig_xi, disc.sigma_c, disc.sig_idx
    proj = xi @ Y.kappa.T  # (mode, n): xi . kappa(n)
    phase = np.exp(-1j * xi @ sites.T)
    rho1 = np.zeros(disc.shape, complex)
    rho1[idx] = -1j * cs * (phase * proj).sum(axis=1)
    rho1[disc.psi_idx] -= 2 * params.e * 0.5 * (Y.phi + np.conj(Y.phi[modes.neg]))
    rho2 = np.zeros(disc.shape, complex)
    rho2[idx] = -0.5 * cs * (phase * proj**2).sum(axis=1)
    rho2 -= params.e * grid_to_spec(np.abs(psi_to_grid(disc, Y.phi)) ** 2)
    errs = []
    for t in (1e-2, 1e-3):
        rho = assemble_rho(displaced_state(ground, Y, t), designer, params).spec
        errs.append(np.abs((rho - t * rho1) / t**2 - rho2).max())
    assert errs[1] <= errs[0] / 5
    assert errs[1] <= 1e-2 * np.abs(rho2).max()
