import numpy as np
import pytest
from hypothesis import given, strategies as st

from jellium.density import make_char_cube_power
from jellium.errors import DomainError
from jellium.groundstate import IonArrangement
from jellium.io import (
    fmt,
    load_arrangement,
    load_density,
    load_state,
    save_arrangement,
    save_density,
    save_state,
)
from jellium.stability import perturbed_ground_state


def test_density_roundtrip(tmp_path, designer, sigma1):
    save_density(tmp_path / "d.json", designer)
    back = load_density(tmp_path / "d.json")
    assert np.array_equal(back.coeffs, designer.coeffs)
    assert (back.beta, back.seed, back.eZ) == (designer.beta, designer.seed, designer.eZ)
    save_density(tmp_path / "s.json", make_char_cube_power(2, 1.0, 3.0, 2))
    s = load_density(tmp_path / "s.json")
    assert (s.power, s.Z, s.N) == (2, 3.0, 2)


def test_state_roundtrip(tmp_path, ground, designer, params):
    X = perturbed_ground_state(ground, designer, params, 1e-2, seed=3)
    save_state(tmp_path / "x.json", X)
    Y = load_state(tmp_path / "x.json")
    assert np.array_equal(X.psi, Y.psi) and np.array_equal(X.q, Y.q) and np.array_equal(X.p, Y.p)
    save_state(tmp_path / "y.json", Y)
    assert (tmp_path / "x.json").read_bytes() == (tmp_path / "y.json").read_bytes()


@pytest.mark.parametrize("a", [
    IonArrangement.periodic(2, (0.1, 0.2, 0.3)),
    IonArrangement.staircase(2, (0.1, 0.2, 0.3), [[0.5, 1.5], [0.25, 1 / 3]]),
    IonArrangement.custom(2, np.linspace(0, 1.9, 24)),
])
def test_arrangement_roundtrip(tmp_path, a):
    save_arrangement(tmp_path / "a.json", a)
    b = load_arrangement(tmp_path / "a.json")
    assert b.kind == a.kind
    assert np.array_equal(b.displacements(), a.displacements())


def test_wrong_file_kind(tmp_path, designer):
    save_density(tmp_path / "d.json", designer)
    with pytest.raises(DomainError):
        load_state(tmp_path / "d.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(DomainError):
        load_density(tmp_path / "bad.json")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_roundtrips(x):
    assert float(fmt(x)) == x
    assert fmt(-0.0) == "0"
