import numpy as np
import pytest
from pydantic import ValidationError

from pitsim.freefermion import build_hopping_matrix
from pitsim.hamiltonians import (
    build_aubry_andre_spin,
    build_xy_spin,
    dephased_state,
    distinct_eigenvalue_count,
    eigenvalue_clusters,
    energy_components,
    loschmidt_bar_dense,
    single_excitation_block,
    single_excitation_offset,
    spin_field_for_fermionic,
    temporal_fluctuations,
)
from pitsim.qcore import PauliString, PauliSum, StateVector, hermitian_eig, random_state
from pitsim.schemas import AubryAndreParams, XYParams


def test_two_site_hopping_terms():
    h = build_aubry_andre_spin(AubryAndreParams(n=2, J=4.0, lam=0.0, boundary="open"))
    assert sorted((t.letters, t.coefficient) for t in h.terms) == [("XX", 1.0), ("YY", 1.0)]


def test_periodic_ring_has_closing_bond():
    h = build_aubry_andre_spin(AubryAndreParams(n=3, J=2.0, lam=0.0, boundary="periodic"))
    assert len(h) == 6
    assert {"XIX", "YIY"} <= {t.letters for t in h.terms}


def test_periodic_two_sites_rejected():
    with pytest.raises(ValidationError):
        AubryAndreParams(n=2, boundary="periodic")


def test_field_terms_and_shift():
    p = AubryAndreParams(n=3, J=0.0, lam=1.0, boundary="open")
    matrix = build_aubry_andre_spin(p).to_matrix()
    assert np.allclose(matrix, np.diag(np.diag(matrix)))
    cosines = p.site_fields()
    # all-down state: every Z is -1, so each site contributes lambda/4 * cos * (2 - 1)
    assert matrix[-1, -1].real == pytest.approx(np.sum(cosines) / 4.0)
    # all-up state: Z = +1 everywhere
    assert matrix[0, 0].real == pytest.approx(3.0 * np.sum(cosines) / 4.0)


def test_xy_single_bond():
    h = build_xy_spin(XYParams(n=2, ax=(1.0,), ay=(0.0,), az=(0.0, 0.0)))
    assert [t.letters for t in h.terms] == ["XX"]


def test_xy_lengths_checked():
    with pytest.raises(ValidationError):
        XYParams(n=3, ax=(1.0,), ay=(1.0, 1.0), az=(0.0, 0.0, 0.0))


@pytest.mark.parametrize("boundary", ["open", "periodic"])
def test_single_excitation_block_matches_hopping_matrix(boundary):
    fermionic = AubryAndreParams(n=5, J=2.0, lam=1.3, boundary=boundary)
    spin = fermionic.with_lambda(spin_field_for_fermionic(fermionic.lam))
    block = single_excitation_block(build_aubry_andre_spin(spin), spin.n)
    expected = build_hopping_matrix(fermionic).matrix + single_excitation_offset(spin) * np.eye(5)
    np.testing.assert_allclose(block, expected, atol=1e-12)


def test_dephased_state_of_plus_under_z(z_hamiltonian, plus_state):
    rho = dephased_state(z_hamiltonian, plus_state)
    np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-14)


def test_dephased_state_merges_degenerate_levels():
    h = np.diag([1.0, 1.0, -1.0, 2.0])
    psi = StateVector.from_amplitudes([1.0, 1.0, 0.0, 0.0])
    rho = dephased_state(h, psi)
    np.testing.assert_allclose(rho.matrix, psi.to_density_matrix().matrix, atol=1e-14)
    assert loschmidt_bar_dense(h, psi) == pytest.approx(1.0)


def test_distinct_eigenvalue_count_and_period():
    h = PauliSum.from_strings(1, [(1.0, "Z"), (1.0, "I")])
    count, tau = distinct_eigenvalue_count(h)
    assert count == 2
    assert tau == pytest.approx(np.pi)


def test_incommensurate_spectrum_has_no_period():
    count, tau = distinct_eigenvalue_count(np.diag([0.0, 1.0, np.sqrt(2.0)]))
    assert count == 3
    assert tau is None


def test_eigenvalue_clusters_by_gap():
    clusters = eigenvalue_clusters(np.array([0.3, 1.0, 0.3 + 1e-13, -2.0]), tol=1e-9)
    assert [list(c) for c in clusters] == [[3], [0, 2], [1]]


def test_energy_components_weights_sum_to_one(rng):
    spectrum = hermitian_eig(PauliSum.from_strings(2, [(1.0, "ZI"), (1.0, "IZ")]))
    psi = random_state(2, rng)
    components = energy_components(spectrum, psi.amplitudes)
    assert components.count == 3
    assert np.sum(components.weights) == pytest.approx(1.0)


def test_fluctuations_of_x_under_z(plus_state):
    spectrum = hermitian_eig(np.diag([1.0, -1.0]))
    sigma2, delta2, Lbar = temporal_fluctuations(spectrum, plus_state, PauliString("X").to_matrix())
    assert sigma2 == pytest.approx(0.5)
    assert delta2 == pytest.approx(4.0)
    assert Lbar == pytest.approx(0.5)
