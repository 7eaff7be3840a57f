"""Tests for the collective-spin block machinery.

The heavyweight oracle lives in fullspace.py: an explicit isotypic
decomposition of the full 2^n-dimensional tensor power, against which the
block probabilities and block states are checked with no shared code.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from fullspace import (
    assemble_from_blocks,
    exact_block_weight,
    isotypic_isometries,
    tensor_power,
)
from qlan.spin_blocks import (
    LocalParams,
    ModelParams,
    block_pmf_window,
    block_probability,
    block_probability_factored,
    block_state,
    classical_coordinate,
    local_qubit_state,
    multiplicity,
    rotation_unitary,
    sample_block_index,
    spin_matrices,
    typical_set,
    valid_j_values,
)


def test_model_params_validation():
    ModelParams(0.75, 10)
    with pytest.raises(ValueError):
        ModelParams(0.5, 10)
    with pytest.raises(ValueError):
        ModelParams(1.0, 10)
    with pytest.raises(ValueError):
        ModelParams(0.3, 10)


def test_mu_u_admissible_window():
    params = ModelParams(0.75, 100)
    assert params.mu_u(LocalParams(0.0, 0.0, 1.0)) == pytest.approx(0.85)
    # u_z large enough to push mu_u to 1 must raise
    with pytest.raises(ValueError, match="admissible"):
        params.mu_u(LocalParams(0.0, 0.0, 2.6))
    with pytest.raises(ValueError, match="admissible"):
        params.mu_u(LocalParams(0.0, 0.0, -2.6))


def test_multiplicity_small_tables():
    assert [multiplicity(2, j) for j in (1.0, 0.0)] == [1, 1]
    assert [multiplicity(3, j) for j in (1.5, 0.5)] == [1, 2]
    assert [multiplicity(4, j) for j in (2.0, 1.0, 0.0)] == [1, 3, 2]
    assert [multiplicity(6, j) for j in (3.0, 2.0, 1.0, 0.0)] == [1, 5, 9, 5]


def test_multiplicity_dimension_sum():
    for n in (2, 3, 5, 8, 12, 17):
        js = valid_j_values(n)
        total = sum(int(round(2 * j + 1)) * multiplicity(n, j) for j in js)
        assert total == 2**n


def test_block_probability_two_qubits():
    # diag(3/4, 1/4)^(x2): singlet weight 3/16, triplet weight 13/16
    params = ModelParams(0.75, 2)
    u0 = LocalParams.zero()
    assert block_probability(params, u0, 1.0) == pytest.approx(13 / 16, abs=1e-14)
    assert block_probability(params, u0, 0.0) == pytest.approx(3 / 16, abs=1e-14)


def test_block_probability_exact_rational_oracle():
    """Log-domain route vs exact Fraction arithmetic at n = 30."""
    params = ModelParams(0.75, 30)
    u0 = LocalParams.zero()
    for j in (15.0, 9.0, 4.0, 1.0, 0.0):
        want = exact_block_weight(30, j, Fraction(3, 4))
        got = block_probability(params, u0, j)
        assert got == pytest.approx(float(want), rel=1e-12)


def test_block_probability_shifted_parameter():
    """With u != 0 the weights follow the same closed form at mu_u."""
    params = ModelParams(0.6, 50)
    u = LocalParams(0.4, -0.3, 0.7)
    mu_u = params.mu_u(u)
    for j in (25.0, 10.0, 3.0):
        want = exact_block_weight(50, j, mu_u)
        assert block_probability(params, u, j) == pytest.approx(want, rel=1e-11)


def test_block_probability_sums_to_one():
    for n, mu in ((6, 0.75), (31, 0.65), (200, 0.9)):
        params = ModelParams(mu, n)
        u = LocalParams(0.5, 0.2, -0.4)
        total = sum(block_probability(params, u, j) for j in valid_j_values(n))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_block_probability_factored_consistency():
    params = ModelParams(0.8, 64)
    u = LocalParams(0.1, 0.0, 0.5)
    for j in (32.0, 20.0, 19.0, 5.0):
        b, k = block_probability_factored(params, u, j)
        assert b * k == pytest.approx(block_probability(params, u, j), rel=1e-9)
        assert k > 0.0


def test_block_probability_factored_k_tends_to_one():
    """The correction factor K -> 1 at the pmf center as n grows."""
    devs = []
    for n in (100, 1000, 10000):
        params = ModelParams(0.75, n)
        j = round(params.j_n)
        _, k = block_probability_factored(params, LocalParams.zero(), j)
        devs.append(abs(k - 1.0))
    assert devs[0] < 0.05
    assert devs[2] < devs[1] < devs[0]


def test_classical_coordinate_center_and_slope():
    params = ModelParams(0.75, 100)
    assert classical_coordinate(params, params.j_n) == pytest.approx(0.0)
    g1 = classical_coordinate(params, 30.0)
    g2 = classical_coordinate(params, 31.0)
    assert g2 - g1 == pytest.approx(0.1, abs=1e-14)  # 1/sqrt(n)


def test_typical_set_pinned_example():
    params = ModelParams(0.75, 100)
    lo, hi = typical_set(params, 0.1)
    assert (lo, hi) == (10.0, 40.0)


def test_typical_set_parity_and_range():
    # odd n: bounds must be valid half-integers of the right parity
    params = ModelParams(0.75, 101)
    lo, hi = typical_set(params, 0.2)
    js = valid_j_values(101)
    assert lo in js and hi in js
    assert lo <= params.j_n <= hi
    with pytest.raises(ValueError):
        typical_set(params, 0.25)
    with pytest.raises(ValueError):
        typical_set(params, 0.0)


def test_pmf_window_mass():
    params = ModelParams(0.75, 400)
    u = LocalParams(1.0, 1.0, 1.0)
    js, probs, missing = block_pmf_window(params, u)
    assert missing < 1e-12
    assert probs.sum() == pytest.approx(1.0, abs=1e-11)
    # window sits inside the valid range
    assert js.min() >= valid_j_values(400).min()
    assert js.max() <= 200.0


def test_sample_block_index_goodness_of_fit():
    params = ModelParams(0.7, 40)
    u = LocalParams(0.3, -0.2, 0.4)
    rng = np.random.default_rng(5)
    draws = sample_block_index(params, u, rng, size=20000)
    js, probs, _ = block_pmf_window(params, u)
    counts = np.array([(draws == j).sum() for j in js])
    keep = probs * 20000 >= 5.0  # chi-square validity
    chi = stats.chisquare(
        counts[keep], f_exp=probs[keep] / probs[keep].sum() * counts[keep].sum()
    )
    assert chi.pvalue > 1e-3
    assert counts.sum() == 20000


def test_spin_matrices_algebra():
    for j in (0.5, 1.0, 1.5, 3.0, 7.5):
        jx, jy, jz = spin_matrices(j)
        assert np.allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)
        casimir = jx @ jx + jy @ jy + jz @ jz
        assert np.allclose(casimir, j * (j + 1) * np.eye(int(2 * j + 1)), atol=1e-12)


def test_spin_matrices_ladder_elements():
    # J_+ lowers the excitation index k with element sqrt(k (2j+1-k))
    jx, jy, _ = spin_matrices(1.0)
    jp = jx + 1j * jy
    assert jp[0, 1] == pytest.approx(math.sqrt(1 * 2))
    assert jp[1, 2] == pytest.approx(math.sqrt(2 * 1))
    assert jp[1, 0] == 0.0


def test_rotation_unitary_half_pi():
    r = rotation_unitary(0.5, (math.pi / 2, 0.0))
    assert np.allclose(r, 1j * np.array([[0, 1], [1, 0]]), atol=1e-12)


def test_rotation_unitary_is_unitary():
    for j in (0.5, 2.0, 11.0):
        r = rotation_unitary(j, (0.37, -1.2))
        d = int(2 * j + 1)
        assert np.allclose(r @ r.conj().T, np.eye(d), atol=1e-12)


def test_block_state_two_qubit_diagonal():
    params = ModelParams(0.75, 2)
    rho = block_state(params, LocalParams.zero(), 1.0)
    assert np.allclose(np.diag(rho), [9 / 13, 3 / 13, 1 / 13], atol=1e-14)
    assert np.allclose(rho, np.diag(np.diag(rho)))


def test_block_state_rotation_covariance():
    params = ModelParams(0.8, 36)
    u = LocalParams(0.9, -0.4, 0.0)
    j = 14.0
    rho = block_state(params, u, j)
    base = block_state(params, LocalParams(0.0, 0.0, 0.0), j)
    r = rotation_unitary(j, (u.ux / 6.0, u.uy / 6.0))  # sqrt(36) = 6
    assert np.allclose(rho, r @ base @ r.conj().T, atol=1e-12)


def test_block_state_corner_truncation():
    params = ModelParams(0.75, 60)
    j = 25.0
    full = block_state(params, LocalParams.zero(), j)
    cut = block_state(params, LocalParams.zero(), j, dim=12)
    expect = np.diag(full)[:12].real.copy()
    expect /= expect.sum()
    assert np.allclose(np.diag(cut).real, expect, atol=1e-13)
    with pytest.raises(ValueError):
        block_state(params, LocalParams.zero(), j, dim=52)


def test_block_state_trace_and_positivity():
    params = ModelParams(0.66, 25)
    u = LocalParams(1.2, 0.8, -0.5)
    for j in (12.5, 5.5):
        rho = block_state(params, u, j)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        w = np.linalg.eigvalsh(rho)
        assert w.min() > -1e-13


def test_local_qubit_state_eigenvalues():
    rho = local_qubit_state(0.75, (0.3, -0.2, 0.04))
    w = np.linalg.eigvalsh(rho)
    assert np.allclose(sorted(w), [1 - 0.79, 0.79], atol=1e-12)
    with pytest.raises(ValueError):
        local_qubit_state(0.9, (0.0, 0.0, 0.2))


# ---------------------------------------------------------------------------
# full-space oracle: block decomposition vs explicit 2^n tensor power
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n,mu,u", [
    (2, 0.75, (0.0, 0.0, 0.0)),
    (3, 0.8, (0.5, -0.3, 0.2)),
    (5, 0.66, (0.9, 0.4, -0.25)),
    (6, 0.75, (1.0, 1.0, 0.3)),
    (7, 0.85, (-0.4, 0.7, 0.1)),
    (8, 0.75, (0.8, -0.8, 0.5)),
])
def test_full_space_reconstruction(n, mu, u):
    params = ModelParams(mu, n)
    ul = LocalParams(*u)
    v = np.asarray(u) / math.sqrt(n)
    target = tensor_power(local_qubit_state(mu, v), n)
    iso = isotypic_isometries(n)
    weights = {j: block_probability(params, ul, j) for j in iso}
    blocks = {j: block_state(params, ul, j) for j in iso}
    rebuilt = assemble_from_blocks(n, weights, blocks, iso)
    assert np.max(np.abs(rebuilt - target)) < 1e-8


def test_full_space_block_extraction():
    """Project the tensor power into one block and compare both factors."""
    n, mu = 4, 0.7
    params = ModelParams(mu, n)
    u = LocalParams(0.4, 0.1, 0.3)
    target = tensor_power(local_qubit_state(mu, np.asarray(u.as_array()) / 2.0), n)
    iso = isotypic_isometries(n)
    v = iso[1.0]  # 3-dimensional block with multiplicity 3
    m = v.conj().T @ target @ v
    m = m.reshape(3, 3, 3, 3)  # (k, a, l, b)
    block = np.einsum("kala->kl", m)
    p_j = block_probability(params, u, 1.0)
    assert np.trace(block).real == pytest.approx(p_j, abs=1e-12)
    assert np.allclose(block / p_j, block_state(params, u, 1.0), atol=1e-10)
    # multiplicity factor must be exactly I / n_j
    for k in range(3):
        for l in range(3):
            sub = m[k, :, l, :]
            assert np.allclose(
                sub, np.eye(3) * block[k, l] / 3.0, atol=1e-10
            )
