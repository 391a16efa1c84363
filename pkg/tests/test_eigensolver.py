import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmmscatter.eigensolver import (
    PmlParams,
    assemble_vertical_operator,
    cheb_diff,
    cheb_grid,
    solve_modes,
    sqrt_branch,
)
from nmmscatter.geometry import Region

K = 2 * math.pi


def dirichlet_modes(n, splits=(0.0, 2.5, 3.5), sigma=0.0):
    pml = PmlParams(2.5, 1.0, sigma)
    reg = Region(0, -math.inf, math.inf, 0.0)
    grid = cheb_grid([n] * (len(splits) - 1), splits)
    op = assemble_vertical_operator(reg, grid, pml, K, top_bc="dirichlet")
    return solve_modes(op)


def test_cheb_diff_exact_on_polynomials():
    x, D = cheb_diff(9)
    assert np.allclose(D @ x**5, 5 * x**4, atol=1e-12)
    assert np.allclose(D @ np.ones_like(x), 0, atol=1e-12)


def test_grid_validation():
    with pytest.raises(ValueError):
        cheb_grid([5], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        cheb_grid([2], [0.0, 1.0])
    with pytest.raises(ValueError):
        cheb_grid([5], [1.0, 0.0])


def test_grid_shares_endpoints():
    g = cheb_grid([5, 7], [0.0, 1.0, 3.0])
    assert len(g.nodes) == 11
    assert g.nodes[0] == 0.0 and g.nodes[4] == 1.0 and g.nodes[-1] == 3.0
    assert len(g.interior) == 8


def test_interpolation_reproduces_polynomials():
    g = cheb_grid([8, 8], [0.0, 1.0, 2.0])
    f = g.nodes**3 - g.nodes
    x = np.array([0.13, 0.99, 1.5, 2.0])
    assert np.allclose(g.interp_matrix(x) @ f, x**3 - x, atol=1e-12)


def test_dirichlet_spectrum_single_domain():
    ms = dirichlet_modes(64, (0.0, 3.5))
    exact = K**2 - (np.arange(1, 21) * math.pi / 3.5) ** 2
    # j = 7 has mu = 0, so errors are taken relative to max(|mu|, k^2)
    err = np.abs(ms.mu[:20] - exact) / np.maximum(np.abs(exact), K**2)
    assert np.max(err) < 1e-8


def test_dirichlet_spectrum_two_domains_spectral_convergence():
    exact = K**2 - (np.arange(1, 11) * math.pi / 3.5) ** 2
    errs = [np.max(np.abs(dirichlet_modes(n).mu[:10] - exact)) for n in (16, 24, 32)]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-8 * K**2


def test_modes_are_normalised_and_sorted():
    ms = dirichlet_modes(24)
    peak = np.max(np.abs(ms.phi), axis=0)
    assert np.allclose(peak, 1.0)
    assert np.all(np.diff(ms.mu.real) <= 1e-9)


def test_pml_modes_are_passive():
    ms = dirichlet_modes(24, sigma=70.0)
    assert np.all(ms.mu.imag >= -1e-8 * np.max(np.abs(ms.mu)))
    assert np.all(ms.root.imag >= 0)


def test_robin_needs_beta():
    pml = PmlParams(2.5, 1.0, 70.0)
    reg = Region(0, -math.inf, math.inf, 0.0)
    grid = cheb_grid([10, 10], [0.0, 2.5, 3.5])
    with pytest.raises(ValueError):
        assemble_vertical_operator(reg, grid, pml, K, top_bc="robin")
    with pytest.raises(ValueError):
        assemble_vertical_operator(reg, cheb_grid([10], [0.0, 3.5]), pml, K, "dirichlet")


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_sqrt_branch(re, im):
    mu = complex(re, im)
    r = sqrt_branch(mu)
    assert r.imag >= 0
    assert abs(r * r - mu) <= 1e-12 * max(1.0, abs(mu))


def test_sqrt_branch_real_axis():
    assert sqrt_branch(4.0) == 2.0
    assert sqrt_branch(-4.0) == 2j


def test_pml_profile():
    p = PmlParams(2.5, 1.0, 70.0)
    assert p.top == 3.5
    assert p.stretch(2.0) == 1.0
    assert abs(p.stretched(3.5) - (3.5 + 35j)) < 1e-12
    with pytest.raises(ValueError):
        PmlParams(2.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        PmlParams(2.5, 1.0, -1.0)
