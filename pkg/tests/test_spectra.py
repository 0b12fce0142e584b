"""Resolution-doubled eigensolves, trusted filtering, and sector counting."""

import math

import numpy as np
import pytest

from weyl_lab.discretization import assemble_operator, symmetrize
from weyl_lab.errors import ConfigError, TrustedRadiusError
from weyl_lab.geometry import SectorSpec
from weyl_lab.perturbation import PerturbationSpec, sample_potential
from weyl_lab.spectra import (
    MATCH_TOL_REL,
    RawSpectrum,
    count_in_sector,
    eigensolve,
    filter_trusted,
    trusted_window,
)
from weyl_lab.symbols import SymbolModel

TWO_PI = 2.0 * math.pi
LAPLACIAN = SymbolModel.from_json({"m": 2, "coeffs": [{"alpha": 2, "cos": [1.0]}]})
A05 = SymbolModel.from_json(
    {"m": 2, "coeffs": [{"alpha": 2, "cos": [1.0, 0.0], "cos_imag": [0.0, 0.5]}]}
)
SPEC = PerturbationSpec(rho=2.0, s=0.75, eps=0.1, beta=0.0, cutoff_J=17)


def laplacian_pair(K):
    return (
        eigensolve(assemble_operator(LAPLACIAN, None, K)),
        eigensolve(assemble_operator(LAPLACIAN, None, 2 * K)),
    )


def test_trusted_window_closed_form():
    assert trusted_window(16, 2) == 16.0
    assert trusted_window(256, 2) == 4096.0
    assert trusted_window(8, 4) == 16.0


def test_laplacian_eigensolve_sorted_exact():
    raw = eigensolve(assemble_operator(LAPLACIAN, None, 16))
    expected = np.sort(np.array([float(k**2) for k in range(-16, 17)]))
    assert raw.eigenvalues.shape == (33,)
    assert np.allclose(raw.eigenvalues.real, expected, atol=1e-10)
    assert np.allclose(raw.eigenvalues.imag, 0.0, atol=1e-10)
    assert np.all(np.diff(raw.eigenvalues.real) >= -1e-12)
    assert raw.max_residual < 1e-12


def test_eigensolve_deterministic():
    a = eigensolve(assemble_operator(LAPLACIAN, None, 12))
    b = eigensolve(assemble_operator(LAPLACIAN, None, 12))
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.residuals, b.residuals)


def test_filter_trusted_laplacian_window():
    low, high = laplacian_pair(16)
    result = filter_trusted(low, high)
    # certified radius (16/4)^2 = 16 keeps 0, 1, 1, 4, 4, 9, 9, 16, 16
    assert result.window == 16.0
    assert result.radius_max == 16.0
    assert int(np.count_nonzero(result.trusted_mask)) == 9
    assert np.allclose(np.sort(result.trusted.real),
                       [0, 1, 1, 4, 4, 9, 9, 16, 16], atol=1e-10)
    # every K eigenvalue finds an exact partner at 2K, so nothing inside the
    # certified radius is left untrusted
    assert result.untrusted_within(16.0) == 0
    assert result.contention == 0
    partners = result.partners[result.trusted_mask]
    assert np.all(np.abs(partners - result.trusted)
                  <= MATCH_TOL_REL * (1.0 + np.abs(result.trusted)))


def test_window_override_extends_trust():
    low, high = laplacian_pair(16)
    wide = filter_trusted(low, high, window=300.0)
    assert int(np.count_nonzero(wide.trusted_mask)) == 33
    assert wide.window == 300.0


def test_radius_beyond_window_rejected():
    low, high = laplacian_pair(16)
    with pytest.raises(TrustedRadiusError):
        filter_trusted(low, high, radius_max=20.0)


def test_radius_restriction_is_monotone():
    pot = sample_potential(SPEC, 41)
    low = eigensolve(symmetrize(assemble_operator(A05, pot, 24)))
    high = eigensolve(symmetrize(assemble_operator(A05, pot, 48)))
    full = filter_trusted(low, high)
    half = filter_trusted(low, high, radius_max=full.window / 2.0)
    assert np.all(half.trusted_mask <= full.trusted_mask)
    assert np.all(np.abs(half.trusted) <= full.window / 2.0)


def test_cross_validation_on_perturbed_operator():
    pot = sample_potential(SPEC, 41)
    low = eigensolve(symmetrize(assemble_operator(A05, pot, 24)))
    high = eigensolve(symmetrize(assemble_operator(A05, pot, 48)))
    result = filter_trusted(low, high)
    trusted = result.trusted
    assert trusted.size > 0
    assert np.all(np.abs(trusted) <= result.window * (1 + 1e-12))
    partners = result.partners[result.trusted_mask]
    assert np.all(np.abs(partners - trusted) <= MATCH_TOL_REL * (1.0 + np.abs(trusted)))


def test_incompatible_resolutions_rejected():
    low, _ = laplacian_pair(16)
    with pytest.raises(ConfigError):
        filter_trusted(low, low)  # not a doubling


def test_different_operators_rejected():
    low = eigensolve(assemble_operator(A05, None, 16))
    high = eigensolve(assemble_operator(LAPLACIAN, None, 32))
    with pytest.raises(ConfigError):
        filter_trusted(low, high)
    pot = sample_potential(SPEC, 1)
    high2 = eigensolve(assemble_operator(A05, pot, 32))
    with pytest.raises(ConfigError):
        filter_trusted(low, high2)  # potential entropy differs


def test_count_full_annulus_laplacian():
    low, high = laplacian_pair(16)
    result = filter_trusted(low, high)
    sector = SectorSpec(0.0, TWO_PI, 0.5, 9.0)
    out = count_in_sector(result, sector)
    # closed outer arc keeps both eigenvalues at 9: {1, 1, 4, 4, 9, 9}
    assert out.count == 6
    assert int(out) == 6
    assert out.boundary_grazing
    assert out.count == int(np.count_nonzero(out.member_mask))
    open_out = count_in_sector(result, sector, outer_open=True)
    assert open_out.count == 4
    assert open_out.boundary_grazing  # the grazing pair sits on the arc either way


def test_count_away_from_boundary_not_grazing():
    low, high = laplacian_pair(16)
    result = filter_trusted(low, high)
    out = count_in_sector(result, SectorSpec(0.0, TWO_PI, 0.5, 10.5))
    assert out.count == 6
    assert not out.boundary_grazing
    assert out.untrusted_in_sector == 0


def test_sector_beyond_certified_radius_refused():
    low, high = laplacian_pair(16)
    result = filter_trusted(low, high)
    with pytest.raises(TrustedRadiusError):
        count_in_sector(result, SectorSpec(0.0, TWO_PI, 1.0, 17.0))


def test_contention_and_untrusted_reporting():
    # two coincident low-resolution eigenvalues compete for a single partner:
    # one wins, the other is contention, not a silent merge
    low = RawSpectrum(eigenvalues=np.array([0.5 + 0j, 0.5 + 0j]),
                      residuals=np.zeros(2), modes_K=4, order_m=2)
    high = RawSpectrum(eigenvalues=np.array([0.5 + 0j]),
                       residuals=np.zeros(1), modes_K=8, order_m=2)
    result = filter_trusted(low, high)
    assert result.contention == 1
    assert int(np.count_nonzero(result.trusted_mask)) == 1
    assert result.untrusted_within(1.0) == 1
    out = count_in_sector(result, SectorSpec(0.0, TWO_PI, 0.3, 0.9))
    assert out.count == 1
    assert out.untrusted_in_sector == 1


def test_scaled_spectrum_exact():
    low, high = laplacian_pair(16)
    result = filter_trusted(low, high)
    scaled = result.scaled(4.0)
    assert np.array_equal(scaled.eigenvalues, result.eigenvalues * 4.0)
    assert scaled.radius_max == 64.0
    assert scaled.window == 64.0
    assert np.array_equal(scaled.trusted_mask, result.trusted_mask)
    assert scaled.contention == result.contention
