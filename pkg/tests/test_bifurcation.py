import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from fchmorph.bifurcation import (
    MARGINAL,
    STABLE,
    UNSTABLE,
    DiagramTable,
    classify,
    diagram,
    expressions,
    invariant_interval,
    parse_range,
    pearling_ordering,
    threshold_lines,
)
from fchmorph.coefficients import BilayerCoefficients, FilamentCoefficients, ModelParams
from fchmorph.errors import DomainError


def make(S_b=1.5, S_f=12.0, sigma_f=1.1, m_f=5.0):
    bc = BilayerCoefficients(m_b=4.0, B_1=2.0, sigma_b=0.8, nu_b=2.0, lambda_b0=0.6, psi_b0_norm_sq=1.0, S_b=S_b)
    fc = FilamentCoefficients(m_f=m_f, sigma_f=sigma_f, S_2=3.0, nu_f=2 * m_f / 3.0, lambda_f00=0.4,
                              psi_f00_norm_sq=1.0, dpsi_f00_norm_sq=0.3, S_f=S_f)
    return bc, fc


def test_origin_of_slice_is_marginal_for_pearling():
    bc, fc = make()
    f = classify(bc, fc, ModelParams(), 0.0)
    assert f.bilayer_pearling == MARGINAL and f.filament_pearling == MARGINAL
    assert f.bilayer_fingering == MARGINAL and f.filament_fingering == MARGINAL
    assert not f.admissible


def test_zero_shape_factor_is_marginal():
    bc, fc = make(S_b=0.0)
    f = classify(bc, fc, ModelParams(eta1=0.2, eta2=0.0), 0.5)
    assert f.bilayer_pearling == MARGINAL
    assert threshold_lines(bc, fc, 0.2).pearling_bilayer.degenerate
    tab = diagram(bc, fc, 0.2, [0.3], [-0.5, 0.5])
    assert np.all(tab.flags["bp"] == MARGINAL)


@pytest.mark.parametrize("S_b,S_f", [(1.5, 12.0), (-0.3, 12.0), (2.0, -5.0)])
@pytest.mark.parametrize("eta_d", [-0.7, 0.2, 0.9])
def test_boundaries_match_root_of_expressions(S_b, S_f, eta_d):
    bc, fc = make(S_b, S_f)
    eta1 = 0.15
    lines = threshold_lines(bc, fc, eta1)
    mp = ModelParams.from_eta_d(eta1, eta_d)
    mub, muf = bc.mu_b_star(mp), fc.mu_f_star(mp)
    for k, line in ((0, lines.pearling_bilayer), (1, lines.pearling_filament),
                    (2, lines.fingering_bilayer), (3, lines.fingering_filament)):
        g = lambda m: expressions(bc, fc, eta_d, m, mub, muf)[k]
        root = brentq(g, -50, 50, xtol=1e-14, rtol=1e-15)
        assert float(line.boundary(eta_d)) == pytest.approx(root, abs=1e-10)


def test_fingering_line_matches_model_potential():
    bc, fc = make()
    lines = threshold_lines(bc, fc, 0.15)
    for ed in (-1.0, 0.0, 0.4):
        mp = ModelParams.from_eta_d(0.15, ed)
        assert float(lines.fingering_bilayer.boundary(ed)) == pytest.approx(bc.mu_b_star(mp), rel=1e-14)
        assert float(lines.fingering_filament.boundary(ed)) == pytest.approx(fc.mu_f_star(mp), rel=1e-14)


def test_diagram_shape_and_order():
    bc, fc = make()
    ed, mu = parse_range("-1:1:5"), parse_range("-1:1:7")
    tab = diagram(bc, fc, 0.15, ed, mu)
    assert len(tab) == 35
    assert np.all(tab.eta_d[:7] == ed[0]) and np.array_equal(tab.mu1[:7], mu)
    rows = list(tab.rows())
    assert len(rows) == 35 and len(rows[0]) == 11
    for n in DiagramTable.COLUMNS:
        flag = tab.flags[n]
        d = tab.distances[n]
        assert np.all((flag == STABLE) == (d < -1e-9))
        assert np.all((flag == UNSTABLE) == (d > 1e-9))


def test_single_point_diagram():
    bc, fc = make()
    tab = diagram(bc, fc, 0.15, parse_range("0.5:0.5:1"), parse_range("0:0:1"))
    assert len(tab) == 1


@given(st.floats(0, 1e-2), st.floats(0, 1e-2))
def test_larger_tolerance_only_adds_marginal_cells(t1, t2):
    lo, hi = sorted((t1, t2))
    bc, fc = make()
    ed, mu = parse_range("-1:1:21"), parse_range("-0.02:0.02:21")
    a, b = diagram(bc, fc, 0.15, ed, mu, tol=lo), diagram(bc, fc, 0.15, ed, mu, tol=hi)
    for n in DiagramTable.COLUMNS:
        changed = a.flags[n] != b.flags[n]
        assert np.all(b.flags[n][changed] == MARGINAL)
    assert b.admissible_count <= a.admissible_count


def test_invariant_interval_cases():
    bc, fc = make()
    mp = ModelParams(eta1=0.15, eta2=0.15)
    iv = invariant_interval(bc, fc, mp)
    assert iv.mu_lo == bc.mu_b_star(mp) < iv.mu_hi == fc.mu_f_star(mp)
    assert iv.favored == "bilayer"
    # negative bilayer pressure made positive and large: filament favored
    iv = invariant_interval(bc, fc, ModelParams(eta1=0.15, eta2=-1.0))
    assert iv.favored == "filament"
    # equal potentials
    mp0 = ModelParams(eta1=0.0, eta2=0.0)
    assert invariant_interval(bc, fc, mp0).favored == "coexistence"


def test_pearling_ordering_detects_filament_above():
    bc, fc = make(S_b=2.0, S_f=0.5)  # filament threshold lies further from zero
    tab = diagram(bc, fc, 0.15, parse_range("-1:1:41"), parse_range("-2:2:401"))
    order, cols = pearling_ordering(tab)
    assert cols and order in (-1, 1)
    bc2, fc2 = make(S_b=0.5, S_f=2.0)
    tab2 = diagram(bc2, fc2, 0.15, parse_range("-1:1:41"), parse_range("-2:2:401"))
    assert pearling_ordering(tab2)[0] == -order


@pytest.mark.parametrize("spec", ["1:2", "a:b:c", "0:1:0", ""])
def test_parse_range_rejects(spec):
    with pytest.raises(DomainError):
        parse_range(spec)


def test_empty_grid_rejected():
    bc, fc = make()
    with pytest.raises(DomainError):
        diagram(bc, fc, 0.15, [], [0.0])
