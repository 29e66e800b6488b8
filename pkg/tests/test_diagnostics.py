import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rlse_delta.diagnostics import (
    SERIES_HEADER, DiagnosticsSeries, ErrorTriple, discrete_energy, discrete_mass,
    discrete_momentum, error_norms, fmt, observed_orders,
)
from rlse_delta.grid import GridSpec, MeshFunction, h1_seminorm
from rlse_delta.nonlin import ModelParams
from rlse_delta.solutions import GaussonParams, sample_gausson

P = ModelParams(1.0, -1.0, 0.0125)


def spike(g, j, d):
    v = np.zeros(g.n_nodes, dtype=complex)
    v[j] = d
    return MeshFunction(v, g)


class TestInvariants:
    def test_zero(self):
        z = GridSpec(3.0, 30).zeros()
        assert discrete_mass(z) == 0 and discrete_energy(z, P) == 0 and discrete_momentum(z) == 0

    def test_mass_homogeneity(self):
        g = GridSpec(3.0, 30)
        u = g.sample(lambda x: np.exp(-x**2) * (1 + 1j * x))
        c = 0.3 - 2j
        assert discrete_mass(c * u) == pytest.approx(abs(c) ** 2 * discrete_mass(u), rel=1e-14)

    def test_gausson_mass(self):
        u = sample_gausson(GridSpec(12.0, 4800), GaussonParams())
        assert discrete_mass(u) == pytest.approx(19.913623404617145, abs=1e-3)

    @pytest.mark.parametrize("lam", [0.0, 1.0, -2.5])
    def test_interface_spike_energy(self, lam):
        g = GridSpec(2.0, 16)
        e = discrete_energy(spike(g, g.M, 1.0), ModelParams(lam, 0.0, 0.0125))
        assert e == pytest.approx(2 / g.h + lam, rel=1e-14)

    def test_pure_seminorm(self):
        g = GridSpec(2.0, 16)
        u = g.sample(lambda x: np.cos(x) + 1j * np.sin(2 * x))
        assert discrete_energy(u, ModelParams(0.0, 0.0, 0.0)) == h1_seminorm(u) ** 2

    def test_gausson_energy_extended_precision(self):
        g = GridSpec(12.0, 240)
        u = sample_gausson(g, GaussonParams())
        mp.mp.dps = 40
        h, eps = mp.mpf(g.h), mp.mpf(P.eps)
        vals = [mp.mpc(complex(z)) for z in u.values]
        grad = sum(abs(vals[j + 1] - vals[j]) ** 2 for j in range(2 * g.M)) / h
        lam_term = P.lam * abs(vals[g.M]) ** 2
        # Q as the integral of q from 0, integrated in r = sqrt(s)
        Q = lambda s: mp.quad(lambda r: 4 * r * mp.log(eps + r), [0, mp.sqrt(s)])
        pot = P.mu * h * sum(Q(abs(z) ** 2) for z in vals[:-1])
        assert discrete_energy(u, P) == pytest.approx(float(grad + lam_term + pot), rel=1e-12)

    def test_momentum(self):
        g = GridSpec(20.0, 2000)
        env = lambda x: np.exp(-x**2 / 4)
        assert discrete_momentum(g.sample(env)) == 0
        p = [discrete_momentum(g.sample(lambda x: env(x) * np.exp(1j * k * x))) for k in (0.01, 0.02, 0.04)]
        assert all(v > 0 for v in p)
        # h sum env^2 k for small k; envelope mass is sqrt(2 pi)
        for k, v in zip((0.01, 0.02, 0.04), p):
            assert v == pytest.approx(k * math.sqrt(2 * math.pi), rel=1e-3)


class TestErrors:
    def test_identical(self):
        u = GridSpec(1.0, 8).sample(np.cos)
        assert tuple(error_norms(u, u)) == (0, 0, 0)

    def test_spike(self):
        g = GridSpec(1.0, 8)
        d = 0.37
        e = error_norms(g.zeros(), spike(g, 5, d))
        assert e.linf == d
        assert e.l2 == pytest.approx(math.sqrt(g.h) * d, rel=1e-15)
        assert e.l2 <= e.h1

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            error_norms(GridSpec(1.0, 8).zeros(), GridSpec(1.0, 4).zeros())

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_triangle_inequality(self, seed):
        g = GridSpec(2.0, 20)
        rng = np.random.default_rng(seed)
        mk = lambda: MeshFunction(rng.standard_normal(g.n_nodes) + 1j * rng.standard_normal(g.n_nodes), g)
        ref, a, b = mk(), mk(), mk()
        both = error_norms(ref + a + b, ref)
        ea, eb = error_norms(ref + a, ref), error_norms(ref + b, ref)
        for n in ("l2", "h1", "linf"):
            assert getattr(both, n) <= (getattr(ea, n) + getattr(eb, n)) * (1 + 1e-14)


class TestOrders:
    def test_quartering(self):
        errs = [(0.5, ErrorTriple(1.0, 2.0, 4.0)), (0.25, ErrorTriple(0.25, 0.5, 1.0))]
        o = observed_orders(errs)
        assert o[0] is None and tuple(o[1]) == (2.0, 2.0, 2.0)

    def test_halving(self):
        o = observed_orders([(0.1, ErrorTriple(1, 1, 1)), (0.05, ErrorTriple(0.5, 0.5, 0.5))])
        assert tuple(o[1]) == (1.0, 1.0, 1.0)

    def test_table_value(self):
        o = observed_orders([(0.5, ErrorTriple(8.28e-2, 1, 1)), (0.25, ErrorTriple(2.05e-2, 1, 1))])
        assert round(o[1].l2, 2) == 2.01

    def test_zero_error_flagged(self):
        o = observed_orders([(0.5, ErrorTriple(0.0, 1, 1)), (0.25, ErrorTriple(0.0, 0.5, 1))])
        assert math.isnan(o[1].l2) and o[1].h1 == 1.0

    def test_rejects_non_halving(self):
        with pytest.raises(ValueError):
            observed_orders([(0.5, ErrorTriple(1, 1, 1)), (0.3, ErrorTriple(1, 1, 1))])


class TestSeries:
    def test_csv(self):
        g = GridSpec(2.0, 8)
        s = DiagnosticsSeries(P)
        u = g.sample(lambda x: np.exp(-x**2))
        s.record(0.0, u)
        s.note_iterations(3)
        s.record(0.1, 2 * u, 4)
        text = s.to_csv()
        lines = text.splitlines()
        assert lines[0] == ",".join(SERIES_HEADER)
        row = lines[2].split(",")
        assert row[6] == "7" and float(row[7]) == pytest.approx(3.0)
        assert row[0] == "0.10000000000000001"  # 17 significant digits
        assert s.summary()["total_fp_iterations"] == 7
        assert s.mass_drift(relative=False)[1] == pytest.approx(3 * s[0].mass)

    def test_fmt(self):
        assert fmt(1 / 3) == "0.33333333333333331"
        assert fmt(5) == "5" and fmt("") == "" and fmt(float("nan")) == "nan"
        assert float(fmt(math.pi)) == math.pi
