"""Fields, quadrature, cylinders, norms and I/O."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqlab import (
    Cylinder,
    Domain,
    ParameterError,
    RegionError,
    SpaceTimeField,
    StructureParams,
    coefficient_norms,
    constant_field,
    cylinder_in_domain,
    derive,
    ess_sup,
    field_from_function,
    gradient,
    load_field_csv,
    load_field_dump,
    lp_norm,
    mean_integral,
    pq_cylinder,
    pq_distance,
    region_measure,
    save_field_csv,
    save_field_dump,
    slice_sup_l2,
    truncate_plus,
)

D_REF = derive(StructureParams(n=2, p=2.0, q=2.1, alpha=20.0, beta=20.0))


def unit_domain(nx=65, nt=32, T=1.0):
    return Domain(n=1, box=((0.0, 1.0),), T=T, nx=nx, nt=nt)


class TestDomainAndField:
    def test_spacing(self):
        dom = unit_domain(nx=11, nt=10, T=2.0)
        assert dom.dx == (0.1,)
        assert dom.dt == 0.2
        assert dom.shape == (11, 11)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n=3, box=((0, 1),) * 3, T=1.0, nx=5, nt=4),
            dict(n=1, box=((0.0, 1.0),), T=0.0, nx=5, nt=4),
            dict(n=1, box=((0.0, 1.0),), T=1.0, nx=2, nt=4),
            dict(n=1, box=((0.0, 1.0),), T=1.0, nx=5, nt=1),
            dict(n=1, box=((1.0, 0.0),), T=1.0, nx=5, nt=4),
        ],
    )
    def test_domain_validation(self, kwargs):
        with pytest.raises(ParameterError):
            Domain(**kwargs)

    def test_field_shape_and_finiteness(self):
        dom = unit_domain(nx=5, nt=4)
        with pytest.raises(ParameterError, match="shape"):
            SpaceTimeField(dom, np.zeros((3, 5)))
        bad = np.zeros(dom.shape)
        bad[0, 0] = np.nan
        with pytest.raises(ParameterError, match="finite"):
            SpaceTimeField(dom, bad)

    def test_values_immutable(self):
        f = constant_field(unit_domain(nx=5, nt=4), 1.0)
        with pytest.raises(ValueError):
            f.values[0, 0] = 2.0


class TestQuadrature:
    def test_zero_field(self):
        assert lp_norm(constant_field(unit_domain(), 0.0), 2.0) == 0.0

    def test_constant_field_exact(self):
        dom = Domain(n=1, box=((0.0, 2.0),), T=3.0, nx=21, nt=12)
        c = constant_field(dom, 1.5)
        assert lp_norm(c, 2.0) ** 2 == pytest.approx(1.5**2 * 6.0, rel=1e-14)
        assert mean_integral(c, 2.0) == pytest.approx(1.5**2, rel=1e-14)

    def test_sine_closed_form(self):
        dom = unit_domain(nx=201, nt=8, T=2.0)
        f = field_from_function(dom, lambda x, t: np.sin(np.pi * x))
        # integral of sin^2 over (0,1) is 1/2, times T = 2
        assert lp_norm(f, 2.0) ** 2 == pytest.approx(1.0, abs=1e-4)

    def test_refinement_order_at_least_two(self):
        errs = []
        for nx in (33, 65, 129, 257):
            dom = unit_domain(nx=nx, nt=8, T=1.0)
            f = field_from_function(dom, lambda x, t: np.sin(np.pi * x) + 0.2 * np.cos(t))
            exact = 0.5 + 0.2 * 2 * (2 / np.pi) * 0.0  # placeholder, use fine reference below
            errs.append(lp_norm(f, 2.0))
        # measured convergence rate of the norm itself against the finest
        diffs = [abs(e - errs[-1]) for e in errs[:-1]]
        rates = [math.log2(diffs[i] / diffs[i + 1]) for i in range(len(diffs) - 1)]
        assert min(rates) >= 1.8

    def test_constant_mean_on_cylinder(self):
        dom = unit_domain(nx=41, nt=40)
        c = constant_field(dom, 2.0)
        cyl = Cylinder((0.5, 0.8), 0.25, 0.3)
        assert mean_integral(c, 3.0, cyl) == pytest.approx(8.0, rel=1e-14)

    def test_cylinder_measure_is_node_count_times_cell(self):
        dom = unit_domain(nx=41, nt=40)
        cyl = Cylinder((0.5, 0.8), 0.25, 0.3)
        xs, ts = dom.axes[0], dom.times
        count_x = int(np.sum(np.abs(xs - 0.5) < 0.25))
        count_t = int(np.sum((ts > 0.5 + 1e-12) & (ts <= 0.8 + 1e-12)))
        expect = count_x * count_t * dom.dx[0] * dom.dt
        assert region_measure(dom, cyl) == pytest.approx(expect, rel=1e-14)

    def test_empty_region_raises(self):
        dom = unit_domain(nx=5, nt=4)
        with pytest.raises(RegionError):
            lp_norm(constant_field(dom, 1.0), 2.0, Cylinder((0.51, 0.51), 1e-6, 1e-6))

    def test_lp_norm_exponent_validation(self):
        with pytest.raises(ParameterError):
            lp_norm(constant_field(unit_domain(nx=5, nt=4), 1.0), 0.5)


class TestTruncation:
    def test_examples(self):
        dom = unit_domain(nx=5, nt=4)
        assert np.all(truncate_plus(constant_field(dom, 5.0), 7.0).values == 0.0)
        assert np.all(truncate_plus(constant_field(dom, 5.0), 3.0).values == 2.0)
        ramp = field_from_function(dom, lambda x, t: x)
        top = truncate_plus(ramp, 0.5)
        assert top.values.max() == pytest.approx(0.5)
        assert np.all(top.values >= 0.0)

    @given(k1=st.floats(-3, 3), k2=st.floats(-3, 3))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_level(self, k1, k2):
        dom = Domain(n=1, box=((0.0, 1.0),), T=1.0, nx=9, nt=4)
        f = field_from_function(dom, lambda x, t: np.sin(7 * x + t))
        lo, hi = min(k1, k2), max(k1, k2)
        assert np.all(truncate_plus(f, hi).values <= truncate_plus(f, lo).values)

    def test_truncation_at_min_shifts(self):
        dom = unit_domain(nx=9, nt=4)
        f = field_from_function(dom, lambda x, t: np.cos(3 * x) + t)
        fmin = float(f.values.min())
        assert np.allclose(truncate_plus(f, fmin).values, f.values - fmin)


class TestSupsAndGradient:
    def test_ess_sup_constant(self):
        assert ess_sup(constant_field(unit_domain(nx=5, nt=4), 3.5)) == 3.5

    def test_ess_sup_time_ramp_hits_cylinder_top(self):
        dom = unit_domain(nx=9, nt=100)
        f = field_from_function(dom, lambda x, t: t)
        cyl = Cylinder((0.5, 0.7), 0.3, 0.2)
        assert ess_sup(f, cyl) == pytest.approx(0.7, abs=1e-12)

    def test_slice_sup_l2_constant(self):
        dom = unit_domain(nx=41, nt=10)
        cyl = Cylinder((0.5, 1.0), 0.25, 0.5)
        count = int(np.sum(np.abs(dom.axes[0] - 0.5) < 0.25))
        expect = 4.0 * count * dom.dx[0]
        assert slice_sup_l2(constant_field(dom, 2.0), cyl) == pytest.approx(expect, rel=1e-14)

    def test_gradient_exact_for_linear(self):
        dom = unit_domain(nx=17, nt=4)
        f = field_from_function(dom, lambda x, t: 3.0 * x - 1.0)
        g = gradient(f)
        assert g.shape == (1, 5, 17)
        assert np.allclose(g, 3.0, atol=1e-12)
        assert np.allclose(gradient(constant_field(dom, 4.0)), 0.0)

    def test_gradient_second_order(self):
        errs = []
        for nx in (33, 65, 129):
            dom = unit_domain(nx=nx, nt=4)
            f = field_from_function(dom, lambda x, t: np.sin(np.pi * x))
            exact = np.pi * np.cos(np.pi * dom.axes[0])
            errs.append(np.abs(gradient(f)[0] - exact[None, :]).max())
        rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(rates) >= 1.8

    def test_gradient_2d_components(self):
        dom = Domain(n=2, box=((0.0, 1.0), (0.0, 2.0)), T=1.0, nx=9, nt=3)
        f = field_from_function(dom, lambda x, y, t: 2.0 * x + 5.0 * y)
        g = gradient(f)
        assert np.allclose(g[0], 2.0) and np.allclose(g[1], 5.0)


class TestPQGeometry:
    def test_distance_symmetric_and_zero(self):
        z1, z2 = (0.1, 0.5), (0.4, 0.2)
        assert pq_distance(z1, z1, D_REF) == 0.0
        assert pq_distance(z1, z2, D_REF) == pq_distance(z2, z1, D_REF)
        assert pq_distance(z1, z2, D_REF) > 0

    def test_intrinsic_sigma(self):
        cyl = pq_cylinder((0.5, 1.0), 0.5, D_REF)
        assert cyl.intrinsic
        assert cyl.sigma == pytest.approx(0.2143109957132682, abs=1e-12)

    def test_classical_scaling_at_q_equals_p(self):
        d = derive(StructureParams(n=2, p=2.0, q=2.0, alpha=20.0, beta=20.0))
        cyl = pq_cylinder((0.0, 1.0), 0.3, d)
        assert cyl.sigma == pytest.approx(0.09, rel=1e-14)

    def test_containment(self):
        dom = unit_domain()
        assert cylinder_in_domain(dom, Cylinder((0.5, 0.9), 0.2, 0.3))
        assert not cylinder_in_domain(dom, Cylinder((0.5, 0.2), 0.2, 0.3))  # dips below t=0
        assert not cylinder_in_domain(dom, Cylinder((0.1, 0.9), 0.2, 0.3))  # leaves the box
        assert cylinder_in_domain(dom, Cylinder((0.5, 1.0), 0.2, 0.3))  # may touch t = T


class TestCoefficientNorms:
    def test_mean_raw_identity(self):
        dom = unit_domain(nx=41, nt=40)
        a = field_from_function(dom, lambda x, t: 1.0 + x)
        b = field_from_function(dom, lambda x, t: 2.0 - x)
        for region in (Cylinder((0.5, 0.9), 0.3, 0.4), Cylinder((0.4, 0.5), 0.2, 0.2)):
            norms = coefficient_norms(a, b, 7.0, 3.0, region)
            measure = region_measure(dom, region)
            assert norms.norm_a == pytest.approx(norms.raw_a / measure ** (1.0 / 7.0), rel=1e-12)
            assert norms.norm_b == pytest.approx(norms.raw_b / measure ** (1.0 / 3.0), rel=1e-12)

    def test_infinite_exponents_are_suprema(self):
        dom = unit_domain(nx=41, nt=10)
        a = field_from_function(dom, lambda x, t: 1.0 + x)
        b = field_from_function(dom, lambda x, t: 2.0 + x)
        norms = coefficient_norms(a, b, math.inf, math.inf)
        assert norms.norm_a == pytest.approx(1.0, rel=1e-12)  # sup of 1/(1+x)
        assert norms.norm_b == pytest.approx(3.0, rel=1e-12)

    def test_vanishing_a_rejected(self):
        dom = unit_domain(nx=5, nt=4)
        a = field_from_function(dom, lambda x, t: x)  # zero at the node x=0
        b = constant_field(dom, 1.0)
        with pytest.raises(ParameterError, match="vanishes"):
            coefficient_norms(a, b, 2.0, 2.0)


class TestFieldIO:
    def test_csv_roundtrip(self, tmp_path):
        dom = Domain(n=1, box=((0.25, 1.25),), T=0.5, nx=9, nt=6)
        f = field_from_function(dom, lambda x, t: np.sin(3 * x) * (1 + t))
        path = tmp_path / "field.csv"
        save_field_csv(f, path)
        g = load_field_csv(path)
        assert g.domain == f.domain
        assert np.allclose(g.values, f.values, atol=1e-15)

    def test_csv_roundtrip_2d(self, tmp_path):
        dom = Domain(n=2, box=((0.0, 1.0), (0.0, 2.0)), T=0.5, nx=5, nt=3)
        f = field_from_function(dom, lambda x, y, t: x + 2 * y + t)
        path = tmp_path / "field2.csv"
        save_field_csv(f, path)
        g = load_field_csv(path)
        assert g.domain == f.domain
        assert np.allclose(g.values, f.values, atol=1e-15)

    def test_binary_roundtrip_bit_exact(self, tmp_path):
        dom = Domain(n=2, box=((0.0, 1.0), (-1.0, 1.0)), T=2.0, nx=7, nt=4)
        rng = np.random.default_rng(1)
        f = SpaceTimeField(dom, rng.normal(size=dom.shape))
        path = tmp_path / "field.pqf"
        save_field_dump(f, path)
        g = load_field_dump(path)
        assert g.domain == f.domain
        assert np.array_equal(g.values, f.values)

    def test_dump_magic_checked(self, tmp_path):
        path = tmp_path / "junk.pqf"
        path.write_bytes(b"nope" + b"\x00" * 64)
        with pytest.raises(ParameterError, match="magic"):
            load_field_dump(path)
