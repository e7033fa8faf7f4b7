import csv
import io
import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from alphamodels.experiments import (
    CSV_SCHEMA,
    FORMS,
    SweepSpec,
    default_physics,
    fit_rate,
    is_monotone,
    rate_variable,
    run_sweep,
)
from alphamodels.models import ModelKind
from alphamodels.svg import loglog_svg, sweep_svg

L = 2 * math.pi


class TestRateFit:
    @given(st.floats(0.5, 4.0), st.floats(1e-3, 1e3))
    def test_recovers_power_law(self, p, c):
        xs = [0.5, 0.25, 0.125, 0.0625, 0.03125]
        fit = fit_rate([(x, c * x**p) for x in xs])
        assert fit.order == pytest.approx(p, abs=1e-9)
        assert fit.prefactor == pytest.approx(c, rel=1e-8)
        assert fit.residual < 1e-9

    def test_zero_errors_excluded_and_counted(self):
        pairs = [(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625), (0.125, 0.015625), (0.0625, 0.0)]
        fit = fit_rate(pairs)
        assert fit.excluded_zero == 1 and fit.points == 4
        assert fit.order == pytest.approx(2.0)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_rate([(1.0, 1.0), (0.5, 0.5), (0.25, 0.0), (0.1, 0.1)])

    def test_nonpositive_abscissa(self):
        with pytest.raises(ValueError):
            fit_rate([(0.0, 1.0), (0.5, 0.5), (0.25, 0.25), (0.1, 0.1)])


class TestRateVariables:
    def test_alpha_log_at_box_limit(self):
        # L/(2 pi alpha) = 1: the log factor is 1
        assert rate_variable("alpha_log", 1.0, L) == pytest.approx(1.0)

    def test_inv_lambda_log(self):
        assert rate_variable("inv_lambda_log", 1.0, L) == pytest.approx(1.0)
        assert rate_variable("inv_lambda_log", math.e**3, L) == pytest.approx(2.0 / math.e**3)

    def test_mode_count(self):
        assert rate_variable("mode_count", 0.0, L, 9) == pytest.approx(math.log(10) / 100)
        with pytest.raises(ValueError):
            rate_variable("mode_count", 0.0, L)

    def test_unknown(self):
        with pytest.raises(ValueError):
            rate_variable("cubic", 1.0)
        assert "combined" in FORMS


class TestMonotone:
    def test_cases(self):
        assert is_monotone([3, 2, 2, 1])
        assert not is_monotone([3, 2, 2, 1], strict=True)
        assert not is_monotone([1, 2])
        assert is_monotone([1.0, 1.0 + 1e-14])


class TestSpec:
    def test_defaults(self):
        a = SweepSpec.default_alpha()
        assert a.values == tuple(L / (k * math.pi) for k in (8, 16, 32, 64))
        assert len(a.models) == 4 and a.reference_factor == 4
        g = SweepSpec.default_galerkin()
        assert g.fixed_alpha == pytest.approx(L / (32 * math.pi))
        assert g.values == (8, 16, 32, 64, 128)

    def test_rejects(self):
        base = default_physics()
        with pytest.raises(ValueError):
            SweepSpec(base, "alpha", ())
        with pytest.raises(ValueError):
            SweepSpec(base, "alpha", (0.1, -0.1))
        with pytest.raises(ValueError):
            SweepSpec(base, "cutoff", (7,))
        with pytest.raises(ValueError):
            SweepSpec(base, "viscosity", (1.0,))


def tiny_base():
    return default_physics(resolution=16, horizon=0.2, dt=5e-3, initial_condition={"kind": "random", "s": 4.0, "l2": 1.0})


@pytest.fixture(scope="module")
def small_alpha_sweep():
    spec = SweepSpec.default_alpha(
        tiny_base(),
        models=(ModelKind.LERAY_ALPHA, ModelKind.NS_ALPHA),
        reference_factor=2,
        calibration_seeds=(1,),
        richardson=False,
    )
    return run_sweep("alpha", spec)


class TestSmallSweeps:
    def test_alpha_sweep_shape(self, small_alpha_sweep):
        r = small_alpha_sweep
        assert len(r.rows) == 8
        for m in ("leray_alpha", "ns_alpha"):
            assert r.checks[m]["monotone"]
            assert r.checks[m]["order"] > 0.9
            assert r.checks[m]["apriori_ok"]
        assert set(r.calibration["c_cal"]) == {"leray_alpha", "ns_alpha"}

    def test_csv_and_json(self, small_alpha_sweep):
        text = small_alpha_sweep.to_csv()
        assert text.startswith(f"# {CSV_SCHEMA}\n")
        rows = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
        assert len(rows) == 8 and float(rows[0]["error"]) > 0
        summary = json.loads(small_alpha_sweep.to_json())
        assert summary["kind"] == "alpha" and "fits" in summary

    def test_svg(self, small_alpha_sweep):
        svg = sweep_svg(small_alpha_sweep)
        assert svg.startswith("<svg") and svg.count("<circle") == 8

    def test_frozen_dial_skips_calibration(self, small_alpha_sweep):
        c = small_alpha_sweep.calibration["c_cal"]
        spec = SweepSpec.default_alpha(tiny_base(), models=(ModelKind.LERAY_ALPHA, ModelKind.NS_ALPHA), reference_factor=2, c_cal=c, richardson=False)
        again = run_sweep("alpha", spec)
        assert again.calibration["frozen"]
        assert again.to_csv() == small_alpha_sweep.to_csv()

    def test_galerkin_small(self):
        spec = SweepSpec.default_galerkin(tiny_base(), calibration_seeds=(1,), richardson=False, proxy_check=False, reference_factor=2, calibration_reference_factor=2)
        spec = replace(spec, values=(4, 8, 16, 32))
        r = run_sweep("galerkin", spec)
        c = r.checks["leray_alpha"]
        assert c["monotone"] and c["bound_ok"] and c["apriori_ok"]
        assert r.fits["leray_alpha"].order > 1

    def test_alpha_hypothesis_gate(self):
        from alphamodels.bounds import HypothesisError

        spec = SweepSpec(tiny_base(), "alpha", (2.0, 0.5, 0.25, 0.125), c_cal={m.value: 1.0 for m in SweepSpec.default_alpha().models})
        with pytest.raises(HypothesisError):
            run_sweep("alpha", spec)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            run_sweep("viscosity", SweepSpec.default_alpha(tiny_base()))


class TestSvg:
    def test_needs_positive_data(self):
        with pytest.raises(ValueError):
            loglog_svg([{"label": "x", "x": [0.0], "y": [1.0]}])

    def test_escapes_labels(self):
        svg = loglog_svg([{"label": "a<b", "x": [1, 10], "y": [1, 100], "style": "line"}])
        assert "a&lt;b" in svg
