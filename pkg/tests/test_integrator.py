import math

import numpy as np
import pytest

from alphamodels.integrator import (
    StepperConfig,
    advance,
    distance_series,
    richardson_check,
    sample_times,
    simulate,
    simulate_checked,
)
from alphamodels.models import GalerkinSystem, ModelKind, NumericalAbort, SimConfig
from alphamodels.spectral import build_lattice, l2_norm

ALL = list(ModelKind)


def cfg_for(model=ModelKind.NSE, **kw):
    base = dict(model=model, resolution=16, alpha=0.3 if model.filtered else 0.0, horizon=0.2, dt=1e-2)
    base.update(kw)
    return SimConfig(**base)


class TestSampling:
    def test_spacing_at_most_ten_steps(self):
        t = sample_times(SimConfig(horizon=1.0, dt=1e-3))
        assert t[0] == 0.0 and t[-1] == 1.0
        assert np.diff(t).max() <= 1e-2 * (1 + 1e-12)
        assert t.size == 101

    def test_minimum_sample_count(self):
        assert sample_times(SimConfig(horizon=1.0, dt=1.0)).size == 65

    def test_stepper_validation(self):
        with pytest.raises(ValueError):
            StepperConfig(0.0)
        with pytest.raises(ValueError):
            StepperConfig(1e-3, max_steps=0)


class TestExactSolutions:
    @pytest.mark.parametrize("model", ALL)
    def test_shear_decay(self, model):
        cfg = cfg_for(model, nu=1.0, horizon=0.5, dt=0.05, initial_condition={"kind": "shear"})
        tr = simulate(cfg)
        exact = np.exp(-tr.times)  # |u0| scales out; lambda1 = 1 on a 2 pi box
        rel = np.abs(tr.norms["l2"] / tr.norms["l2"][0] - exact).max()
        assert rel < 1e-13

    def test_pure_linear_decay_single_step_is_exact(self):
        cfg = cfg_for(nu=0.3, initial_condition={"kind": "taylor_green"})
        sys_ = GalerkinSystem(cfg)
        u0 = sys_.initial_state()
        u1, steps = advance(u0, sys_, 0.0, np.array([0.37]), StepperConfig(0.1))
        assert steps == 4  # three full steps then one shortened step
        expected = np.exp(-cfg.nu * 2 * 0.37) * u0  # |k|^2 = 2
        assert np.abs(u1 - expected).max() < 1e-15


class TestOrder:
    def test_fourth_order_in_time(self):
        cfg = cfg_for(
            ModelKind.NS_ALPHA, alpha=0.2, nu=0.05, horizon=0.5,
            initial_condition={"kind": "random", "s": 4.0, "l2": 20.0},
        )
        times = np.linspace(0.0, 0.5, 5)
        ref = simulate(cfg, times=times, dt=0.5 / 800, with_linf=False)
        errs = [distance_series(simulate(cfg, times=times, dt=h, with_linf=False), ref).max() for h in (0.025, 0.0125)]
        assert math.log2(errs[0] / errs[1]) > 3.5


class TestTrajectory:
    def test_store_lattice_keeps_tail(self):
        cfg = cfg_for(resolution=32)
        full = simulate(cfg)
        small = simulate(cfg, store_lattice=build_lattice(cfg.box_length, 16))
        assert small.states[0].shape == (2, 16, 16)
        kept = np.array([l2_norm(small.state(i)) ** 2 for i in range(len(small.times))])
        assert np.allclose(kept + small.tail_sq, full.norms["l2"] ** 2, rtol=1e-12)
        model = simulate(cfg.with_(resolution=16))
        d = distance_series(small, model)
        direct = [math.sqrt(l2_norm(small.state(i) - model.state(i)) ** 2 + small.tail_sq[i]) for i in range(len(d))]
        assert np.allclose(d, direct, rtol=1e-12)
        # the tail of ``small`` is resolved by ``full``: not computable
        with pytest.raises(ValueError):
            distance_series(full, small)

    def test_store_lattice_must_be_coarser(self):
        with pytest.raises(ValueError):
            simulate(cfg_for(), store_lattice=build_lattice(2 * math.pi, 32))

    def test_distance_requires_same_grid(self):
        a = simulate(cfg_for())
        b = simulate(cfg_for(horizon=0.3))
        with pytest.raises(ValueError):
            distance_series(a, b)

    def test_deterministic(self):
        a = simulate(cfg_for(ModelKind.MODIFIED_LERAY_ALPHA, forcing={"kind": "random"}))
        b = simulate(cfg_for(ModelKind.MODIFIED_LERAY_ALPHA, forcing={"kind": "random"}))
        assert all(np.array_equal(x, y) for x, y in zip(a.states, b.states))

    def test_meta(self):
        tr = simulate(cfg_for())
        assert tr.meta["dt"] == 1e-2
        assert tr.steps == 64  # sample spacing T/64 is finer than dt here
        assert tr.meta["stiffness"] == pytest.approx(1e-2 * 0.1 * 98)


class TestAbort:
    def test_blowup_aborts(self):
        # explicit-in-nonlinearity stepping with a huge step on huge data
        cfg = cfg_for(dt=1.0, horizon=50.0, nu=1e-4, initial_condition={"kind": "random", "s": 4.0, "l2": 1e4})
        with pytest.raises(NumericalAbort) as err:
            simulate(cfg)
        assert err.value.step is not None

    def test_step_budget(self):
        cfg = cfg_for()
        sys_ = GalerkinSystem(cfg)
        with pytest.raises(NumericalAbort):
            advance(sys_.initial_state(), sys_, 0.0, np.array([1.0]), StepperConfig(1e-2, max_steps=10))


class TestRichardson:
    def test_passes_when_resolved(self):
        res, half = richardson_check(cfg_for(dt=1e-3), 1e-9)
        assert res.passed and half is not None
        assert res.as_dict()["pass"] is True

    def test_fails_when_coarse(self):
        cfg = cfg_for(dt=0.1, horizon=1.0, sample_intervals=1, initial_condition={"kind": "random", "s": 4.0, "l2": 20.0})
        res, _ = richardson_check(cfg, 1e-9)
        assert not res.passed
        assert res.error_estimate > res.tolerance


class TestLockstep:
    def test_matches_plain_run(self):
        cfg = cfg_for(ModelKind.LERAY_ALPHA, resolution=32, dt=5e-3)
        plain = simulate(cfg, store_lattice=build_lattice(cfg.box_length, 16))
        checked, res = simulate_checked(cfg, 1e-9, store_lattice=build_lattice(cfg.box_length, 16))
        assert all(np.array_equal(x, y) for x, y in zip(plain.states, checked.states))
        assert np.array_equal(plain.tail_sq, checked.tail_sq)
        assert res.passed

    def test_agrees_with_rerun_check(self):
        cfg = cfg_for(dt=0.1, horizon=1.0, sample_intervals=1, initial_condition={"kind": "random", "s": 4.0, "l2": 20.0})
        _, a = simulate_checked(cfg, 1e-9)
        b, _ = richardson_check(cfg, 1e-9)
        assert a.error_estimate == pytest.approx(b.error_estimate, rel=1e-12)
        assert not a.passed

    def test_stored_run_rejected_by_rerun_check(self):
        cfg = cfg_for(resolution=32)
        tr = simulate(cfg, store_lattice=build_lattice(cfg.box_length, 16))
        with pytest.raises(ValueError):
            richardson_check(cfg, coarse=tr)
