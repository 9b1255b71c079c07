"""Local-time estimators and the identities they are built to verify."""

import io
import math

import numpy as np
import pytest

from skewdiff.errors import FrameMismatch, ZeroLocalTime
from skewdiff.localtime import (
    check_relloc,
    default_band,
    export_localtime_csv,
    markovian_from_symmetric,
    occupation_estimate,
    occupation_lower,
    occupation_upper,
    relation_ratios,
    tanaka_residual,
)
from skewdiff.model import builtin_curve, validate_params
from skewdiff.paths import Frame, GridSpec, Path, ReflectionLog, simulate_y_path, square_path

CONSTANT_ONE = builtin_curve("constant", 4.0, level=1.0)
PARAMS = validate_params(2.0, 2.0, 1.0, 0.75)


def _synthetic_path(values, T=1.0, frame=Frame.Y, params=PARAMS):
    values = np.asarray(values, dtype=float)
    grid = GridSpec(T=T, n_steps=values.size - 1)
    return Path(grid=grid, frame=frame, seed=0, params=params, values=values,
                gauss=np.zeros(values.size - 1), reflections=ReflectionLog())


def _skew_path(n_steps=2 ** 13, seed=0, params=PARAMS, T=2.0):
    grid = GridSpec(T=T, n_steps=n_steps)
    return simulate_y_path(params, CONSTANT_ONE, 1.0, grid, seed=seed)


class TestOccupation:
    def test_path_far_above_barrier_gives_zero(self):
        path = _synthetic_path(np.full(65, 5.0))
        est = occupation_estimate(path, 1.0, eps=0.1)
        assert est.upper[-1] == 0.0
        assert est.lower[-1] == 0.0

    def test_frozen_at_barrier_rate(self):
        # indicator fires every step: upper mass (sigma^2/4) * t / eps
        path = _synthetic_path(np.full(101, 1.0), T=1.0)
        eps = 0.05
        est = occupation_upper(path, 1.0, eps)
        expected = PARAMS.sigma ** 2 / 4.0 * 1.0 / eps
        assert est.upper[-1] == pytest.approx(expected)
        assert est.lower is not None and est.lower[-1] == 0.0

    def test_lower_mirror(self):
        path = _synthetic_path(np.full(101, 0.98), T=1.0)
        est = occupation_lower(path, 1.0, eps=0.05)
        assert est.lower[-1] > 0.0
        assert est.upper[-1] == 0.0

    def test_monotone_and_symmetric_identity(self):
        path = _skew_path()
        est = occupation_estimate(path, lambda t: CONSTANT_ONE.lam(t),
                                  default_band(path))
        assert np.all(np.diff(est.upper) >= 0.0)
        assert np.all(np.diff(est.lower) >= 0.0)
        assert np.array_equal(est.symmetric, (est.upper + est.lower) / 2.0)

    def test_support_only_within_band(self):
        path = _skew_path(n_steps=1024)
        eps = default_band(path)
        est = occupation_estimate(path, 1.0, eps)
        grows = np.diff(est.symmetric) > 0.0
        near = np.abs(path.values[:-1] - 1.0) <= eps
        assert np.all(near[grows])

    def test_r_frame_rejected(self):
        path = square_path(_skew_path(n_steps=256))
        with pytest.raises(FrameMismatch):
            occupation_estimate(path, 1.0, 0.1)

    def test_band_shrink_occupation_fraction(self):
        # the barrier level set is Lebesgue-null: halving the band must
        # shrink the occupation fraction to at most 0.75 of itself on average
        fractions = {0.5: [], 1.0: []}
        for seed in range(20):
            path = _skew_path(n_steps=2 ** 12, seed=seed)
            eps = default_band(path)
            diff = np.abs(path.values[:-1] - 1.0)
            for mult in fractions:
                fractions[mult].append(float(np.mean(diff < mult * eps)))
        assert np.mean(fractions[0.5]) <= 0.75 * np.mean(fractions[1.0])


class TestTanaka:
    def test_no_touch_small_residual(self):
        params = validate_params(2.0, 2.0, 1.0, 0.75)
        grid = GridSpec(T=0.25, n_steps=4096)
        curve = builtin_curve("constant", 1.0, level=8.0)
        path = simulate_y_path(params, curve, 1.0, grid, seed=1)
        assert float(np.max(path.values)) < 7.0
        est = tanaka_residual(path, 8.0)
        assert abs(est.symmetric[-1]) <= 0.05

    def test_constant_path_at_barrier_is_zero(self):
        path = _synthetic_path(np.full(33, 1.0))
        est = tanaka_residual(path, 1.0)
        assert np.all(est.symmetric == 0.0)

    def test_cross_estimator_agreement(self):
        # occupation and Tanaka target the same symmetric local time; the
        # level is away from any mirror barrier so both are applicable
        curve = builtin_curve("constant", 4.0, level=0.0)
        occ_t, tan_t = [], []
        for seed in range(40):
            path = simulate_y_path(PARAMS, curve, 1.0, GridSpec(2.0, 2 ** 13),
                                   seed=seed)
            eps = default_band(path)
            occ_t.append(occupation_estimate(path, 1.0, eps).symmetric[-1])
            tan_t.append(tanaka_residual(path, 1.0).symmetric[-1])
        occ, tan = float(np.mean(occ_t)), float(np.mean(tan_t))
        assert occ > 0.1
        assert abs(occ - tan) / occ <= 0.10


class TestRelloc:
    def test_frames_checked(self):
        y = _skew_path(n_steps=256)
        r = square_path(y)
        with pytest.raises(FrameMismatch):
            check_relloc(y, y, CONSTANT_ONE, 0.05)
        with pytest.raises(FrameMismatch):
            check_relloc(r, r, CONSTANT_ONE, 0.05)

    def test_mismatched_values_rejected(self):
        y = _skew_path(n_steps=256)
        fake = _synthetic_path(np.full(257, 2.0), T=2.0, frame=Frame.R)
        with pytest.raises(FrameMismatch):
            check_relloc(fake, y, CONSTANT_ONE, 0.05)

    def test_no_touch_gives_zero_both_sides(self):
        params = validate_params(2.0, 2.0, 1.0, 0.75)
        curve = builtin_curve("constant", 1.0, level=9.0)
        y = simulate_y_path(params, curve, 1.0, GridSpec(1.0, 1024), seed=3)
        rep = check_relloc(square_path(y), y, curve, 0.02)
        assert rep.r_terminal == 0.0
        assert rep.y_weighted == 0.0

    def test_residual_small_on_skew_paths(self):
        residuals = []
        for seed in range(10):
            y = _skew_path(n_steps=2 ** 14, seed=seed)
            eps = default_band(y)
            rep = check_relloc(square_path(y), y, CONSTANT_ONE, eps)
            residuals.append(rep.residual)
        assert float(np.mean(residuals)) <= 0.10

    def test_weight_factor_at_higher_barrier(self):
        # barrier at 2: d<R>-mass per unit Y local time approaches 2*sqrt(R)=4
        params = validate_params(2.0, 2.0, 0.25, 0.75)
        curve = builtin_curve("constant", 2.0, level=2.0)
        factors = []
        for seed in range(10):
            y = simulate_y_path(params, curve, 2.0, GridSpec(2.0, 2 ** 14),
                                seed=seed)
            eps = default_band(y)
            rep = check_relloc(square_path(y), y, curve, eps)
            sym = occupation_estimate(y, 2.0, eps).symmetric[-1]
            if sym > 0.1:
                factors.append(rep.r_terminal / sym)
        assert factors and float(np.mean(factors)) == pytest.approx(4.0, rel=0.10)


class TestRelationRatios:
    def test_symmetric_p_targets_one(self):
        params = validate_params(2.0, 2.0, 1.0, 0.5)
        ratios = []
        for seed in range(10):
            path = simulate_y_path(params, CONSTANT_ONE, 1.0,
                                   GridSpec(2.0, 2 ** 13), seed=seed)
            est = occupation_estimate(path, 1.0, default_band(path))
            ratios.append(relation_ratios(est, 0.5))
        up, lo = np.mean(ratios, axis=0)
        assert up == pytest.approx(1.0, rel=0.1)
        assert lo == pytest.approx(1.0, rel=0.1)

    def test_skew_targets(self):
        ratios = []
        for seed in range(20):
            path = _skew_path(n_steps=2 ** 13, seed=seed)
            est = occupation_estimate(path, 1.0, default_band(path))
            ratios.append(relation_ratios(est, 0.75))
        up, lo = np.mean(ratios, axis=0)
        assert up == pytest.approx(1.5, rel=0.10)
        assert lo == pytest.approx(0.5, rel=0.10)

    def test_zero_contact_raises(self):
        path = _synthetic_path(np.full(65, 5.0))
        est = occupation_estimate(path, 1.0, 0.01)
        with pytest.raises(ZeroLocalTime):
            relation_ratios(est, 0.75)


class TestMarkovian:
    def test_identity_when_barrier_positive(self):
        path = _skew_path(n_steps=1024)
        est = occupation_estimate(path, 1.0, default_band(path))
        out = markovian_from_symmetric(est, 0.75, np.ones(1024, dtype=bool))
        assert np.allclose(out, est.symmetric)

    def test_scaling_when_barrier_at_edge(self):
        path = _skew_path(n_steps=1024)
        est = occupation_estimate(path, 1.0, default_band(path))
        out = markovian_from_symmetric(est, 0.75, np.zeros(1024, dtype=bool))
        assert np.allclose(out, est.symmetric / 0.75)

    def test_indicator_length_checked(self):
        path = _skew_path(n_steps=1024)
        est = occupation_estimate(path, 1.0, default_band(path))
        with pytest.raises(ValueError):
            markovian_from_symmetric(est, 0.75, np.ones(7, dtype=bool))


class TestCsvExport:
    def test_columns_and_rows(self):
        path = _skew_path(n_steps=64)
        est = occupation_estimate(path, 1.0, default_band(path))
        buf = io.StringIO()
        export_localtime_csv(est, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "t,upper,lower,symmetric"
        assert len(lines) == 66

    def test_missing_components_blank(self):
        path = _skew_path(n_steps=64)
        est = tanaka_residual(path, 1.0)
        buf = io.StringIO()
        export_localtime_csv(est, buf)
        first_row = buf.getvalue().splitlines()[1].split(",")
        assert first_row[1] == "" and first_row[2] == ""
