"""Tracking tests: pulse model, LM fitter against a grid oracle, experiments."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkmeans.core import permutation_accuracy
from gkmeans.lloyd import LloydConfig, multistart
from gkmeans.seeds import generator
from gkmeans.tracking import (
    PulseObservation,
    SensorNet,
    TrackParams,
    emission_index,
    fit_track,
    generate_pulses,
    paper_net,
    paper_tracks,
    predict_pulse,
    pulse_arrays,
    pulse_cost,
    pulse_problem,
    subsample_experiment,
    tracking_eta,
)


def model_pulses(track, net, frames, sensors=None):
    """Noise-free pulses generated directly from the prediction map."""
    out = []
    for m in range(frames):
        for p in sensors or range(len(net.sensor_positions)):
            t_hat, a_hat = predict_pulse(track, net, p, m)
            out.append(PulseObservation(t_hat, a_hat, p))
    return out


class TestEmissionIndex:
    def test_examples(self):
        assert emission_index(2.5, 1.0) == 2
        assert emission_index(3.0, 1.0) == 3
        assert emission_index(0.9, 0.25) == 3

    def test_array_input(self):
        out = emission_index(np.array([0.0, 0.999, 1.0, 7.25]), 1.0)
        assert out.tolist() == [0, 0, 1, 7]

    @given(st.integers(0, 500), st.sampled_from([0.25, 0.5, 1.0, 2.0]))
    @settings(max_examples=60, deadline=None)
    def test_boundary_is_inclusive(self, m, tau):
        assert emission_index(m * tau, tau) == m

    @given(st.floats(0.0, 1000.0), st.sampled_from([0.25, 0.5, 1.0, 2.0]))
    @settings(max_examples=60, deadline=None)
    def test_definition(self, t, tau):
        m = emission_index(t, tau)
        assert m * tau <= t
        assert (m + 1) * tau > t


class TestPredictPulse:
    def test_target_at_sensor(self):
        net = paper_net()
        track = TrackParams(x0=net.sensor_positions[2], v=(0.0, 0.0), o=0.4)
        t_hat, a_hat = predict_pulse(track, net, 2, 5)
        assert t_hat == pytest.approx(0.4 + 5.0)
        assert a_hat == pytest.approx(math.log(net.alpha / net.beta))

    def test_hand_computed_example(self):
        net = SensorNet(
            sensor_positions=((0.0, 0.0),),
            c=100.0,
            tau=1.0,
            alpha=1e8,
            beta=5.0,
            sigma=0.03,
            nu=0.05,
            T=10.0,
        )
        track = TrackParams(x0=(3.0, 4.0), v=(1.0, 1.0), o=0.3)
        t_hat, a_hat = predict_pulse(track, net, 0, 0)
        assert t_hat == pytest.approx(0.35)
        assert a_hat == pytest.approx(math.log(1e8 / 30.0))

    def test_doubling_speed_halves_delay_term(self):
        net = paper_net()
        fast = replace(net, c=200.0)
        track = TrackParams(x0=(3.0, 4.0), v=(0.01, 0.0), o=0.25)
        t1, a1 = predict_pulse(track, net, 0, 3)
        t2, a2 = predict_pulse(track, fast, 0, 3)
        delay1 = t1 - 0.25 - 3.0
        delay2 = t2 - 0.25 - 3.0
        assert delay2 == pytest.approx(delay1 / 2.0)
        assert a1 == a2


class TestPulseCost:
    def test_zero_at_prediction(self):
        net = paper_net()
        track = TrackParams(x0=(1.0, 2.0), v=(0.001, 0.0), o=0.3)
        t_hat, a_hat = predict_pulse(track, net, 1, 4)
        assert pulse_cost(PulseObservation(t_hat, a_hat, 1), track, net) == pytest.approx(0.0, abs=1e-18)

    def test_unit_normalized_residuals(self):
        net = paper_net()
        track = TrackParams(x0=(1.0, 2.0), v=(0.0, 0.0), o=0.3)
        t_hat, a_hat = predict_pulse(track, net, 0, 2)
        obs = PulseObservation(t_hat + net.sigma, a_hat, 0)
        assert pulse_cost(obs, track, net) == pytest.approx(1.0)

    def test_hand_arithmetic(self):
        net = paper_net()  # sigma=0.03, nu=0.05
        track = TrackParams(x0=(1.0, 2.0), v=(0.0, 0.0), o=0.3)
        t_hat, a_hat = predict_pulse(track, net, 2, 0)
        obs = PulseObservation(t_hat + 0.06, a_hat + 0.10, 2)
        assert pulse_cost(obs, track, net) == pytest.approx(8.0)

    def test_positive_unless_exact(self):
        net = paper_net()
        track = TrackParams(x0=(1.0, 2.0), v=(0.0, 0.0), o=0.3)
        t_hat, a_hat = predict_pulse(track, net, 0, 1)
        assert pulse_cost(PulseObservation(t_hat + 1e-6, a_hat, 0), track, net) > 0.0


class TestGeneratePulses:
    def test_zero_noise_arrivals_increase_with_frame(self):
        net = replace(paper_net(T=30.0), sigma=1e-15, nu=1e-15)
        track = TrackParams(x0=(2.0, 3.0), v=(0.01, 0.0), o=0.5)
        pulses, labels = generate_pulses([track], net, generator(0, 0))
        t, a, p = pulse_arrays(pulses)
        for sensor in range(3):
            ts = t[p == sensor]
            assert np.all(np.diff(ts) > 0)

    def test_pulse_count(self):
        net = paper_net(T=200.0)
        pulses, labels = generate_pulses(paper_tracks(), net, generator(0, 1))
        assert len(pulses) == 2 * 200 * 3
        assert np.bincount(labels).tolist() == [600, 600]

    def test_paper_parameters_sane(self):
        net = paper_net(T=200.0)
        pulses, _ = generate_pulses(paper_tracks(), net, generator(0, 2))
        t, a, p = pulse_arrays(pulses)
        assert t.min() >= 0.0 and t.max() <= 200.0
        assert set(np.unique(p)) == {0, 1, 2}
        d_implied = np.sqrt(net.alpha * np.exp(-a) - net.beta)
        assert 0.0 < d_implied.min() and d_implied.max() < 50.0


class TestFitTrack:
    def test_recovers_exactly_from_truth_start(self):
        net = paper_net(T=40.0)
        truth = TrackParams(x0=(1.5, 4.0), v=(0.004, -0.006), o=0.45)
        pulses = model_pulses(truth, net, 40)
        fit = fit_track(pulses, net, 1, generator(1, 0), warm=truth)
        assert np.max(np.abs(fit.theta() - truth.theta())) < 1e-8
        assert fit.converged

    def test_recovers_from_perturbed_start(self):
        net = paper_net(T=40.0)
        truth = TrackParams(x0=(1.5, 4.0), v=(0.004, -0.006), o=0.45)
        pulses = model_pulses(truth, net, 40)
        start = TrackParams(
            x0=(1.5 * 1.1, 4.0 * 1.1), v=(0.004 * 1.1, -0.006 * 1.1), o=0.45 * 1.1
        )
        fit = fit_track(pulses, net, 1, generator(1, 1), warm=start)
        assert np.max(np.abs(np.array(fit.x0) - np.array(truth.x0))) < 1e-6
        assert np.max(np.abs(np.array(fit.v) - np.array(truth.v))) < 1e-6

    def test_cold_start_recovers(self):
        net = paper_net(T=40.0)
        truth = TrackParams(x0=(-2.0, 3.0), v=(0.01, 0.004), o=0.7)
        pulses = model_pulses(truth, net, 40)
        fit = fit_track(pulses, net, 5, generator(1, 2))
        assert np.max(np.abs(fit.theta() - truth.theta())) < 1e-6

    def test_matches_grid_search_oracle(self):
        net = paper_net(T=2.0)
        truth = TrackParams(x0=(1.0, 2.0), v=(0.01, -0.02), o=0.4)
        pulses = model_pulses(truth, net, 2)
        t, a, p_idx = pulse_arrays(pulses)
        fit = fit_track(pulses, net, 5, generator(1, 3))

        spans = np.array([0.5, 0.5, 0.05, 0.05, 0.05])
        axes = [np.linspace(c - s, c + s, 7) for c, s in zip(truth.theta(), spans)]
        best_cost, best_theta = np.inf, None
        for x0x in axes[0]:
            for x0y in axes[1]:
                for vx in axes[2]:
                    for vy in axes[3]:
                        for o in axes[4]:
                            cand = TrackParams(x0=(x0x, x0y), v=(vx, vy), o=o)
                            cost = sum(pulse_cost(q, cand, net) for q in pulses)
                            if cost < best_cost:
                                best_cost, best_theta = cost, cand.theta()
        resolution = spans / 3.0  # one grid step
        assert np.all(np.abs(fit.theta() - best_theta) <= resolution + 1e-9)
        fit_cost = sum(pulse_cost(q, fit, net) for q in pulses)
        assert fit_cost <= best_cost + 1e-9

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValueError):
            fit_track([], paper_net(), 1, generator(1, 4))

    def test_translation_equivariance(self):
        net = paper_net(T=30.0)
        shift = np.array([12.0, -7.0])
        net2 = replace(
            net, sensor_positions=tuple((x + shift[0], y + shift[1]) for x, y in net.sensor_positions)
        )
        truth = TrackParams(x0=(1.0, 2.0), v=(0.005, 0.001), o=0.3)
        truth2 = TrackParams(x0=(1.0 + shift[0], 2.0 + shift[1]), v=truth.v, o=truth.o)
        pulses = model_pulses(truth, net, 30)
        pulses2 = model_pulses(truth2, net2, 30)
        for q, q2 in zip(pulses, pulses2):
            assert q.t == pytest.approx(q2.t, abs=1e-12)
            assert q.a == pytest.approx(q2.a, abs=1e-12)
        fit = fit_track(pulses, net, 3, generator(1, 5))
        fit2 = fit_track(pulses2, net2, 3, generator(1, 5))
        assert np.array(fit2.x0) - np.array(fit.x0) == pytest.approx(shift, abs=1e-9)

    def test_offset_wrapped_into_frame(self):
        net = paper_net(T=20.0)
        truth = TrackParams(x0=(1.0, 2.0), v=(0.0, 0.0), o=0.6)
        pulses = model_pulses(truth, net, 20)
        fit = fit_track(pulses, net, 3, generator(1, 6))
        assert 0.0 <= fit.o < net.tau


class TestTrackingEta:
    def test_exact_match(self):
        tracks = paper_tracks()
        assert tracking_eta(tracks, tracks, 200.0) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset(self):
        truth = [TrackParams(x0=(0.0, 0.0), v=(0.0, 0.0), o=0.1)]
        fitted = [TrackParams(x0=(1.0, 0.0), v=(0.0, 0.0), o=0.9)]
        assert tracking_eta(fitted, truth, 4.0) == pytest.approx(2.0, abs=1e-12)

    def test_swapped_labels(self):
        tracks = paper_tracks()
        assert tracking_eta(tracks[::-1], tracks, 200.0) == pytest.approx(0.0, abs=1e-12)

    def test_count_mismatch(self):
        tracks = paper_tracks()
        with pytest.raises(ValueError):
            tracking_eta(tracks[:1], tracks, 200.0)


class TestTrackingClustering:
    def test_zero_noise_assignment_is_exact(self):
        net = replace(paper_net(T=50.0), sigma=1e-9, nu=1e-9)
        tracks = paper_tracks()
        pulses, labels = generate_pulses(tracks, net, generator(2, 0))
        problem = pulse_problem(pulses, net)
        costs = np.stack([problem.cost_rows(tr) for tr in tracks])
        part = np.argmin(costs, axis=0)
        assert permutation_accuracy(part, labels) == 100.0

    def test_lloyd_monotone_energy(self):
        net = paper_net(T=60.0)
        tracks = paper_tracks()
        pulses, labels = generate_pulses(tracks, net, generator(2, 1))
        problem = pulse_problem(pulses, net)
        res = multistart(problem, LloydConfig(k=2, lam=0.0), 3, seed_seq=np.random.SeedSequence(4))
        assert np.all(np.diff(res.energy_history) <= 1e-9)
        assert res.converged
        assert permutation_accuracy(res.partition, labels) == 100.0

    def test_subsample_deterministic(self):
        net = paper_net(T=40.0)
        tracks = paper_tracks()
        pulses, labels = generate_pulses(tracks, net, generator(2, 2))
        kwargs = dict(
            fractions=[1.0], trials=2, k=2, net=net, truth=tracks, master_seed=5, n_starts=2
        )
        a = subsample_experiment(pulses, labels, **kwargs)
        b = subsample_experiment(pulses, labels, **kwargs)
        assert a == b

    def test_subsample_rejects_bad_fraction(self):
        net = paper_net(T=40.0)
        tracks = paper_tracks()
        pulses, labels = generate_pulses(tracks, net, generator(2, 3))
        with pytest.raises(ValueError):
            subsample_experiment(pulses, labels, [0.0], 1, 2, net, tracks, 1)
