"""Switching signals, co-simulation, bracket verification, CSV export."""

import dataclasses
import io
import re

import numpy as np
import pytest

from swposobs import sim, synth

from conftest import random_passing_scenario


class TestSwitchingSignal:
    def test_single_subsystem_constant(self):
        sig = sim.make_switching_signal(1, 10.0, 0.5, seed=0)
        assert sig.times.tolist() == [0.0]
        assert sig.indices.tolist() == [1]

    def test_deterministic(self):
        a = sim.make_switching_signal(3, 10.0, 0.5, seed=42)
        b = sim.make_switching_signal(3, 10.0, 0.5, seed=42)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.indices, b.indices)

    def test_validity(self):
        sig = sim.make_switching_signal(3, 10.0, 0.5, seed=7)
        assert sig.times[0] == 0.0
        assert np.all(np.diff(sig.times) >= 0.5)
        assert np.all(np.diff(sig.times) <= 1.0 + 1e-12)
        assert sig.times[-1] < 10.0
        assert np.all((sig.indices >= 1) & (sig.indices <= 3))
        assert np.all(np.diff(sig.indices) != 0)

    def test_degenerate_dwell_yields_single_interval(self):
        assert sim.make_switching_signal(3, 1.0, 2.0, seed=0).times.size == 1
        assert sim.make_switching_signal(3, 1.0, 0.0, seed=0).times.size == 1

    def test_discrete_whole_step_dwells(self):
        sig = sim.make_switching_signal(3, 60, 5, seed=7, domain=synth.DISCRETE)
        assert np.all(sig.times == np.round(sig.times))
        assert np.all(np.diff(sig.times) >= 1.0)

    def test_index_at_is_right_continuous(self):
        sig = sim.SwitchingSignal(times=[0.0, 1.0], indices=[1, 2], n_subsystems=2)
        assert sig.index_at(0.0) == 1
        assert sig.index_at(0.999) == 1
        assert sig.index_at(1.0) == 2
        assert sig.index_at(5.0) == 2

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            sim.SwitchingSignal(times=[0.5, 1.0], indices=[1, 2], n_subsystems=2)
        with pytest.raises(ValueError):
            sim.SwitchingSignal(times=[0.0, 0.0], indices=[1, 2], n_subsystems=2)
        with pytest.raises(ValueError):
            sim.SwitchingSignal(times=[0.0, 1.0], indices=[1, 3], n_subsystems=2)
        with pytest.raises(ValueError):
            sim.SwitchingSignal(times=[0.0, 1.0], indices=[1, 2], n_subsystems=2,
                                min_dwell=2.0)


class TestTruthValidation:
    def test_fixture_truths_admissible(self, problem_41, problem_42):
        sim.validate_truth(problem_41.system, problem_41.truth)
        sim.validate_truth(problem_42.system, problem_42.truth)

    def test_out_of_interval_entry_named(self, problem_41):
        mats = [m.copy() for m in problem_41.truth.a]
        mats[1][0, 0] = 100.0
        bad = sim.TrueSystem(a=tuple(mats), x0=problem_41.truth.x0)
        with pytest.raises(ValueError, match=r"A\[1\] entry \(0, 0\)"):
            sim.validate_truth(problem_41.system, bad)

    def test_out_of_box_start_named(self, problem_41):
        bad = sim.TrueSystem(a=problem_41.truth.a, x0=np.zeros(5))
        with pytest.raises(ValueError, match="x0"):
            sim.validate_truth(problem_41.system, bad)

    def test_sample_truth_admissible_and_deterministic(self, problem_41):
        t1 = sim.sample_truth(problem_41.system, seed=5)
        t2 = sim.sample_truth(problem_41.system, seed=5)
        sim.validate_truth(problem_41.system, t1)
        assert all(np.array_equal(a, b) for a, b in zip(t1.a, t2.a))
        assert np.array_equal(t1.x0, t2.x0)


class TestContinuousSimulation:
    def test_bracket_holds_fixture_41(self, trace_41):
        report = sim.verify_bracket(trace_41, 1e-6)
        assert report.total_violations == 0
        assert report.ok
        assert report.outputs_exact
        assert np.isfinite(report.sup_xi_norm)
        assert report.xi_norm_end < report.xi_norm_start

    def test_grid_contains_switch_times(self, trace_41, problem_41):
        sw = problem_41.switching
        sig = sim.make_switching_signal(3, sw["horizon"], sw["min_dwell"], sw["seed"])
        for t in sig.times:
            assert np.any(trace_41.times == t)

    def test_order_chain(self, trace_41):
        slack = 1e-9
        assert np.all(trace_41.omega_lower <= trace_41.omega_mid_lower + slack)
        assert np.all(trace_41.omega_mid_lower <= trace_41.omega_mid_upper + slack)
        assert np.all(trace_41.omega_mid_upper <= trace_41.omega_upper + slack)

    def test_proof_errors_stay_nonnegative(self, trace_41):
        assert trace_41.eps_lower.min() >= -1e-6
        assert trace_41.eps_upper.min() >= -1e-6

    def test_agrees_with_half_step_rerun(self, problem_41, trace_41):
        sw = problem_41.switching
        sig = sim.make_switching_signal(3, sw["horizon"], sw["min_dwell"], sw["seed"])
        half = sim.simulate_continuous(
            problem_41.system, problem_41.truth, problem_41.build_observer(), sig,
            step=problem_41.sim_settings["step"] / 2.0, horizon=sw["horizon"],
        )
        assert half.eps_lower.min() >= -1e-6
        idx = np.searchsorted(half.times, trace_41.times)
        assert np.array_equal(half.times[idx], trace_41.times)
        assert np.abs(half.x[idx] - trace_41.x).max() < 1e-7
        assert np.abs(half.eps_lower[idx] - trace_41.eps_lower).max() < 1e-7

    def test_zero_width_intervals_collapse_estimates(self, problem_41):
        truth = problem_41.truth
        system = synth.IntervalSystem(
            domain=synth.CONTINUOUS, p=2, a_lower=truth.a, a_upper=truth.a,
            x0_lower=truth.x0, x0_upper=truth.x0,
        )
        gain = problem_41.observer_gain
        fx0 = truth.x0[2:] - gain @ truth.x0[:2]
        obs = synth.build_observer(system, gain, fx0, fx0)
        sig = sim.make_switching_signal(3, 1.0, 0.2, seed=3)
        trace = sim.simulate_continuous(system, truth, obs, sig, step=1e-3, horizon=1.0)
        assert np.abs(trace.xhat_lower - trace.xhat_upper).max() < 1e-9
        assert np.abs(trace.xhat_lower - trace.x).max() < 1e-9

    def test_estimate_continuity_scales_with_step(self, problem_41):
        sw = problem_41.switching
        sig = sim.make_switching_signal(3, sw["horizon"], sw["min_dwell"], sw["seed"])
        obs = problem_41.build_observer()

        def max_switch_jump(step):
            trace = sim.simulate_continuous(problem_41.system, problem_41.truth, obs,
                                            sig, step=step, horizon=sw["horizon"])
            jumps = []
            for t in sig.times[1:]:
                j = int(np.flatnonzero(trace.times == t)[0])
                jumps.append(np.abs(trace.xhat_lower[j] - trace.xhat_lower[j - 1]).max())
                jumps.append(np.abs(trace.xhat_upper[j] - trace.xhat_upper[j - 1]).max())
            return max(jumps)

        coarse = max_switch_jump(2e-3)
        fine = max_switch_jump(1e-3)
        assert fine <= 0.75 * coarse + 1e-9

    def test_divergent_truth_reported_with_time(self):
        a = np.full((2, 2), 500.0)
        system = synth.IntervalSystem(
            domain=synth.CONTINUOUS, p=1, a_lower=(a,), a_upper=(a,),
            x0_lower=[1.0, 1.0], x0_upper=[1.0, 1.0],
        )
        obs = synth.build_observer(system, np.zeros((1, 1)), [0.0], [2.0])
        truth = sim.TrueSystem(a=(a,), x0=[1.0, 1.0])
        sig = sim.make_switching_signal(1, 2.0, 0.5, seed=0)
        with pytest.raises(FloatingPointError, match="t ="):
            sim.simulate_continuous(system, truth, obs, sig, step=1e-3, horizon=2.0)

    def test_step_validation(self, problem_41):
        sig = sim.make_switching_signal(3, 1.0, 0.2, seed=0)
        with pytest.raises(ValueError):
            sim.simulate_continuous(problem_41.system, problem_41.truth,
                                    problem_41.build_observer(), sig, step=0.0, horizon=1.0)

    def test_matches_adaptive_reference_integrator(self, problem_41, trace_41):
        integrate = pytest.importorskip("scipy.integrate")
        from swposobs.sim import _coupled_matrix

        system = problem_41.system
        obs = problem_41.build_observer()
        truth = problem_41.truth
        mats = [_coupled_matrix(truth.a[i], obs, i, system.n, system.p)
                for i in range(system.nsub)]
        z = np.concatenate([truth.x0, obs.omega0_lower, obs.omega0_upper,
                            obs.omega0_lower, obs.omega0_upper])
        sw = problem_41.switching
        sig = sim.make_switching_signal(3, sw["horizon"], sw["min_dwell"], sw["seed"])
        bounds = np.concatenate([sig.times, [sw["horizon"]]])
        ref_rows = {0.0: z.copy()}
        for k in range(sig.times.size):
            t0, t1 = bounds[k], bounds[k + 1]
            mat = mats[sig.indices[k] - 1]
            wanted = trace_41.times[(trace_41.times > t0) & (trace_41.times <= t1)]
            sol = integrate.solve_ivp(lambda _, y: mat @ y, (t0, t1), z,
                                      t_eval=wanted, rtol=1e-12, atol=1e-12,
                                      method="DOP853")
            assert sol.success
            for t, col in zip(sol.t, sol.y.T):
                ref_rows[float(t)] = col
            z = sol.y[:, -1]
        n, m = system.n, obs.order
        worst = 0.0
        for j, t in enumerate(trace_41.times):
            ref = ref_rows[float(t)]
            worst = max(worst, np.abs(trace_41.x[j] - ref[:n]).max(),
                        np.abs(trace_41.omega_lower[j] - ref[n:n + m]).max(),
                        np.abs(trace_41.omega_upper[j] - ref[n + m:n + 2 * m]).max())
        assert worst < 1e-7, worst

    def test_convergence_order_quick(self, problem_41):
        sig = sim.make_switching_signal(3, 0.5, 0.2, seed=11)
        obs = problem_41.build_observer()

        def run(step):
            return sim.simulate_continuous(problem_41.system, problem_41.truth, obs,
                                           sig, step=step, horizon=0.5)

        traces = [run(h) for h in (2e-3, 1e-3, 5e-4)]

        def diff(a, b):
            idx = np.searchsorted(b.times, a.times)
            assert np.array_equal(b.times[idx], a.times)
            return max(np.abs(b.x[idx] - a.x).max(),
                       np.abs(b.omega_lower[idx] - a.omega_lower).max(),
                       np.abs(b.omega_upper[idx] - a.omega_upper).max())

        d1 = diff(traces[0], traces[1])
        d2 = diff(traces[1], traces[2])
        assert np.log2(d1 / d2) >= 3.5


class TestDiscreteSimulation:
    def test_bracket_holds_fixture_42(self, trace_42):
        report = sim.verify_bracket(trace_42, 1e-12)
        assert report.total_violations == 0
        assert report.outputs_exact

    def test_gap_decays_after_transient(self, trace_42):
        norms = np.linalg.norm(trace_42.xi, axis=1)
        assert norms[-1] < 0.05 * norms[0]
        tail = norms[1:]
        assert np.all(tail[1:] <= tail[:-1] * (1.0 + 1e-12))

    def test_zero_truth_dynamics(self, problem_42):
        base = problem_42.system
        system = synth.IntervalSystem(
            domain=synth.DISCRETE, p=base.p,
            a_lower=tuple(np.zeros((4, 4)) for _ in range(3)),
            a_upper=base.a_upper,
            x0_lower=base.x0_lower, x0_upper=base.x0_upper,
        )
        truth = sim.TrueSystem(a=system.a_lower, x0=system.x0_lower)
        gain = np.zeros((2, 2))
        obs = synth.build_observer(system, gain, *synth.tight_omega(system, gain))
        sig = sim.make_switching_signal(3, 20, 2, seed=1, domain=synth.DISCRETE)
        trace = sim.simulate_discrete(system, truth, obs, sig, 20)
        assert np.all(trace.x[1:] == 0.0)
        assert np.all(trace.omega_lower[1:] == 0.0)
        assert np.all(trace.xhat_lower[1:] == 0.0)
        assert np.abs(trace.omega_upper[-1]).max() < np.abs(trace.omega_upper[0]).max()

    def test_horizon_validation(self, problem_42):
        sig = sim.make_switching_signal(3, 10, 2, seed=1, domain=synth.DISCRETE)
        with pytest.raises(ValueError):
            sim.simulate_discrete(problem_42.system, problem_42.truth,
                                  problem_42.build_observer(), sig, 0)


class TestVerifyBracket:
    def test_constructed_upper_violation(self, trace_42):
        broken = dataclasses.replace(trace_42, xhat_upper=trace_42.xhat_upper - 1.0)
        report = sim.verify_bracket(broken, 1e-12)
        assert report.violations_upper > 0
        assert report.violations_lower == 0
        assert report.worst_location[0] == "upper"
        assert report.worst_violation > 0.9

    def test_constructed_nonneg_violation(self, trace_42):
        broken = dataclasses.replace(trace_42, xhat_lower=trace_42.xhat_lower - 1.0)
        report = sim.verify_bracket(broken, 1e-12)
        assert report.violations_nonneg > 0

    def test_tol_validation(self, trace_42):
        with pytest.raises(ValueError):
            sim.verify_bracket(trace_42, -1.0)


class TestCsvExport:
    def test_header_and_shape(self, trace_42):
        buf = io.StringIO()
        sim.export_csv(trace_42, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == (
            "t,x1,x2,x3,x4,xhatl1,xhatl2,xhatl3,xhatl4,"
            "xhatu1,xhatu2,xhatu3,xhatu4,xi1,xi2,xi3,xi4,sigma"
        )
        assert len(lines) == trace_42.times.size + 1
        first = lines[1].split(",")
        assert len(first) == 18
        assert re.fullmatch(r"-?\d\.\d{12}e[+-]\d{2,3}", first[1])
        assert first[-1] == str(trace_42.sigma[0])

    def test_round_trip_values(self, trace_42):
        buf = io.StringIO()
        sim.export_csv(trace_42, buf)
        buf.seek(0)
        data = np.genfromtxt(buf, delimiter=",", skip_header=1)
        assert data.shape == (trace_42.times.size, 18)
        assert np.allclose(data[:, 1:5], trace_42.x, rtol=1e-11, atol=1e-300)
        assert np.array_equal(data[:, -1].astype(int), trace_42.sigma)


class TestRandomizedBracketMini:
    @pytest.mark.parametrize("domain", [synth.CONTINUOUS, synth.DISCRETE])
    def test_random_scenarios(self, domain):
        rng = np.random.default_rng(99)
        for case in range(10):
            system, obs, truth = random_passing_scenario(rng, domain)
            for seed in range(2):
                if domain == synth.CONTINUOUS:
                    sig = sim.make_switching_signal(system.nsub, 0.5, 0.1, seed=seed)
                    trace = sim.simulate_continuous(system, truth, obs, sig,
                                                    step=1e-3, horizon=0.5)
                    tol = 1e-6
                else:
                    sig = sim.make_switching_signal(system.nsub, 40, 4, seed=seed,
                                                    domain=synth.DISCRETE)
                    trace = sim.simulate_discrete(system, truth, obs, sig, 40)
                    tol = 1e-12
                report = sim.verify_bracket(trace, tol)
                assert report.total_violations == 0, (domain, case, seed)
