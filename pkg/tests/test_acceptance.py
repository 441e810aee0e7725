"""Acceptance gate: one test per criterion, each with its own runtime limit.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest

from trajlind import gadgets as gd
from trajlind import lindblad as lb
from trajlind import matcore as mc
from trajlind import oracle as orc
from trajlind import trajectory as tr

BENCH = lb.dephasing_model(1.0, 0.5 * mc.pauli("X"))


class Timer:
    def __init__(self, limit: float):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"runtime {self.elapsed:.1f} s exceeds {self.limit} s"


@pytest.mark.criterion(1, "constraint class: dephasing admitted, amplitude damping rejected on every shift")
def test_criterion_1_constraint_class():
    with Timer(10):
        rep = lb.check_constraint(lb.dephasing_model(0.7))
        assert rep.gamma == pytest.approx(0.7, abs=1e-14)
        assert rep.residual < 1e-12 and rep.admissible

        amp = lb.amplitude_damping_model(1.0)
        rep = lb.check_constraint(amp)
        assert rep.residual == pytest.approx(0.5, abs=1e-14)
        assert not rep.admissible
        with pytest.raises(lb.ConstraintViolation):
            lb.require_admissible(amp)

        best, arg = lb.scan_inhomogeneous_shifts(amp, radius=2.0, step=0.05)
        assert best >= 0.1, f"shift a={arg} reaches residual {best}"
        # every scanned shift leaves the generator itself unchanged
        shifted = lb.inhomogeneous_transform(amp, [arg])
        assert np.max(np.abs(lb.liouvillian(shifted) - lb.liouvillian(amp))) <= 1e-12


@pytest.mark.criterion(2, "exact propagator: depolarizing closed form and semigroup law")
def test_criterion_2_exact_propagator():
    with Timer(5):
        model = lb.depolarizing_model(0.4)
        gamma = lb.check_constraint(model).gamma
        assert gamma == pytest.approx(0.6)
        rng = np.random.default_rng(2)
        for t in (0.1, 1.0, 5.0):
            prop = orc.exact_propagator(model, t)
            for _ in range(10):
                rho = mc.random_density(rng, 2)
                closed = np.eye(2) / 2 + math.exp(-4 * gamma * t / 3) * (rho - np.eye(2) / 2)
                assert np.max(np.abs(mc.apply_superop(prop, rho) - closed)) <= 1e-10
        for m in (model, BENCH, lb.random_admissible_model(rng, 2, 3, 0.9)):
            for t1, t2 in ((0.1, 1.0), (1.0, 5.0), (0.3, 0.7)):
                lhs = orc.exact_propagator(m, t1) @ orc.exact_propagator(m, t2)
                assert np.max(np.abs(lhs - orc.exact_propagator(m, t1 + t2))) <= 1e-9


@pytest.mark.criterion(3, "stochastics: KS of holding times, Poisson TV, empirical tail")
def test_criterion_3_stochastics():
    with Timer(30):
        n = 100_000
        rep = tr.distribution_report(1.0, 2.0, n, seed=2025, epsilon=1e-3)
        assert rep.r == tr.truncation_order(1.0, 2.0, 1e-3)
        assert rep.ks_critical == pytest.approx(1.63 / math.sqrt(n))
        assert rep.ks_statistic < rep.ks_critical
        assert rep.tv_distance < 0.01
        bound = (math.e * 2.0 / rep.r) ** rep.r * math.exp(-2.0)
        assert rep.tail_bound == pytest.approx(bound, rel=1e-12)
        assert rep.empirical_tail <= bound + 3 * rep.tail_sigma


@pytest.mark.criterion(4, "truncation solver: r(1, 0.1) = 5 and monotone over the grid")
def test_criterion_4_truncation():
    with Timer(1):
        assert tr.truncation_order(1.0, 1.0, 0.1) == 5
        direct = [(math.e / r) ** r * math.exp(-1) for r in range(1, 7)]
        assert min(r for r, b in enumerate(direct, start=1) if b <= 0.05) == 5
        xs = [0.5, 1.0, 2.0, 5.0, 10.0]
        eps = [10.0 ** -k for k in range(1, 7)]
        table = [[tr.truncation_order(x, 1.0, e) for e in eps] for x in xs]
        for row in table:
            assert row == sorted(row)
        for col in zip(*table):
            assert list(col) == sorted(col)
        for x in xs:
            for e in eps:
                assert tr.truncation_order(x, 1.0, e / 2) >= tr.truncation_order(x, 1.0, e)


def _gadget_models():
    rng = np.random.default_rng(5)
    out = [lb.dephasing_model(0.7), lb.depolarizing_model(0.4, 0.3 * mc.pauli("X")),
           lb.LindbladModel(np.zeros((2, 2)), (math.sqrt(0.5) * np.eye(2), math.sqrt(0.5) * mc.pauli("Z")))]
    for n in (1, 2, 3):
        for m in (1, 2, 3, 4):
            out.append(lb.random_admissible_model(rng, n, m, float(rng.uniform(0.3, 2.0))))
    return out, rng


@pytest.mark.criterion(5, "jump gadget: state-independent p0, exact OAA channel, sin((2j+1)theta) law")
def test_criterion_5_jump_gadget():
    with Timer(30):
        models, rng = _gadget_models()
        for model in models:
            gamma = lb.check_constraint(model).gamma
            for scale in (1.0, 1.6):
                alphas = [scale * a for a in gd.default_alphas(model)]
                encs = [gd.build_block_encoding(l, a) for l, a in zip(model.jumps, alphas)]
                w = gd.build_w(encs, gd.build_prep_oracle(alphas))
                index_dim = w.shape[0] // (2 * model.dim)
                expected = gamma / math.fsum(a * a for a in alphas)
                probs = [gd.success_probability(w, mc.random_density(rng, model.dim), index_dim) for _ in range(20)]
                assert max(probs) - min(probs) <= 1e-10
                assert max(abs(p - expected) for p in probs) <= 1e-10

                g = gd.build_jump_gadget(model, alphas)
                assert max(g.unitarity_residuals().values()) <= 1e-10
                assert mc.choi_distance(g.system_channel(), orc.jump_channel(model)) <= 1e-9
                psi = rng.standard_normal(model.dim) + 1j * rng.standard_normal(model.dim)
                psi /= np.linalg.norm(psi)
                for j, amp in enumerate(g.amplitudes(psi)):
                    assert abs(amp - math.sin((2 * j + 1) * g.theta)) <= 1e-10
                assert abs(g.amplitudes(psi)[-1] - 1) <= 1e-10


def _power_law_exponent(model, exact, r):
    budget = tr.SimulationBudget(1e-2, r, 0.0)
    sizes = (1_000, 10_000, 100_000)
    reps = (30, 10, 3)
    means = []
    for n, k in zip(sizes, reps):
        d = [mc.choi_distance(orc.mc_channel_estimate(model, 1.0, budget, orc.McConfig(n, 7919 * i + n)).mean_channel,
                              exact) for i in range(k)]
        means.append(float(np.mean(d)))
    return float(np.polyfit(np.log(sizes), np.log(means), 1)[0]), means


@pytest.mark.criterion(6, "end to end: MC channel within eps + 5 sigma, error ~ samples^-1/2")
def test_criterion_6_convergence():
    with Timer(180):
        eps = 1e-2
        budget = tr.allocate_budget(1.0, 1.0, eps)
        exact = orc.exact_propagator(BENCH, 1.0)
        res = orc.mc_channel_estimate(BENCH, 1.0, budget, orc.McConfig(100_000, 20240601))
        upper = mc.choi_distance(res.mean_channel, exact)
        assert upper <= eps + 5 * res.mc_sigma, f"upper={upper:.3e} sigma={res.mc_sigma:.3e}"
        # convergence rate with truncation effectively removed
        slope, means = _power_law_exponent(BENCH, exact, r=math.ceil(1.0) + 30)
        assert -0.6 <= slope <= -0.4, f"exponent {slope:.3f} from mean distances {means}"


@pytest.mark.criterion(7, "error budget: measured <= tail + (r+1) eps_H + 5 sigma, slope <= r+1")
def test_criterion_7_error_budget():
    with Timer(300):
        grid = [0.0, 1e-3, 3e-3, 1e-2]
        rep = orc.validate_error_budget(BENCH, 1.0, 1e-2, grid, samples=100_000, seed=77)
        print("\n" + rep.table())
        assert rep.r == tr.truncation_order(1.0, 1.0, 1e-2)
        for row in rep.rows:
            assert row.bound == pytest.approx(tr.tail_bound(1.0, 1.0, rep.r) + (rep.r + 1) * row.epsilon_h)
            assert row.measured <= row.bound + 5 * row.mc_sigma
        assert rep.slope <= rep.r + 1
        # the injected error must be visible, otherwise the slope check is vacuous
        assert rep.rows[-1].measured > rep.rows[0].measured + 3e-3


@pytest.mark.criterion(8, "scaling shape: jump queries additive in T and in log(1/eps)")
def test_criterion_8_scaling():
    with Timer(1):
        cases = [(1.0, [1.0]), (0.6, [1.5 * math.sqrt(0.2)] * 3), (2.0, [1.0, 2.0])]
        for gamma, alphas in cases:
            amp = math.sqrt(math.fsum(a * a for a in alphas) / gamma)
            q = lambda t, e=1e-3: gd.resource_ledger(gamma, t, e, 1.0, alphas).jump_queries  # noqa: E731
            for x in (20, 40, 80, 160, 320):
                t = x / gamma
                diff = (q(2 * t) - q(t)) / t
                assert diff == pytest.approx(gamma * amp, rel=0.2)
            t = 1.0 / gamma
            for k in range(3, 13):
                ell = k * math.log(10)
                extra = q(t, 10.0 ** -k) - gamma * t * amp
                assert extra == pytest.approx(amp * ell / math.log(ell), rel=0.25)


@pytest.mark.criterion(9, "characterization: Phi_t CPTP, induced generator admissible, extremality")
def test_criterion_9_characterization():
    with Timer(10):
        rng = np.random.default_rng(9)
        dissipators = [lb.dephasing_model(1.0), lb.depolarizing_model(0.4),
                       lb.random_admissible_model(rng, 1, 2, 0.5, with_hamiltonian=False),
                       lb.random_admissible_model(rng, 2, 3, 1.5, with_hamiltonian=False)]
        for model in dissipators:
            for t in (1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0, 10.0):
                phi = lb.extract_phi(model, t)
                assert mc.choi_min_eigenvalue(phi) >= -1e-9
                assert mc.trace_preservation_residual(phi) <= 1e-9

        for _ in range(5):
            model_k = lb.random_admissible_model(rng, 2, int(rng.integers(1, 5)), float(rng.uniform(0.2, 2)))
            induced = lb.induced_subsystem_generator(model_k, mc.random_density(rng, 2))
            rep = lb.check_constraint(induced)
            assert rep.admissible
            assert rep.gamma == pytest.approx(lb.check_constraint(model_k).gamma, abs=1e-10)

        for p in (0.25, 0.5, 0.75):
            kraus = [np.array([[1, 0], [0, math.sqrt(1 - p)]]), np.array([[0, math.sqrt(p)], [0, 0]])]
            assert lb.is_extreme_channel(kraus)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
