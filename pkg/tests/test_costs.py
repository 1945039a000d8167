import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import brute_object_cost, brute_total_cost, random_instance
from test_model import make_state
from replicaplan import (
    ParameterError,
    PreconditionError,
    StructuralError,
    availability_constraint_ok,
    availability_per_object,
    benefit,
    delta_cost_of_add,
    implementation_cost,
    object_access_cost,
    object_availability,
    primary_only_placement,
    total_access_cost,
)


class TestAccessCost:
    def test_per_object_on_micro(self, micro):
        state = micro.state()
        assert object_access_cost(0, state.x, state.n, state.traffic, state.l) == 130
        assert object_access_cost(1, state.x, state.n, state.traffic, state.l) == 360

    def test_total_on_micro(self, micro):
        state = micro.state()
        report = total_access_cost(state.x, state.n, state.traffic, state.l)
        assert report.per_object.tolist() == [130, 360]
        assert report.total == 490

    def test_full_replication_is_free(self, micro):
        state = micro.state()
        state.add_replica(1, 0)
        state.add_replica(2, 0)
        assert object_access_cost(0, state.x, state.n, state.traffic, state.l) == 0

    def test_zero_traffic(self, micro):
        state = make_state(
            micro.cost.l, [30, 30, 30], [0.1, 0.2, 0.01], [10, 20], [0, 2],
            np.zeros((3, 2), dtype=np.int64),
        )
        assert total_access_cost(state.x, state.n, state.traffic, state.l).total == 0

    def test_empty_column_rejected(self, micro):
        state = micro.state()
        x = state.x.copy()
        x[2, 1] = 0
        with pytest.raises(StructuralError):
            total_access_cost(x, state.n, state.traffic, state.l)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, seed):
        rng = random.Random(seed)
        l, capacities, f, sizes, primaries, traffic = random_instance(rng, m_max=5, n_max=4)
        state = make_state(l, capacities, f, sizes, primaries, traffic)
        report = total_access_cost(state.x, state.n, state.traffic, state.l)
        assert report.total == brute_total_cost(state.x.tolist(), traffic, l.tolist())
        for k in range(state.num_objects):
            assert report.per_object[k] == brute_object_cost(
                k, state.x.tolist(), traffic, l.tolist()
            )


class TestDeltaOfAdd:
    def test_micro_values(self, micro):
        state = micro.state()
        assert delta_cost_of_add(0, 1, state.x, state.n, state.traffic, state.l) == 320
        assert delta_cost_of_add(1, 0, state.x, state.n, state.traffic, state.l) == 100

    def test_existing_replica_rejected(self, micro):
        state = micro.state()
        with pytest.raises(PreconditionError):
            delta_cost_of_add(0, 0, state.x, state.n, state.traffic, state.l)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=80, deadline=None)
    def test_equals_full_recompute(self, seed):
        rng = random.Random(seed)
        l, capacities, f, sizes, primaries, traffic = random_instance(
            rng, m_max=6, n_max=5, slack_max=30
        )
        state = make_state(l, capacities, f, sizes, primaries, traffic)
        zeros = np.argwhere(state.x == 0)
        if zeros.size == 0:
            return
        i, k = (int(v) for v in zeros[rng.randrange(len(zeros))])
        predicted = delta_cost_of_add(i, k, state.x, state.n, state.traffic, state.l)
        before = brute_total_cost(state.x.tolist(), traffic, l.tolist())
        trial = state.x.copy()
        trial[i, k] = 1
        after = brute_total_cost(trial.tolist(), traffic, l.tolist())
        assert predicted == before - after

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_add_never_hurts_remove_never_helps(self, seed):
        rng = random.Random(seed)
        l, capacities, f, sizes, primaries, traffic = random_instance(rng, m_max=5, n_max=4)
        state = make_state(l, capacities, f, sizes, primaries, traffic)
        base = brute_total_cost(state.x.tolist(), traffic, l.tolist())
        for i in range(state.num_servers):
            for k in range(state.num_objects):
                trial = state.x.copy()
                if state.x[i, k] == 0:
                    trial[i, k] = 1
                    assert brute_total_cost(trial.tolist(), traffic, l.tolist()) <= base
                elif int(state.objects.primaries[k]) != i:
                    trial[i, k] = 0
                    assert brute_total_cost(trial.tolist(), traffic, l.tolist()) >= base


class TestImplementationCost:
    def test_no_change_is_free(self, micro):
        state = micro.state()
        assert implementation_cost(
            state.x, state.n, state.x, micro.objects.sizes, state.l
        ) == 0

    def test_single_add(self, micro):
        state = micro.state()
        new = state.x.copy()
        new[0, 1] = 1
        assert implementation_cost(state.x, state.n, new, micro.objects.sizes, state.l) == 100

    def test_two_adds_priced_against_old(self, micro):
        state = micro.state()
        new = state.x.copy()
        new[0, 1] = 1
        new[1, 0] = 1
        assert implementation_cost(state.x, state.n, new, micro.objects.sizes, state.l) == 120

    def test_deletions_free(self, micro):
        state = micro.state()
        state.add_replica(1, 0)
        old_n = state.n.copy()
        old_x = state.x.copy()
        new = old_x.copy()
        new[1, 0] = 0
        assert implementation_cost(old_x, old_n, new, micro.objects.sizes, state.l) == 0


class TestAvailability:
    def test_single_replicator(self, micro):
        x = primary_only_placement(micro.servers, micro.objects)
        assert object_availability(1, x, micro.servers.failure_probs) == pytest.approx(0.99)

    def test_extra_replica_raises_availability(self, micro):
        x = primary_only_placement(micro.servers, micro.objects)
        x[0, 1] = 1
        value = object_availability(1, x, micro.servers.failure_probs)
        assert value == pytest.approx(0.999)

    def test_perfect_server_dominates(self, micro):
        inst = micro.with_failure_probs([0.0, 0.2, 0.01])
        x = primary_only_placement(inst.servers, inst.objects)
        assert object_availability(0, x, inst.servers.failure_probs) == 1.0

    def test_literal_semantics_multiplies_availabilities(self, micro):
        x = primary_only_placement(micro.servers, micro.objects)
        x[0, 1] = 1
        value = object_availability(1, x, micro.servers.failure_probs, semantics="literal")
        assert value == pytest.approx(0.9 * 0.99)

    def test_empty_column_rejected(self, micro):
        x = np.zeros((3, 2), dtype=np.int8)
        with pytest.raises(StructuralError):
            object_availability(0, x, micro.servers.failure_probs)

    def test_vectorized_matches_scalar(self, micro):
        x = primary_only_placement(micro.servers, micro.objects)
        x[1, 0] = 1
        vec = availability_per_object(x, micro.servers.failure_probs)
        for k in range(2):
            assert vec[k] == object_availability(k, x, micro.servers.failure_probs)

    @given(seed=st.integers(0, 5000))
    @settings(max_examples=40, deadline=None)
    def test_superset_never_less_available(self, seed):
        rng = random.Random(seed)
        l, capacities, f, sizes, primaries, traffic = random_instance(rng, m_max=5, n_max=3)
        state = make_state(l, capacities, f, sizes, primaries, traffic)
        x = state.x.copy()
        k = rng.randrange(state.num_objects)
        candidates = np.flatnonzero(x[:, k] == 0)
        if candidates.size == 0:
            return
        before = object_availability(k, x, state.servers.failure_probs)
        x[int(candidates[0]), k] = 1
        after = object_availability(k, x, state.servers.failure_probs)
        assert after >= before - 1e-12


class TestAvailabilityConstraint:
    def test_superset_ok(self, micro):
        old = primary_only_placement(micro.servers, micro.objects)
        new = old.copy()
        new[0, 1] = 1
        assert availability_constraint_ok(1, old, new, micro.servers.failure_probs)

    def test_shrinking_set_fails(self, micro):
        old = primary_only_placement(micro.servers, micro.objects)
        old[0, 1] = 1
        new = old.copy()
        new[0, 1] = 0  # 0.999 -> 0.99
        assert not availability_constraint_ok(1, old, new, micro.servers.failure_probs)

    def test_unchanged_ok(self, micro):
        x = primary_only_placement(micro.servers, micro.objects)
        assert availability_constraint_ok(0, x, x, micro.servers.failure_probs)


class TestBenefit:
    def test_micro_first_flip(self):
        breakdown = benefit(490, 170, 100, 0.9)
        assert breakdown.access_saving == 320
        assert breakdown.benefit == 198.0

    def test_micro_second_flip(self):
        assert benefit(490, 390, 20, 0.8).benefit == 64.0

    def test_zero_saving_minus_cost(self):
        assert benefit(100, 50, 50, 0.99).benefit == 0.0

    def test_factor_domain(self):
        with pytest.raises(ParameterError):
            benefit(10, 5, 0, 0.0)
        with pytest.raises(ParameterError):
            benefit(10, 5, 0, 1.5)

    @given(c_old=st.integers(0, 10**6), c_new=st.integers(0, 10**6),
           i_cost=st.integers(0, 10**6),
           factor=st.floats(0.01, 1.0, allow_nan=False))
    @settings(max_examples=60, deadline=None)
    def test_sign_matches_unweighted(self, c_old, c_new, i_cost, factor):
        weighted = benefit(c_old, c_new, i_cost, factor).benefit
        unweighted = (c_old - c_new) - i_cost
        assert (weighted > 0) == (unweighted > 0)
        assert (weighted == 0) == (unweighted == 0)
