import numpy as np
import pytest

from filtlab.errors import SizeCapError, StructuralError
from filtlab.filtration import iterate_semimetric
from filtlab.groups import (
    DictScenery,
    GroupElement,
    GroupSpec,
    identity,
    inverse,
    multiply,
    symbol_element,
)
from filtlab.mmspace import DiscreteMeasure, Partition, PartitionChain, SemimetricMatrix
from filtlab.treewalk import tree_distance
from filtlab.walksim import (
    WalkDistanceEngine,
    WalkPoint,
    ball_measure_estimate,
    hamming_base,
    identity_matching_average,
    leaf_observations,
    mean_distance_profile,
    pair_distance,
    sample_distance_matrix,
    walk_point,
    wilson_interval,
)

Z1 = GroupSpec.lattice(1)
Z2 = GroupSpec.lattice(2)
F2 = GroupSpec.free(2)
HEIS = GroupSpec.heisenberg()


def random_dict_scenery(spec, rng, radius=6):
    """Scenery with random bits on everything a short walk can reach."""
    frontier = [identity(spec)]
    seen = {identity(spec).data}
    for _ in range(radius):
        nxt = []
        for e in frontier:
            for s in range(spec.alphabet_size):
                child = multiply(e, symbol_element(spec, s))
                if child.data not in seen:
                    seen.add(child.data)
                    nxt.append(child)
        frontier = nxt
    return DictScenery({k: int(rng.integers(0, 2)) for k in seen})


class TestLeafObservations:
    def test_z1_two_leaves(self):
        p = walk_point(Z1, seed=5, m=1)
        system = leaf_observations(p, Z1, 1)
        assert system.n_leaves == 2
        plus = p.scenery.value(GroupElement(Z1, (1,)))
        minus = p.scenery.value(GroupElement(Z1, (-1,)))
        assert list(system.labels) == [plus, minus]

    def test_equal_points_distance_zero(self):
        p = walk_point(F2, seed=9, m=3)
        q = WalkPoint(scenery=p.scenery, tail_position=p.tail_position, m=3)
        assert pair_distance(p, q, F2, 3) == 0.0

    def test_constant_scenery_all_labels_equal(self):
        p = WalkPoint(scenery=DictScenery({}, default=0), tail_position=identity(Z2), m=2)
        q = WalkPoint(scenery=DictScenery({}, default=0), tail_position=identity(Z2), m=2)
        system = leaf_observations(p, Z2, 2)
        assert np.all(system.labels == 0)
        assert pair_distance(p, q, Z2, 2) == 0.0

    def test_cap(self):
        p = walk_point(F2, seed=1, m=10)
        with pytest.raises(SizeCapError):
            leaf_observations(p, F2, 10, leaf_cap=1 << 14)

    def test_truncation_repeats_labels(self):
        p = walk_point(Z1, seed=3, m=2)
        sys4 = leaf_observations(p, Z1, 4)
        assert sys4.n_leaves == 16
        # labels constant on blocks of 2^(4-2)
        blocks = sys4.labels.reshape(4, 4)
        assert np.all(blocks == blocks[:, :1])


class TestEngineAgainstReference:
    @pytest.mark.parametrize("spec", [Z1, Z2, F2, HEIS], ids=lambda s: s.describe())
    def test_matches_tree_distance(self, spec):
        rng = np.random.default_rng(hash(spec.kind) % 2**31)
        n_cases = 12 if spec.alphabet_size > 2 else 25
        for case in range(n_cases):
            n = int(rng.integers(1, 4)) if spec.alphabet_size > 2 else int(rng.integers(1, 5))
            m = int(rng.integers(1, n + 1))
            px = WalkPoint(random_dict_scenery(spec, rng, radius=n), identity(spec), m)
            py = WalkPoint(random_dict_scenery(spec, rng, radius=n), identity(spec), m)
            fast = pair_distance(px, py, spec, n)
            ref = tree_distance(
                leaf_observations(px, spec, n), leaf_observations(py, spec, n)
            )
            assert fast == pytest.approx(ref, abs=1e-12)

    def test_truncation_equals_deep_tree(self):
        # labels only depend on the first m symbols, so depth n > m collapses
        rng = np.random.default_rng(42)
        for spec in (Z1, Z2):
            px = WalkPoint(random_dict_scenery(spec, rng), identity(spec), 2)
            py = WalkPoint(random_dict_scenery(spec, rng), identity(spec), 2)
            deep = tree_distance(
                leaf_observations(px, spec, 4, leaf_cap=1 << 16),
                leaf_observations(py, spec, 4, leaf_cap=1 << 16),
            )
            assert pair_distance(px, py, spec, 4) == pytest.approx(deep, abs=1e-12)

    def test_symmetric_exactly(self):
        rng = np.random.default_rng(7)
        engine = WalkDistanceEngine(F2, 3, 3)
        for _ in range(10):
            px = walk_point(F2, int(rng.integers(1, 1 << 30)), 3)
            py = walk_point(F2, int(rng.integers(1, 1 << 30)), 3)
            assert engine.distance(px, py) == engine.distance(py, px)

    def test_identity_matching_upper_bound(self):
        rng = np.random.default_rng(8)
        for spec in (Z1, F2):
            engine = WalkDistanceEngine(spec, 4, 4)
            for _ in range(15):
                px = walk_point(spec, int(rng.integers(1, 1 << 30)), 4)
                py = walk_point(spec, int(rng.integers(1, 1 << 30)), 4)
                d = engine.distance(px, py)
                bound = identity_matching_average(px, py, spec, 4)
                assert d <= bound + 1e-12

    def test_mismatched_m_raises(self):
        px = walk_point(Z1, 1, 2)
        py = walk_point(Z1, 2, 3)
        with pytest.raises(StructuralError):
            pair_distance(px, py, Z1, 3)


class TestAgreementWithFiltrationModule:
    def test_explicit_z1_depth2_model(self):
        # Exhaustive finite model of the depth-2 walk over Z^1:
        # points = (word, scenery restriction), chain frees the last increments.
        spec = Z1
        n = 2
        read_positions = [(1,), (-1,), (2,), (0,), (-2,)]
        pos_index = {p: k for k, p in enumerate(read_positions)}
        n_sceneries = 1 << len(read_positions)
        words = [(a, b) for a in range(2) for b in range(2)]

        def observe(word, f_bits):
            pos = identity(spec)
            bits = []
            for sym in word:
                pos = multiply(pos, symbol_element(spec, sym))
                bits.append((f_bits >> pos_index[pos.data]) & 1)
            return bits

        size = len(words) * n_sceneries
        base = hamming_base(n)
        labels = np.zeros((len(words), n_sceneries), dtype=int)
        for wi, w in enumerate(words):
            for f in range(n_sceneries):
                b = observe(w, f)
                labels[wi, f] = (b[0] << 1) | b[1]

        def point(wi, f):
            return wi * n_sceneries + f

        rho0 = np.zeros((size, size))
        for wi in range(len(words)):
            for f in range(n_sceneries):
                for wj in range(len(words)):
                    for g in range(n_sceneries):
                        rho0[point(wi, f), point(wj, g)] = base.d[labels[wi, f], labels[wj, g]]
        rho0 = SemimetricMatrix(rho0)
        mu = DiscreteMeasure.uniform(size)

        # xi_1 frees the last increment (same first symbol, same scenery);
        # xi_2 frees both increments (same scenery)
        xi1 = Partition(np.array([(wi // 2) * n_sceneries + f for wi in range(4) for f in range(n_sceneries)]))
        xi2 = Partition(np.array([f for _ in range(4) for f in range(n_sceneries)]))
        chain = PartitionChain(size, (xi1, xi2))
        levels = iterate_semimetric(rho0, mu, chain)
        rho2 = levels[1].matrix.d  # quotient over sceneries

        rng = np.random.default_rng(0)
        for _ in range(25):
            f, g = rng.integers(0, n_sceneries, size=2)
            sf = DictScenery({p: (int(f) >> k) & 1 for p, k in pos_index.items()})
            sg = DictScenery({p: (int(g) >> k) & 1 for p, k in pos_index.items()})
            px = WalkPoint(sf, identity(spec), n)
            py = WalkPoint(sg, identity(spec), n)
            assert pair_distance(px, py, spec, n) == pytest.approx(rho2[f, g], abs=1e-12)


class TestInvariances:
    @pytest.mark.parametrize("spec", [Z1, Z2, HEIS], ids=lambda s: s.describe())
    def test_left_translation_invariance(self, spec):
        # translating both tails by h and the sceneries accordingly changes nothing
        class Translated:
            def __init__(self, inner, h_inv):
                self.inner = inner
                self.h_inv = h_inv

            def value(self, element):
                return self.inner.value(multiply(self.h_inv, element))

        rng = np.random.default_rng(11)
        for _ in range(6):
            s1 = random_dict_scenery(spec, rng, radius=5)
            s2 = random_dict_scenery(spec, rng, radius=5)
            h = identity(spec)
            for sym in rng.integers(0, spec.alphabet_size, size=3):
                h = multiply(h, symbol_element(spec, int(sym)))
            px = WalkPoint(s1, identity(spec), 2)
            py = WalkPoint(s2, identity(spec), 2)
            qx = WalkPoint(Translated(s1, inverse(h)), h, 2)
            qy = WalkPoint(Translated(s2, inverse(h)), h, 2)
            assert pair_distance(px, py, spec, 2) == pair_distance(qx, qy, spec, 2)


class TestMonteCarloDrivers:
    def test_wilson_interval(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        assert wilson_interval(0, 100)[0] == 0.0
        assert wilson_interval(100, 100)[1] == pytest.approx(1.0, abs=1e-12)

    def test_mean_profile_nonincreasing_z1(self):
        estimates = mean_distance_profile(Z1, n_max=4, pairs=60, master_seed=123)
        for a, b in zip(estimates, estimates[1:]):
            assert b.mean <= a.mean + (a.ci_high - a.ci_low) + (b.ci_high - b.ci_low)

    def test_profile_deterministic_across_workers(self):
        one = mean_distance_profile(Z1, n_max=3, pairs=40, master_seed=9, workers=1)
        four = mean_distance_profile(Z1, n_max=3, pairs=40, master_seed=9, workers=4)
        assert one == four

    def test_ball_measure_trivial_epsilon(self):
        p = walk_point(Z1, 77, 3)
        est = ball_measure_estimate(p, Z1, 3, epsilon=1.1, samples=100, master_seed=5)
        assert est.fraction == 1.0
        est0 = ball_measure_estimate(p, Z1, 3, epsilon=0.0, samples=100, master_seed=5)
        assert est0.fraction == 0.0

    def test_ball_measure_monotone_in_epsilon(self):
        p = walk_point(F2, 13, 4)
        fractions = [
            ball_measure_estimate(p, F2, 4, eps, samples=120, master_seed=3).fraction
            for eps in (0.1, 0.3, 0.6)
        ]
        assert fractions == sorted(fractions)

    def test_distance_matrix_symmetric_and_deterministic(self):
        d1 = sample_distance_matrix(F2, 3, 3, points=8, master_seed=21, workers=1)
        d4 = sample_distance_matrix(F2, 3, 3, points=8, master_seed=21, workers=4)
        assert np.array_equal(d1, d4)
        assert np.array_equal(d1, d1.T)
        assert np.all(np.diag(d1) == 0)
