import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslr import autodiff as ad
from cslr.autodiff import Tensor
from cslr.ctc import (BLANK, LatticeError, best_path_decode, brute_force_prob,
                      collapse, ctc_feasible, ctc_log_prob, ctc_loss,
                      extended_target, validate_lattice)

from conftest import central_difference, random_log_lattice, relative_error

# symbols: blank is 0, gloss id g occupies column g + 1
A, B = 1, 2


class TestCollapse:
    def test_merges_then_deletes(self):
        assert collapse((A, A, BLANK, A, B, B)) == (0, 0, 1)

    def test_all_blank_empty(self):
        assert collapse((BLANK, BLANK, BLANK)) == ()

    def test_blank_separates_repeats(self):
        assert collapse((BLANK, A, BLANK, A)) == (0, 0)

    @given(st.lists(st.integers(min_value=0, max_value=4), max_size=12))
    def test_never_longer_and_deterministic(self, path):
        out = collapse(path)
        assert len(out) <= len(path)
        assert out == collapse(path)
        assert BLANK - 1 not in out  # no blank survives

    @given(st.lists(st.integers(min_value=1, max_value=3), min_size=1,
                    max_size=6))
    def test_blank_interleaving_is_a_preimage(self, symbols):
        spaced = []
        for s in symbols:
            spaced += [BLANK, s]
        spaced.append(BLANK)
        assert collapse(spaced) == tuple(s - 1 for s in symbols)


class TestFeasibility:
    def test_needs_room_for_repeats(self):
        assert ctc_feasible((0, 0), 3)
        assert not ctc_feasible((0, 0), 2)
        assert ctc_feasible((0, 1), 2)
        assert not ctc_feasible((0, 1, 2), 2)

    def test_extended_target_structure(self):
        columns, skip = extended_target((0, 0, 1))
        assert list(columns) == [0, 1, 0, 1, 0, 2, 0]
        # skip allowed only into a non-blank different from two back
        assert list(skip) == [False, False, False, False, False, True, False]


class TestForwardRecursion:
    def test_single_frame_single_gloss(self):
        lattice = np.log(np.array([[0.3, 0.7]]))
        assert float(ctc_log_prob(Tensor(lattice), (0,)).data) == pytest.approx(
            np.log(0.7))

    def test_uniform_two_frame_example(self):
        lattice = np.log(np.full((2, 2), 0.5))
        # paths (a,a), (a,-), (-,a) collapse to (a): total 3/4
        assert float(np.exp(ctc_log_prob(Tensor(lattice), (0,)).data)) == \
            pytest.approx(0.75, abs=1e-12)

    def test_matches_brute_force_randomly(self, rng):
        for _ in range(60):
            frames = int(rng.integers(1, 7))
            vocab = int(rng.integers(1, 5))
            lattice = random_log_lattice(rng, frames, vocab + 1)
            target = tuple(int(g)
                           for g in rng.integers(0, vocab,
                                                 size=int(rng.integers(1, 4))))
            forward = float(np.exp(ctc_log_prob(Tensor(lattice), target).data))
            assert forward == pytest.approx(brute_force_prob(lattice, target),
                                            abs=1e-10)

    def test_infeasible_is_exact_negative_infinity(self):
        lattice = random_log_lattice(np.random.default_rng(0), 2, 3)
        assert float(ctc_log_prob(Tensor(lattice), (0, 1, 0)).data) == -np.inf

    def test_monotone_in_target_symbol_mass(self, rng):
        # p(G) is multilinear in the per-frame probabilities with
        # non-negative coefficients, so raising p(frame t emits g) while
        # holding the other entries fixed never lowers it
        lattice = random_log_lattice(rng, 5, 4)
        target = (0, 2)
        base = float(ctc_log_prob(Tensor(lattice), target).data)
        for t in range(5):
            for gloss in target:
                bumped = lattice.copy()
                bumped[t, gloss + 1] += 0.5
                assert float(ctc_log_prob(Tensor(bumped), target).data) \
                    >= base - 1e-12

    def test_renormalized_bump_can_cut_both_ways(self, rng):
        # under softmax renormalization the same bump steals mass from the
        # other symbols, so p(G) may move either way; both are legitimate
        logits = rng.normal(size=(5, 4))
        target = (0, 2)

        def log_prob(vals):
            return float(ctc_log_prob(ad.log_softmax(Tensor(vals), axis=-1),
                                      target).data)

        base = log_prob(logits)
        moves = []
        for t in range(5):
            bumped = logits.copy()
            bumped[t, 1] += 0.5
            moves.append(log_prob(bumped) - base)
        assert max(moves) > 0.0

    def test_gloss_id_out_of_range(self):
        lattice = random_log_lattice(np.random.default_rng(0), 3, 3)
        with pytest.raises(ValueError, match="outside vocabulary"):
            ctc_log_prob(Tensor(lattice), (5,))


class TestBruteForce:
    def test_total_probability_one(self, rng):
        for _ in range(5):
            frames = int(rng.integers(1, 5))
            vocab = int(rng.integers(1, 4))
            lattice = random_log_lattice(rng, frames, vocab + 1)
            probs = np.exp(lattice)
            total = 0.0
            for path in itertools.product(range(vocab + 1), repeat=frames):
                total += float(np.prod([probs[t, s]
                                        for t, s in enumerate(path)]))
            assert total == pytest.approx(1.0, abs=1e-10)
            by_target = {}
            for path in itertools.product(range(vocab + 1), repeat=frames):
                key = collapse(path)
                weight = float(np.prod([probs[t, s]
                                        for t, s in enumerate(path)]))
                by_target[key] = by_target.get(key, 0.0) + weight
            assert sum(by_target.values()) == pytest.approx(1.0, abs=1e-10)
            for key, value in by_target.items():
                assert brute_force_prob(lattice, key) == pytest.approx(
                    value, abs=1e-12)

    def test_target_longer_than_frames_zero(self, rng):
        lattice = random_log_lattice(rng, 2, 3)
        assert brute_force_prob(lattice, (0, 1, 0)) == 0.0

    def test_instance_size_guard(self, rng):
        lattice = random_log_lattice(rng, 30, 5)
        with pytest.raises(ValueError, match="enumeration limit"):
            brute_force_prob(lattice, (0,))


class TestLoss:
    def test_certain_target_zero_loss(self):
        lattice = np.log(np.array([[1e-30, 1.0 - 1e-30]]))
        target = (0,)
        assert float(ctc_loss(Tensor(lattice), target, "paper").data) == \
            pytest.approx(0.0, abs=1e-9)
        assert float(ctc_loss(Tensor(lattice), target, "nll").data) == \
            pytest.approx(0.0, abs=1e-9)

    def test_worked_example_both_variants(self):
        lattice = np.log(np.full((2, 2), 0.5))
        assert float(ctc_loss(Tensor(lattice), (0,), "paper").data) == \
            pytest.approx(0.25, abs=1e-12)
        assert float(ctc_loss(Tensor(lattice), (0,), "nll").data) == \
            pytest.approx(-np.log(0.75), abs=1e-12)

    def test_variants_order_samples_identically(self, rng):
        instances = []
        for _ in range(24):
            frames = int(rng.integers(2, 6))
            vocab = int(rng.integers(1, 4))
            lattice = random_log_lattice(rng, frames, vocab + 1)
            target = tuple(int(g) for g in rng.integers(0, vocab, size=2))
            if not ctc_feasible(target, frames):
                continue
            paper = float(ctc_loss(Tensor(lattice), target, "paper").data)
            nll = float(ctc_loss(Tensor(lattice), target, "nll").data)
            instances.append((paper, nll))
        by_paper = sorted(range(len(instances)),
                          key=lambda i: instances[i][0])
        by_nll = sorted(range(len(instances)), key=lambda i: instances[i][1])
        assert by_paper == by_nll

    def test_infeasible_diagnostics(self):
        lattice = random_log_lattice(np.random.default_rng(1), 2, 3)
        with pytest.warns(UserWarning, match="infeasible"):
            nll = ctc_loss(Tensor(lattice), (0, 0, 1), "nll")
        assert float(nll.data) == np.inf
        with pytest.warns(UserWarning, match="infeasible"):
            paper = ctc_loss(Tensor(lattice), (0, 0, 1), "paper")
        assert float(paper.data) == 1.0

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            ctc_loss(Tensor(np.zeros((1, 2))), (0,), "geometric")

    def test_gradient_matches_finite_differences(self, rng):
        logits = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
        target = (1, 0)
        ctc_loss(ad.log_softmax(logits, axis=-1), target).backward()

        def value():
            lattice = ad.log_softmax(Tensor(logits.data), axis=-1)
            return float(ctc_loss(lattice, target).data)

        fd = central_difference(value, logits.data.reshape(-1), range(20))
        for i, numeric in fd.items():
            assert relative_error(logits.grad.reshape(-1)[i], numeric) < 1e-4


class TestDecode:
    def test_one_hot_rows(self):
        rows = np.log(np.array([
            [0.01, 0.98, 0.01],   # a
            [0.01, 0.98, 0.01],   # a
            [0.98, 0.01, 0.01],   # blank
            [0.01, 0.01, 0.98],   # b
        ]))
        assert best_path_decode(rows) == (0, 1)

    def test_all_blank_rows_empty(self):
        rows = np.log(np.array([[0.9, 0.05, 0.05]] * 4))
        assert best_path_decode(rows) == ()

    def test_ties_break_toward_lower_index(self):
        rows = np.log(np.full((3, 3), 1.0 / 3.0))
        assert best_path_decode(rows) == ()

    def test_dominant_path_matches_brute_force_argmax(self, rng):
        for _ in range(40):
            frames = int(rng.integers(1, 5))
            vocab = int(rng.integers(1, 3))
            lattice = random_log_lattice(rng, frames, vocab + 1, sharpness=4.0)
            outputs = {}
            for path in itertools.product(range(vocab + 1), repeat=frames):
                weight = float(np.exp(sum(lattice[t, s]
                                          for t, s in enumerate(path))))
                key = collapse(path)
                outputs[key] = outputs.get(key, 0.0) + weight
            best, mass = max(outputs.items(), key=lambda kv: kv[1])
            if mass > 0.5:
                assert best_path_decode(lattice) == best


class TestLatticeValidation:
    def test_valid_rows_accepted(self, rng):
        validate_lattice(random_log_lattice(rng, 4, 5))

    def test_unnormalized_rejected(self, rng):
        bad = random_log_lattice(rng, 4, 5) + 0.5
        with pytest.raises(LatticeError):
            validate_lattice(bad)

    def test_wrong_rank_rejected(self):
        with pytest.raises(LatticeError):
            validate_lattice(np.zeros(5))
