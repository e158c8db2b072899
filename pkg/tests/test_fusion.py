import numpy as np
import pytest

from cslr.autodiff import ShapeError, Tensor
from cslr.fusion import FusionHead

from conftest import check_gradients


@pytest.fixture
def head(rng):
    return FusionHead(rgb_dim=6, skeleton_dim=4, projection_width=5,
                      output_dim=7, dropout_rate=0.0, rng=rng)


class TestFuseClip:
    def test_paper_config_width_is_1024(self, rng):
        head = FusionHead(rgb_dim=64, skeleton_dim=192, projection_width=512,
                          output_dim=1024, dropout_rate=0.0, rng=rng)
        out = head(Tensor(rng.normal(size=(1, 64))),
                   Tensor(rng.normal(size=(1, 192))))
        assert out.shape == (1, 1024)
        assert head.mix.in_features == 1024

    def test_outputs_nonnegative(self, head, rng):
        out = head(Tensor(rng.normal(size=(9, 6))),
                   Tensor(rng.normal(size=(9, 4))))
        assert (out.data >= 0.0).all()

    def test_zeroed_skeleton_projection_ignores_skeleton(self, head, rng):
        head.project_skeleton.weight.data[:] = 0.0
        head.project_skeleton.bias.data[:] = 0.0
        rgb = Tensor(rng.normal(size=(3, 6)))
        a = head(rgb, Tensor(rng.normal(size=(3, 4)))).data
        b = head(rgb, Tensor(rng.normal(size=(3, 4)))).data
        assert np.array_equal(a, b)

    def test_width_mismatch(self, head, rng):
        with pytest.raises(ShapeError):
            head(Tensor(rng.normal(size=(3, 5))),
                 Tensor(rng.normal(size=(3, 4))))


class TestFuseSequence:
    def test_positionwise(self, head, rng):
        rgb = rng.normal(size=(4, 6))
        skel = rng.normal(size=(4, 4))
        baseline = head(Tensor(rgb), Tensor(skel)).data
        changed = rgb.copy()
        changed[2] += 1.0
        out = head(Tensor(changed), Tensor(skel)).data
        assert np.array_equal(out[[0, 1, 3]], baseline[[0, 1, 3]])
        assert np.any(out[2] != baseline[2])

    def test_permutation_equivariance(self, head, rng):
        rgb = rng.normal(size=(5, 6))
        skel = rng.normal(size=(5, 4))
        perm = rng.permutation(5)
        direct = head(Tensor(rgb), Tensor(skel)).data[perm]
        permuted = head(Tensor(rgb[perm]), Tensor(skel[perm])).data
        assert np.array_equal(direct, permuted)

    def test_clip_count_mismatch(self, head, rng):
        with pytest.raises(ShapeError, match="disagree"):
            head(Tensor(rng.normal(size=(3, 6))),
                 Tensor(rng.normal(size=(4, 4))))


class TestViewAblations:
    def test_skeleton_only_runs_without_rgb(self, rng):
        head = FusionHead(6, 4, 5, 7, 0.0, rng, view="skeleton")
        out = head(None, Tensor(rng.normal(size=(3, 4))))
        assert out.shape == (3, 7)

    def test_rgb_only_runs_without_skeleton(self, rng):
        head = FusionHead(6, 4, 5, 7, 0.0, rng, view="rgb")
        out = head(Tensor(rng.normal(size=(3, 6))), None)
        assert out.shape == (3, 7)

    def test_placeholder_makes_output_independent_of_missing_view(self, rng):
        head = FusionHead(6, 4, 5, 7, 0.0, rng, view="skeleton")
        skel = Tensor(rng.normal(size=(3, 4)))
        a = head(Tensor(rng.normal(size=(3, 6))), skel).data
        b = head(None, skel).data
        assert np.array_equal(a, b)

    def test_parameter_names_fixed_across_views(self, rng):
        names = {
            view: [n for n, _ in
                   FusionHead(6, 4, 5, 7, 0.0,
                              np.random.default_rng(0), view=view)
                   .named_parameters()]
            for view in ("rgb", "skeleton", "both")
        }
        assert names["rgb"] == names["skeleton"] == names["both"]

    def test_both_views_required_when_active(self, rng):
        head = FusionHead(6, 4, 5, 7, 0.0, rng, view="both")
        with pytest.raises(ShapeError):
            head(None, Tensor(rng.normal(size=(3, 4))))

    def test_unknown_view_rejected(self, rng):
        with pytest.raises(ValueError):
            FusionHead(6, 4, 5, 7, 0.0, rng, view="depth")


class TestGradients:
    def test_gradient_reaches_both_projections(self, head, rng):
        rgb = rng.normal(size=(4, 6))
        skel = rng.normal(size=(4, 4))

        def loss():
            return head(Tensor(rgb), Tensor(skel)).sum()

        loss().backward()
        assert np.abs(head.project_rgb.weight.grad).max() > 0.0
        assert np.abs(head.project_skeleton.weight.grad).max() > 0.0

    def test_finite_differences(self, head, rng):
        rgb = rng.normal(size=(4, 6))
        skel = rng.normal(size=(4, 4))
        proj = rng.normal(size=(4, 7))

        def loss():
            return (head(Tensor(rgb), Tensor(skel)) * proj).sum()

        params = [head.project_rgb.weight, head.project_skeleton.weight,
                  head.mix.weight, head.mix.bias]
        assert check_gradients(loss, params, rng, coords_per_param=5) < 1e-4

    def test_dropout_active_in_training(self, rng):
        head = FusionHead(6, 4, 5, 7, 0.5, rng, np.random.default_rng(0))
        rgb = Tensor(np.abs(rng.normal(size=(20, 6))) + 1.0)
        skel = Tensor(np.abs(rng.normal(size=(20, 4))) + 1.0)
        trained = head(rgb, skel).data
        head.eval()
        evaluated = head(rgb, skel).data
        assert (trained == 0.0).sum() > (evaluated == 0.0).sum()
