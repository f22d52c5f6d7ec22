import numpy as np
import pytest

from quatkmp import kmp
from quatkmp.errors import LayoutError
from quatkmp.gmm import build_reference
from quatkmp.highdim import (
    DesiredPose,
    PoseDemo,
    adapt_pose,
    gen_handover_demos,
    handover_pose,
    learn_pose,
    predict_pose,
    predict_poses,
    transform_pose_demos,
)
from quatkmp.quat import IDENTITY, normalize, qexp, qlog, qprod, quat_distance


def test_transform_identity_orientation():
    s = np.random.default_rng(0).uniform(size=(10, 3))
    p = s * 2.0
    demo = PoseDemo(s, p, np.tile(IDENTITY, (10, 1)))
    S, Xi = transform_pose_demos([demo], IDENTITY)
    np.testing.assert_array_equal(S, s)
    np.testing.assert_array_equal(Xi[:, :3], p)
    np.testing.assert_array_equal(Xi[:, 3:], 0.0)


def test_transform_quaternion_roundtrip(handover_demos):
    q_a = normalize([0.9, 0.0, 0.3, 0.1])
    _, Xi = transform_pose_demos(handover_demos, q_a)
    q = np.vstack([d.quats for d in handover_demos])
    assert np.max(quat_distance(qprod(qexp(Xi[:, 3:]), q_a), q)) <= 1e-9


def test_learn_pose_within_gmr_envelope(pose_model, handover_demos):
    for d in handover_demos:
        P, Q = predict_poses(pose_model, d.inputs)
        ref = build_reference(pose_model.gmm, pose_model.standardize(d.inputs))
        assert np.max(np.abs(P - ref.means[:, :3])) <= 0.05
        gmr_q = qprod(qexp(ref.means[:, 3:]), pose_model.q_a)
        assert np.max(quat_distance(Q, gmr_q)) <= 0.05


def test_learn_pose_subsampling_and_determinism(handover_demos):
    a = learn_pose(handover_demos, C=4, sample_N=60, seed=3)
    b = learn_pose(handover_demos, C=4, sample_N=60, seed=3)
    assert len(a.reference) == 60
    assert np.array_equal(a.kmp.dual_coeffs, b.kmp.dual_coeffs)


def test_learn_pose_rejects_periodic(handover_demos):
    with pytest.raises(LayoutError):
        learn_pose(handover_demos, spec=kmp.KernelSpec.periodic(0.4, 10.0))


def test_marginal_samples_near_components(pose_model):
    g = pose_model.gmm
    s = pose_model.reference.inputs
    I = pose_model.input_dim
    d_min = np.full(len(s), np.inf)
    for c in range(g.n_components):
        diff = s - g.means[c, :I]
        m = np.sqrt(np.einsum("ni,ij,nj->n", diff, np.linalg.inv(g.covs[c, :I, :I]), diff))
        d_min = np.minimum(d_min, m)
    assert np.mean(d_min <= 4.0) >= 0.99


def test_adapt_new_location(pose_model):
    p_new = np.array([0.45, 0.3, 0.6])
    _, q_true = handover_pose(p_new)
    q_new = qprod(qexp([0.05, -0.02, 0.03]), q_true[0])
    adapted = adapt_pose(pose_model, [DesiredPose(p_new, p_new, q_new)])
    p, q = predict_pose(adapted, p_new)
    assert np.linalg.norm(p - p_new) <= 1e-3
    assert quat_distance(q, q_new) <= 1e-3


def test_adapt_two_poses(pose_model):
    targets = [np.array([0.45, 0.3, 0.6]), np.array([0.2, 0.1, 0.55])]
    desired = []
    for s in targets:
        _, q = handover_pose(s)
        desired.append(DesiredPose(s, s + 0.01, q[0]))
    adapted = adapt_pose(pose_model, desired)
    for d in desired:
        p, q = predict_pose(adapted, d.input)
        assert np.linalg.norm(p - d.position) <= 1e-3
        assert quat_distance(q, d.quat) <= 1e-3


def test_adapt_empty_unchanged(pose_model, handover_demos):
    s = handover_demos[0].inputs[::20]
    same = adapt_pose(pose_model, [])
    np.testing.assert_allclose(predict_poses(same, s)[0], predict_poses(pose_model, s)[0], atol=1e-12)


def test_predict_is_pure(pose_model):
    s = np.array([0.3, -0.1, 0.35])
    p1, q1 = predict_pose(pose_model, s)
    p2, q2 = predict_pose(pose_model, s)
    assert np.array_equal(p1, p2) and np.array_equal(q1, q2)
    assert abs(np.linalg.norm(q1) - 1.0) < 1e-12


def test_constant_outputs_predict_constant(handover_demos):
    q = normalize([0.9, 0.1, 0.2, 0.3])
    demos = [
        PoseDemo(d.inputs, np.tile([0.1, 0.2, 0.3], (len(d), 1)), np.tile(q, (len(d), 1)))
        for d in handover_demos
    ]
    m = learn_pose(demos, C=5, spec=kmp.KernelSpec.gaussian(1.0), lam=1e-3)
    s = np.vstack([d.inputs[::10] for d in demos])
    P, Q = predict_poses(m, s)
    np.testing.assert_allclose(P, np.tile([0.1, 0.2, 0.3], (len(s), 1)), rtol=1e-2)
    assert np.max(quat_distance(Q, q)) < 1e-2


def test_position_block_is_plain_kernel_ridge():
    rng = np.random.default_rng(2)
    demos = []
    for _ in range(3):
        s = rng.uniform(-1, 1, (40, 3))
        demos.append(PoseDemo(s, np.column_stack([s[:, 0], s[:, 1] ** 2, np.sin(s[:, 2])]), np.tile(IDENTITY, (40, 1))))
    m = learn_pose(demos, C=3, lam=2.0, sample_N=50)
    ref = m.reference
    spec = m.kmp.kernel
    # oracle: per-output ridge regression with the position block of Sigma
    K = kmp.kernel_matrix(spec, ref.inputs, ref.inputs)
    n = len(ref)
    big = np.kron(K, np.eye(3))
    Sigma = np.zeros((3 * n, 3 * n))
    for i in range(n):
        Sigma[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = ref.covs[i, :3, :3]
    coeff = np.linalg.solve(big + 2.0 * Sigma, ref.means[:, :3].reshape(-1))
    s_new = np.array([[0.1, -0.2, 0.3], [0.5, 0.5, -0.5]])
    k_star = kmp.kernel_matrix(spec, m.standardize(s_new), ref.inputs)
    expected = (np.kron(k_star, np.eye(3)) @ coeff).reshape(-1, 3)
    np.testing.assert_allclose(predict_poses(m, s_new)[0], expected, atol=1e-9)


def test_generator_deterministic():
    a = gen_handover_demos(N=30, M=2, seed=4)
    b = gen_handover_demos(N=30, M=2, seed=4)
    assert np.array_equal(a[1].quats, b[1].quats)
    assert a[0].inputs.shape == (30, 3)
    assert np.all(np.abs(qlog(a[0].quats)) < np.pi)
