"""Reformulation maps, Jacobians against finite differences, special cases."""
import json

import numpy as np
import pytest

from mesoc.cones import ConeDims, ConePoint, classify_pair
from mesoc.lcp import (
    BlockMatrix,
    LcpInstance,
    ReformPoint,
    affine_image,
    alpha_beta_certificate,
    dump_instance,
    jacobian_blocks,
    load_instance,
    lower_ones,
    planted_instance,
    reform_from_xu,
    reform_g,
    reform_h,
    solve_case_u_zero,
    solve_case_w_zero,
    upper_ones,
    x_from_reform,
)


def random_instance(rng, p, q, scale=1.0):
    T = rng.normal(size=(p + q, p + q)) * scale
    r = rng.normal(size=p + q) * scale
    return LcpInstance(
        ConeDims(p, q), BlockMatrix.from_full(T, p, q), ConePoint(r[:p], r[p:])
    )


def random_point(rng, dims):
    return ReformPoint(
        rng.normal(size=dims.p - 1), rng.normal(size=dims.q), float(rng.normal())
    )


def central_diff(fun, z0, h=1e-6):
    z0 = np.asarray(z0, dtype=float)
    cols = []
    for j in range(z0.size):
        e = np.zeros_like(z0)
        e[j] = h
        cols.append((fun(z0 + e) - fun(z0 - e)) / (2.0 * h))
    return np.column_stack(cols)


def test_block_matrix_roundtrip():
    rng = np.random.default_rng(0)
    T = rng.normal(size=(5, 5))
    blocks = BlockMatrix.from_full(T, 3, 2)
    np.testing.assert_array_equal(blocks.full(), T)
    assert blocks.A.shape == (3, 3) and blocks.D.shape == (2, 2)


def test_block_matrix_shape_errors():
    with pytest.raises(ValueError):
        BlockMatrix(np.eye(2), np.zeros((3, 1)), np.zeros((1, 2)), np.eye(1))
    with pytest.raises(ValueError):
        BlockMatrix.from_full(np.eye(4), 3, 2)


def test_instance_rejects_nonfinite():
    blocks = BlockMatrix.from_full(np.eye(4), 2, 2)
    r = ConePoint([np.nan, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        LcpInstance(ConeDims(2, 2), blocks, r)


def test_ones_operators():
    np.testing.assert_array_equal(lower_ones(3) @ [1, 2, 3], [1, 3, 6])
    np.testing.assert_array_equal(upper_ones(3) @ [1, 2, 3], [6, 5, 3])


def test_reform_roundtrip():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = int(rng.integers(2, 7))
        x = np.sort(rng.normal(size=p))[::-1]
        u = rng.normal(size=3)
        pt = reform_from_xu(x, u)
        np.testing.assert_allclose(x_from_reform(pt), x, atol=1e-14)
        assert pt.t == x[-1]
        # and back the other way from raw reform coordinates
        pt2 = ReformPoint(rng.uniform(0, 1, p - 1), u, float(rng.normal()))
        back = reform_from_xu(x_from_reform(pt2), u)
        np.testing.assert_allclose(back.w_hat, pt2.w_hat, atol=1e-14)
        assert back.t == pytest.approx(pt2.t, abs=1e-14)


def test_reform_g_is_prefix_of_upper_image():
    rng = np.random.default_rng(2)
    inst = random_instance(rng, 4, 2)
    pt = random_point(rng, inst.dims)
    z = ConePoint(x_from_reform(pt), pt.u)
    upper = affine_image(inst, z).x
    np.testing.assert_allclose(reform_g(inst, pt), np.cumsum(upper)[:3], atol=1e-12)


def test_reform_h_rows_direct():
    rng = np.random.default_rng(3)
    inst = random_instance(rng, 3, 2)
    pt = random_point(rng, inst.dims)
    z = ConePoint(x_from_reform(pt), pt.u)
    img = affine_image(inst, z)
    h = reform_h(inst, pt)
    np.testing.assert_allclose(
        h[:2], pt.u * float(np.sum(img.x)) + pt.t * img.u, atol=1e-12
    )
    assert h[2] == pytest.approx(pt.t**2 - float(pt.u @ pt.u), abs=1e-12)


def test_dimension_mismatch_raises():
    rng = np.random.default_rng(4)
    inst = random_instance(rng, 3, 2)
    bad = ReformPoint(np.zeros(3), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        reform_g(inst, bad)
    with pytest.raises(ValueError):
        reform_h(inst, bad)


def test_jacobian_blocks_match_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(40):
        p = int(rng.integers(2, 7))
        q = int(rng.integers(1, 5))
        inst = random_instance(rng, p, q)
        pt = random_point(rng, ConeDims(p, q))
        dims = inst.dims

        def g_of(zvec):
            return reform_g(inst, ReformPoint.split(zvec, dims))

        def h_of(zvec):
            return reform_h(inst, ReformPoint.split(zvec, dims))

        z0 = pt.concat()
        fd_g = central_diff(g_of, z0)
        fd_h = central_diff(h_of, z0)
        blocks = jacobian_blocks(inst, pt)
        k = p - 1
        np.testing.assert_allclose(blocks.gw, fd_g[:, :k], atol=1e-7)
        np.testing.assert_allclose(blocks.gut, fd_g[:, k:], atol=1e-7)
        np.testing.assert_allclose(blocks.hw, fd_h[:, :k], atol=1e-7)
        np.testing.assert_allclose(blocks.hut, fd_h[:, k:], atol=1e-7)
        np.testing.assert_allclose(
            blocks.full(), np.vstack([fd_g, fd_h]), atol=1e-7
        )


def test_jacobian_full_assembles_blocks():
    rng = np.random.default_rng(6)
    inst = random_instance(rng, 4, 3)
    pt = random_point(rng, inst.dims)
    blocks = jacobian_blocks(inst, pt)
    full = blocks.full()
    assert full.shape == (3 + 4, 3 + 4)
    np.testing.assert_array_equal(full[:3, :3], blocks.gw)
    np.testing.assert_array_equal(full[3:, 3:], blocks.hut)


def test_alpha_beta_certificate_on_planted():
    for seed in range(10):
        inst, z_star, _ = planted_instance(4, 2, seed=seed)
        cert = alpha_beta_certificate(inst, z_star, tol=1e-8)
        assert cert.complementary
        assert abs(cert.inner) <= 1e-10
        # pushing z off the solution breaks complementarity
        z_bad = ConePoint(z_star.x + 0.25, z_star.u)
        assert not alpha_beta_certificate(inst, z_bad, tol=1e-8).complementary


def make_u_zero_instance(rng, p, q):
    """Plant a solution whose norm block vanishes."""
    gap_active = rng.random(p - 1) < 0.5
    gaps = np.where(gap_active, rng.uniform(0.2, 2.0, size=p - 1), 0.0)
    prefix = np.where(gap_active, 0.0, rng.uniform(0.2, 2.0, size=p - 1))
    x = np.concatenate([np.cumsum(gaps[::-1])[::-1], [0.0]])
    v = rng.normal(size=q) * 0.3
    total = float(np.linalg.norm(v)) + rng.uniform(0.2, 1.0)
    y = np.diff(np.concatenate([[0.0], prefix, [total]]))
    z_star = ConePoint(x, np.zeros(q))
    s_star = ConePoint(y, v)
    T = rng.normal(size=(p + q, p + q))
    r_vec = s_star.concat() - T @ z_star.concat()
    inst = LcpInstance(
        ConeDims(p, q), BlockMatrix.from_full(T, p, q), ConePoint(r_vec[:p], r_vec[p:])
    )
    return inst, z_star


def test_solve_case_u_zero_recovers_plant():
    rng = np.random.default_rng(8)
    hits = 0
    for _ in range(20):
        p = int(rng.integers(2, 5))
        q = int(rng.integers(1, 4))
        inst, z_star = make_u_zero_instance(rng, p, q)
        z = solve_case_u_zero(inst, tol=1e-7)
        if z is None:
            continue
        assert float(np.linalg.norm(z.u)) == 0.0
        cert = classify_pair(z, affine_image(inst, z), 1e-7)
        assert cert.member
        hits += 1
    assert hits >= 15


def make_w_zero_instance(rng, p, q):
    """Plant a solution whose lower affine image vanishes."""
    u = rng.normal(size=q)
    u *= rng.uniform(0.3, 1.0) / np.linalg.norm(u)
    nu = float(np.linalg.norm(u))
    gap_active = rng.random(p - 1) < 0.5
    gaps = np.where(gap_active, rng.uniform(0.2, 2.0, size=p - 1), 0.0)
    prefix = np.where(gap_active, 0.0, rng.uniform(0.2, 2.0, size=p - 1))
    x = np.concatenate([np.cumsum(gaps[::-1])[::-1] + nu, [nu]])
    # prefix sums must return to zero so that sum(y) = 0
    y = np.diff(np.concatenate([[0.0], prefix, [0.0]]))
    z_star = ConePoint(x, u)
    s_star = ConePoint(y, np.zeros(q))
    T = rng.normal(size=(p + q, p + q))
    r_vec = s_star.concat() - T @ z_star.concat()
    inst = LcpInstance(
        ConeDims(p, q), BlockMatrix.from_full(T, p, q), ConePoint(r_vec[:p], r_vec[p:])
    )
    return inst, z_star


def test_solve_case_w_zero_recovers_plant():
    rng = np.random.default_rng(9)
    hits = 0
    for _ in range(20):
        p = int(rng.integers(2, 5))
        q = int(rng.integers(1, 4))
        inst, z_star = make_w_zero_instance(rng, p, q)
        z = solve_case_w_zero(inst, tol=1e-7)
        if z is None:
            continue
        img = affine_image(inst, z)
        assert float(np.linalg.norm(img.u)) <= 1e-7
        cert = classify_pair(z, img, 1e-6)
        assert cert.member
        hits += 1
    assert hits >= 12


def test_planted_instance_identity_and_determinism():
    inst1, z1, s1 = planted_instance(4, 3, seed=42)
    inst2, z2, s2 = planted_instance(4, 3, seed=42)
    np.testing.assert_array_equal(inst1.blocks.full(), inst2.blocks.full())
    np.testing.assert_array_equal(z1.concat(), z2.concat())
    np.testing.assert_array_equal(s1.concat(), s2.concat())
    # r was constructed so the planted pair maps exactly onto itself
    img = affine_image(inst1, z1)
    np.testing.assert_allclose(img.concat(), s1.concat(), atol=1e-12)
    assert classify_pair(z1, s1, 1e-9).member


def test_planted_instance_varied_dims():
    rng = np.random.default_rng(10)
    for _ in range(15):
        p = int(rng.integers(2, 6))
        q = int(rng.integers(1, 6))
        inst, z_star, s_star = planted_instance(p, q, seed=int(rng.integers(0, 10_000)))
        assert inst.dims == ConeDims(p, q)
        assert classify_pair(z_star, s_star, 1e-9).member


def test_dump_load_roundtrip(tmp_path):
    inst, _, _ = planted_instance(3, 2, seed=5)
    path = tmp_path / "inst.json"
    dump_instance(inst, path)
    again = load_instance(path)
    np.testing.assert_array_equal(inst.blocks.full(), again.blocks.full())
    np.testing.assert_array_equal(inst.r.concat(), again.r.concat())
    # deterministic serialization, byte for byte
    path2 = tmp_path / "inst2.json"
    dump_instance(again, path2)
    assert path.read_bytes() == path2.read_bytes()
    assert path.read_text().endswith("\n")


def test_load_instance_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError):
        load_instance(bad)
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"p": 3, "q": 2, "A": [[1.0]]}))
    with pytest.raises(ValueError):
        load_instance(missing)


def test_gap_block_is_prefix_of_column_sums():
    # gw must equal the first p-1 rows of cumsum(A @ dx/dw), the structure
    # the chain change of variables imposes
    rng = np.random.default_rng(18)
    for _ in range(10):
        p = int(rng.integers(2, 7))
        q = int(rng.integers(1, 5))
        inst = random_instance(rng, p, q)
        pt = ReformPoint(
            rng.uniform(0.0, 1.0, p - 1), rng.normal(size=q), float(rng.uniform(0.2, 1.0))
        )
        dx_dw = np.vstack([upper_ones(p - 1), np.zeros(p - 1)])
        expect = (lower_ones(p) @ inst.blocks.A @ dx_dw)[: p - 1]
        np.testing.assert_allclose(jacobian_blocks(inst, pt).gw, expect, atol=1e-12)


def test_case_u_zero_identity_example():
    # identity upper block with a nonnegative offset forces x = 0
    dims = ConeDims(3, 2)
    blocks = BlockMatrix(
        np.eye(3), np.zeros((3, 2)), np.zeros((2, 3)), np.zeros((2, 2))
    )
    inst = LcpInstance(dims, blocks, ConePoint(np.array([3.0, 2.0, 1.0]), np.zeros(2)))
    z = solve_case_u_zero(inst)
    assert z is not None
    np.testing.assert_allclose(z.x, np.zeros(3), atol=1e-9)
    np.testing.assert_allclose(z.u, np.zeros(2), atol=1e-12)
    assert classify_pair(z, affine_image(inst, z), 1e-8).member


def test_case_w_zero_interior_level_example():
    # engineered instance whose solution sits strictly above the norm floor:
    # x = 2e with a unit u, offsets chosen to zero both affine images
    rng = np.random.default_rng(26)
    p, q = 4, 2
    A = np.eye(p) + 0.3 * rng.normal(size=(p, p))
    B = 0.3 * rng.normal(size=(p, q))
    C = 0.3 * rng.normal(size=(q, p))
    D = np.eye(q) + 0.3 * rng.normal(size=(q, q))
    x = np.full(p, 2.0)
    u = np.array([0.6, 0.8])
    y = -(A @ x + B @ u)
    v = -(C @ x + D @ u)
    inst = LcpInstance(ConeDims(p, q), BlockMatrix(A, B, C, D), ConePoint(y, v))
    z = solve_case_w_zero(inst)
    assert z is not None
    s = affine_image(inst, z)
    assert float(np.linalg.norm(s.u)) <= 1e-8
    assert float(np.min(z.x)) >= float(np.linalg.norm(z.u)) - 1e-9
    assert classify_pair(z, s, 1e-7).member
