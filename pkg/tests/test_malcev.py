"""Tests for exact unitriangular calculus, embeddings and block encodings."""

import random
from fractions import Fraction

import pytest

from nilcert.malcev import (
    QMatrix,
    StrictUpper,
    UniTriangular,
    embed_matrix_group,
    expm,
    logm,
    matrix_from_json,
    matrix_to_json,
    qlie_span,
    semidirect_act,
    semidirect_encode,
    semidirect_identity,
    semidirect_inverse,
    semidirect_multiply,
)
from nilcert.nilgroup import PcPresentation


def heisenberg():
    return PcPresentation(
        ["x", "y", "z"], [None, None, None], conj={(0, 1): (0, 1, -1)}
    )


def random_unitriangular(rng, n, denominators=False):
    rows = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if denominators:
                rows[i][j] = Fraction(rng.randrange(-5, 6), rng.randrange(1, 4))
            else:
                rows[i][j] = Fraction(rng.randrange(-3, 4))
    return QMatrix(rows)


def random_strict_upper(rng, n):
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            rows[i][j] = Fraction(rng.randrange(-5, 6), rng.randrange(1, 4))
    return QMatrix(rows)


# ---------------------------------------------------------------------------
# exp and log


def test_expm_basic():
    assert expm(QMatrix([[0, 1], [0, 0]])).mat == QMatrix([[1, 1], [0, 1]])
    e = expm(QMatrix([[0, 1, 0], [0, 0, 1], [0, 0, 0]]))
    assert e[0, 2] == Fraction(1, 2)
    assert expm(QMatrix.zeros(4, 4)).is_identity()


def test_logm_basic():
    assert logm(QMatrix([[1, 2], [0, 1]])).mat == QMatrix([[0, 2], [0, 0]])
    l = logm(QMatrix([[1, 1, 0], [0, 1, 1], [0, 0, 1]]))
    assert l[0, 1] == 1 and l[1, 2] == 1
    assert l[0, 2] == Fraction(-1, 2)


def test_exp_log_roundtrip_random():
    rng = random.Random(7)
    for _ in range(60):
        n = rng.randrange(2, 7)
        u = UniTriangular(random_unitriangular(rng, n, denominators=True))
        assert expm(logm(u)) == u
        s = StrictUpper(random_strict_upper(rng, n))
        assert logm(expm(s)) == s


def test_exp_additive_on_commuting():
    # matrices supported on a single row commute, so exp is additive there
    rng = random.Random(15)
    for _ in range(20):
        n = rng.randrange(3, 6)
        rows1 = [[Fraction(0)] * n for _ in range(n)]
        rows2 = [[Fraction(0)] * n for _ in range(n)]
        for j in range(1, n):
            rows1[0][j] = Fraction(rng.randrange(-4, 5))
            rows2[0][j] = Fraction(rng.randrange(-4, 5))
        m1, m2 = QMatrix(rows1), QMatrix(rows2)
        assert m1 * m2 == QMatrix.zeros(n, n)
        assert expm(m1 + m2) == expm(m1) * expm(m2)


def test_shape_validation():
    with pytest.raises(ValueError):
        UniTriangular(QMatrix([[1, 0], [1, 1]]))
    with pytest.raises(ValueError):
        UniTriangular(QMatrix([[2, 0], [0, 1]]))
    with pytest.raises(ValueError):
        StrictUpper(QMatrix([[1, 1], [0, 0]]))


def test_json_roundtrip():
    m = QMatrix([[Fraction(1, 2), 3], [0, Fraction(-7, 5)]])
    data = matrix_to_json(m)
    assert data == [["1/2", "3"], ["0", "-7/5"]]
    assert matrix_from_json(data) == m


# ---------------------------------------------------------------------------
# embeddings


def test_embed_free_abelian():
    z1 = PcPresentation(["a"], [None])
    (img,) = embed_matrix_group(z1)
    assert img.mat == QMatrix([[1, 1], [0, 1]])
    z2 = PcPresentation(["a", "b"], [None, None])
    a, b = embed_matrix_group(z2)
    assert a.mat == QMatrix([[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    assert b.mat == QMatrix([[1, 0, 1], [0, 1, 0], [0, 0, 1]])
    assert a * b == b * a


def test_embed_heisenberg_standard():
    x, y, z = embed_matrix_group(heisenberg())
    assert x.mat == QMatrix([[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    assert y.mat == QMatrix([[1, 0, 0], [0, 1, 1], [0, 0, 1]])
    assert z.mat == QMatrix([[1, 0, 1], [0, 1, 0], [0, 0, 1]])
    # [x, y] = z in the matrices
    assert x.inverse() * y.inverse() * x * y == z


def test_embed_heisenberg_squared():
    p = PcPresentation(["x", "y", "z"], [None, None, None], conj={(0, 1): (0, 1, -2)})
    x, y, z = embed_matrix_group(p)
    assert y.mat == QMatrix([[1, 0, 0], [0, 1, 2], [0, 0, 1]])
    assert x.inverse() * y.inverse() * x * y == z * z


def test_embed_word_oracle():
    p = heisenberg()
    images = embed_matrix_group(p)

    def theta(v):
        acc = UniTriangular.identity(3)
        for img, e in zip(images, v):
            if e:
                acc = acc * (img ** e)
        return acc

    rng = random.Random(29)
    for _ in range(200):
        u = p.random_element(rng, 8)
        v = p.random_element(rng, 8)
        assert theta(u) * theta(v) == theta(p.multiply(u, v))
        assert theta(p.invert(u)) == theta(u).inverse()


def test_embed_class3_fallback():
    p = PcPresentation(
        ["a1", "a2", "a3", "a4", "a5"],
        [None] * 5,
        conj={(0, 1): (0, 1, 1, 0, 0), (0, 2): (0, 0, 1, 1, 0), (1, 2): (0, 0, 1, 0, 1)},
    )
    images = embed_matrix_group(p)
    assert all(m.is_integral() for m in images)
    n = images[0].n

    def theta(v):
        acc = UniTriangular.identity(n)
        for img, e in zip(images, v):
            if e:
                acc = acc * (img ** e)
        return acc

    rng = random.Random(19)
    for _ in range(8):
        u = p.random_element(rng, 2)
        v = p.random_element(rng, 2)
        assert theta(u) * theta(v) == theta(p.multiply(u, v))


def test_embed_rejects_torsion():
    p = PcPresentation(["a", "t"], [None, 2])
    with pytest.raises(ValueError):
        embed_matrix_group(p)


def test_embed_class_cap():
    p = PcPresentation(
        ["a1", "a2", "a3", "a4", "a5"],
        [None] * 5,
        conj={(0, 1): (0, 1, 1, 0, 0), (0, 2): (0, 0, 1, 1, 0), (1, 2): (0, 0, 1, 0, 1)},
    )
    with pytest.raises(ValueError):
        embed_matrix_group(p, class_cap=2)


# ---------------------------------------------------------------------------
# rational Lie algebra spans


def test_qlie_span_heisenberg():
    images = embed_matrix_group(heisenberg())
    alg = qlie_span(images[:2])  # generators only; the bracket closes the span
    assert alg.dimension == 3
    e12 = StrictUpper(QMatrix([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))
    e23 = StrictUpper(QMatrix([[0, 0, 0], [0, 0, 1], [0, 0, 0]]))
    e13 = StrictUpper(QMatrix([[0, 0, 1], [0, 0, 0], [0, 0, 0]]))
    c12 = alg.coords(e12)
    c23 = alg.coords(e23)
    c13 = alg.coords(e13)
    assert None not in (c12, c23, c13)
    assert alg.coords(e12.bracket(e23)) == c13
    assert alg.verify_closure()


def test_qlie_span_abelian():
    z2 = embed_matrix_group(PcPresentation(["a", "b"], [None, None]))
    alg = qlie_span(z2)
    assert alg.dimension == 2
    assert all(all(c == 0 for c in v) for v in alg.structure_constants().values())
    single = qlie_span([z2[0]])
    assert single.dimension == 1


def test_qlie_coords_rejects_outside():
    images = embed_matrix_group(PcPresentation(["a", "b"], [None, None]))
    alg = qlie_span(images)
    outside = StrictUpper(QMatrix([[0, 0, 0], [0, 0, 1], [0, 0, 0]]))
    assert alg.coords(outside) is None


# ---------------------------------------------------------------------------
# semidirect encoding


def test_semidirect_product_matches_blocks():
    rng = random.Random(23)
    for _ in range(60):
        a = semidirect_encode(
            random_unitriangular(rng, 3),
            [random_unitriangular(rng, 3), random_unitriangular(rng, 3)],
        )
        b = semidirect_encode(
            random_unitriangular(rng, 3),
            [random_unitriangular(rng, 3), random_unitriangular(rng, 3)],
        )
        ab = semidirect_multiply(a, b)
        assert a.materialize() * b.materialize() == ab.materialize()


def test_semidirect_action_law():
    rng = random.Random(31)
    for _ in range(60):
        a = semidirect_encode(
            random_unitriangular(rng, 3),
            [random_unitriangular(rng, 3), random_unitriangular(rng, 3)],
        )
        b = semidirect_encode(
            random_unitriangular(rng, 3),
            [random_unitriangular(rng, 3), random_unitriangular(rng, 3)],
        )
        pt = [
            (random_unitriangular(rng, 3), random_unitriangular(rng, 3)),
            (random_unitriangular(rng, 3),),
        ]
        lhs = semidirect_act(semidirect_act(pt, a), b)
        rhs = semidirect_act(pt, semidirect_multiply(a, b))
        assert all(tuple(x) == tuple(y) for x, y in zip(lhs, rhs))


def test_semidirect_identity_and_inverse():
    rng = random.Random(37)
    e = semidirect_identity(3, 2)
    assert e.materialize().is_identity()
    pt = [
        (random_unitriangular(rng, 3), random_unitriangular(rng, 3)),
        (random_unitriangular(rng, 3),),
    ]
    moved = semidirect_act(pt, e)
    assert all(tuple(x) == tuple(y) for x, y in zip(moved, pt))
    a = semidirect_encode(
        random_unitriangular(rng, 3),
        [random_unitriangular(rng, 3), random_unitriangular(rng, 3)],
    )
    assert semidirect_multiply(a, semidirect_inverse(a)).materialize().is_identity()


def test_semidirect_conjugation_only():
    # with k = I each tuple moves by its own conjugator
    rng = random.Random(41)
    h1, h2 = random_unitriangular(rng, 3), random_unitriangular(rng, 3)
    g = semidirect_encode(QMatrix.identity(3), [h1, h2])
    p1, p2 = random_unitriangular(rng, 3), random_unitriangular(rng, 3)
    out = semidirect_act([(p1,), (p2,)], g)
    assert out[0][0] == h1.inverse() * p1 * h1
    assert out[1][0] == h2.inverse() * p2 * h2


def test_semidirect_shape_errors():
    a = semidirect_encode(QMatrix.identity(3), [QMatrix.identity(3)])
    b = semidirect_encode(QMatrix.identity(3), [QMatrix.identity(3), QMatrix.identity(3)])
    with pytest.raises(ValueError):
        semidirect_multiply(a, b)
    with pytest.raises(ValueError):
        semidirect_act([(QMatrix.identity(3),)], b)
