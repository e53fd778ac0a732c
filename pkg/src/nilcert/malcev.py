"""Exact rational calculus for unipotent matrix groups.

Upper unitriangular matrices over Q, the mutually inverse exp and log
series between them and the strictly upper triangular matrices, matrix
embeddings of torsion-free polycyclic groups, rational Lie algebra
spans, and block-diagonal encodings of semidirect products.
"""

from fractions import Fraction

from .nilgroup import lower_central_series, torsion_data


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


class QMatrix:
    """Immutable matrix with exact rational entries."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries, cols: int | None = None):
        rows = tuple(tuple(_frac(x) for x in row) for row in entries)
        self.entries = rows
        self.rows = len(rows)
        self.cols = len(rows[0]) if rows else (cols or 0)
        if any(len(r) != self.cols for r in rows):
            raise ValueError("ragged matrix")

    @classmethod
    def identity(cls, n: int) -> "QMatrix":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)))

    @classmethod
    def zeros(cls, m: int, n: int) -> "QMatrix":
        return cls(tuple((Fraction(0),) * n for _ in range(m)), cols=n)

    def __eq__(self, other):
        return isinstance(other, QMatrix) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"QMatrix({[[str(x) for x in r] for r in self.entries]})"

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def row(self, i):
        return self.entries[i]

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            s = _frac(other)
            return QMatrix(
                tuple(tuple(s * x for x in r) for r in self.entries), cols=self.cols
            )
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        bt = tuple(zip(*other.entries)) if other.rows else ()
        return QMatrix(
            tuple(
                tuple(sum(a * b for a, b in zip(r, c)) for c in bt)
                for r in self.entries
            ),
            cols=other.cols,
        )

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        return NotImplemented

    def __add__(self, other):
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        return QMatrix(
            tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)),
            cols=self.cols,
        )

    def __sub__(self, other):
        return self + (other * -1)

    def __neg__(self):
        return self * -1

    def __pow__(self, e: int) -> "QMatrix":
        if self.rows != self.cols:
            raise ValueError("power of non-square matrix")
        if e < 0:
            return self.inverse() ** (-e)
        result = QMatrix.identity(self.rows)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def inverse(self) -> "QMatrix":
        """Exact inverse by Gauss-Jordan elimination."""
        n = self.rows
        if n != self.cols:
            raise ValueError("inverse of non-square matrix")
        a = [list(r) for r in self.entries]
        inv = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        for col in range(n):
            piv = None
            for i in range(col, n):
                if a[i][col]:
                    piv = i
                    break
            if piv is None:
                raise ValueError("matrix is singular")
            a[col], a[piv] = a[piv], a[col]
            inv[col], inv[piv] = inv[piv], inv[col]
            s = a[col][col]
            a[col] = [x / s for x in a[col]]
            inv[col] = [x / s for x in inv[col]]
            for i in range(n):
                if i != col and a[i][col]:
                    f = a[i][col]
                    a[i] = [x - f * y for x, y in zip(a[i], a[col])]
                    inv[i] = [x - f * y for x, y in zip(inv[i], inv[col])]
        return QMatrix(inv)

    def transpose(self) -> "QMatrix":
        if not self.rows:
            return QMatrix.zeros(self.cols, 0)
        return QMatrix(tuple(zip(*self.entries)))

    def is_identity(self) -> bool:
        return self == QMatrix.identity(self.rows) if self.rows == self.cols else False

    def is_integral(self) -> bool:
        return all(x.denominator == 1 for r in self.entries for x in r)


def _as_qmatrix(x) -> QMatrix:
    if isinstance(x, QMatrix):
        return x
    if isinstance(x, (UniTriangular, StrictUpper)):
        return x.mat
    return QMatrix(x)


def matrix_to_json(m) -> list:
    """Nested lists with exact entries rendered as 'p/q' strings."""
    m = _as_qmatrix(m)
    return [[str(x) for x in r] for r in m.entries]


def matrix_from_json(data) -> QMatrix:
    return QMatrix(tuple(tuple(_frac(x) for x in row) for row in data))


class UniTriangular:
    """Upper triangular rational matrix with unit diagonal."""

    __slots__ = ("mat",)

    def __init__(self, entries):
        m = _as_qmatrix(entries)
        if m.rows != m.cols:
            raise ValueError("not square")
        for i in range(m.rows):
            if m[i, i] != 1:
                raise ValueError("diagonal entry is not 1")
            for j in range(i):
                if m[i, j] != 0:
                    raise ValueError("nonzero entry below the diagonal")
        self.mat = m

    @property
    def n(self):
        return self.mat.rows

    @classmethod
    def identity(cls, n: int) -> "UniTriangular":
        return cls(QMatrix.identity(n))

    def __mul__(self, other):
        return UniTriangular(self.mat * _as_qmatrix(other))

    def __pow__(self, e: int) -> "UniTriangular":
        return UniTriangular(self.mat ** e)

    def inverse(self) -> "UniTriangular":
        return UniTriangular(self.mat.inverse())

    def __eq__(self, other):
        return isinstance(other, UniTriangular) and self.mat == other.mat

    def __hash__(self):
        return hash(self.mat)

    def __repr__(self):
        return f"UniTriangular({[[str(x) for x in r] for r in self.mat.entries]})"

    def __getitem__(self, ij):
        return self.mat[ij]

    def is_identity(self) -> bool:
        return self.mat.is_identity()

    def is_integral(self) -> bool:
        return self.mat.is_integral()


class StrictUpper:
    """Strictly upper triangular rational matrix; nilpotent by shape."""

    __slots__ = ("mat",)

    def __init__(self, entries):
        m = _as_qmatrix(entries)
        if m.rows != m.cols:
            raise ValueError("not square")
        for i in range(m.rows):
            for j in range(i + 1):
                if m[i, j] != 0:
                    raise ValueError("nonzero entry on or below the diagonal")
        self.mat = m

    @property
    def n(self):
        return self.mat.rows

    @classmethod
    def zero(cls, n: int) -> "StrictUpper":
        return cls(QMatrix.zeros(n, n))

    def __add__(self, other):
        return StrictUpper(self.mat + _as_qmatrix(other))

    def __sub__(self, other):
        return StrictUpper(self.mat - _as_qmatrix(other))

    def scale(self, s) -> "StrictUpper":
        return StrictUpper(self.mat * _frac(s))

    def bracket(self, other) -> "StrictUpper":
        """Lie bracket (u, v) = uv - vu."""
        a, b = self.mat, _as_qmatrix(other)
        return StrictUpper(a * b - b * a)

    def __eq__(self, other):
        return isinstance(other, StrictUpper) and self.mat == other.mat

    def __hash__(self):
        return hash(self.mat)

    def __repr__(self):
        return f"StrictUpper({[[str(x) for x in r] for r in self.mat.entries]})"

    def __getitem__(self, ij):
        return self.mat[ij]

    def is_zero(self) -> bool:
        return all(x == 0 for r in self.mat.entries for x in r)


# ---------------------------------------------------------------------------
# exp and log


def expm(m) -> UniTriangular:
    """exp of a strictly upper triangular matrix: the finite series
    sum of m^k / k! for k < n."""
    a = StrictUpper(m).mat
    n = a.rows
    total = QMatrix.identity(n)
    term = QMatrix.identity(n)
    for k in range(1, n):
        term = term * a * Fraction(1, k)
        total = total + term
    return UniTriangular(total)


def logm(u) -> StrictUpper:
    """log of a unitriangular matrix: the finite alternating series
    sum of (-1)^(k+1) (u - I)^k / k for k < n."""
    um = UniTriangular(u).mat
    n = um.rows
    x = um - QMatrix.identity(n)
    total = QMatrix.zeros(n, n)
    term = QMatrix.identity(n)
    for k in range(1, n):
        term = term * x
        total = total + term * Fraction((-1) ** (k + 1), k)
    return StrictUpper(total)


# ---------------------------------------------------------------------------
# matrix embeddings of torsion-free groups


def _elementary(n, i, j, value=1) -> QMatrix:
    rows = [[Fraction(int(a == b)) for b in range(n)] for a in range(n)]
    rows[i][j] = rows[i][j] + _frac(value)
    return QMatrix(rows)


class _RowDecoder:
    """Reads the group coordinates back out of selected matrix rows;
    the readout is the injectivity certificate for the embedding."""

    def __init__(self, rows, fn):
        self.rows = rows
        self.fn = fn

    def __call__(self, rowvals):
        return self.fn(rowvals)


def _decoder_abelian(n):
    def fn(rowvals):
        r0 = rowvals[0]
        return tuple(r0[i + 1] for i in range(n))

    return _RowDecoder((0,), fn)


def _decoder_heisenberg(sign, k):
    def fn(rowvals):
        r0, r1 = rowvals[0], rowvals[1]
        a = sign * r0[1]
        kb = r1[2]
        if kb % k:
            raise RuntimeError("embedding readout failed")
        return (a, kb // k, r0[2] - r0[1] * kb)

    return _RowDecoder((0, 1), fn)


def _curated_images(p):
    """Exact integral embeddings for the stock families: free abelian
    groups and the central extensions with [x, y] = z^k."""
    if any(o is not None for o in p.orders):
        return None
    trivial_conj = all(v == p.gen(j) for (_i, j), v in p.conj.items())
    if trivial_conj:
        # Z^n inside (n+1) x (n+1): commuting first-row elementaries
        n = p.n
        images = [UniTriangular(_elementary(n + 1, 0, i + 1)) for i in range(n)]
        return images, _decoder_abelian(n)
    if p.n == 3:
        tails = {key: v for key, v in p.conj.items() if v != p.gen(key[1])}
        if set(tails) == {(0, 1)}:
            v = tails[(0, 1)]
            if v[:2] == (0, 1) and v[2] != 0:
                t = v[2]
                k = -t if t < 0 else t
                sign = 1 if t < 0 else -1
                x = _elementary(3, 0, 1, sign)
                y = _elementary(3, 1, 2, k)
                z = _elementary(3, 0, 2)
                images = [UniTriangular(x), UniTriangular(y), UniTriangular(z)]
                return images, _decoder_heisenberg(sign, k)
    return None


def _series_weights(p, gamma):
    """Weight of each generator: the deepest term of the lower central
    series containing it."""
    weights = []
    for i in range(p.n):
        g = p.gen(i)
        w = 1
        for idx in range(1, len(gamma) - 1):
            if gamma[idx].contains(g):
                w = idx + 1
        weights.append(w)
    return weights


def _monomial_basis(weights, c):
    """Exponent vectors with weighted degree <= c, ascending by degree."""
    n = len(weights)
    out = []

    def rec(pos, left, cur):
        if pos == n:
            out.append(tuple(cur))
            return
        e = 0
        while e * weights[pos] <= left:
            rec(pos + 1, left - e * weights[pos], cur + [e])
            e += 1

    rec(0, c, [])
    out.sort(key=lambda a: (sum(e * w for e, w in zip(a, weights)), a))
    return out


def _eval_monomial(alpha, point):
    v = Fraction(1)
    for e, x in zip(alpha, point):
        if e:
            v *= Fraction(x) ** e
    return v


def _regular_action_images(p, gamma, c):
    """Images of the generators acting on polynomial functions of the
    normal-form coordinates with bounded weighted degree.

    The matrix of right translation by g in the monomial basis is
    unitriangular for the degree-ascending order, and the first row
    reads off the coordinates of g, which pins down injectivity."""
    if any(o is not None for o in p.orders):
        raise ValueError(
            "matrix embedding needs infinite relative orders; "
            "re-present the group on a torsion-free polycyclic sequence"
        )
    weights = _series_weights(p, gamma)
    basis = _monomial_basis(weights, c)
    nb = len(basis)
    pts = basis  # integer interpolation nodes on the same staircase
    vand = QMatrix([[_eval_monomial(beta, pt) for beta in basis] for pt in pts])
    vinv = vand.inverse()
    wdeg = [sum(e * w for e, w in zip(a, weights)) for a in basis]
    images = []
    for i in range(p.n):
        g = p.gen(i)
        moved = [p.multiply(pt, g) for pt in pts]
        cols = []
        for alpha in basis:
            vals = QMatrix([[_eval_monomial(alpha, mv)] for mv in moved])
            coeffs = vinv * vals
            cols.append([coeffs[t, 0] for t in range(nb)])
        mat = QMatrix([[cols[j][t] for j in range(nb)] for t in range(nb)])
        for a in range(nb):
            for b in range(nb):
                if a == b:
                    if mat[a, b] != 1:
                        raise ValueError("action matrix is not unitriangular")
                elif wdeg[a] >= wdeg[b] and mat[a, b] != 0:
                    raise ValueError("action matrix is not unitriangular")
        images.append(mat)
    # clear denominators by conjugating with diag(d^degree)
    d = 1
    for mat in images:
        for r in mat.entries:
            for x in r:
                d = d * x.denominator // _gcd(d, x.denominator)
    if d > 1:
        scale = [Fraction(d) ** w for w in wdeg]
        images = [
            QMatrix(
                [
                    [mat[a, b] * scale[b] / scale[a] for b in range(nb)]
                    for a in range(nb)
                ]
            )
            for mat in images
        ]
    out = [UniTriangular(m) for m in images]
    for m in out:
        if not m.is_integral():
            raise ValueError("denominator clearing failed")
    # the first row of the image of g carries g's coordinates in the
    # columns of the degree-one coordinate monomials, scaled by d^weight
    coord_cols = []
    for k in range(p.n):
        ek = tuple(1 if t == k else 0 for t in range(p.n))
        coord_cols.append((basis.index(ek), d ** weights[k]))

    def fn(rowvals):
        r0 = rowvals[0]
        coords = []
        for colidx, sc in coord_cols:
            v = Fraction(r0[colidx], sc)
            if v.denominator != 1:
                raise RuntimeError("embedding readout failed")
            coords.append(int(v))
        return tuple(coords)

    return out, _RowDecoder((0,), fn)


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def _image_of(images, vec) -> UniTriangular:
    n = images[0].n
    acc = UniTriangular.identity(n)
    for img, e in zip(images, vec):
        if e:
            acc = acc * (img ** e)
    return acc


def _verify_relations(p, images):
    inverses = [m.inverse() for m in images]

    def image_of(vec):
        acc = UniTriangular.identity(images[0].n)
        for idx, e in enumerate(vec):
            if e > 0:
                acc = acc * (images[idx] ** e)
            elif e < 0:
                acc = acc * (inverses[idx] ** (-e))
        return acc

    for i in range(p.n):
        for j in range(i + 1, p.n):
            lhs = inverses[i] * images[j] * images[i]
            rhs = image_of(p._conj_image(i, j))
            if lhs != rhs:
                raise RuntimeError(f"matrix images violate the conjugation relation ({i},{j})")
    for i in range(p.n):
        if p.orders[i] is not None:
            lhs = images[i] ** p.orders[i]
            rhs = image_of(p._power_tail(i))
            if lhs != rhs:
                raise RuntimeError(f"matrix images violate the power relation at {i}")


def _verify_box_injectivity(p, images, decoder, radius=3, box_cap=20000):
    """Certify injectivity on normal forms with exponents in
    [-radius, radius]: every box element must decode back to its own
    exponent vector, which separates all of them at once.  The scan is
    exhaustive when the box is small and seeded-random otherwise."""
    import random as _random

    dim = images[0].n
    integral = all(img.is_integral() for img in images)

    def decode_ok(rowvals, vec):
        if decoder(rowvals) != vec:
            raise RuntimeError(f"embedding readout disagrees at {vec}")

    if (2 * radius + 1) ** p.n <= box_cap:
        def _intify(m):
            if integral:
                return tuple(tuple(int(x) for x in r) for r in m.entries)
            return m.entries

        def _raw_mul(a, b):
            return tuple(
                tuple(sum(a[i][t] * b[t][j] for t in range(dim)) for j in range(dim))
                for i in range(dim)
            )

        pows = []
        eye = _intify(QMatrix.identity(dim))
        for img in images:
            fwd = _intify(img.mat)
            bwd = _intify(img.inverse().mat)
            by_exp = {0: eye}
            for e in range(1, radius + 1):
                by_exp[e] = _raw_mul(by_exp[e - 1], fwd)
                by_exp[-e] = _raw_mul(by_exp[-(e - 1)], bwd)
            pows.append(by_exp)
        one = 1 if integral else Fraction(1)
        zero = 0 if integral else Fraction(0)
        start = {
            ri: tuple(one if t == ri else zero for t in range(dim))
            for ri in decoder.rows
        }
        rng_e = tuple(range(-radius, radius + 1))

        def rec(depth, rowvecs, prefix):
            if depth == p.n:
                decode_ok(rowvecs, prefix)
                return
            for e in rng_e:
                m = pows[depth][e]
                moved = {
                    ri: tuple(
                        sum(v[i] * m[i][j] for i in range(dim)) for j in range(dim)
                    )
                    for ri, v in rowvecs.items()
                }
                rec(depth + 1, moved, prefix + (e,))

        rec(0, start, ())
        return
    rng = _random.Random(2)
    for _ in range(200):
        vec = tuple(rng.randint(-radius, radius) for _ in range(p.n))
        m = _image_of(images, vec).mat
        decode_ok({ri: m.row(ri) for ri in decoder.rows}, vec)


def embed_matrix_group(p, class_cap: int = 3):
    """Integral unitriangular images of the generators of a torsion-free
    polycyclic presentation; relations and test-box injectivity are
    verified before returning."""
    td = torsion_data(p)
    if not td.tau.is_trivial():
        raise ValueError("group has torsion; no unitriangular embedding exists")
    gamma = lower_central_series(p)
    # the series list holds gamma_1 .. gamma_(c+1) = 1, so c = length - 1
    c = max(1, len(gamma) - 1)
    if c > class_cap:
        raise ValueError(f"nilpotency class {c} exceeds the cap {class_cap}")
    built = _curated_images(p)
    if built is None:
        built = _regular_action_images(p, gamma, c)
    images, decoder = built
    _verify_relations(p, images)
    _verify_box_injectivity(p, images, decoder)
    return images


# ---------------------------------------------------------------------------
# rational Lie algebra spans


class QLieAlgebra:
    """A bracket-closed rational subalgebra of the strictly upper
    triangular matrices, with an echelonized basis."""

    def __init__(self, n, basis, echelon):
        self.n = n
        self.basis = basis
        self._echelon = echelon  # list of (pivot position, flat vector)

    @property
    def dimension(self):
        return len(self.basis)

    def coords(self, m):
        """Coordinates of a strictly upper matrix over the basis, or None."""
        vec = list(_flatten_strict(StrictUpper(m).mat))
        coeffs = [Fraction(0)] * len(self._echelon)
        for idx, (pos, row) in enumerate(self._echelon):
            if vec[pos]:
                f = vec[pos]
                coeffs[idx] = f
                vec = [a - f * b for a, b in zip(vec, row)]
        if any(vec):
            return None
        return tuple(coeffs)

    def structure_constants(self):
        """c[i][j] = coordinates of [b_i, b_j]; raises if not closed."""
        out = {}
        for i, bi in enumerate(self.basis):
            for j, bj in enumerate(self.basis):
                c = self.coords(bi.bracket(bj))
                if c is None:
                    raise RuntimeError("basis is not bracket-closed")
                out[(i, j)] = c
        return out

    def verify_closure(self) -> bool:
        self.structure_constants()
        return True


def _flatten_strict(m: QMatrix):
    n = m.rows
    return tuple(m[i, j] for i in range(n) for j in range(i + 1, n))


def _unflatten_strict(vec, n) -> QMatrix:
    rows = [[Fraction(0)] * n for _ in range(n)]
    it = iter(vec)
    for i in range(n):
        for j in range(i + 1, n):
            rows[i][j] = next(it)
    return QMatrix(rows)


def qlie_span(images) -> QLieAlgebra:
    """Smallest rational Lie algebra containing the logs of the given
    unitriangular matrices, closed under bracket by iteration."""
    mats = [UniTriangular(_as_qmatrix(u)) for u in images]
    if not mats:
        raise ValueError("need at least one matrix")
    n = mats[0].n
    echelon = []  # (pivot, normalized flat vector), pivots increasing

    def insert(vec):
        vec = list(vec)
        for pos, row in echelon:
            if vec[pos]:
                f = vec[pos]
                vec = [a - f * b for a, b in zip(vec, row)]
        for pos in range(len(vec)):
            if vec[pos]:
                s = vec[pos]
                vec = [a / s for a in vec]
                echelon.append((pos, tuple(vec)))
                echelon.sort(key=lambda t: t[0])
                return True
        return False

    members = []
    for u in mats:
        v = _flatten_strict(logm(u).mat)
        if insert(v):
            members.append(v)
    changed = True
    while changed:
        changed = False
        basis_now = [_unflatten_strict(row, n) for _pos, row in echelon]
        for a in basis_now:
            for b in basis_now:
                br = a * b - b * a
                if insert(_flatten_strict(br)):
                    changed = True
    basis = [StrictUpper(_unflatten_strict(row, n)) for _pos, row in echelon]
    alg = QLieAlgebra(n, basis, [(pos, row) for pos, row in echelon])
    alg.verify_closure()
    return alg


# ---------------------------------------------------------------------------
# semidirect block encoding


class SemidirectElement:
    """Pair (k; h_1..h_r) standing for the block matrix diag(k, kh_1, ..., kh_r)."""

    __slots__ = ("k", "hs")

    def __init__(self, k, hs):
        self.k = _as_qmatrix(k)
        self.hs = tuple(_as_qmatrix(h) for h in hs)
        n = self.k.rows
        if self.k.cols != n:
            raise ValueError("k block is not square")
        for h in self.hs:
            if h.rows != n or h.cols != n:
                raise ValueError("h block dimension mismatch")

    @property
    def n(self):
        return self.k.rows

    @property
    def r(self):
        return len(self.hs)

    def materialize(self) -> QMatrix:
        """The concrete (r+1)n x (r+1)n block-diagonal matrix."""
        n = self.n
        blocks = [self.k] + [self.k * h for h in self.hs]
        size = n * len(blocks)
        rows = [[Fraction(0)] * size for _ in range(size)]
        for bi, blk in enumerate(blocks):
            for i in range(n):
                for j in range(n):
                    rows[bi * n + i][bi * n + j] = blk[i, j]
        return QMatrix(rows)

    def __eq__(self, other):
        return (
            isinstance(other, SemidirectElement)
            and self.k == other.k
            and self.hs == other.hs
        )

    def __hash__(self):
        return hash((self.k, self.hs))

    def __repr__(self):
        return f"SemidirectElement(n={self.n}, r={self.r})"


def semidirect_encode(k, hs) -> SemidirectElement:
    return SemidirectElement(k, hs)


def semidirect_identity(n: int, r: int) -> SemidirectElement:
    eye = QMatrix.identity(n)
    return SemidirectElement(eye, [eye] * r)


def semidirect_multiply(a: SemidirectElement, b: SemidirectElement) -> SemidirectElement:
    """(k1; h) * (k2; h') = (k1 k2; phi^-1_{k2}(h_i) h'_i) with
    phi_k(h) = k h k^-1, matching the block matrix product."""
    if a.n != b.n or a.r != b.r:
        raise ValueError("dimension mismatch")
    k2inv = b.k.inverse()
    hs = [k2inv * h * b.k * h2 for h, h2 in zip(a.hs, b.hs)]
    return SemidirectElement(a.k * b.k, hs)


def semidirect_inverse(a: SemidirectElement) -> SemidirectElement:
    kinv = a.k.inverse()
    hs = [a.k * h.inverse() * kinv for h in a.hs]
    return SemidirectElement(kinv, hs)


def semidirect_act(point, g: SemidirectElement):
    """Right action on tuples of tuples of matrices: the i-th tuple is
    conjugated entrywise by k and then by the i-th h block."""
    if len(point) != g.r:
        raise ValueError("point has wrong number of blocks")
    kinv = g.k.inverse()
    out = []
    for tup, h in zip(point, g.hs):
        hinv = h.inverse()
        moved = tuple(hinv * kinv * _as_qmatrix(x) * g.k * h for x in tup)
        for x in moved:
            if x.rows != g.n:
                raise ValueError("point entry dimension mismatch")
        out.append(moved)
    return out
