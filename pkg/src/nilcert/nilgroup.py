"""Finitely generated nilpotent groups via weighted polycyclic presentations.

Elements are normal-form exponent vectors g_1^{e_1} ... g_n^{e_n} (tuples of
ints, torsion exponents reduced into [0, m_i)).  Commutator convention:
[x, y] = x^-1 y^-1 x y;  Ad_g(x) = g^-1 x g = x [x, g].

Collection is from the left.  Conjugation relations g_j^{g_i} must have the
shape g_j * (tail supported strictly beyond j); the weight function computed
from the tails certifies nilpotency and bounds every layered computation.
"""

from __future__ import annotations

from .zmod import (
    AdaptedQuotient,
    CapExceeded,
    IndexInfinite,
    IntMatrix,
    saturation_basis,
    solve_integer,
    xgcd,
)


class Inconsistent(Exception):
    """The polycyclic presentation fails an overlap (consistency) check."""


class NotNilpotent(Exception):
    """The presentation is not in weighted nilpotent form."""


def _lead(nf):
    for i, e in enumerate(nf):
        if e:
            return i
    return None


class PcPresentation:
    """Weighted polycyclic presentation of a f.g. nilpotent group."""

    def __init__(self, names, orders, conj=None, conj_inv=None, powers=None, check=True):
        self.names = tuple(str(s) for s in names)
        self.n = len(self.names)
        if len(set(self.names)) != self.n:
            raise ValueError("duplicate generator names")
        self.orders = tuple(None if m is None else int(m) for m in orders)
        if len(self.orders) != self.n:
            raise ValueError("orders length mismatch")
        for m in self.orders:
            if m is not None and m < 2:
                raise ValueError("relative orders must be >= 2 (or None for infinite)")
        self.conj = {}
        for (i, j), v in (conj or {}).items():
            v = self._check_conj_shape(i, j, v)
            self.conj[(i, j)] = v
        self.conj_inv = {}
        for (i, j), v in (conj_inv or {}).items():
            v = self._check_conj_shape(i, j, v)
            self.conj_inv[(i, j)] = v
        self.powers = {}
        for i, v in (powers or {}).items():
            if self.orders[i] is None:
                raise ValueError(f"power relation for infinite-order generator {self.names[i]}")
            v = tuple(int(x) for x in v)
            if len(v) != self.n or any(v[: i + 1]):
                raise NotNilpotent(
                    f"power tail of {self.names[i]} must be supported beyond index {i}"
                )
            if any(v):
                self.powers[i] = v
        self.weights = self._compute_weights()
        self.nilpotency_class = max(self.weights) if self.n else 1
        self._cinv_cache = {}
        self._gamma_cache = None
        if check:
            self.check_consistency()

    # -- construction helpers ------------------------------------------------

    def _check_conj_shape(self, i, j, v):
        v = tuple(int(x) for x in v)
        if not (0 <= i < j < self.n):
            raise ValueError("conjugation relation indices must satisfy i < j")
        if len(v) != self.n:
            raise ValueError("relation length mismatch")
        if any(v[:j]) or v[j] != 1:
            raise NotNilpotent(
                f"conjugate of {self.names[j]} by {self.names[i]} must be "
                f"{self.names[j]} times a tail beyond index {j}"
            )
        return v

    def _compute_weights(self):
        w = [1] * self.n
        by_member = {}
        for src in (self.conj, self.conj_inv):
            for (i, j), v in src.items():
                for k in range(j + 1, self.n):
                    if v[k]:
                        by_member.setdefault(k, []).append((i, j))
        for k in range(self.n):
            for (i, j) in by_member.get(k, ()):
                w[k] = max(w[k], w[i] + w[j])
        return tuple(w)

    # -- basic element arithmetic -------------------------------------------

    def identity(self):
        return (0,) * self.n

    def gen(self, i):
        return tuple(1 if k == i else 0 for k in range(self.n))

    def normal_form(self, vec):
        """Normal form of prod_i g_i^{v_i} for an arbitrary integer vector."""
        vec = tuple(int(x) for x in vec)
        if len(vec) != self.n:
            raise ValueError("element length mismatch")
        if all(m is None or 0 <= e < m for e, m in zip(vec, self.orders)):
            return vec
        return self.collect([(i, e) for i, e in enumerate(vec) if e])

    def _power_tail(self, i):
        return self.powers.get(i, self.identity())

    def _conj_image(self, i, j):
        return self.conj.get((i, j), self.gen(j))

    def _conj_inv_image(self, i, j):
        if (i, j) in self.conj_inv:
            return self.conj_inv[(i, j)]
        if (i, j) not in self.conj:
            return self.gen(j)  # commuting pair
        if (i, j) not in self._cinv_cache:
            self._cinv_cache[(i, j)] = self._derive_conj_inv(i, j)
        return self._cinv_cache[(i, j)]

    def _derive_conj_inv(self, i, j):
        """Solve c_i(w) = g_j for the unipotent automorphism c_i = (.)^{g_i}."""
        m = self.orders[i]
        if m is not None:
            gi_inv = self._push(self.identity(), i, -1)
            return self.conjugate(self.gen(j), gi_inv)
        w = self.gen(j)
        for _ in range(self.nilpotency_class + 2):
            v = self._apply_conj_map(i, +1, w)
            defect = self.multiply(self.invert(v), self.gen(j))
            if defect == self.identity():
                return w
            w = self.multiply(w, defect)
        raise Inconsistent(
            f"conjugation by {self.names[i]} does not invert on {self.names[j]}"
        )

    def _apply_conj_map(self, i, sign, x):
        """Apply the generator-wise conjugation map (.)^{g_i^sign} to x in T_{>i}."""
        res = self.identity()
        for j in range(i + 1, self.n):
            if x[j]:
                img = self._conj_image(i, j) if sign > 0 else self._conj_inv_image(i, j)
                res = self.multiply(res, self.power(img, x[j]))
        return res

    def _conj_by_genpower(self, x, i, e):
        """x^{g_i^e} for x supported strictly beyond i."""
        if e == 0 or not any(x):
            return x
        if all((i, j) not in self.conj for j in range(i + 1, self.n)):
            return x  # g_i commutes with all later generators
        m = self.orders[i]
        if m is None:
            sign = 1 if e > 0 else -1
            for _ in range(abs(e)):
                x = self._apply_conj_map(i, sign, x)
            return x
        q, r = divmod(e, m)
        for _ in range(r):
            x = self._apply_conj_map(i, +1, x)
        if q:
            t = self.power(self._power_tail(i), q)
            x = self.conjugate(x, t)
        return x

    def _push(self, nf, i, e):
        """Normal form of nf * g_i^e."""
        if e == 0:
            return nf
        tail = nf[i + 1 :]
        if any(tail):
            tail_elt = (0,) * (i + 1) + tail
            tail_elt = self._conj_by_genpower(tail_elt, i, e)
        else:
            tail_elt = self.identity()
        s = nf[i] + e
        m = self.orders[i]
        if m is None:
            r, extra = s, self.identity()
        else:
            q, r = divmod(s, m)
            extra = self.power(self._power_tail(i), q) if q else self.identity()
        tpart = self.multiply(extra, tail_elt)
        return nf[:i] + (r,) + tpart[i + 1 :]

    def collect(self, word):
        """Collect a word, given as (generator index, exponent) pairs, to
        its normal form."""
        x = self.identity()
        for i, e in word:
            if not (0 <= i < self.n):
                raise ValueError(f"generator index {i} out of range")
            x = self._push(x, i, int(e))
        return x

    def multiply(self, a, b):
        if len(a) != self.n or len(b) != self.n:
            raise ValueError("element length mismatch (parent mismatch?)")
        x = a
        for i in range(self.n):
            if b[i]:
                x = self._push(x, i, b[i])
        return x

    def invert(self, a):
        x = self.identity()
        for i in range(self.n - 1, -1, -1):
            if a[i]:
                x = self._push(x, i, -a[i])
        return x

    def power(self, a, k):
        k = int(k)
        if k < 0:
            a, k = self.invert(a), -k
        res = self.identity()
        base = a
        while k:
            if k & 1:
                res = self.multiply(res, base)
            k >>= 1
            if k:
                base = self.multiply(base, base)
        return res

    def conjugate(self, x, y):
        """x^y = y^-1 x y."""
        return self.multiply(self.invert(y), self.multiply(x, y))

    def commutator(self, x, y):
        """[x, y] = x^-1 y^-1 x y."""
        return self.multiply(
            self.invert(self.multiply(y, x)), self.multiply(x, y)
        )

    # -- consistency ---------------------------------------------------------

    def check_consistency(self):
        """Evaluate the standard overlap conditions by collection; raises
        Inconsistent naming the violated overlap."""
        g = self.gen
        mult = self.multiply
        for i in range(self.n):
            for j in range(i + 1, self.n):
                for k in range(j + 1, self.n):
                    lhs = mult(mult(g(k), g(j)), g(i))
                    rhs = mult(g(k), mult(g(j), g(i)))
                    if lhs != rhs:
                        raise Inconsistent(
                            f"overlap ({self.names[k]} {self.names[j]}) {self.names[i]}"
                        )
        for j in range(self.n):
            mj = self.orders[j]
            if mj is None:
                continue
            for i in range(j):
                lhs = mult(self._power_tail(j), g(i))
                rhs = mult(self.power(g(j), mj - 1), mult(g(j), g(i)))
                if lhs != rhs:
                    raise Inconsistent(f"overlap {self.names[j]}^{mj} {self.names[i]}")
            lhs = mult(self._power_tail(j), g(j))
            rhs = mult(g(j), self._power_tail(j))
            if lhs != rhs:
                raise Inconsistent(f"overlap {self.names[j]}^{mj} {self.names[j]}")
        for i in range(self.n):
            mi = self.orders[i]
            for j in range(i + 1, self.n):
                if mi is not None:
                    lhs = mult(g(j), self._power_tail(i))
                    rhs = mult(mult(g(j), g(i)), self.power(g(i), mi - 1))
                    if lhs != rhs:
                        raise Inconsistent(
                            f"overlap {self.names[j]} {self.names[i]}^{mi}"
                        )
                if (i, j) in self.conj or (i, j) in self.conj_inv:
                    w = self._conj_inv_image(i, j)
                    if self._conj_by_genpower(w, i, 1) != g(j):
                        raise Inconsistent(
                            f"inverse conjugation of {self.names[j]} by {self.names[i]}"
                        )

    def is_abelian(self):
        return all(v == self.gen(j) for (i, j), v in self.conj.items())

    # -- misc ----------------------------------------------------------------

    def random_element(self, rng, box=3):
        out = []
        for m in self.orders:
            if m is None:
                out.append(rng.randint(-box, box))
            else:
                out.append(rng.randint(0, m - 1))
        return tuple(out)

    def abelianization(self) -> AdaptedQuotient:
        rows = []
        for (i, j), v in self.conj.items():
            rows.append(tuple(a - (1 if k == j else 0) for k, a in enumerate(v)))
        for i, m in enumerate(self.orders):
            if m is not None:
                tail = self._power_tail(i)
                rows.append(tuple((m if k == i else 0) - tail[k] for k in range(self.n)))
        return AdaptedQuotient(self.n, rows)

    def describe(self):
        lines = [
            f"gen {s} order {'inf' if m is None else m}"
            for s, m in zip(self.names, self.orders)
        ]
        return "\n".join(lines)


def _word_str(p, v):
    parts = []
    for name, e in zip(p.names, v):
        if e == 1:
            parts.append(name)
        elif e:
            parts.append(f"{name}^{e}")
    return " ".join(parts) if parts else "1"


# ---------------------------------------------------------------------------
# induced generating sequences (subgroups)


class _Igs:
    """Echelonised induced generating sequence builder.

    Items are (element, payload) pairs; payloads (optional) live in a second
    presentation and follow every group operation, which makes homomorphism
    inversion a by-product of reduction.
    """

    MAX_ROUNDS = 200

    def __init__(self, parent: PcPresentation, payload_parent: PcPresentation | None = None):
        self.p = parent
        self.pp = payload_parent
        self.piv = {}

    def _pm(self, a, b):
        pay = self.pp.multiply(a[1], b[1]) if self.pp is not None else None
        return (self.p.multiply(a[0], b[0]), pay)

    def _ppow(self, a, k):
        pay = self.pp.power(a[1], k) if self.pp is not None else None
        return (self.p.power(a[0], k), pay)

    def _pinv(self, a):
        pay = self.pp.invert(a[1]) if self.pp is not None else None
        return (self.p.invert(a[0]), pay)

    def _pconj(self, x, y):
        return self._pm(self._pinv(y), self._pm(x, y))

    def _is_id(self, a):
        return not any(a[0])

    def build(self, items, normal_closure=False):
        queue = [x for x in items if not self._is_id(x)]
        for _ in range(self.MAX_ROUNDS):
            while queue:
                self._insert(queue.pop(), queue)
            queue = self._closure_defects(normal_closure)
            if not queue:
                break
        else:
            raise CapExceeded("induced sequence closure did not stabilise")
        self._canonicalise()
        return self

    def _insert(self, x, queue):
        while not self._is_id(x):
            d = _lead(x[0])
            m = self.p.orders[d]
            b = x[0][d]
            if m is None and b < 0:
                x = self._pinv(x)
                continue
            if d in self.piv:
                h = self.piv[d]
                a = h[0][d]
                if b % a == 0:
                    x = self._pm(self._ppow(h, -(b // a)), x)
                    continue
                g, s, t = xgcd(a, b)
                y = self._pm(self._ppow(h, s), self._ppow(x, t))
                rest_h = self._pm(self._ppow(y, -(a // g)), h)
                rest_x = self._pm(self._ppow(y, -(b // g)), x)
                self.piv[d] = y
                queue.append(rest_h)
                x = rest_x
                continue
            if m is not None:
                g, s, _ = xgcd(b, m)
                if g != b:
                    self.piv[d] = self._ppow(x, s)
                    continue  # x now reduces against the new pivot
            self.piv[d] = x
            return

    def _closure_defects(self, normal_closure):
        out = []
        pivots = [self.piv[d] for d in sorted(self.piv)]
        cands = []
        for a in pivots:
            for b in pivots:
                if a is b:
                    continue
                cands.append(self._pconj(b, a))
                cands.append(self._pconj(b, self._pinv(a)))
            d = _lead(a[0])
            m = self.p.orders[d]
            if m is not None:
                cands.append(self._ppow(a, m // a[0][d]))
        if normal_closure:
            if self.pp is not None:
                raise ValueError("normal closure with payload tracking is unsupported")
            for a in pivots:
                for k in range(self.p.n):
                    gk = (self.p.gen(k), None)
                    cands.append(self._pconj(a, gk))
                    cands.append(self._pconj(a, self._pinv(gk)))
        for c in cands:
            r = self._residue(c)
            if not self._is_id(r):
                out.append(r)
        return out

    def _residue(self, x):
        while not self._is_id(x):
            d = _lead(x[0])
            if d not in self.piv:
                return x
            h = self.piv[d]
            a = h[0][d]
            b = x[0][d]
            if b % a:
                return x
            x = self._pm(self._ppow(h, -(b // a)), x)
        return x

    def _canonicalise(self):
        leads = sorted(self.piv)
        for pos in range(len(leads) - 1, -1, -1):
            d = leads[pos]
            h = self.piv[d]
            for d2 in leads[pos + 1 :]:
                q = self.piv[d2]
                a2 = q[0][d2]
                k = h[0][d2] // a2
                if k:
                    h = self._pm(h, self._ppow(q, -k))
            self.piv[d] = h


class Subgroup:
    """Subgroup of a PcPresentation group, held as a canonical induced
    generating sequence (echelon over the polycyclic sequence)."""

    def __init__(self, parent: PcPresentation, gens, normal_closure=False):
        self.parent = parent
        igs = _Igs(parent).build(
            [(parent.normal_form(g), None) for g in gens],
            normal_closure=normal_closure,
        )
        self._piv = {d: v[0] for d, v in igs.piv.items()}
        self.gens = tuple(self._piv[d] for d in sorted(self._piv))

    @property
    def pivots(self):
        return dict(self._piv)

    def __eq__(self, other):
        return (
            isinstance(other, Subgroup)
            and self.parent is other.parent
            and self.gens == other.gens
        )

    def __hash__(self):
        return hash(self.gens)

    def __repr__(self):
        return f"Subgroup(pivots={self.gens})"

    def reduce(self, x):
        """Canonical coset representative: x lies in S * reduce(x), with the
        coordinate at every pivot lead reduced into [0, lead exponent)."""
        p = self.parent
        x = p.normal_form(x)
        for d in range(p.n):
            b = x[d]
            if not b:
                continue
            h = self._piv.get(d)
            if h is None:
                continue
            q = b // h[d]
            if q:
                x = p.multiply(p.power(h, -q), x)
        return x

    def contains(self, x) -> bool:
        return not any(self.reduce(x))

    def contains_subgroup(self, other: "Subgroup") -> bool:
        return all(self.contains(g) for g in other.gens)

    def express(self, x):
        """Coordinates of x over the pivot sequence (in lead order), or None."""
        p = self.parent
        x = p.normal_form(x)
        coords = {d: 0 for d in self._piv}
        while any(x):
            d = _lead(x)
            h = self._piv.get(d)
            if h is None:
                return None
            b = x[d]
            a = h[d]
            if b % a:
                return None
            q = b // a
            coords[d] += q
            x = p.multiply(p.power(h, -q), x)
        return tuple(coords[d] for d in sorted(coords))

    def relative_orders(self):
        """Relative order of each pivot modulo the later ones (None = infinite)."""
        out = []
        for d in sorted(self._piv):
            m = self.parent.orders[d]
            out.append(None if m is None else m // self._piv[d][d])
        return out

    def index_in_parent(self) -> int:
        idx = 1
        for d in range(self.parent.n):
            m = self.parent.orders[d]
            h = self._piv.get(d)
            if h is None:
                if m is None:
                    raise IndexInfinite("subgroup has infinite index")
                idx *= m
            else:
                idx *= h[d]
        return idx

    def is_whole_group(self) -> bool:
        try:
            return self.index_in_parent() == 1
        except IndexInfinite:
            return False

    def is_trivial(self) -> bool:
        return not self._piv

    def is_normal(self) -> bool:
        p = self.parent
        for h in self.gens:
            for k in range(p.n):
                if not self.contains(p.conjugate(h, p.gen(k))):
                    return False
                if not self.contains(p.conjugate(h, p.invert(p.gen(k)))):
                    return False
        return True

    def join(self, other: "Subgroup") -> "Subgroup":
        return Subgroup(self.parent, self.gens + other.gens)

    def order(self) -> int:
        """Cardinality (raises IndexInfinite when infinite)."""
        total = 1
        for ro in self.relative_orders():
            if ro is None:
                raise IndexInfinite("subgroup is infinite")
            total *= ro
        return total

    def elements(self, cap=100000):
        """All elements of a finite subgroup, deterministically ordered."""
        total = self.order()
        if total > cap:
            raise CapExceeded(f"subgroup order {total} exceeds cap {cap}")
        p = self.parent
        out = [p.identity()]
        for d, ro in zip(sorted(self._piv), self.relative_orders()):
            h = self._piv[d]
            powers = [p.identity()]
            for _ in range(ro - 1):
                powers.append(p.multiply(powers[-1], h))
            out = [p.multiply(a, b) for a in powers for b in out]
        seen = sorted(set(out))
        if len(seen) != total:
            raise RuntimeError("subgroup enumeration mismatch")
        return seen

    def presentation(self):
        """Polycyclic presentation of the subgroup on its pivot sequence.

        Returns (pres, to_sub, from_sub): to_sub maps a parent element of the
        subgroup to subgroup coordinates, from_sub is the reverse direction.
        """
        p = self.parent
        leads = sorted(self._piv)
        r = len(leads)
        ros = self.relative_orders()
        names = [f"{p.names[d]}~" for d in leads]

        def to_sub(x):
            c = self.express(x)
            if c is None:
                raise ValueError("element is not in the subgroup")
            return tuple(c)

        def from_sub(c):
            x = p.identity()
            for d, e in zip(leads, c):
                x = p.multiply(x, p.power(self._piv[d], e))
            return x

        conj = {}
        conj_inv = {}
        powers = {}
        for a in range(r):
            for b in range(a + 1, r):
                ha, hb = self._piv[leads[a]], self._piv[leads[b]]
                img = to_sub(p.conjugate(hb, ha))
                if img != tuple(1 if t == b else 0 for t in range(r)):
                    conj[(a, b)] = img
                    conj_inv[(a, b)] = to_sub(p.conjugate(hb, p.invert(ha)))
        for a in range(r):
            if ros[a] is not None:
                tail = to_sub(p.power(self._piv[leads[a]], ros[a]))
                if any(tail):
                    powers[a] = tail
        pres = PcPresentation(names, ros, conj, conj_inv, powers)
        return pres, to_sub, from_sub


def intersect_finite_index(a: Subgroup, b: Subgroup, cap=10**6) -> Subgroup:
    """Intersection of a and b for [parent : a] finite, via Schreier generators of the action
    of b on the right cosets of a."""
    p = a.parent
    if a.parent is not b.parent:
        raise ValueError("parent mismatch")
    idx = a.index_in_parent()
    if idx > cap:
        raise CapExceeded(f"coset space of size {idx} exceeds cap {cap}")
    start = a.reduce(p.identity())
    transversal = {start: p.identity()}
    frontier = [start]
    acting = list(b.gens) + [p.invert(g) for g in b.gens]
    while frontier:
        pt = frontier.pop()
        t = transversal[pt]
        for g in acting:
            img = a.reduce(p.multiply(pt, g))
            if img not in transversal:
                transversal[img] = p.multiply(t, g)
                frontier.append(img)
    gens = []
    for pt, t in transversal.items():
        for g in b.gens:
            img = a.reduce(p.multiply(pt, g))
            gens.append(p.multiply(p.multiply(t, g), p.invert(transversal[img])))
    return Subgroup(p, gens)


# ---------------------------------------------------------------------------
# quotients


class QuotientMap:
    """Projection of a PcPresentation group onto its quotient by a normal
    subgroup, with a polycyclic presentation of the target."""

    def __init__(self, source: PcPresentation, kernel: Subgroup, check_normal=True):
        if kernel.parent is not source:
            raise ValueError("kernel parent mismatch")
        if check_normal and not kernel.is_normal():
            raise ValueError("kernel must be normal")
        self.source = source
        self.kernel = kernel
        piv = kernel.pivots
        surviving = []
        orders = []
        for d in range(source.n):
            m = source.orders[d]
            h = piv.get(d)
            if h is None:
                surviving.append(d)
                orders.append(m)
            elif h[d] > 1:
                surviving.append(d)
                orders.append(h[d])
        self.surviving = tuple(surviving)
        r = len(surviving)

        def project_vec(x):
            rep = kernel.reduce(x)
            return tuple(rep[d] for d in surviving)

        conj = {}
        conj_inv = {}
        powers = {}
        for a_pos in range(r):
            i = surviving[a_pos]
            for b_pos in range(a_pos + 1, r):
                j = surviving[b_pos]
                v = project_vec(source.conjugate(source.gen(j), source.gen(i)))
                if v != tuple(1 if t == b_pos else 0 for t in range(r)):
                    conj[(a_pos, b_pos)] = v
                    conj_inv[(a_pos, b_pos)] = project_vec(
                        source.conjugate(source.gen(j), source.invert(source.gen(i)))
                    )
        for a_pos in range(r):
            o = orders[a_pos]
            if o is not None:
                tail = project_vec(source.power(source.gen(surviving[a_pos]), o))
                if any(tail):
                    powers[a_pos] = tail
        names = [source.names[d] for d in surviving]
        self.target = PcPresentation(names, orders, conj, conj_inv, powers)

    def project(self, x):
        rep = self.kernel.reduce(self.source.normal_form(x))
        return self.target.normal_form(tuple(rep[d] for d in self.surviving))

    def lift(self, y):
        x = [0] * self.source.n
        for k, d in enumerate(self.surviving):
            x[d] = y[k]
        return self.source.normal_form(tuple(x))

    def preimage(self, sub: Subgroup) -> Subgroup:
        if sub.parent is not self.target:
            raise ValueError("subgroup is not in the quotient group")
        gens = [self.lift(g) for g in sub.gens] + list(self.kernel.gens)
        return Subgroup(self.source, gens)


class FiniteGroupTable:
    """Finite group; either a finite-index quotient (elements are canonical
    coset representatives) or an explicit multiplication table."""

    def __init__(self, elements, mult_fn, inv_fn=None, identity_elem=None,
                 verify=True, rng_seed=7):
        self.elements = tuple(elements)
        self.order = len(self.elements)
        self._index = {e: i for i, e in enumerate(self.elements)}
        self._mult_fn = mult_fn
        self._memo = {}
        self.qmap = None
        if identity_elem is None:
            ident = None
            for i in range(self.order):
                if all(
                    self.mult(i, j) == j and self.mult(j, i) == j
                    for j in range(self.order)
                ):
                    ident = i
                    break
            if ident is None:
                raise ValueError("table has no identity")
            self.identity = ident
        else:
            self.identity = self._index[identity_elem]
        self._inv = {}
        if inv_fn is not None:
            for i, e in enumerate(self.elements):
                j = self._index[inv_fn(e)]
                if self.mult(i, j) != self.identity or self.mult(j, i) != self.identity:
                    raise ValueError("inverse function is wrong")
                self._inv[i] = j
        else:
            for i in range(self.order):
                for j in range(self.order):
                    if self.mult(i, j) == self.identity:
                        if self.mult(j, i) != self.identity:
                            raise ValueError("one-sided inverse: not a group")
                        self._inv[i] = j
                        break
                else:
                    raise ValueError("missing inverse: not a group")
        if verify:
            self._verify_associativity(rng_seed)

    def _verify_associativity(self, seed):
        import random as _random

        n = self.order
        if n <= 72:
            triples = (
                (a, b, c) for a in range(n) for b in range(n) for c in range(n)
            )
        else:
            rng = _random.Random(seed)
            triples = (
                (rng.randrange(n), rng.randrange(n), rng.randrange(n))
                for _ in range(1000)
            )
        for a, b, c in triples:
            if self.mult(self.mult(a, b), c) != self.mult(a, self.mult(b, c)):
                raise ValueError("associativity fails: not a group")

    @classmethod
    def from_quotient(cls, qmap: QuotientMap, cap=10**6, verify=True):
        src = qmap.source
        ker = qmap.kernel
        piv = ker.pivots
        ranges = []
        for d in range(src.n):
            m = src.orders[d]
            h = piv.get(d)
            if h is None:
                if m is None:
                    raise IndexInfinite("quotient is infinite")
                ranges.append(m)
            else:
                ranges.append(h[d])
        total = 1
        for rr in ranges:
            total *= rr
        if total > cap:
            raise CapExceeded(f"quotient order {total} exceeds cap {cap}")
        elems = [()]
        for rr in ranges:
            elems = [e + (v,) for e in elems for v in range(rr)]
        elems = sorted(set(ker.reduce(e) for e in elems))
        if len(elems) != total:
            raise RuntimeError("transversal enumeration mismatch")

        def mult_vec(a, b):
            return ker.reduce(src.multiply(a, b))

        def inv_vec(a):
            return ker.reduce(src.invert(a))

        table = cls(
            elems,
            mult_vec,
            inv_fn=inv_vec,
            identity_elem=src.identity(),
            verify=verify,
        )
        table.qmap = qmap
        return table

    @classmethod
    def from_table(cls, rows, verify=True):
        n = len(rows)
        rows = [tuple(r) for r in rows]
        for r in rows:
            if len(r) != n or any(not (0 <= x < n) for x in r):
                raise ValueError("malformed multiplication table")

        def mult_fn(a, b):
            return rows[a][b]

        return cls(tuple(range(n)), mult_fn, verify=verify)

    def index_of(self, element):
        return self._index[element]

    def mult(self, i, j):
        key = (i, j)
        r = self._memo.get(key)
        if r is None:
            r = self._index[self._mult_fn(self.elements[i], self.elements[j])]
            self._memo[key] = r
        return r

    def inv(self, i):
        return self._inv[i]

    def conjugate(self, i, g):
        return self.mult(self.inv(g), self.mult(i, g))

    def commutator(self, i, j):
        return self.mult(self.inv(self.mult(j, i)), self.mult(i, j))

    def element_order(self, i):
        k = 1
        x = i
        while x != self.identity:
            x = self.mult(x, i)
            k += 1
            if k > self.order:
                raise ValueError("order computation overran the group")
        return k

    def power(self, i, k):
        if k < 0:
            return self.power(self.inv(i), -k)
        x = self.identity
        for _ in range(k):
            x = self.mult(x, i)
        return x

    def closure(self, gens):
        seen = {self.identity}
        frontier = [self.identity]
        gens = list(gens)
        while frontier:
            x = frontier.pop()
            for g in gens:
                for y in (self.mult(x, g), self.mult(x, self.inv(g))):
                    if y not in seen:
                        seen.add(y)
                        frontier.append(y)
        return frozenset(seen)

    def project(self, x):
        """Index of the image of a source element (quotient tables only)."""
        if self.qmap is None:
            raise ValueError("not a quotient table")
        return self._index[self.qmap.kernel.reduce(self.qmap.source.normal_form(x))]


def quotient_table(p: PcPresentation, kernel: Subgroup, cap=10**6, verify=True,
                   check_normal=True) -> FiniteGroupTable:
    return FiniteGroupTable.from_quotient(
        QuotientMap(p, kernel, check_normal=check_normal), cap=cap, verify=verify
    )


# ---------------------------------------------------------------------------
# lower central series, centralisers, conjugacy, center


def lower_central_series(p: PcPresentation):
    """[N = gamma_1, gamma_2 = [N, N], ..., trivial]."""
    if p._gamma_cache is not None:
        return p._gamma_cache
    full = Subgroup(p, [p.gen(i) for i in range(p.n)])
    series = [full]
    cur = full
    for _ in range(p.nilpotency_class + 2):
        gens = []
        for h in cur.gens:
            for k in range(p.n):
                gens.append(p.commutator(h, p.gen(k)))
        nxt = Subgroup(p, gens, normal_closure=True)
        series.append(nxt)
        if nxt.is_trivial():
            break
        if nxt == cur:
            raise NotNilpotent("lower central series does not terminate")
        cur = nxt
    if not series[-1].is_trivial():
        raise NotNilpotent("lower central series does not reach the trivial group")
    p._gamma_cache = series
    return series


class _GammaLayer:
    """The abelian layer gamma_w / gamma_{w+1} with exact integer coordinates."""

    def __init__(self, p, gw: Subgroup, gw1: Subgroup):
        self.p = p
        self.gw = gw
        self.leads = sorted(gw.pivots)
        r = len(self.leads)
        rows = []
        for pos, (d, ro) in enumerate(zip(self.leads, gw.relative_orders())):
            if ro is not None:
                c = gw.express(p.power(gw.pivots[d], ro))
                rows.append(tuple((ro if t == pos else 0) - c[t] for t in range(r)))
        for g in gw1.gens:
            c = gw.express(g)
            if c is None:
                raise RuntimeError("central series inclusion violated")
            rows.append(c)
        self.quotient = AdaptedQuotient(r, rows)
        self.module = self.quotient.module

    def coords(self, x):
        c = self.gw.express(x)
        if c is None:
            raise ValueError("element not in this term of the series")
        return self.quotient.coords(c)


def _layer_system(p, layer, chain_pivots, tuple_elems):
    """Integer system rows: one row per chain pivot (commutator coordinates
    against every tuple element) plus module relation rows."""
    qn = layer.module.rank
    width = qn * len(tuple_elems)
    rows = []
    for u in chain_pivots:
        row = []
        for v in tuple_elems:
            row.extend(layer.coords(p.commutator(v, u)))
        rows.append(tuple(row))
    rel = layer.module.relation_rows()
    for j in range(len(tuple_elems)):
        for rr in rel:
            row = [0] * width
            row[j * qn : (j + 1) * qn] = list(rr)
            rows.append(tuple(row))
    mat = IntMatrix(rows) if rows else IntMatrix.zeros(0, width)
    return mat, width


def _combine(p, pivots, coeffs):
    z = p.identity()
    for u, a in zip(pivots, coeffs):
        if a:
            z = p.multiply(z, p.power(u, a))
    return z


def simultaneous_conjugator(p: PcPresentation, ts, vs):
    """g with t_j^g = v_j for all j, or None.

    Layered lifting along the lower central series: the correction at each
    layer ranges over the centraliser chain of the target tuple, on which
    the commutator map into the layer is a homomorphism.
    """
    ts = [p.normal_form(t) for t in ts]
    vs = [p.normal_form(v) for v in vs]
    if len(ts) != len(vs):
        raise ValueError("tuple length mismatch")
    ab = p.abelianization()
    for t, v in zip(ts, vs):
        if ab.coords(t) != ab.coords(v):
            return None
    gamma = lower_central_series(p)
    g = p.identity()
    chain = Subgroup(p, [p.gen(i) for i in range(p.n)])
    for w in range(1, len(gamma) - 1):
        layer = _GammaLayer(p, gamma[w], gamma[w + 1])
        pivots = [chain.pivots[d] for d in sorted(chain.pivots)]
        mat, _width = _layer_system(p, layer, pivots, vs)
        rhs = []
        feasible = True
        for t, v in zip(ts, vs):
            resid = p.multiply(p.invert(p.conjugate(t, g)), v)
            if not gamma[w].contains(resid):
                feasible = False
                break
            rhs.extend(layer.coords(resid))
        if not feasible:
            return None
        sol, kernel = solve_integer(mat.transpose(), tuple(rhs))
        if sol is None:
            return None
        r = len(pivots)
        g = p.multiply(g, _combine(p, pivots, sol[:r]))
        new_gens = [_combine(p, pivots, k[:r]) for k in kernel]
        new_gens.extend(gamma[w].gens)
        chain = Subgroup(p, new_gens)
    for t, v in zip(ts, vs):
        if p.conjugate(t, g) != v:
            raise RuntimeError("conjugator lifting produced a non-solution")
    return g


def centralizer(p: PcPresentation, ts) -> Subgroup:
    """Centraliser of a tuple of elements."""
    ts = [p.normal_form(t) for t in ts]
    gamma = lower_central_series(p)
    chain = Subgroup(p, [p.gen(i) for i in range(p.n)])
    for w in range(1, len(gamma) - 1):
        layer = _GammaLayer(p, gamma[w], gamma[w + 1])
        pivots = [chain.pivots[d] for d in sorted(chain.pivots)]
        mat, width = _layer_system(p, layer, pivots, ts)
        _, kernel = solve_integer(mat.transpose(), (0,) * width)
        r = len(pivots)
        new_gens = [_combine(p, pivots, k[:r]) for k in kernel]
        new_gens.extend(gamma[w].gens)
        chain = Subgroup(p, new_gens)
    for t in ts:
        for h in chain.gens:
            if p.commutator(t, h) != p.identity():
                raise RuntimeError("centraliser verification failed")
    return chain


def center(p: PcPresentation) -> Subgroup:
    z = centralizer(p, [p.gen(i) for i in range(p.n)])
    for h in z.gens:
        for k in range(p.n):
            if p.commutator(p.gen(k), h) != p.identity():
                raise RuntimeError("center verification failed")
    return z


def upper_central_series(p: PcPresentation):
    """[1 = nu_0, nu_1 = Z(N), ..., nu_m = N], as subgroups of p."""
    terms = [Subgroup(p, [])]
    cur = terms[0]
    for _ in range(p.n + 1):
        if cur.is_whole_group():
            break
        qmap = QuotientMap(p, cur, check_normal=False)
        nxt = qmap.preimage(center(qmap.target))
        if nxt == cur:
            raise NotNilpotent("upper central series stalls below the whole group")
        terms.append(nxt)
        cur = nxt
    if not cur.is_whole_group():
        raise NotNilpotent("upper central series does not reach the group")
    return terms


# ---------------------------------------------------------------------------
# homomorphisms


class GroupHom:
    """Homomorphism between pc groups, given by generator images."""

    def __init__(self, source: PcPresentation, target: PcPresentation, images, check=True):
        self.source = source
        self.target = target
        self.images = tuple(target.normal_form(v) for v in images)
        if len(self.images) != source.n:
            raise ValueError("need one image per generator")
        if check:
            self.check_relations()

    def check_relations(self):
        s, t = self.source, self.target
        for (i, j), v in s.conj.items():
            lhs = t.conjugate(self.images[j], self.images[i])
            rhs = self.apply(v)
            if lhs != rhs:
                raise ValueError(
                    f"relation violated: {s.names[j]}^{s.names[i]} = {_word_str(s, v)}"
                )
        for i, m in enumerate(s.orders):
            if m is None:
                continue
            lhs = t.power(self.images[i], m)
            rhs = self.apply(s._power_tail(i))
            if lhs != rhs:
                raise ValueError(
                    f"relation violated: {s.names[i]}^{m} = {_word_str(s, s._power_tail(i))}"
                )

    def apply(self, x):
        x = self.source.normal_form(x)
        out = self.target.identity()
        for i, e in enumerate(x):
            if e:
                out = self.target.multiply(out, self.target.power(self.images[i], e))
        return out

    def compose(self, other: "GroupHom") -> "GroupHom":
        """self o other (apply other first)."""
        if other.target is not self.source:
            raise ValueError("composition mismatch")
        return GroupHom(
            other.source, self.target, [self.apply(v) for v in other.images], check=False
        )

    def __eq__(self, other):
        return (
            isinstance(other, GroupHom)
            and self.source is other.source
            and self.target is other.target
            and self.images == other.images
        )

    def __hash__(self):
        return hash(self.images)

    def is_identity(self):
        return self.source is self.target and all(
            self.images[i] == self.source.gen(i) for i in range(self.source.n)
        )

    def image_subgroup(self) -> Subgroup:
        return Subgroup(self.target, list(self.images))

    def is_surjective(self) -> bool:
        return self.image_subgroup().is_whole_group()

    def is_automorphism(self) -> bool:
        """For f.g. nilpotent endomorphisms surjectivity implies bijectivity."""
        if self.source is not self.target:
            return False
        try:
            self.check_relations()
        except ValueError:
            return False
        return self.is_surjective()

    def inverse(self) -> "GroupHom":
        """Inverse of an isomorphism, via a payload-tracked induced sequence."""
        items = [(self.images[k], self.source.gen(k)) for k in range(self.source.n)]
        igs = _Igs(self.target, payload_parent=self.source).build(items)
        piv = igs.piv
        pre_images = []
        for k in range(self.target.n):
            x = self.target.gen(k)
            pay = self.source.identity()
            while any(x):
                d = _lead(x)
                if d not in piv:
                    raise ValueError("homomorphism is not surjective")
                h = piv[d]
                a = h[0][d]
                b = x[d]
                if b % a:
                    raise ValueError("homomorphism is not surjective")
                q = b // a
                pay = self.source.multiply(pay, self.source.power(h[1], q))
                x = self.target.multiply(self.target.power(h[0], -q), x)
            pre_images.append(pay)
        inv = GroupHom(self.target, self.source, pre_images, check=False)
        for k in range(self.source.n):
            if inv.apply(self.apply(self.source.gen(k))) != self.source.gen(k):
                raise ValueError("inverse computation failed (map is not bijective)")
        for k in range(self.target.n):
            if self.apply(inv.apply(self.target.gen(k))) != self.target.gen(k):
                raise ValueError("inverse computation failed (map is not bijective)")
        return inv


def hom_from_images(source, target, images, check=True) -> GroupHom:
    return GroupHom(source, target, images, check=check)


def identity_hom(p) -> GroupHom:
    return GroupHom(p, p, [p.gen(i) for i in range(p.n)], check=False)


def inner_automorphism(p, g) -> GroupHom:
    g = p.normal_form(g)
    return GroupHom(p, p, [p.conjugate(p.gen(i), g) for i in range(p.n)], check=False)


def is_inner(h: GroupHom):
    """Conjugator g with Ad_g = h, or None."""
    if h.source is not h.target:
        raise ValueError("is_inner needs an endomorphism")
    p = h.source
    return simultaneous_conjugator(p, [p.gen(i) for i in range(p.n)], list(h.images))


# ---------------------------------------------------------------------------
# torsion


class TorsionData:
    """Torsion subgroup tau, an exponent m with G^m meeting tau trivially, and data for
    the embedding of G into (G/tau) x (G/G^m)."""

    def __init__(self, p, tau: Subgroup, tau_elements, m: int, power_subgroup: Subgroup):
        self.p = p
        self.tau = tau
        self.tau_elements = tuple(tau_elements)
        self.m = m
        self.power_subgroup = power_subgroup

    def verify_embedding(self, radius=2):
        """The pair of projections is injective on the ball of the given
        radius over the generators."""
        p = self.p
        ball = {p.identity()}
        frontier = [p.identity()]
        for _ in range(radius):
            new = []
            for x in frontier:
                for k in range(p.n):
                    for e in (1, -1):
                        y = p.multiply(x, p.power(p.gen(k), e))
                        if y not in ball:
                            ball.add(y)
                            new.append(y)
            frontier = new
        qt = QuotientMap(p, self.tau, check_normal=False)
        qm = QuotientMap(p, self.power_subgroup, check_normal=False)
        seen = {}
        for x in ball:
            key = (qt.project(x), qm.project(x))
            if key in seen and seen[key] != x:
                return False
            seen[key] = x
        return True


def _abelian_torsion_gens(p: PcPresentation):
    """Generators of the torsion subgroup of an abelian presentation."""
    rows = []
    for i, m in enumerate(p.orders):
        if m is not None:
            tail = p._power_tail(i)
            rows.append(tuple((m if k == i else 0) - tail[k] for k in range(p.n)))
    sat = saturation_basis(rows, p.n) if rows else []
    return [p.normal_form(r) for r in sat]


def _element_order(p, x, cap):
    k = 1
    y = x
    while any(y):
        y = p.multiply(y, x)
        k += 1
        if k > cap:
            raise CapExceeded("element order exceeds cap")
    return k


def torsion_data(p: PcPresentation, cap=10**6) -> TorsionData:
    """The (finite) torsion subgroup, all its elements, and a verified m
    with G^m meeting tau trivially."""
    if p.is_abelian():
        tau = Subgroup(p, _abelian_torsion_gens(p))
        tau_elements = tau.elements(cap=cap)
    else:
        zq = center(p)
        qmap = QuotientMap(p, zq, check_normal=False)
        sub_td = torsion_data(qmap.target, cap=cap)
        zpres, to_z, from_z = zq.presentation()
        zmodule = zpres.abelianization()
        ztau = Subgroup(zpres, _abelian_torsion_gens(zpres))
        ztau_elements = [from_z(t) for t in ztau.elements(cap=cap)]
        elements = []
        for tbar in sub_td.tau_elements:
            r = qmap.lift(tbar)
            e = 1
            x = tbar
            while any(x):
                x = qmap.target.multiply(x, tbar)
                e += 1
                if e > cap:
                    raise CapExceeded("torsion order overran the cap")
            czc = zmodule.coords(to_z(p.power(r, e)))
            fr = zmodule.module.free_rank
            if any(c % e for c in czc[:fr]):
                continue  # no torsion element above this coset
            z0 = [0] * zmodule.module.rank
            for t in range(fr):
                z0[t] = -(czc[t] // e)
            zcorr = from_z(zmodule.lift(tuple(z0)))
            base = p.multiply(r, zcorr)
            for zt in ztau_elements:
                elements.append(p.multiply(base, zt))
        tau = Subgroup(p, elements)
        tau_elements = tau.elements(cap=cap)
    exp = 1
    for t in tau_elements:
        o = _element_order(p, t, cap)
        exp = exp * o // xgcd(exp, o)[0]
    for k in (1, 2, 3, 4, 6, 8, 12, 24):
        m = exp * k
        v = verbal_power_subgroup(p, m, cap=cap)
        if all(not v.contains(t) for t in tau_elements if any(t)):
            return TorsionData(p, tau, tau_elements, m, v)
    raise CapExceeded("no separating power exponent found within the search range")


# ---------------------------------------------------------------------------
# verbal power subgroups and low index subgroups


def verbal_power_subgroup(p: PcPresentation, k: int, cap=10**6) -> Subgroup:
    """G^k = <x^k : x in G>, certified via the finite quotient by the normal
    closure of the generator k-th powers."""
    if k < 1:
        raise ValueError("power must be >= 1")
    if k == 1:
        return Subgroup(p, [p.gen(i) for i in range(p.n)])
    h = Subgroup(p, [p.power(p.gen(i), k) for i in range(p.n)], normal_closure=True)
    table = quotient_table(p, h, cap=cap, verify=False, check_normal=False)
    gens = list(h.gens)
    for elem in table.elements:
        gens.append(p.power(elem, k))
    return Subgroup(p, gens, normal_closure=True)


def low_index_subgroups(p: PcPresentation, d: int, cap=10**6):
    """All subgroups of index <= d, by canonical echelon pattern enumeration
    with closure filtering."""
    if d < 1:
        raise ValueError("index bound must be >= 1")
    if d > 6:
        raise CapExceeded("low-index bound capped at 6")
    choices = []
    for i in range(p.n):
        m = p.orders[i]
        if m is None:
            choices.append(list(range(1, d + 1)))
        else:
            divs = [e for e in range(1, min(m, d) + 1) if m % e == 0]
            if m <= d:
                divs.append(m)
            choices.append(sorted(set(divs)))
    found = {}

    def rec(i, idx, pattern):
        if i == p.n:
            _try_pattern(p, pattern, d, found)
            return
        for e in choices[i]:
            if idx * e <= d:
                rec(i + 1, idx * e, pattern + [e])

    rec(0, 1, [])
    return [found[key] for key in sorted(found)]


def _try_pattern(p, pattern, d, found):
    from itertools import product as iproduct

    slots = []
    for i, e in enumerate(pattern):
        m = p.orders[i]
        if m is not None and e == m:
            continue  # a full torsion slot needs no pivot
        slots.append((i, e))
    ranges = []
    for (i, _e) in slots:
        for j in range(i + 1, p.n):
            ranges.append(range(pattern[j]))
    for cvals in iproduct(*ranges):
        gens = []
        pos = 0
        for (i, e) in slots:
            vec = [0] * p.n
            vec[i] = e
            for j in range(i + 1, p.n):
                vec[j] = cvals[pos]
                pos += 1
            gens.append(tuple(vec))
        s = Subgroup(p, gens)
        try:
            if s.index_in_parent() <= d:
                found.setdefault(s.gens, s)
        except IndexInfinite:
            pass


def low_index_subgroups_coset_oracle(p: PcPresentation, d: int, cap=10**6):
    """Independent enumeration of index <= d subgroups as point stabilisers
    of transitive permutation actions (test oracle)."""
    from itertools import permutations, product as iproduct
    from math import factorial

    if factorial(d) ** p.n > cap:
        raise CapExceeded("coset-action oracle is too large")
    found = {}
    for k in range(1, d + 1):
        perms = list(permutations(range(k)))

        def pmul(a, b):  # composition: apply b, then a
            return tuple(a[b[i]] for i in range(k))

        def pinv(a):
            out = [0] * k
            for i, v in enumerate(a):
                out[v] = i
            return tuple(out)

        def pword(images, vec):
            out = tuple(range(k))
            for i, e in enumerate(vec):
                if e:
                    base = images[i] if e > 0 else pinv(images[i])
                    for _ in range(abs(e)):
                        out = pmul(out, base)
            return out

        for images in iproduct(perms, repeat=p.n):
            ok = True
            for (i, j), v in p.conj.items():
                if pmul(pinv(images[i]), pmul(images[j], images[i])) != pword(images, v):
                    ok = False
                    break
            if ok:
                for i, m in enumerate(p.orders):
                    if m is not None:
                        acc = tuple(range(k))
                        for _ in range(m):
                            acc = pmul(acc, images[i])
                        if acc != pword(images, p._power_tail(i)):
                            ok = False
                            break
            if not ok:
                continue
            seen = {0}
            frontier = [0]
            while frontier:
                pt = frontier.pop()
                for gperm in images:
                    for im in (gperm[pt], pinv(gperm)[pt]):
                        if im not in seen:
                            seen.add(im)
                            frontier.append(im)
            if len(seen) != k:
                continue
            transversal = {0: p.identity()}
            frontier = [0]
            while frontier:
                pt = frontier.pop()
                for gi in range(p.n):
                    for e in (1, -1):
                        perm = images[gi] if e == 1 else pinv(images[gi])
                        im = perm[pt]
                        if im not in transversal:
                            transversal[im] = p.multiply(
                                p.power(p.gen(gi), e), transversal[pt]
                            )
                            frontier.append(im)
            gens = []
            for pt, t in transversal.items():
                for gi in range(p.n):
                    im = images[gi][pt]
                    gens.append(
                        p.multiply(
                            p.invert(transversal[im]),
                            p.multiply(p.gen(gi), t),
                        )
                    )
            s = Subgroup(p, gens)
            found.setdefault(s.gens, s)
    return [found[key] for key in sorted(found)]
