"""Permutation tuples describing how copies of a cut disk are glued.

Products are read left to right: ``p * q`` applies ``p`` first, then ``q``.
With this convention a gluing tuple must satisfy
``sigma_1 * sigma_2 * ... * sigma_k == identity``.
Internally permutations act on ``0..d-1``; their public notation is 1-based.
"""

import itertools
import math
import re
import time
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# centralizers larger than this are not enumerated; that level is searched unpruned
MAX_CENTRALIZER = 50_000


class Permutation:
    """A bijection of ``{1..d}`` stored in one-line notation."""

    __slots__ = ("arr",)

    def __init__(self, images):
        images = tuple(int(x) for x in images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ValueError(f"{images} is not a permutation of 1..{len(images)}")
        self.arr = tuple(x - 1 for x in images)

    @classmethod
    def _from_arr(cls, arr):
        p = cls.__new__(cls)
        p.arr = tuple(arr)
        return p

    @classmethod
    def identity(cls, d):
        return cls._from_arr(range(d))

    @classmethod
    def from_cycles(cls, cycles, d):
        arr = list(range(d))
        for c in cycles:
            c = [int(x) - 1 for x in c]
            for i, a in enumerate(c):
                if not 0 <= a < d:
                    raise ValueError(f"symbol {a + 1} outside 1..{d}")
                arr[a] = c[(i + 1) % len(c)]
        if sorted(arr) != list(range(d)):
            raise ValueError(f"cycles {cycles} do not define a permutation")
        return cls._from_arr(arr)

    @classmethod
    def parse(cls, text, d=None):
        """Parse cycle notation such as ``(1)(2)(3 4 5)`` or ``(3,4,5)``.

        With a known degree below 10, separator-free cycles like ``(345)`` are
        read digit by digit.
        """
        cycles = []
        for c in re.findall(r"\(([^()]*)\)", text):
            c = c.strip()
            if d is not None and d < 10 and c.isdigit():
                cycles.append([int(t) for t in c])
            else:
                cycles.append([int(t) for t in re.split(r"[,\s]+", c) if t])
        if d is None:
            d = max((max(c) for c in cycles if c), default=0)
        return cls.from_cycles([c for c in cycles if c], d)

    @property
    def degree(self):
        return len(self.arr)

    @property
    def images(self):
        return tuple(x + 1 for x in self.arr)

    def __call__(self, i):
        return self.arr[i - 1] + 1

    def __mul__(self, other):
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return Permutation._from_arr(compose(self.arr, other.arr))

    def inverse(self):
        return Permutation._from_arr(inverse(self.arr))

    def conjugate(self, g):
        """``g^-1 * self * g``: relabel every symbol ``i`` as ``g(i)``."""
        return Permutation._from_arr(conjugate(g.arr, self.arr))

    def cycles(self):
        return [tuple(x + 1 for x in c) for c in cycles(self.arr)]

    def cycle_type(self):
        return cycle_type(self.arr)

    def is_identity(self):
        return self.arr == tuple(range(self.degree))

    def __eq__(self, other):
        return isinstance(other, Permutation) and self.arr == other.arr

    def __hash__(self):
        return hash(self.arr)

    def __lt__(self, other):
        return self.arr < other.arr

    def __str__(self):
        return "".join("(" + " ".join(str(x) for x in c) + ")" for c in self.cycles())

    def __repr__(self):
        return f"Permutation({str(self)!s}, d={self.degree})"


def compose(p, q):
    """Apply ``p`` then ``q``."""
    return tuple(q[i] for i in p)


def inverse(p):
    inv = [0] * len(p)
    for i, x in enumerate(p):
        inv[x] = i
    return tuple(inv)


def conjugate(g, s):
    """The permutation ``s`` with every symbol relabelled by ``g``."""
    out = [0] * len(s)
    for i, x in enumerate(s):
        out[g[i]] = g[x]
    return tuple(out)


def cycles(p):
    seen = [False] * len(p)
    out = []
    for i in range(len(p)):
        if seen[i]:
            continue
        c = [i]
        seen[i] = True
        j = p[i]
        while j != i:
            c.append(j)
            seen[j] = True
            j = p[j]
        out.append(tuple(c))
    return out


def cycle_type(p):
    """Sorted multiset of cycle lengths, fixed points included."""
    if isinstance(p, Permutation):
        p = p.arr
    return tuple(sorted(len(c) for c in cycles(p)))


def orbit_count(perms, d):
    parent = list(range(d))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p in perms:
        for i, x in enumerate(p):
            a, b = find(i), find(x)
            if a != b:
                parent[a] = b
    return len({find(i) for i in range(d)})


def is_transitive(perms, d):
    parent = list(range(d))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p in perms:
        for i, x in enumerate(p):
            a, b = find(i), find(x)
            if a != b:
                parent[a] = b
    return len({find(i) for i in range(d)}) == 1


@dataclass(frozen=True)
class RamificationType:
    """One multiset of ramification indices per branch point, all summing to ``degree``."""

    structures: tuple
    degree: int

    def __post_init__(self):
        structs = tuple(tuple(sorted(int(r) for r in s)) for s in self.structures)
        object.__setattr__(self, "structures", structs)
        if self.degree < 1 or len(structs) < 1:
            raise ValueError("need at least one branch point and degree >= 1")
        for i, s in enumerate(structs):
            if not s or min(s) < 1:
                raise ValueError(f"structure {i} must contain positive integers")
            if sum(s) != self.degree:
                raise ValueError(f"structure {i} = {list(s)} sums to {sum(s)}, not the degree {self.degree}")

    @property
    def k(self):
        return len(self.structures)

    def rh_sum(self):
        return sum(r - 1 for s in self.structures for r in s)

    def __str__(self):
        return "[" + ",".join("[" + ",".join(map(str, s)) + "]" for s in self.structures) + "]"


def check_rh(rho):
    """Riemann-Hurwitz for a torus over a sphere: sum of (r - 1) equals 2d."""
    return rho.rh_sum() == 2 * rho.degree


def rh_explanation(rho):
    """Riemann-Hurwitz arithmetic, ``k·(r-1) vs 2d`` for uniform types."""
    lhs, rhs = rho.rh_sum(), 2 * rho.degree
    op = "=" if lhs == rhs else "≠"
    nontrivial = {r for s in rho.structures for r in s if r > 1}
    uniform = len(set(rho.structures)) == 1 and len(nontrivial) == 1 and sum(r > 1 for r in rho.structures[0]) == 1
    if uniform:
        (r,) = nontrivial
        return f"{rho.k}·{r - 1} {op} {rhs} (k·(r-1) vs 2·d with d={rho.degree})"
    parts = "+".join(f"{r - 1}" for s in rho.structures for r in s if r > 1) or "0"
    return f"{parts} = {lhs} {op} {rhs} (sum of (r-1) vs 2·d with d={rho.degree})"


def uniform_ramification(k, r, d):
    """``[[1^(d-r), r]]^k`` and whether it satisfies ``k (r - 1) == 2 d``."""
    if r > d:
        raise ValueError(f"ramification order r={r} exceeds the degree d={d}")
    if r < 1 or k < 1:
        raise ValueError("k and r must be positive")
    rho = RamificationType(tuple(tuple([1] * (d - r) + [r]) for _ in range(k)), d)
    return rho, k * (r - 1) == 2 * d


@dataclass(frozen=True)
class GluingInstructions:
    """One permutation per branch point; copy ``j`` of arc A is glued to copy ``sigma(j)`` of arc B."""

    sigmas: tuple

    def __post_init__(self):
        sig = tuple(s if isinstance(s, Permutation) else Permutation(s) for s in self.sigmas)
        object.__setattr__(self, "sigmas", sig)
        if not sig:
            raise ValueError("empty gluing instructions")
        if len({s.degree for s in sig}) != 1:
            raise ValueError("all permutations must share one degree")

    @property
    def degree(self):
        return self.sigmas[0].degree

    @property
    def k(self):
        return len(self.sigmas)

    def ramification_type(self):
        return RamificationType(tuple(s.cycle_type() for s in self.sigmas), self.degree)

    def conjugate(self, g):
        return GluingInstructions(tuple(s.conjugate(g) for s in self.sigmas))

    def to_text(self):
        return "".join(str(s) + "\n" for s in self.sigmas)

    @classmethod
    def from_text(cls, text, degree=None):
        lines = [l.split("#", 1)[0].strip() for l in text.splitlines()]
        lines = [l for l in lines if l]
        if degree is None:
            nums = [int(x) for l in lines for x in re.findall(r"\d+", l)]
            degree = max(nums, default=1)
        return cls(tuple(Permutation.parse(l, degree) for l in lines))

    def __str__(self):
        return ", ".join(str(s) for s in self.sigmas)


@dataclass
class GluingCheck:
    cycle_types: bool
    product_one: bool
    transitive: bool
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return self.cycle_types and self.product_one and self.transitive

    def __bool__(self):
        return self.ok


def check_gluing_conditions(sigma, rho):
    """Evaluate (i) cycle types, (ii) product one, (iii) transitivity.

    Riemann-Hurwitz feasibility of ``rho`` is not part of this check.
    """
    if not isinstance(sigma, GluingInstructions):
        sigma = GluingInstructions(tuple(sigma))
    d = sigma.degree
    if rho.degree != d:
        raise ValueError(f"degree mismatch: permutations act on {d} symbols, rho has degree {rho.degree}")
    failures = []
    types = len(sigma.sigmas) == rho.k and all(s.cycle_type() == r for s, r in zip(sigma.sigmas, rho.structures))
    if not types:
        failures.append("cycle types")
    prod = tuple(range(d))
    for s in sigma.sigmas:
        prod = compose(prod, s.arr)
    one = prod == tuple(range(d))
    if not one:
        failures.append("product one")
    trans = is_transitive([s.arr for s in sigma.sigmas], d)
    if not trans:
        failures.append("transitivity")
    return GluingCheck(types, one, trans, failures)


@lru_cache(maxsize=None)
def conjugacy_class(ctype, d):
    """All permutations of ``d`` symbols with cycle type ``ctype``, lexicographically sorted."""
    ctype = tuple(sorted(ctype))
    if sum(ctype) != d:
        raise ValueError(f"cycle type {ctype} does not sum to {d}")
    out = []

    def build(arr, free, lengths):
        if not free:
            out.append(tuple(arr))
            return
        first = free[0]
        rest = free[1:]
        for length in sorted(set(lengths)):
            remaining = list(lengths)
            remaining.remove(length)
            for tail in itertools.permutations(rest, length - 1):
                cyc = (first,) + tail
                for i, a in enumerate(cyc):
                    arr[a] = cyc[(i + 1) % length]
                left = [x for x in rest if x not in tail]
                build(arr, left, remaining)

    build(list(range(d)), list(range(d)), list(ctype))
    out.sort()
    return tuple(out)


@lru_cache(maxsize=None)
def _class_array(ctype, d):
    return np.array(conjugacy_class(ctype, d), dtype=np.int8).reshape(-1, d)


def _cycle_types_rows(perms):
    """Cycle type (as sorted length tuple) of every row of an (M, d) array."""
    m, d = perms.shape
    rows = np.arange(m)[:, None]
    cur = perms.copy()
    length = np.zeros((m, d), dtype=np.int16)
    ident = np.arange(d)
    for step in range(1, d + 1):
        hit = (cur == ident) & (length == 0)
        length[hit] = step
        cur = perms[rows, cur]
    length.sort(axis=1)
    return length


def _type_row(ctype):
    """Per-symbol cycle lengths, sorted, for comparison with ``_cycle_types_rows``."""
    return np.sort(np.repeat(ctype, ctype)).astype(np.int16)


def class_size(ctype, d):
    counts = Counter(ctype)
    denom = 1
    for length, m in counts.items():
        denom *= length**m * math.factorial(m)
    return math.factorial(d) // denom


def centralizer(p):
    """All ``g`` with ``conjugate(g, p) == p``, built from the cycle structure."""
    cyc = cycles(p)
    by_len = {}
    for c in cyc:
        by_len.setdefault(len(c), []).append(c)
    choices = []
    for length, cs in sorted(by_len.items()):
        opts = []
        for perm in itertools.permutations(range(len(cs))):
            for shifts in itertools.product(range(length), repeat=len(cs)):
                opts.append([(cs[a], cs[perm[a]], shifts[a]) for a in range(len(cs))])
        choices.append(opts)
    d = len(p)
    out = []
    for combo in itertools.product(*choices):
        g = [0] * d
        for group in combo:
            for src, dst, t in group:
                n = len(src)
                for s in range(n):
                    g[src[s]] = dst[(s + t) % n]
        out.append(tuple(g))
    return out


def centralizer_size(p):
    counts = Counter(len(c) for c in cycles(p))
    size = 1
    for length, m in counts.items():
        size *= length**m * math.factorial(m)
    return size


class SearchTimeout(RuntimeError):
    pass


@dataclass
class SearchResult:
    """Gluing tuples found by the search.

    ``exhausted`` means the whole space was visited, so an empty result proves
    that no cover of this type exists.  ``timed_out`` flags partial results.
    """

    solutions: list
    exhausted: bool
    timed_out: bool
    nodes: int = 0

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self):
        return len(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]


class RHError(ValueError):
    def __init__(self, rho):
        super().__init__("RH violated: " + rh_explanation(rho))
        self.rho = rho


def find_gluing_instructions(rho, max_solutions=None, time_budget=300.0):
    """Depth-first search for transitive product-one tuples of type ``rho``.

    The first permutation is fixed to the smallest member of its class.  At
    depth ``i`` a candidate is skipped when it is conjugate, by an element
    centralizing the current prefix, to a candidate already tried; the last
    permutation is forced to be the inverse of the prefix product.  Each
    returned tuple therefore represents a different class under simultaneous
    conjugation (up to the ``MAX_CENTRALIZER`` fallback).  Prefixes whose
    orbits can no longer be merged into one by the remaining free
    permutations are cut off early.
    """
    if not check_rh(rho):
        raise RHError(rho)
    d, k = rho.degree, rho.k
    ident = tuple(range(d))
    classes = [conjugacy_class(s, d) for s in rho.structures]
    deadline = time.monotonic() + time_budget
    result = SearchResult([], exhausted=False, timed_out=False)
    last = rho.structures[-1]
    # a permutation with l cycles can merge at most d - l orbits
    merge = [d - len(s) for s in rho.structures]
    budget = [sum(merge[i:k - 1]) for i in range(k)]

    class _Stop(Exception):
        pass

    def accept(prefix, prod):
        sigma_k = inverse(prod)
        if cycle_type(sigma_k) != last:
            return
        if not is_transitive(prefix, d):
            return
        result.solutions.append(GluingInstructions(tuple(Permutation._from_arr(s) for s in prefix + [sigma_k])))
        if max_solutions is not None and len(result.solutions) >= max_solutions:
            raise _Stop

    def descend(i, prefix, prod, zgroup):
        # i: index of the permutation to choose next; the last one is implied
        if i == k - 1:
            accept(prefix, prod)
            return
        if i == k - 2:
            last_free(i, prefix, prod, zgroup)
            return
        prune = zgroup is not None and len(zgroup) > 1
        visited = set()
        for s in classes[i]:
            result.nodes += 1
            if result.nodes % 2048 == 0 and time.monotonic() > deadline:
                result.timed_out = True
                raise _Stop
            if prune:
                if s in visited:
                    continue
                visited.update(conjugate(g, s) for g in zgroup)
            if orbit_count(prefix + [s], d) - 1 > budget[i + 1]:
                continue
            if zgroup is None:
                sub = None
            else:
                sub = [g for g in zgroup if conjugate(g, s) == s]
            descend(i + 1, prefix + [s], compose(prod, s), sub)

    def last_free(i, prefix, prod, zgroup):
        # vectorized screen: the forced last permutation must have type rho_k
        cand = _class_array(rho.structures[i], d)
        result.nodes += len(cand)
        if time.monotonic() > deadline:
            result.timed_out = True
            raise _Stop
        prod_arr = np.array(prod, dtype=np.intp)
        closing = cand[:, prod_arr]  # apply prod, then the candidate
        ok = np.all(_cycle_types_rows(closing) == _type_row(last), axis=1)
        prune = zgroup is not None and len(zgroup) > 1
        visited = set()
        for row in np.nonzero(ok)[0]:
            s = tuple(int(x) for x in cand[row])
            if prune:
                if s in visited:
                    continue
            if not is_transitive(prefix + [s], d):
                continue
            if prune:
                visited.update(conjugate(g, s) for g in zgroup)
            accept(prefix + [s], compose(prod, s))

    try:
        if k == 1:
            if rho.structures[0] == (1,) * d and d == 1:
                result.solutions.append(GluingInstructions((Permutation.identity(1),)))
        else:
            s1 = classes[0][0]
            z = centralizer(s1) if centralizer_size(s1) <= MAX_CENTRALIZER else None
            descend(1, [s1], compose(ident, s1), z)
        result.exhausted = True
    except _Stop:
        pass
    return result


def canonical_form(sigma):
    """Lexicographically smallest one-line tuple over all simultaneous conjugates."""
    if isinstance(sigma, GluingInstructions):
        arrs = [s.arr for s in sigma.sigmas]
    else:
        arrs = [s.arr if isinstance(s, Permutation) else tuple(s) for s in sigma]
    d = len(arrs[0])
    return min(tuple(conjugate(g, s) for s in arrs) for g in itertools.permutations(range(d)))


# (k, d, r) -> tuples as printed in the gluing table, 1-based cycles.
_TABLE_CYCLES = {
    (3, 3, 3): [(1, 2, 3), (1, 2, 3), (1, 2, 3)],
    (3, 6, 5): [(1, 2, 3, 4, 5), (1, 3, 4, 6, 2), (2, 6, 3, 5, 4)],
    (3, 9, 7): [(1, 2, 3, 4, 5, 6, 7), (1, 7, 6, 2, 3, 8, 9), (1, 9, 8, 2, 5, 4, 3)],
    (4, 2, 2): [(1, 2), (1, 2), (1, 2), (1, 2)],
    (4, 4, 3): [(1, 2, 3), (2, 3, 4), (1, 2, 4), (1, 2, 3)],
    (4, 6, 4): [(1, 2, 3, 4), (2, 5, 4, 3), (1, 5, 6, 4), (1, 5, 4, 6)],
    (4, 8, 5): [(1, 2, 3, 4, 5), (3, 6, 8, 5, 4), (1, 5, 4, 7, 2), (2, 7, 4, 8, 6)],
    (4, 10, 6): [(1, 2, 3, 4, 5, 6), (1, 7, 8, 3, 5, 9), (2, 10, 8, 7, 6, 5), (1, 9, 4, 3, 8, 10)],
    (5, 5, 3): [(3, 4, 5), (2, 3, 5), (1, 5, 2), (1, 2, 5), (2, 4, 3)],
    (5, 10, 5): [(6, 7, 8, 9, 10), (1, 7, 3, 4, 9), (1, 8, 4, 3, 7), (2, 5, 4, 7, 6), (2, 10, 9, 4, 5)],
    (6, 6, 3): [(1, 2, 3), (2, 5, 3), (3, 6, 5), (3, 5, 6), (1, 4, 5), (3, 5, 4)],
    # printed with only five permutations for six branch points; kept for inspection
    (6, 9, 4): [(1, 9, 3, 5), (1, 7, 8, 4), (3, 7, 5, 6), (4, 8, 7, 9), (1, 3, 6, 2)],
}

# First solution of find_gluing_instructions for [[1^5, 4]]^6, d = 9 (frozen; re-derived in tests).
_SEARCHED_K6_D9 = [[(6, 7, 8, 9)], [(6, 7, 9, 8)], [(5, 6, 7, 9)], [(3, 4, 5, 6)], [(1, 2, 3, 5)], [(1, 4, 3, 2)]]


def printed_table():
    """The table rows exactly as printed: ``{(k, d, r): [Permutation, ...]}``."""
    return {key: [Permutation.from_cycles([c], key[1]) for c in cyc] for key, cyc in _TABLE_CYCLES.items()}


@lru_cache(maxsize=None)
def builtin_gluing_table():
    """Validated gluing instructions for every RH-feasible uniform type with k <= 6, d <= 10.

    Keys are ``(k, d, rho)``.  Printed rows failing the conditions are
    replaced by the first tuple found by the search.
    """
    table = {}
    for (k, d, r), perms in printed_table().items():
        rho, feasible = uniform_ramification(k, r, d)
        assert feasible
        if len(perms) == k and check_gluing_conditions(GluingInstructions(tuple(perms)), rho):
            table[(k, d, rho)] = GluingInstructions(tuple(perms))
        elif _SEARCHED_K6_D9 is not None and (k, d, r) == (6, 9, 4):
            table[(k, d, rho)] = GluingInstructions(tuple(Permutation.from_cycles(c, d) for c in _SEARCHED_K6_D9))
        else:
            found = find_gluing_instructions(rho, max_solutions=1)
            if not found.solutions:
                raise RuntimeError(f"no gluing instructions found for k={k}, d={d}, rho={rho}")
            table[(k, d, rho)] = found.solutions[0]
    return table


def lookup_gluing(rho):
    for (k, d, r), sig in builtin_gluing_table().items():
        if r == rho:
            return sig
    return None


def gluing_for(rho, time_budget=300.0):
    """Table entry for ``rho`` if there is one, else the first tuple the search finds."""
    sig = lookup_gluing(rho)
    if sig is not None:
        return sig
    found = find_gluing_instructions(rho, max_solutions=1, time_budget=time_budget)
    if not found.solutions:
        if found.timed_out:
            raise SearchTimeout(f"no gluing instructions for {rho} within {time_budget} s")
        raise ValueError(f"no gluing instructions realize {rho}")
    return found.solutions[0]
