"""Seeded synthetic arrowhead LP generator with planted redundancies.

Instances are feasible and bounded by construction: rows are anchored to an
interior point and every unbounded variable direction carries a cost pushing
away from it.  The returned manifest names each planted reduction so tests
can assert detector completeness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import LINK, BlockAssignment, MonolithicLP
from .sparse import SparseMatrix

INF = float("inf")


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    nblocks: int = 2
    rows_per_block: int = 6
    cols_per_block: int = 6
    linking_rows: int = 2
    linking_cols: int = 2
    zero_rows: int = 1
    density: float = 0.5
    frac_duplicate_rows: float = 0.0
    frac_singleton_rows: float = 0.0
    frac_empty_cols: float = 0.0
    frac_fixed_cols: float = 0.0
    frac_dependent_rows: float = 0.0
    frac_misplaced: float = 0.0
    frac_inf_bounds: float = 0.0
    frac_eq: float = 0.5

    def validate(self) -> list[str]:
        bad = []
        if self.nblocks < 1:
            bad.append("nblocks must be >= 1")
        for name in ("frac_duplicate_rows", "frac_singleton_rows",
                     "frac_empty_cols", "frac_fixed_cols",
                     "frac_dependent_rows", "frac_misplaced",
                     "frac_inf_bounds", "frac_eq", "density"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                bad.append(f"{name} must lie in [0, 1]")
        return bad


@dataclass
class Manifest:
    """Planted reductions with the uids the detectors must act on."""

    duplicate_pairs: list = field(default_factory=list)  # (kind, kept, dup)
    singleton_rows: list = field(default_factory=list)  # (kind, uid)
    empty_cols: list = field(default_factory=list)
    fixed_cols: list = field(default_factory=list)
    dependent_rows: list = field(default_factory=list)  # eq uids
    misplaced_link_rows: list = field(default_factory=list)  # (kind, uid, block)
    misplaced_link_cols: list = field(default_factory=list)  # (uid, block)
    promotable_cols: list = field(default_factory=list)  # (uid,) 0-link targets
    nnz: int = 0

    def planted_rows(self) -> int:
        return (len(self.duplicate_pairs) + len(self.singleton_rows)
                + len(self.dependent_rows))

    def planted_cols(self) -> int:
        return len(self.empty_cols) + len(self.fixed_cols)


class _Builder:
    def __init__(self):
        self.eq_rows: list[dict[int, float]] = []
        self.eq_b: list[float] = []
        self.eq_tag: list[int] = []
        self.ineq_rows: list[dict[int, float]] = []
        self.ineq_d: list[float] = []
        self.ineq_f: list[float] = []
        self.ineq_tag: list[int] = []

    def add_eq(self, row: dict[int, float], b: float, tag: int) -> int:
        self.eq_rows.append(row)
        self.eq_b.append(b)
        self.eq_tag.append(tag)
        return len(self.eq_rows) - 1

    def add_ineq(self, row: dict[int, float], d: float, f: float, tag: int) -> int:
        self.ineq_rows.append(row)
        self.ineq_d.append(d)
        self.ineq_f.append(f)
        self.ineq_tag.append(tag)
        return len(self.ineq_rows) - 1


def generate(spec: GenSpec) -> tuple[MonolithicLP, BlockAssignment, Manifest]:
    bad = spec.validate()
    if bad:
        raise ValueError("; ".join(bad))
    rng = np.random.default_rng(spec.seed)
    man = Manifest()

    block_cols: dict[int, list[int]] = {i: [] for i in range(spec.nblocks + 1)}
    col_tag: list[int] = []
    xstar: list[float] = []
    lower: list[float] = []
    upper: list[float] = []
    cost: list[float] = []

    def new_col(tag: int, forced_cost=None) -> int:
        j = len(col_tag)
        block_cols[tag].append(j)
        col_tag.append(tag)
        v = float(rng.uniform(-5.0, 5.0))
        xstar.append(v)
        lower.append(v - float(rng.uniform(0.5, 8.0)))
        upper.append(v + float(rng.uniform(0.5, 8.0)))
        c = float(np.round(rng.uniform(-2.0, 2.0), 3)) if forced_cost is None \
            else forced_cost
        cost.append(c)
        # Unbounded sides only where the objective pushes the other way, so
        # the instance stays bounded regardless of the constraints.
        if c > 0.05 and rng.random() < spec.frac_inf_bounds:
            upper[j] = INF
        elif c < -0.05 and rng.random() < spec.frac_inf_bounds:
            lower[j] = -INF
        return j

    n0 = spec.linking_cols
    for _ in range(n0):
        new_col(0)
    for i in range(1, spec.nblocks + 1):
        cnt = max(1, spec.cols_per_block + int(rng.integers(-1, 2)))
        for _ in range(cnt):
            new_col(i)

    def coef() -> float:
        v = float(rng.uniform(0.2, 4.0))
        return v if rng.random() < 0.5 else -v

    def make_row(pool: list[int], k: int) -> dict[int, float]:
        k = max(1, min(k, len(pool)))
        cols = rng.choice(pool, size=k, replace=False)
        return {int(c): coef() for c in cols}

    def act(row: dict[int, float]) -> float:
        return sum(a * xstar[j] for j, a in row.items())

    b = _Builder()

    def add_anchored(row: dict[int, float], tag: int, force_eq=None) -> tuple[str, int]:
        is_eq = rng.random() < spec.frac_eq if force_eq is None else force_eq
        a = act(row)
        if is_eq:
            return "eq", b.add_eq(row, a, tag)
        d = a - float(rng.uniform(0.2, 4.0))
        f = a + float(rng.uniform(0.2, 4.0))
        if rng.random() < 0.3:
            d = -INF
        elif rng.random() < 0.3:
            f = INF
        return "ineq", b.add_ineq(row, d, f, tag)

    # 0-block rows over the linking variables.
    if n0:
        for _ in range(spec.zero_rows):
            k = 1 + int(rng.integers(0, max(1, n0)))
            add_anchored(make_row(block_cols[0], k), 0)

    # Diagonal-block rows; a sprinkle of linking-variable coefficients.
    for i in range(1, spec.nblocks + 1):
        m_i = max(1, spec.rows_per_block + int(rng.integers(-1, 2)))
        for _ in range(m_i):
            k = max(1, int(round(spec.density * len(block_cols[i]))))
            row = make_row(block_cols[i], 1 + int(rng.integers(0, k)))
            if n0 and rng.random() < 0.35:
                row.update(make_row(block_cols[0], 1))
            add_anchored(row, i)

    # Linking rows spanning at least two blocks.
    for _ in range(spec.linking_rows):
        if spec.nblocks >= 2:
            picks = rng.choice(np.arange(1, spec.nblocks + 1),
                               size=min(spec.nblocks, 2 + int(rng.integers(0, 2))),
                               replace=False)
        else:
            picks = [1]
        row: dict[int, float] = {}
        for i in picks:
            row.update(make_row(block_cols[int(i)], 1 + int(rng.integers(0, 2))))
        if n0 and rng.random() < 0.5:
            row.update(make_row(block_cols[0], 1))
        add_anchored(row, LINK)

    # -- planted reductions -------------------------------------------------

    def plant_count(frac: float, base: int) -> int:
        return int(round(frac * base))

    base_rows = len(b.eq_rows) + len(b.ineq_rows)

    for _ in range(plant_count(spec.frac_duplicate_rows, base_rows)):
        lam = float(2.0 ** int(rng.integers(-2, 3)))
        if rng.random() < 0.5:
            lam = -lam
        if b.eq_rows and rng.random() < 0.5:
            src = int(rng.integers(0, len(b.eq_rows)))
            row = {j: lam * a for j, a in b.eq_rows[src].items()}
            dup = b.add_eq(row, lam * b.eq_b[src], b.eq_tag[src])
            man.duplicate_pairs.append(("eq", src, dup))
        elif b.ineq_rows:
            src = int(rng.integers(0, len(b.ineq_rows)))
            row = {j: lam * a for j, a in b.ineq_rows[src].items()}
            d, f = b.ineq_d[src], b.ineq_f[src]
            if lam > 0:
                nd = lam * d if d != -INF else -INF
                nf = lam * f if f != INF else INF
            else:
                nd = lam * f if f != INF else -INF
                nf = lam * d if d != -INF else INF
            dup = b.add_ineq(row, nd, nf, b.ineq_tag[src])
            man.duplicate_pairs.append(("ineq", src, dup))

    for _ in range(plant_count(spec.frac_singleton_rows, base_rows)):
        i = 1 + int(rng.integers(0, spec.nblocks))
        j = int(rng.choice(block_cols[i]))
        a = coef()
        if rng.random() < 0.4:
            kind, idx = "eq", b.add_eq({j: a}, a * xstar[j], i)
        else:
            mid = a * xstar[j]
            s1, s2 = float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.1, 2.0))
            kind, idx = "ineq", b.add_ineq({j: a}, mid - s1, mid + s2, i)
        man.singleton_rows.append((kind, idx))

    base_cols = len(col_tag)
    for _ in range(plant_count(spec.frac_empty_cols, base_cols)):
        i = 1 + int(rng.integers(0, spec.nblocks))
        man.empty_cols.append(new_col(i, forced_cost=float(rng.uniform(0.1, 2.0))))
    for _ in range(plant_count(spec.frac_fixed_cols, base_cols)):
        i = 1 + int(rng.integers(0, spec.nblocks))
        j = int(rng.choice(block_cols[i]))
        if j < base_cols and j not in man.fixed_cols and j not in man.empty_cols:
            man.fixed_cols.append(j)

    eq_by_tag: dict[int, list[int]] = {}
    for r, tag in enumerate(b.eq_tag):
        eq_by_tag.setdefault(tag, []).append(r)
    for _ in range(plant_count(spec.frac_dependent_rows, len(b.eq_rows))):
        cands = [t for t, rows in eq_by_tag.items() if t >= 1 and len(rows) >= 2]
        if not cands:
            break
        tag = int(rng.choice(cands))
        r1, r2 = rng.choice(eq_by_tag[tag], size=2, replace=False)
        a1, a2 = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0))
        row: dict[int, float] = {}
        for j, a in b.eq_rows[int(r1)].items():
            row[j] = row.get(j, 0.0) + a1 * a
        for j, a in b.eq_rows[int(r2)].items():
            row[j] = row.get(j, 0.0) + a2 * a
        row = {j: a for j, a in row.items() if a != 0.0}
        idx = b.add_eq(row, a1 * b.eq_b[int(r1)] + a2 * b.eq_b[int(r2)], tag)
        man.dependent_rows.append(idx)

    nmis = plant_count(spec.frac_misplaced, base_rows)
    for t in range(nmis):
        which = t % 3
        if which == 0:
            # A row tagged linking although its support sits in one block.
            i = 1 + int(rng.integers(0, spec.nblocks))
            row = make_row(block_cols[i], 2)
            kind, idx = add_anchored(row, LINK)
            man.misplaced_link_rows.append((kind, idx, i))
        elif which == 1 and n0:
            # A fresh linking variable used by a single block's rows.
            i = 1 + int(rng.integers(0, spec.nblocks))
            j = new_col(0)
            row = {j: coef()}
            row.update(make_row(block_cols[i], 1))
            add_anchored(row, i)
            man.misplaced_link_cols.append((j, i))
        else:
            # A local variable appearing only in linking rows (0-link target).
            i = 1 + int(rng.integers(0, spec.nblocks))
            j = new_col(i)
            row = {j: coef()}
            for ii in range(1, spec.nblocks + 1):
                if ii != i and rng.random() < 0.6:
                    row.update(make_row(block_cols[ii][:1], 1))
            add_anchored(row, LINK)
            man.promotable_cols.append(j)

    n = len(col_tag)
    lower = np.asarray(lower)
    upper = np.asarray(upper)
    cost = np.asarray(cost)
    xstar = np.asarray(xstar)
    for j in man.fixed_cols:
        lower[j] = upper[j] = xstar[j]

    A = SparseMatrix.from_triplets(
        len(b.eq_rows), n,
        ((r, j, a) for r, row in enumerate(b.eq_rows) for j, a in row.items()),
    )
    C = SparseMatrix.from_triplets(
        len(b.ineq_rows), n,
        ((r, j, a) for r, row in enumerate(b.ineq_rows) for j, a in row.items()),
    )
    lp = MonolithicLP(
        A=A, b=np.asarray(b.eq_b, dtype=float),
        C=C, d=np.asarray(b.ineq_d, dtype=float), f=np.asarray(b.ineq_f, dtype=float),
        l=lower, u=upper, c=cost, offset=0.0,
        name=f"ahlp-seed{spec.seed}",
    )
    asg = BlockAssignment(
        spec.nblocks,
        np.asarray(b.eq_tag, dtype=np.int64),
        np.asarray(b.ineq_tag, dtype=np.int64),
        np.asarray(col_tag, dtype=np.int64),
    )
    man.nnz = lp.nnz()
    return lp, asg, man
