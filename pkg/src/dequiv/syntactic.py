"""Partition refinement for backward and forward differential equivalence.

Backward mode groups variables whose derivatives are equal after renaming
every variable to its block representative (collapse). Forward mode works
on degree<=2 systems through blockwise coefficient sums: for each target
block B', the linear column sums A[B',k] must be constant on each block and
the quadratic sums Q[B'][k,l] may depend only on (block(k), block(l)).

Both engines run signature-refinement sweeps to a fixpoint: at most n
sweeps, each O(m log m) with hashing, deterministic block numbering by
lowest member index. Bound parameters are substituted up front; free
parameters take part in signatures symbolically.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from .errors import DegreeError, FreeParameterError, OracleError, PartitionError
from .model import PolynomialODESystem
from .partition import Partition, refinements
from .poly import Coeff, Scalar, format_scalar, mono_degree

__all__ = [
    "Violation", "CheckResult", "check_bde", "check_fb",
    "refine_bde", "refine_fb", "oracle_coarsest",
]


class Violation:
    """One reason a candidate partition fails a check.

    Attributes:
        kind: "bde-collapse", "fb-linear" or "fb-quadratic".
        members: names of the offending variables (pair within one block).
        subject: what was compared (a collapsed monomial or a column into a
            target block).
        values: the two differing values, rendered as text.
        detail: one-line human-readable description.
    """

    __slots__ = ("kind", "members", "subject", "values", "detail")

    def __init__(self, kind: str, members: tuple, subject: str, values: tuple,
                 detail: str):
        self.kind = kind
        self.members = members
        self.subject = subject
        self.values = values
        self.detail = detail

    def __repr__(self):
        return f"Violation({self.detail})"


class CheckResult:
    """Outcome of check_bde / check_fb; truthy iff valid."""

    __slots__ = ("valid", "violations")

    def __init__(self, valid: bool, violations: tuple):
        self.valid = valid
        self.violations = violations

    def __bool__(self):
        return self.valid

    def __repr__(self):
        if self.valid:
            return "CheckResult(valid)"
        return f"CheckResult({len(self.violations)} violations)"


def _prepared(system: PolynomialODESystem) -> PolynomialODESystem:
    """Substitute bound parameters; free ones stay symbolic."""
    if any(p.value is not None for p in system.parameters):
        return system.resolve(system.free_param_names())
    return system


def _require_match(system: PolynomialODESystem, part: Partition):
    if part.n != system.n:
        raise PartitionError(
            f"partition covers {part.n} indices, system has {system.n} variables")


# ---- backward mode ------------------------------------------------------


def _collapsed_signature(term_list, block_of) -> tuple:
    """Canonical form of a derivative with variables renamed to block ids."""
    acc: dict = {}
    get = acc.get
    for mono, c in term_list:
        ln = len(mono)
        if ln == 1:
            v, e = mono[0]
            key = ((block_of[v], e),)
        elif ln == 0:
            key = ()
        elif ln == 2:
            (v1, e1), (v2, e2) = mono
            b1 = block_of[v1]
            b2 = block_of[v2]
            if b1 < b2:
                key = ((b1, e1), (b2, e2))
            elif b1 > b2:
                key = ((b2, e2), (b1, e1))
            else:
                key = ((b1, e1 + e2),)
        else:
            m: dict = {}
            for v, e in mono:
                b = block_of[v]
                m[b] = m.get(b, 0) + e
            key = tuple(sorted(m.items()))
        cur = get(key)
        acc[key] = c if cur is None else cur + c
    return tuple(sorted(
        ((k, v) for k, v in acc.items() if v != 0), key=lambda kv: kv[0]))


def refine_bde(system: PolynomialODESystem, initial: Partition | None = None) -> Partition:
    """Coarsest backward equivalence refining `initial` (default trivial).

    Fixpoint of splitting blocks by collapsed-derivative signatures. The
    result is exact: it refines initial, collapse(f_i) = collapse(f_j) holds
    on every block, and no coarser refinement of initial satisfies that.
    """
    system = _prepared(system)
    n = system.n
    if initial is None:
        initial = Partition.trivial(n)
    _require_match(system, initial)
    if n == 0:
        return initial

    terms = [tuple(f.raw_terms().items()) for f in system.derivatives]
    # reverse dependency index: variable -> equations mentioning it
    occ: list = [[] for _ in range(n)]
    for i, tl in enumerate(terms):
        seen: set = set()
        for mono, _ in tl:
            for v, _e in mono:
                if v not in seen:
                    seen.add(v)
                    occ[v].append(i)

    block_of = list(initial.block_of)
    members: dict = {b: list(block) for b, block in enumerate(initial.blocks)}
    next_id = len(initial.blocks)
    sig: list = [None] * n

    pending_vars: Iterable[int] = range(n)
    touched_blocks: set = set(members)
    while True:
        for i in pending_vars:
            sig[i] = _collapsed_signature(terms[i], block_of)
        changed: list = []
        for b in sorted(touched_blocks):
            mem = members[b]
            if len(mem) <= 1:
                continue
            buckets: dict = {}
            for i in mem:
                buckets.setdefault(sig[i], []).append(i)
            if len(buckets) == 1:
                continue
            groups = list(buckets.values())
            members[b] = groups[0]
            for extra in groups[1:]:
                members[next_id] = extra
                for i in extra:
                    block_of[i] = next_id
                changed.extend(extra)
                next_id += 1
        if not changed:
            break
        affected: set = set()
        for v in changed:
            affected.update(occ[v])
        pending_vars = sorted(affected)
        touched_blocks = {block_of[i] for i in pending_vars}
    return Partition.from_block_ids(block_of)


def _mono_text(key, names_of_block) -> str:
    if not key:
        return "1"
    return "*".join(
        names_of_block(b) if e == 1 else f"{names_of_block(b)}^{e}"
        for b, e in key)


def check_bde(system: PolynomialODESystem, part: Partition) -> CheckResult:
    """Exact backward check: within every block, collapsed derivatives agree."""
    system = _prepared(system)
    _require_match(system, part)
    block_of = part.block_of
    reps = part.reps
    names = system.variables
    terms = [tuple(f.raw_terms().items()) for f in system.derivatives]
    violations = []
    for block in part.blocks:
        rep = block[0]
        ref = _collapsed_signature(terms[rep], block_of)
        for i in block[1:]:
            got = _collapsed_signature(terms[i], block_of)
            if got == ref:
                continue
            left = dict(ref)
            right = dict(got)
            diff_key = min(k for k in set(left) | set(right)
                           if left.get(k, 0) != right.get(k, 0))
            a = format_scalar(left.get(diff_key, 0))
            b = format_scalar(right.get(diff_key, 0))
            mono = _mono_text(diff_key, lambda blk: names[reps[blk]])
            violations.append(Violation(
                "bde-collapse", (names[rep], names[i]), mono,
                (a, b),
                f"collapsed derivatives of {names[rep]} and {names[i]} differ "
                f"at {mono}: {a} vs {b}"))
    return CheckResult(not violations, tuple(violations))


# ---- forward mode (degree <= 2 coefficient views) -----------------------


def _fb_guard_scalar(c: Scalar):
    if isinstance(c, Coeff) and not c.single_param_linear:
        raise FreeParameterError(
            f"coefficient {format_scalar(c)} mixes free parameters; the "
            f"forward syntactic path only handles rational*parameter "
            f"coefficients — use the SMT forward check instead")


def _fb_views(system: PolynomialODESystem, block_of, nblocks: int):
    """Per target block: linear column sums and symmetric quadratic sums.

    Returns (A, adj): A[t] maps k to the nonzero sum over block t of the
    x_k coefficients; adj[t] maps k to its nonzero quadratic partners
    [(l, Q[t][k,l]), ...] where Q[t][k,k] is the x_k^2 coefficient.
    Degree-0 terms impose no constraint and are skipped.
    """
    A: list = [dict() for _ in range(nblocks)]
    Q: list = [dict() for _ in range(nblocks)]
    for i, f in enumerate(system.derivatives):
        t = block_of[i]
        At = A[t]
        Qt = Q[t]
        for mono, c in f.raw_terms().items():
            deg = mono_degree(mono)
            if deg == 0:
                continue
            if deg > 2:
                raise DegreeError(
                    "the forward coefficient view needs degree <= 2; "
                    "use the SMT forward check for higher degrees")
            _fb_guard_scalar(c)
            if deg == 1:
                k = mono[0][0]
                At[k] = At.get(k, 0) + c
            elif len(mono) == 1:
                k = mono[0][0]
                Qt[(k, k)] = Qt.get((k, k), 0) + c
            else:
                key = (mono[0][0], mono[1][0])
                Qt[key] = Qt.get(key, 0) + c
    adj: list = []
    for t in range(nblocks):
        At = A[t]
        for k in [k for k, v in At.items() if v == 0]:
            del At[k]
        rows: dict = {}
        for (k, l), v in Q[t].items():
            if v == 0:
                continue
            rows.setdefault(k, []).append((l, v))
            if k != l:
                rows.setdefault(l, []).append((k, v))
        adj.append(rows)
    return A, adj


def _fb_signature(k: int, A: list, adj: list, block_of, nblocks: int) -> tuple:
    """Sparse fingerprint of variable k's columns into every target block."""
    lin = tuple((t, A[t][k]) for t in range(nblocks) if k in A[t])
    quad = []
    for t in range(nblocks):
        row = adj[t].get(k)
        if not row:
            continue
        by_block: dict = {}
        for l, v in row:
            by_block.setdefault(block_of[l], []).append((l, v))
        quad.append((t, tuple(
            (d, tuple(sorted(cells))) for d, cells in sorted(by_block.items()))))
    return (lin, tuple(quad))


def refine_fb(system: PolynomialODESystem, initial: Partition | None = None) -> Partition:
    """Coarsest partition refining `initial` that is stable for the forward
    coefficient view (degree <= 2).

    Sweeps split blocks by the per-variable fingerprint of linear and
    quadratic column sums; pointwise quadratic rows make the fixpoint exactly
    the blockwise-constancy condition (symmetry of Q turns pointwise row
    equality into pair constancy).
    """
    system = _prepared(system)
    n = system.n
    if initial is None:
        initial = Partition.trivial(n)
    _require_match(system, initial)
    if system.degree() > 2:
        raise DegreeError(
            "refine_fb needs degree <= 2; use the SMT forward check instead")
    part = initial
    while True:
        block_of = part.block_of
        A, adj = _fb_views(system, block_of, part.size)
        new_blocks: list = []
        split = False
        for block in part.blocks:
            if len(block) == 1:
                new_blocks.append(block)
                continue
            buckets: dict = {}
            for k in block:
                buckets.setdefault(
                    _fb_signature(k, A, adj, block_of, part.size), []).append(k)
            if len(buckets) > 1:
                split = True
            new_blocks.extend(buckets.values())
        if not split:
            return part
        part = Partition.of_blocks(new_blocks, n)


def _block_text(block, names) -> str:
    return "{" + ", ".join(names[i] for i in block) + "}"


def check_fb(system: PolynomialODESystem, part: Partition) -> CheckResult:
    """Exact check of the forward coefficient view at `part` (degree <= 2).

    Valid iff for every target block B': the linear sums A[B',k] are
    constant on each block, and the quadratic sums Q[B'][k,l] (diagonal:
    the x_k^2 coefficient) take one value per block pair. Sufficient for a
    forward equivalence, not necessary; the SMT path decides the rest.
    """
    system = _prepared(system)
    _require_match(system, part)
    if system.degree() > 2:
        raise DegreeError(
            "check_fb needs degree <= 2; use the SMT forward check instead")
    block_of = part.block_of
    names = system.variables
    A, adj = _fb_views(system, block_of, part.size)
    violations = []

    for t in range(part.size):
        target = _block_text(part.blocks[t], names)
        At = A[t]
        for block in part.blocks:
            if len(block) == 1:
                continue
            rep = block[0]
            ref = At.get(rep, 0)
            for k in block[1:]:
                got = At.get(k, 0)
                if got != ref:
                    a, b = format_scalar(ref), format_scalar(got)
                    violations.append(Violation(
                        "fb-linear", (names[rep], names[k]),
                        f"linear column into {target}", (a, b),
                        f"linear sums into {target} differ between "
                        f"{names[rep]} and {names[k]}: {a} vs {b}"))
                    break

        # quadratic sums grouped by source block pair; missing cells are 0
        cells: dict = {}
        for k, row in adj[t].items():
            for l, v in row:
                if k > l:
                    continue
                pair = tuple(sorted((block_of[k], block_of[l])))
                cells.setdefault(pair, []).append(((k, l), v))
        for pair, found in sorted(cells.items()):
            c_blk, d_blk = part.blocks[pair[0]], part.blocks[pair[1]]
            slots = (len(c_blk) * (len(c_blk) + 1) // 2 if pair[0] == pair[1]
                     else len(c_blk) * len(d_blk))
            found.sort()
            (k0, l0), ref = found[0]
            bad = next((cell for cell in found[1:] if cell[1] != ref), None)
            if bad is None and len(found) < slots:
                filled = {cell[0] for cell in found}
                missing = None
                for k in c_blk:
                    for l in d_blk:
                        key = (k, l) if k <= l else (l, k)
                        if key not in filled:
                            missing = key
                            break
                    if missing is not None:
                        break
                bad = (missing, 0)
            if bad is not None:
                (k1, l1), other = bad
                a, b = format_scalar(ref), format_scalar(other)
                violations.append(Violation(
                    "fb-quadratic",
                    (f"{names[k0]}*{names[l0]}", f"{names[k1]}*{names[l1]}"),
                    f"quadratic sums into {target} for blocks "
                    f"{_block_text(c_blk, names)} x {_block_text(d_blk, names)}",
                    (a, b),
                    f"quadratic sums into {target} differ: "
                    f"coeff({names[k0]}*{names[l0]}) = {a} vs "
                    f"coeff({names[k1]}*{names[l1]}) = {b}"))
    return CheckResult(not violations, tuple(violations))


# ---- brute-force oracle --------------------------------------------------


_ORACLE_MODES = {"bde": "bde", "fb": "fb", "fde-fb": "fb"}


def oracle_coarsest(system: PolynomialODESystem, mode: str,
                    initial: Partition | None = None, *, max_n: int = 8) -> Partition:
    """Enumerate every refinement of `initial` and return the unique
    coarsest one passing the exact check. Test oracle only: refuses n > 8.
    """
    try:
        mode = _ORACLE_MODES[mode.lower()]
    except KeyError:
        raise OracleError(f"unknown oracle mode {mode!r}") from None
    n = system.n
    if n > max_n:
        raise OracleError(f"oracle refuses n={n} > {max_n} (Bell-number blowup)")
    if initial is None:
        initial = Partition.trivial(n)
    _require_match(system, initial)
    checker: Callable = check_bde if mode == "bde" else check_fb
    passing = [cand for cand in refinements(initial) if checker(system, cand).valid]
    if not passing:
        raise OracleError("no refinement passes the check (discrete must pass; "
                          "this indicates a broken checker)")
    best = passing[0]
    for cand in passing[1:]:
        if best.refines(cand):
            best = cand
    if not all(cand.refines(best) for cand in passing):
        raise OracleError("no unique coarsest passing partition exists")
    return best
