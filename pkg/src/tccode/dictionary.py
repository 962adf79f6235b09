"""Parsing dictionaries: threshold construction, Tunstall baseline, parsing.

The threshold dictionary turns a sequence into a segment at the first length
where the log quantized-type-class size exceeds gamma (first-passage rule).
This is equivalent to the two-condition membership rule whenever the log size
is monotone along the path, and it guarantees a complete, proper parse tree
unconditionally; paths on which monotonicity failed are counted and reported.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from . import models as _models
from .models import ExpFamilyModel, counts_log_prob
from .qtypes import Grid, TypeCounter

Segment = Tuple[int, ...]


class DictionaryError(ValueError):
    pass


class LeafCapExceeded(RuntimeError):
    """Construction aborted: the leaf count passed the configured cap."""

    def __init__(self, cap: int):
        super().__init__("leaf count exceeded cap %d" % cap)
        self.cap = cap


class DepthCapExceeded(RuntimeError):
    """Construction aborted: some parse path never crossed the threshold
    within the depth guard (symptom of a boundary-aligned grid)."""


@dataclass
class ParseResult:
    index: int
    length: int
    codeword: str


@dataclass
class Dictionary:
    """A complete, proper parse tree given by its leaf segments."""

    model: ExpFamilyModel
    grid: Grid
    segments: Tuple[Segment, ...]
    m_target: int
    gamma: Optional[float] = None
    kind: str = "tc"
    monotone_mismatches: int = 0
    _trie: Optional[dict] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.segments = tuple(tuple(int(x) for x in s) for s in self.segments)
        if list(self.segments) != sorted(self.segments):
            raise DictionaryError("segments must be in lexicographic order")

    @property
    def size(self) -> int:
        return len(self.segments)

    @property
    def codeword_width(self) -> int:
        return max(1, math.ceil(math.log2(self.size)))

    def trie(self) -> dict:
        if self._trie is None:
            root: dict = {}
            for index, seg in enumerate(self.segments):
                node = root
                for letter in seg[:-1]:
                    node = node.setdefault(letter, {})
                if seg[-1] in node:
                    raise DictionaryError("segment %r conflicts with a prefix" % (seg,))
                node[seg[-1]] = index
            self._trie = root
        return self._trie

    def check_structure(self) -> None:
        """Raise unless the segment set forms a complete proper k-ary tree."""
        if not self.segments:
            raise DictionaryError("empty dictionary")
        if len(set(self.segments)) != len(self.segments):
            raise DictionaryError("duplicate segments")
        if self.size > self.m_target:
            raise DictionaryError("dictionary exceeds its target size")
        k = self.model.alphabet_size
        stack = [self.trie()]
        while stack:
            node = stack.pop()
            if len(node) != k:
                raise DictionaryError("internal node with %d != %d children" % (len(node), k))
            for child in node.values():
                if isinstance(child, dict):
                    stack.append(child)

    def parse_one(self, stream: Iterable[int]) -> ParseResult:
        """Consume letters until a segment is identified; fixed-width output."""
        node = self.trie()
        length = 0
        for letter in stream:
            length += 1
            try:
                child = node[int(letter)]
            except KeyError:
                raise DictionaryError("letter %r not parseable at depth %d" % (letter, length))
            if isinstance(child, dict):
                node = child
            else:
                return ParseResult(child, length, format(child, "0%db" % self.codeword_width))
        raise DictionaryError("stream exhausted before a segment was identified")

    def decode(self, index: int) -> Segment:
        if not 0 <= index < self.size:
            raise DictionaryError("index %d out of range [0, %d)" % (index, self.size))
        return self.segments[index]

    def max_segment_length(self) -> int:
        return max(len(s) for s in self.segments)

    def segment_length_histogram(self) -> Dict[int, int]:
        hist: Dict[int, int] = {}
        for s in self.segments:
            hist[len(s)] = hist.get(len(s), 0) + 1
        return dict(sorted(hist.items()))

    def segment_log_prob(self, theta, segment: Segment) -> float:
        counts = [0] * self.model.alphabet_size
        for x in segment:
            counts[x] += 1
        return counts_log_prob(self.model, theta, counts)

    def leaf_mass(self, theta) -> float:
        return math.fsum(
            2.0 ** self.segment_log_prob(theta, s) for s in self.segments
        )

    def expected_length(self, theta) -> float:
        return math.fsum(
            len(s) * 2.0 ** self.segment_log_prob(theta, s) for s in self.segments
        )


# ---------------------------------------------------------------------------
# Threshold construction.

def build_tc_dictionary(model: ExpFamilyModel, grid: Grid, gamma: float,
                        leaf_cap: int, m_target: Optional[int] = None,
                        counter: Optional[TypeCounter] = None,
                        max_depth: int = 50000) -> Dictionary:
    """Explicit depth-first construction of the threshold dictionary.

    A node becomes a leaf at the first depth where the log class size exceeds
    gamma.  Aborts with LeafCapExceeded once the leaf count passes leaf_cap.
    """
    if leaf_cap < model.alphabet_size:
        raise DictionaryError("leaf_cap must be at least the alphabet size")
    counter = counter or TypeCounter(model, grid)
    k = model.alphabet_size
    segments: List[Segment] = []
    mismatches = 0
    root_counts = (0,) * k
    # Stack entries: (path, counts, parent_value, dipped); letters pushed in
    # reverse so segments emerge in lexicographic order.
    stack = [((x,), _bump(root_counts, x), float("-inf"), False)
             for x in reversed(range(k))]
    while stack:
        path, counts, parent_value, dipped = stack.pop()
        if len(path) > max_depth:
            raise DepthCapExceeded(
                "no threshold crossing within depth %d at gamma=%.6g; "
                "the grid likely isolates an extreme statistic" % (max_depth, gamma)
            )
        value = counter.log2_size_for_counts(counts)
        dipped = dipped or value < parent_value - 1e-12
        if value > gamma:
            segments.append(path)
            if dipped:
                mismatches += 1
            if len(segments) > leaf_cap:
                raise LeafCapExceeded(leaf_cap)
        else:
            for x in reversed(range(k)):
                stack.append((path + (x,), _bump(counts, x), value, dipped))
    return Dictionary(
        model=model, grid=grid, segments=tuple(sorted(segments)),
        m_target=m_target if m_target is not None else len(segments),
        gamma=float(gamma), kind="tc", monotone_mismatches=mismatches,
    )


def _bump(counts: Tuple[int, ...], x: int) -> Tuple[int, ...]:
    return counts[:x] + (counts[x] + 1,) + counts[x + 1:]


@dataclass
class TCProfile:
    """Aggregate view of the threshold dictionary over letter-count classes.

    All sequences with equal letter counts behave identically under the
    first-passage rule once path feasibility is accounted for, so the leaf set
    aggregates exactly into (length, counts, multiplicity) classes.  This is
    what makes size-2^20 dictionaries evaluable without materializing them.
    """

    gamma: float
    leaf_classes: List[Tuple[int, Tuple[int, ...], int]]
    max_internal_value: float
    monotone_mismatch_leaves: int

    @property
    def leaf_count(self) -> int:
        return sum(m for _, _, m in self.leaf_classes)

    def length_histogram(self) -> Dict[int, int]:
        hist: Dict[int, int] = {}
        for ell, _, mult in self.leaf_classes:
            hist[ell] = hist.get(ell, 0) + mult
        return dict(sorted(hist.items()))

    def max_length(self) -> int:
        return max(ell for ell, _, _ in self.leaf_classes)


def tc_leaf_profile(model: ExpFamilyModel, grid: Grid, gamma: float,
                    leaf_cap: Optional[int] = None,
                    counter: Optional[TypeCounter] = None,
                    max_depth: int = 50000) -> TCProfile:
    """Dynamic program over letter-count classes; equivalent to the explicit
    depth-first build (verified in the test suite) but linear in the number of
    reachable count classes rather than in the number of segments."""
    counter = counter or TypeCounter(model, grid)
    k = model.alphabet_size
    # frontier: counts -> [clean multiplicity, dipped multiplicity]
    frontier: Dict[Tuple[int, ...], List[int]] = {(0,) * k: [1, 0]}
    values: Dict[Tuple[int, ...], float] = {(0,) * k: float("-inf")}
    leaf_classes: List[Tuple[int, Tuple[int, ...], int]] = []
    leaf_total = 0
    mismatch_total = 0
    max_internal = float("-inf")
    depth = 0
    while frontier:
        if depth > max_depth:
            raise DepthCapExceeded(
                "no threshold crossing within depth %d at gamma=%.6g; "
                "the grid likely isolates an extreme statistic" % (max_depth, gamma)
            )
        nxt: Dict[Tuple[int, ...], List[int]] = {}
        nxt_values: Dict[Tuple[int, ...], float] = {}
        for counts, (clean, dipped) in frontier.items():
            parent_value = values[counts]
            for x in range(k):
                child = _bump(counts, x)
                cv = nxt_values.get(child)
                if cv is None:
                    cv = counter.log2_size_for_counts(child)
                    nxt_values[child] = cv
                child_dips = cv < parent_value - 1e-12
                c_clean = 0 if child_dips else clean
                c_dipped = dipped + (clean if child_dips else 0)
                if cv > gamma:
                    mult = clean + dipped
                    leaf_classes.append((depth + 1, child, mult))
                    leaf_total += mult
                    mismatch_total += c_dipped
                    if leaf_cap is not None and leaf_total > leaf_cap:
                        raise LeafCapExceeded(leaf_cap)
                else:
                    slot = nxt.setdefault(child, [0, 0])
                    slot[0] += c_clean
                    slot[1] += c_dipped
                    if cv > max_internal:
                        max_internal = cv
        frontier = nxt
        values = nxt_values
        depth += 1
    # Merge duplicate (ell, counts) rows produced by leaf-vs-internal bookkeeping.
    merged: Dict[Tuple[int, Tuple[int, ...]], int] = {}
    for ell, counts, mult in leaf_classes:
        merged[(ell, counts)] = merged.get((ell, counts), 0) + mult
    classes = sorted((ell, counts, mult) for (ell, counts), mult in merged.items())
    return TCProfile(float(gamma), classes, max_internal, mismatch_total)


def gamma_reference(m: int, stat_dim: int) -> float:
    """Closed-form threshold log2 M - d log2 log2 M (constant omitted)."""
    logm = math.log2(m)
    return logm - stat_dim * math.log2(logm)


def choose_gamma_profile(model: ExpFamilyModel, grid: Grid, m: int,
                         counter: Optional[TypeCounter] = None,
                         max_depth: int = 50000) -> Tuple[float, TCProfile]:
    """Largest observed-crossing threshold whose dictionary has at most m leaves.

    The leaf count is a nondecreasing step function of gamma whose jumps sit
    on achievable log class sizes, so a real-valued bisection followed by a
    snap to the largest internal value observed in the feasible build returns
    an exact step boundary.
    """
    if m < model.alphabet_size:
        raise DictionaryError("m must be at least the alphabet size")
    counter = counter or TypeCounter(model, grid)

    def feasible(g: float) -> Optional[TCProfile]:
        try:
            return tc_leaf_profile(model, grid, g, leaf_cap=m, counter=counter,
                                   max_depth=max_depth)
        except LeafCapExceeded:
            return None

    lo = -1.0
    prof = feasible(lo)
    if prof is None:
        raise DictionaryError("even the single-letter dictionary exceeds m")
    hi = max(gamma_reference(m, model.stat_dim) + 2.0, 4.0)
    gap = 4.0
    while True:
        cand = feasible(hi)
        if cand is None:
            break
        prof, lo = cand, hi
        hi += gap
        gap *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        cand = feasible(mid)
        if cand is None:
            hi = mid
        else:
            prof, lo = cand, mid
        if hi - lo < 1e-12:
            break
    gamma = prof.max_internal_value if math.isfinite(prof.max_internal_value) else -1.0
    if gamma != lo:
        prof = tc_leaf_profile(model, grid, gamma, leaf_cap=m, counter=counter,
                               max_depth=max_depth)
    return gamma, prof


def choose_gamma(model: ExpFamilyModel, grid: Grid, m: int,
                 counter: Optional[TypeCounter] = None,
                 max_depth: int = 50000) -> Tuple[float, Dictionary]:
    """As choose_gamma_profile, but materializes the dictionary."""
    counter = counter or TypeCounter(model, grid)
    gamma, _ = choose_gamma_profile(model, grid, m, counter=counter,
                                    max_depth=max_depth)
    dictionary = build_tc_dictionary(model, grid, gamma, leaf_cap=m,
                                     m_target=m, counter=counter,
                                     max_depth=max_depth)
    return gamma, dictionary


# ---------------------------------------------------------------------------
# Tunstall baseline.

def build_tunstall(model: ExpFamilyModel, theta, m: int,
                   grid: Optional[Grid] = None) -> Dictionary:
    """Classical most-probable-leaf splitting for a known source.

    Ties between equal-probability leaves break toward the lexicographically
    smallest segment so construction is deterministic.
    """
    k = model.alphabet_size
    if m < k:
        raise DictionaryError("m must be at least the alphabet size")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lp = _models.letter_log_probs(model, theta)
    heap = [(-float(lp[x]), (x,)) for x in range(k)]
    heapq.heapify(heap)
    leaves = k
    while leaves + (k - 1) <= m:
        neg, seg = heapq.heappop(heap)
        for x in range(k):
            heapq.heappush(heap, (neg - float(lp[x]), seg + (x,)))
        leaves += k - 1
    segments = tuple(sorted(seg for _, seg in heap))
    return Dictionary(
        model=model, grid=grid or Grid(), segments=segments, m_target=m,
        gamma=None, kind="tunstall",
    )


def enumerate_complete_trees(k: int, max_leaves: int) -> Iterator[Tuple[Segment, ...]]:
    """All complete proper k-ary segment sets with at most max_leaves leaves.

    Exponential; intended as a small-instance oracle for optimality tests.
    """

    def trees(budget: int) -> Iterator[Tuple[Segment, ...]]:
        # A tree is either a single leaf (the empty segment) or k subtrees.
        yield ((),)
        if budget < k:
            return
        # Split the budget across k children, each getting at least one leaf.
        def splits(remaining: int, parts: int) -> Iterator[Tuple[int, ...]]:
            if parts == 1:
                yield (remaining,)
                return
            for first in range(1, remaining - parts + 2):
                for rest in splits(remaining - first, parts - 1):
                    yield (first,) + rest

        seen = set()
        for total in range(k, budget + 1):
            for split in splits(total, k):
                child_options = [list(trees(b)) for b in split]
                for combo in _product(child_options):
                    if any(len(c) != s for c, s in zip(combo, split)):
                        continue
                    segs = tuple(sorted(
                        (x,) + seg for x, child in enumerate(combo) for seg in child
                    ))
                    if segs not in seen:
                        seen.add(segs)
                        yield segs

    for segs in trees(max_leaves):
        if segs != ((),):  # the bare root is not a valid dictionary
            yield segs


def _product(option_lists):
    if not option_lists:
        yield ()
        return
    for head in option_lists[0]:
        for rest in _product(option_lists[1:]):
            yield (head,) + rest


# ---------------------------------------------------------------------------
# Serialization: one JSON header line, then one segment per line.

FORMAT_VERSION = 1


def save_dictionary(dictionary: Dictionary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dictionary_to_text(dictionary))


def dictionary_to_text(dictionary: Dictionary) -> str:
    header = {
        "format": FORMAT_VERSION,
        "kind": dictionary.kind,
        "gamma": dictionary.gamma,
        "m_target": dictionary.m_target,
        "size": dictionary.size,
        "codeword_width": dictionary.codeword_width,
        "monotone_mismatches": dictionary.monotone_mismatches,
        "model": _models.model_to_dict(dictionary.model),
        "grid": {
            "W": _frac_str(dictionary.grid.side),
            "origin": [_frac_str(dictionary.grid.origin_at(i))
                       for i in range(dictionary.model.stat_dim)],
        },
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines.extend(" ".join(str(x) for x in seg) for seg in dictionary.segments)
    return "\n".join(lines) + "\n"


def _frac_str(f: Fraction) -> str:
    return "%d/%d" % (f.numerator, f.denominator)


def load_dictionary(path) -> Dictionary:
    with open(path, "r", encoding="utf-8") as fh:
        return dictionary_from_text(fh.read())


def dictionary_from_text(text: str) -> Dictionary:
    lines = text.splitlines()
    if not lines:
        raise DictionaryError("empty dictionary file")
    try:
        header = json.loads(lines[0])
        if header.get("format") != FORMAT_VERSION:
            raise DictionaryError("unsupported format version %r" % header.get("format"))
        model = _models.model_from_dict(header["model"])
        grid = Grid(
            side=Fraction(header["grid"]["W"]),
            origin=tuple(Fraction(v) for v in header["grid"]["origin"]),
        )
        segments = tuple(
            tuple(int(x) for x in line.split()) for line in lines[1:] if line
        )
        dictionary = Dictionary(
            model=model, grid=grid, segments=segments,
            m_target=int(header["m_target"]),
            gamma=None if header["gamma"] is None else float(header["gamma"]),
            kind=str(header["kind"]),
            monotone_mismatches=int(header.get("monotone_mismatches", 0)),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DictionaryError("malformed dictionary file: %s" % exc)
    if dictionary.size != int(header["size"]):
        raise DictionaryError("segment count disagrees with header")
    dictionary.check_structure()
    return dictionary
