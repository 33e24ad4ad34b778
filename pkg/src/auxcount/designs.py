"""Sampling designs: SRS without replacement, PPS with replacement,
and sample-size allocation over strata.

PPS draws use a Vose alias table built once per frame; uniform draws use
a sparse partial Fisher-Yates shuffle, so cost scales with the sample,
not the frame.
"""

from __future__ import annotations

import csv
import weakref
from dataclasses import dataclass

import numpy as np

from .errors import AllocationError, IngestionError
from .population import Frame, StratifiedFrame

DESIGN_SRS = "SRS_WOR"
DESIGN_PPS = "PPS_WR"

NEYMAN_ORACLE = "neyman_oracle"
NEYMAN_PROXY = "neyman_proxy"
PROPORTIONAL = "proportional"
EQUAL = "equal"
ALLOCATION_RULES = (NEYMAN_ORACLE, NEYMAN_PROXY, PROPORTIONAL, EQUAL)

# a sampled stratum must support a variance estimate
MIN_PER_STRATUM = 2

_SAMPLE_COLUMNS = ("draw_index", "unit_id", "pi", "y", "p_hat")


@dataclass(frozen=True, eq=False)
class Sample:
    """Ordered draws from one frame under one design.

    ``pi`` holds the per-draw selection probability: p_hat / aux_total
    for PPS draws, n / N for uniform draws.  ``y`` is NaN where the
    drawn unit is unlabeled.
    """

    design: str
    unit_ids: np.ndarray
    pi: np.ndarray
    y: np.ndarray
    p_hat: np.ndarray
    parent_N: int
    parent_aux_total: float
    stratum: str | None = None
    indices: np.ndarray | None = None

    def __post_init__(self):
        if self.design not in (DESIGN_SRS, DESIGN_PPS):
            raise ValueError(f"unknown design {self.design!r}")
        sizes = {len(self.unit_ids), len(self.pi), len(self.y), len(self.p_hat)}
        if len(sizes) != 1:
            raise ValueError("sample columns must have equal length")
        if self.n < 1:
            raise ValueError("a sample needs at least one draw")
        if self.parent_N < 1:
            raise ValueError("parent_N must be at least 1")
        pi = np.asarray(self.pi, dtype=np.float64)
        if np.any(pi <= 0.0) or np.any(pi > 1.0):
            raise ValueError("selection probabilities must lie in (0, 1]")

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    @property
    def labeled(self) -> bool:
        return not np.isnan(np.asarray(self.y, dtype=np.float64)).any()


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _srs_indices(rng: np.random.Generator, N: int, n: int) -> np.ndarray:
    """First n slots of a partial Fisher-Yates shuffle of range(N).

    Only displaced slots are tracked, so memory and time are O(n).
    """
    u = rng.random(n)
    displaced: dict[int, int] = {}
    out = np.empty(n, dtype=np.intp)
    for j in range(n):
        k = j + int(u[j] * (N - j))
        if k >= N:  # guard the top edge of the float scaling
            k = N - 1
        vj = displaced.get(j, j)
        out[j] = displaced.get(k, k)
        displaced[k] = vj
    return out


def srs_wor(frame: Frame, n: int, seed) -> Sample:
    """Simple random sample of n distinct units, order of draw kept.

    Parameters
    ----------
    frame : Frame
    n : int
        1 <= n <= N.
    seed : int, sequence of int, or numpy Generator

    Returns
    -------
    Sample
        With ``pi`` = n / N on every draw.
    """
    if not 1 <= n <= frame.N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={frame.N}")
    idx = _srs_indices(_rng(seed), frame.N, n)
    return Sample(
        design=DESIGN_SRS,
        unit_ids=frame.ids[idx],
        pi=np.full(n, n / frame.N),
        y=frame.labels[idx],
        p_hat=frame.aux_probs[idx],
        parent_N=frame.N,
        parent_aux_total=frame.aux_total,
        stratum=frame.stratum,
        indices=idx,
    )


class AliasTable:
    """Vose alias structure for O(1) draws proportional to fixed weights."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("weights must be finite and positive")
        size = w.size
        total = float(np.sum(w))
        scaled = (w * (size / total)).tolist()
        prob = np.ones(size)
        alias = np.arange(size, dtype=np.intp)
        small = [i for i, v in enumerate(scaled) if v < 1.0]
        large = [i for i, v in enumerate(scaled) if v >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding; their prob stays 1
        self.prob = prob
        self.alias = alias
        self.size = size

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        j = rng.integers(self.size, size=size)
        u = rng.random(size)
        return np.where(u < self.prob[j], j, self.alias[j])


_alias_cache: "weakref.WeakKeyDictionary[Frame, AliasTable]" = weakref.WeakKeyDictionary()


def _alias_for(frame: Frame) -> AliasTable:
    table = _alias_cache.get(frame)
    if table is None:
        table = AliasTable(frame.aux_probs)
        _alias_cache[frame] = table
    return table


def pps_wr(frame: Frame, n: int, seed) -> Sample:
    """With-replacement PPS sample, size measure p_hat.

    Each draw lands on unit i with probability p_hat_i / aux_total,
    recorded as ``pi``.  The alias table is cached on the frame, so
    repeated sampling from one frame only pays the build once.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if frame.N < 1:
        raise ValueError("cannot sample an empty frame")
    idx = _alias_for(frame).draw(_rng(seed), n)
    return Sample(
        design=DESIGN_PPS,
        unit_ids=frame.ids[idx],
        pi=frame.aux_probs[idx] / frame.aux_total,
        y=frame.labels[idx],
        p_hat=frame.aux_probs[idx],
        parent_N=frame.N,
        parent_aux_total=frame.aux_total,
        stratum=frame.stratum,
        indices=idx,
    )


@dataclass(frozen=True)
class AllocationPlan:
    """Per-stratum sample sizes, summing to the requested n."""

    sizes: dict[str, int]
    rule: str

    @property
    def n(self) -> int:
        return sum(self.sizes.values())


def _apportion(weights, total, caps):
    """Largest-remainder apportionment of ``total`` units, capped per entry."""
    k = len(weights)
    x = [0] * k
    remaining = int(total)
    w = [max(0.0, float(v)) for v in weights]
    while remaining > 0:
        room = [caps[i] - x[i] for i in range(k)]
        idx = [i for i in range(k) if room[i] > 0 and w[i] > 0]
        if not idx:
            idx = [i for i in range(k) if room[i] > 0]
            if not idx:
                raise AllocationError("sample size exceeds available units")
            share = [float(room[i]) for i in idx]
        else:
            share = [w[i] for i in idx]
        s = sum(share)
        quota = [remaining * v / s for v in share]
        handed = 0
        for q, i in zip(quota, idx):
            give = min(int(q), room[i])
            x[i] += give
            handed += give
        remaining -= handed
        if remaining > 0:
            order = sorted(
                range(len(idx)), key=lambda j: (-(quota[j] - int(quota[j])), j)
            )
            for j in order:
                if remaining == 0:
                    break
                i = idx[j]
                if x[i] < caps[i]:
                    x[i] += 1
                    remaining -= 1
    return x


def _stratum_sd(frame: Frame, rule: str) -> float:
    if frame.N < 2:
        return 0.0
    if rule == NEYMAN_ORACLE:
        return float(np.std(frame.labels, ddof=1))
    return float(np.std(frame.aux_probs, ddof=1))


def allocate(strat: StratifiedFrame, n: int, rule: str) -> AllocationPlan:
    """Spread a total sample size over the strata.

    Rules
    -----
    - ``neyman_oracle``: n_h proportional to N_h * S_h with S_h the
      label standard deviation (needs labels; a what-if tool for known
      populations).
    - ``neyman_proxy``: same shape with S_h taken from the scores.
    - ``proportional``: n_h proportional to N_h.
    - ``equal``: even split.

    Rounding is largest-remainder with deterministic tie-breaks (stratum
    order).  Every nonempty stratum gets at least min(2, N_h) draws so a
    variance can be estimated, and no stratum exceeds its size.

    Raises
    ------
    AllocationError
        If n cannot satisfy the floors or exceeds the population.
    """
    if rule not in ALLOCATION_RULES:
        raise ValueError(f"unknown allocation rule {rule!r}")
    names = list(strat.strata)
    frames = [strat.strata[name] for name in names]
    caps = [f.N for f in frames]
    if n > sum(caps):
        raise AllocationError(f"n={n} exceeds population size {sum(caps)}")
    floors = [min(MIN_PER_STRATUM, c) for c in caps]
    if n < sum(floors):
        raise AllocationError(
            f"n={n} cannot give every nonempty stratum its minimum "
            f"(need at least {sum(floors)})"
        )
    if rule == NEYMAN_ORACLE and not all(f.fully_labeled for f in frames if f.N):
        raise ValueError("neyman_oracle needs labels in every nonempty stratum")

    if rule == EQUAL:
        weights = [1.0 if c else 0.0 for c in caps]
    elif rule == PROPORTIONAL:
        weights = [float(c) for c in caps]
    else:
        weights = [c * _stratum_sd(f, rule) for c, f in zip(caps, frames)]
    if not any(w > 0 for w in weights):
        weights = [float(c) for c in caps]

    sizes = _apportion(weights, n, caps)
    # raise any under-floor stratum to its floor, re-spread the rest
    locked: set[int] = set()
    while True:
        low = [i for i in range(len(names)) if sizes[i] < floors[i]]
        if not low:
            break
        locked.update(low)
        free = [i for i in range(len(names)) if i not in locked]
        budget = n - sum(floors[i] for i in locked)
        if budget < 0:
            raise AllocationError("floors exceed requested sample size")
        sub = _apportion(
            [weights[i] for i in free], budget, [caps[i] for i in free]
        )
        sizes = [0] * len(names)
        for i in locked:
            sizes[i] = floors[i]
        for i, v in zip(free, sub):
            sizes[i] = v
    return AllocationPlan(sizes=dict(zip(names, sizes)), rule=rule)


def write_sample(sample: Sample, path, header_lines=()) -> None:
    """Write draws as CSV with the frame facts needed to estimate later.

    The design, parent size and auxiliary total ride along as ``# key =
    value`` lines above the header; blank y marks unlabeled draws.
    """
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# sample_design = {sample.design}\n")
        fh.write(f"# parent_N = {sample.parent_N}\n")
        fh.write(f"# parent_aux_total = {float(sample.parent_aux_total)!r}\n")
        if sample.stratum is not None:
            fh.write(f"# stratum = {sample.stratum}\n")
        fh.write(",".join(_SAMPLE_COLUMNS) + "\n")
        y = np.asarray(sample.y, dtype=np.float64)
        for i in range(sample.n):
            lab = "" if np.isnan(y[i]) else str(int(y[i]))
            fh.write(
                f"{i},{sample.unit_ids[i]},{float(sample.pi[i])!r},"
                f"{lab},{float(sample.p_hat[i])!r}\n"
            )


def read_header_fields(path) -> dict[str, str]:
    """Collect the leading ``# key = value`` lines of a CSV artifact."""
    fields: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            if sep:
                fields[key.strip()] = value.strip()
    return fields


def load_sample(path) -> Sample:
    """Read a sample written by :func:`write_sample`.

    Raises
    ------
    IngestionError
        On missing header facts, malformed rows, or out-of-range values;
        messages name the offending row.
    """
    fields = read_header_fields(path)
    for key in ("sample_design", "parent_N", "parent_aux_total"):
        if key not in fields:
            raise IngestionError(f"{path}: missing '# {key} = ...' header line")
    ids: list = []
    pis: list = []
    ys: list = []
    ps: list = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        if reader.fieldnames != list(_SAMPLE_COLUMNS):
            raise IngestionError(
                f"{path}: expected columns {','.join(_SAMPLE_COLUMNS)}"
            )
        for row_no, row in enumerate(reader, start=1):
            try:
                pi = float(row["pi"])
                p = float(row["p_hat"])
            except (TypeError, ValueError):
                raise IngestionError(f"{path}: draw {row_no}: bad numeric field") from None
            raw_y = (row["y"] or "").strip()
            if raw_y == "":
                y = np.nan
            elif raw_y in ("0", "1"):
                y = float(raw_y)
            else:
                raise IngestionError(
                    f"{path}: draw {row_no}: label {raw_y!r} not in {{0, 1, blank}}"
                )
            ids.append(row["unit_id"])
            pis.append(pi)
            ys.append(y)
            ps.append(p)
    if not ids:
        raise IngestionError(f"{path}: no draws")
    try:
        return Sample(
            design=fields["sample_design"],
            unit_ids=np.asarray(ids, dtype=object),
            pi=np.asarray(pis),
            y=np.asarray(ys),
            p_hat=np.asarray(ps),
            parent_N=int(fields["parent_N"]),
            parent_aux_total=float(fields["parent_aux_total"]),
            stratum=fields.get("stratum"),
        )
    except ValueError as exc:
        raise IngestionError(f"{path}: {exc}") from None
