"""Finite-population frames keyed by classifier scores.

A frame holds one row per population unit: a stable identifier, an optional
binary label, and a predicted probability used as the auxiliary size
measure downstream.  Frames are immutable once built; stratification and
simulation return new frames.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .errors import IngestionError

# Probabilities are pinned away from 0 and 1 once, at ingestion, so that
# inverse weights and log losses stay finite everywhere else.
PROB_FLOOR = 1e-6

STRATUM_ONE = "one"
STRATUM_ZERO = "zero"

_DEFAULT_COLUMNS = {"id": "id", "label": "label", "aux_prob": "p_hat"}


def clamp_probs(p):
    """Clamp probabilities into [PROB_FLOOR, 1 - PROB_FLOOR].

    Idempotent; applying it twice changes nothing.
    """
    return np.clip(np.asarray(p, dtype=np.float64), PROB_FLOOR, 1.0 - PROB_FLOOR)


@dataclass(frozen=True)
class Unit:
    """A single population unit."""

    id: str
    aux_prob: float
    label: int | None = None
    stratum: str | None = None


class Frame:
    """An ordered, immutable collection of units.

    Parameters
    ----------
    ids : sequence of str
        Unique unit identifiers.
    aux_probs : array_like of float
        Predicted probabilities in [0, 1]; clamped on construction.
    labels : array_like or None
        Binary labels; use None (or NaN entries) where unlabeled.
    stratum : str, optional
        Name attached to every unit, set when this frame is one stratum
        of a larger frame.
    """

    def __init__(self, ids, aux_probs, labels=None, stratum=None):
        ids = np.asarray(list(ids), dtype=object)
        probs = np.asarray(aux_probs, dtype=np.float64)
        if probs.ndim != 1 or len(ids) != probs.size:
            raise ValueError("ids and aux_probs must be 1-d and equal length")
        if probs.size and (np.min(probs) < 0.0 or np.max(probs) > 1.0):
            raise ValueError("aux_prob values must lie in [0, 1]")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate unit ids")
        if labels is None:
            lab = np.full(probs.size, np.nan)
        else:
            lab = np.asarray(labels, dtype=np.float64)
            if lab.shape != probs.shape:
                raise ValueError("labels must match aux_probs in length")
            observed = lab[~np.isnan(lab)]
            if observed.size and not np.isin(observed, (0.0, 1.0)).all():
                raise ValueError("labels must be 0, 1, or missing")
        self._ids = ids
        self._probs = clamp_probs(probs)
        self._labels = lab
        self.stratum = stratum
        self._aux_total = float(np.sum(self._probs))
        for arr in (self._ids, self._probs, self._labels):
            arr.setflags(write=False)

    # -- basic accessors -------------------------------------------------

    @property
    def ids(self):
        return self._ids

    @property
    def aux_probs(self):
        return self._probs

    @property
    def labels(self):
        return self._labels

    @property
    def N(self) -> int:
        return self._probs.size

    @property
    def aux_total(self) -> float:
        """Sum of predicted probabilities over the frame."""
        return self._aux_total

    @property
    def fully_labeled(self) -> bool:
        return bool(self.N) and not np.isnan(self._labels).any()

    @property
    def true_total(self) -> int | None:
        """Number of positive labels, or None unless every unit is labeled."""
        if not self.fully_labeled:
            return None
        return int(np.sum(self._labels))

    def __len__(self) -> int:
        return self.N

    def unit(self, i: int) -> Unit:
        lab = self._labels[i]
        return Unit(
            id=self._ids[i],
            aux_prob=float(self._probs[i]),
            label=None if np.isnan(lab) else int(lab),
            stratum=self.stratum,
        )

    def __iter__(self) -> Iterator[Unit]:
        return (self.unit(i) for i in range(self.N))

    def predicted_classes(self, tau: float):
        """Hard 0/1 predictions at threshold tau (prob >= tau reads as 1)."""
        _check_tau(tau)
        return (self._probs >= tau).astype(np.int64)

    def replace_probs(self, aux_probs) -> "Frame":
        """New frame with the same ids/labels and fresh probabilities."""
        return Frame(self._ids, aux_probs, self._labels, stratum=self.stratum)

    def take(self, indices, stratum=None) -> "Frame":
        idx = np.asarray(indices, dtype=np.intp)
        return Frame(self._ids[idx], self._probs[idx], self._labels[idx], stratum=stratum)

    def __repr__(self):
        return f"Frame(N={self.N}, aux_total={self._aux_total:.6g})"


@dataclass(frozen=True)
class StratifiedFrame:
    """A frame split into named strata at a prediction threshold."""

    strata: Mapping[str, Frame]
    threshold: float

    @property
    def sizes(self) -> dict[str, int]:
        return {name: f.N for name, f in self.strata.items()}

    @property
    def N(self) -> int:
        return sum(f.N for f in self.strata.values())


def _check_tau(tau):
    if not (0.0 < tau < 1.0):
        raise ValueError(f"threshold must lie strictly inside (0, 1), got {tau}")


def stratify_by_prediction(frame: Frame, tau: float) -> StratifiedFrame:
    """Split a frame into a "one" and a "zero" stratum at threshold tau.

    Units with aux_prob >= tau land in the "one" stratum, the rest in
    "zero".  A stratum left with no units is kept, with size 0, so that
    downstream allocation sees a stable pair of names.

    Parameters
    ----------
    frame : Frame
    tau : float
        Threshold strictly inside (0, 1).

    Returns
    -------
    StratifiedFrame
    """
    _check_tau(tau)
    if frame.N < 1:
        raise ValueError("cannot stratify an empty frame")
    ones = np.flatnonzero(frame.aux_probs >= tau)
    zeros = np.flatnonzero(frame.aux_probs < tau)
    strata = {
        STRATUM_ONE: frame.take(ones, stratum=STRATUM_ONE),
        STRATUM_ZERO: frame.take(zeros, stratum=STRATUM_ZERO),
    }
    return StratifiedFrame(strata=strata, threshold=float(tau))


def load_frame(path, columns: Mapping[str, str] | None = None) -> Frame:
    """Read a frame from CSV.

    The file must carry a header naming an id column, a label column and a
    probability column (default names: ``id``, ``label``, ``p_hat``).
    Labels may be blank for unlabeled units.  Probabilities are clamped
    into [PROB_FLOOR, 1 - PROB_FLOOR] here and nowhere else.

    Parameters
    ----------
    path : str or Path
    columns : mapping, optional
        Rename map from the logical names ``id``/``label``/``aux_prob``
        to the header names actually present in the file.

    Returns
    -------
    Frame

    Raises
    ------
    IngestionError
        Missing columns, duplicate or empty ids, labels outside {0, 1},
        or probabilities outside [0, 1]; the message names the row.
    """
    names = dict(_DEFAULT_COLUMNS)
    if columns:
        unknown = set(columns) - set(names)
        if unknown:
            raise ValueError(f"unknown column keys: {sorted(unknown)}")
        names.update(columns)

    ids: list = []
    labels: list = []
    probs: list = []
    seen: set = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        header = reader.fieldnames or []
        missing = [c for c in names.values() if c not in header]
        if missing:
            raise IngestionError(f"{path}: missing columns {missing}")
        for row_no, row in enumerate(reader, start=2):  # row 1 is the header
            uid = (row[names["id"]] or "").strip()
            if not uid:
                raise IngestionError(f"{path}: row {row_no}: empty id")
            if uid in seen:
                raise IngestionError(f"{path}: row {row_no}: duplicate id {uid!r}")
            seen.add(uid)
            raw_p = (row[names["aux_prob"]] or "").strip()
            try:
                p = float(raw_p)
            except ValueError:
                raise IngestionError(
                    f"{path}: row {row_no}: bad probability {raw_p!r}"
                ) from None
            if not 0.0 <= p <= 1.0:
                raise IngestionError(
                    f"{path}: row {row_no}: probability {p} outside [0, 1]"
                )
            raw_y = (row[names["label"]] or "").strip()
            if raw_y == "":
                y = np.nan
            elif raw_y in ("0", "1"):
                y = float(raw_y)
            else:
                raise IngestionError(
                    f"{path}: row {row_no}: label {raw_y!r} not in {{0, 1, blank}}"
                )
            ids.append(uid)
            labels.append(y)
            probs.append(p)
    if not ids:
        raise IngestionError(f"{path}: no data rows")
    try:
        return Frame(ids, probs, labels)
    except ValueError as exc:
        raise IngestionError(f"{path}: {exc}") from None


def write_frame(frame: Frame, path, header_lines=()) -> None:
    """Write a frame as CSV with columns id,label,p_hat.

    Floats are written with repr so a load/write/load cycle reproduces
    every value exactly.  Optional ``header_lines`` are emitted first,
    each prefixed with ``# ``.
    """
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("id,label,p_hat\n")
        labels = frame.labels
        probs = frame.aux_probs
        for i in range(frame.N):
            y = "" if np.isnan(labels[i]) else str(int(labels[i]))
            fh.write(f"{frame.ids[i]},{y},{float(probs[i])!r}\n")
