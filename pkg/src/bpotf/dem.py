"""Detector models: data type, file formats and phenomenological generation.

Supported inputs
----------------
* detector-error-model text (``error(p) D0 D3 L0`` lines, ``.dem``)
* JSON interchange (``.json``)::

      {"num_detectors": 4, "num_observables": 1,
       "columns": [{"detectors": [0, 1], "observables": [], "prob": 0.01}, ...]}

* alist parity-check matrix (``.alist``) plus a priors file holding one
  probability per column.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .gf2 import SparseBinaryMatrix, DimensionError, _canonical_support, read_alist

CLIP_LOW = 1e-80
CLIP_HIGH = 1.0 - 1e-80


class DemParseError(ValueError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line.strip()!r}")
        self.lineno = lineno


def clip(p) -> np.ndarray:
    """Clamp probabilities into ``[1e-80, 1 - 1e-80]``.

    Note that ``1 - 1e-80`` rounds to ``1.0`` in double precision, so the
    upper bound is only meaningful once converted to log-likelihood ratios.
    """
    return np.clip(np.asarray(p, dtype=np.float64), CLIP_LOW, CLIP_HIGH)


def xor_probability(probs) -> float:
    """Probability that an odd number of independent events occur."""
    probs = np.asarray(probs, dtype=np.float64)
    return float(0.5 * (1.0 - np.prod(1.0 - 2.0 * probs)))


@dataclass(frozen=True, eq=False)
class DetectorModel:
    """Fault mechanisms as columns of a detector matrix.

    Attributes
    ----------
    H : SparseBinaryMatrix
        ``num_detectors x n`` detector matrix.
    O : SparseBinaryMatrix
        ``num_observables x n`` logical observable matrix.
    priors : ndarray
        Probability of each fault mechanism, in ``(0, 0.5]``.
    """

    H: SparseBinaryMatrix
    O: SparseBinaryMatrix
    priors: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64).copy()
        priors.setflags(write=False)
        object.__setattr__(self, "priors", priors)
        if self.H.num_rows < 1:
            raise ValueError("a detector model needs at least one detector")
        if not (self.H.num_cols == self.O.num_cols == priors.size):
            raise DimensionError(
                f"column counts disagree: H={self.H.num_cols}, O={self.O.num_cols}, "
                f"priors={priors.size}")
        if priors.size and (priors.min() <= 0 or priors.max() > 0.5):
            raise ValueError("priors must lie in (0, 0.5]")

    @property
    def num_detectors(self) -> int:
        return self.H.num_rows

    @property
    def num_observables(self) -> int:
        return self.O.num_rows

    @property
    def num_columns(self) -> int:
        return self.H.num_cols

    @property
    def mean_column_weight(self) -> float:
        """Average detector-matrix column weight."""
        return float(self.H.col_weights.mean()) if self.num_columns else 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DetectorModel):
            return NotImplemented
        return (self.H == other.H and self.O == other.O
                and np.array_equal(self.priors, other.priors))

    __hash__ = object.__hash__


def model_from_columns(num_detectors: int, num_observables: int,
                       columns: Sequence[tuple[Sequence[int], Sequence[int], float]],
                       merge: bool = True, name: str = "") -> DetectorModel:
    """Build a model from ``(detectors, observables, prob)`` triples.

    With ``merge`` set, faults with identical detector and observable
    signatures collapse into one column whose probability is that of an odd
    number of them firing. Column order follows first appearance.
    """
    merged: dict[tuple, int] = {}
    det_cols: list[tuple[int, ...]] = []
    obs_cols: list[tuple[int, ...]] = []
    probs: list[float] = []
    for dets, obs, p in columns:
        dets = tuple(_canonical_support(dets, num_detectors, "detector").tolist())
        obs = tuple(_canonical_support(obs, num_observables, "observable").tolist())
        key = (dets, obs)
        if merge and key in merged:
            k = merged[key]
            q = probs[k]
            probs[k] = q * (1 - p) + p * (1 - q)
            continue
        merged[key] = len(probs)
        det_cols.append(dets)
        obs_cols.append(obs)
        probs.append(float(p))
    H = SparseBinaryMatrix(num_detectors, len(det_cols), det_cols)
    O = SparseBinaryMatrix(num_observables, len(obs_cols), obs_cols)
    return DetectorModel(H, O, np.array(probs), name=name)


# -- detector error model text ---------------------------------------------

_INSTR_RE = re.compile(r"^([a-z_]+)\s*(?:\(([^)]*)\))?\s*(.*)$")
_TARGET_RE = re.compile(r"^([DL])(\d+)$")


def _strip_instruction(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _unroll(lines: list[tuple[int, str]]) -> list[tuple[int, str]]:
    """Expand ``repeat N { ... }`` blocks by plain repetition."""
    out: list[tuple[int, str]] = []
    i = 0
    while i < len(lines):
        lineno, text = lines[i]
        m = re.match(r"^repeat\s+(\d+)\s*\{$", text)
        if m:
            depth, j = 1, i + 1
            while j < len(lines) and depth:
                t = lines[j][1]
                if t.endswith("{"):
                    depth += 1
                elif t == "}":
                    depth -= 1
                j += 1
            if depth:
                raise DemParseError(lineno, text, "unterminated repeat block")
            body = _unroll(lines[i + 1:j - 1])
            out.extend(body * int(m.group(1)))
            i = j
            continue
        if text == "}":
            raise DemParseError(lineno, text, "unmatched closing brace")
        out.append((lineno, text))
        i += 1
    return out


def parse_dem_text(text: str, name: str = "") -> DetectorModel:
    """Parse detector-error-model text into a :class:`DetectorModel`.

    ``detector`` and ``logical_observable`` declarations only extend the
    detector/observable counts; ``shift_detectors`` offsets later ``D``
    targets. The ``^`` separator of suggested decompositions is ignored, the
    fault signature being the symmetric difference of all its targets.
    """
    raw = [(k + 1, _strip_instruction(line)) for k, line in enumerate(text.splitlines())]
    lines = _unroll([(k, t) for k, t in raw if t])
    offset = 0
    num_det = 0
    num_obs = 0
    faults = []
    for lineno, line in lines:
        m = _INSTR_RE.match(line)
        if not m:
            raise DemParseError(lineno, line, "malformed instruction")
        head, args, rest = m.group(1), m.group(2), m.group(3).split()
        if head == "error":
            if args is None:
                raise DemParseError(lineno, line, "error without probability")
            try:
                p = float(args)
            except ValueError:
                raise DemParseError(lineno, line, "probability is not a number") from None
            if not 0.0 < p < 1.0:
                raise ValueError(f"line {lineno}: probability {p} outside (0, 1)")
            if p > 0.5:
                raise ValueError(f"line {lineno}: probability {p} above 0.5 is not supported")
            dets, obs = [], []
            for tok in rest:
                if tok == "^":
                    continue
                t = _TARGET_RE.match(tok)
                if not t:
                    raise DemParseError(lineno, line, f"bad target {tok!r}")
                idx = int(t.group(2))
                if t.group(1) == "D":
                    dets.append(idx + offset)
                    num_det = max(num_det, idx + offset + 1)
                else:
                    obs.append(idx)
                    num_obs = max(num_obs, idx + 1)
            faults.append((dets, obs, p))
        elif head in ("detector", "logical_observable"):
            kind = "D" if head == "detector" else "L"
            for tok in rest:
                t = _TARGET_RE.match(tok)
                if not t or t.group(1) != kind:
                    raise DemParseError(lineno, line, f"bad {head} target {tok!r}")
                if kind == "D":
                    num_det = max(num_det, int(t.group(2)) + offset + 1)
                else:
                    num_obs = max(num_obs, int(t.group(2)) + 1)
        elif head == "shift_detectors":
            try:
                offset += int(rest[-1])
            except (ValueError, IndexError):
                raise DemParseError(lineno, line, "bad shift amount") from None
        else:
            raise DemParseError(lineno, line, f"unknown instruction {head!r}")
    return model_from_columns(num_det, num_obs, faults, merge=True, name=name)


def to_dem_text(model: DetectorModel) -> str:
    lines = []
    for j in range(model.num_columns):
        targets = [f"D{i}" for i in model.H.col(j)] + [f"L{i}" for i in model.O.col(j)]
        lines.append(f"error({float(model.priors[j])!r}) " + " ".join(targets))
    # pin the dimensions so unused trailing detectors survive a round trip
    lines.append(f"detector D{model.num_detectors - 1}")
    if model.num_observables:
        lines.append(f"logical_observable L{model.num_observables - 1}")
    return "\n".join(lines) + "\n"


# -- JSON ------------------------------------------------------------------------

def model_to_json(model: DetectorModel) -> dict:
    return {
        "num_detectors": model.num_detectors,
        "num_observables": model.num_observables,
        "columns": [
            {"detectors": model.H.col(j).tolist(),
             "observables": model.O.col(j).tolist(),
             "prob": float(model.priors[j])}
            for j in range(model.num_columns)
        ],
    }


def model_from_json(data: dict, name: str = "") -> DetectorModel:
    try:
        cols = [(c["detectors"], c.get("observables", []), float(c["prob"]))
                for c in data["columns"]]
        return model_from_columns(int(data["num_detectors"]),
                                  int(data.get("num_observables", 0)),
                                  cols, merge=False, name=name)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model JSON: {exc}") from None


def save_model(model: DetectorModel, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(model_to_json(model)))
    elif path.suffix == ".dem":
        path.write_text(to_dem_text(model))
    else:
        raise ValueError(f"unsupported model extension {path.suffix!r}")


def load_model(path: str | Path, priors: str | Path | None = None,
               observables: str | Path | None = None) -> DetectorModel:
    """Load a model, choosing the format from the file extension.

    ``.alist`` matrices need a ``priors`` file (whitespace separated
    probabilities) and may take an ``observables`` alist matrix.
    """
    path = Path(path)
    if path.suffix == ".dem":
        return parse_dem_text(path.read_text(), name=path.stem)
    if path.suffix == ".json":
        return model_from_json(json.loads(path.read_text()), name=path.stem)
    if path.suffix == ".alist":
        H = read_alist(path)
        if priors is None:
            raise ValueError("an alist model needs a priors file")
        p = np.array([float(x) for x in Path(priors).read_text().split()])
        if observables is not None:
            O = read_alist(observables)
        else:
            O = SparseBinaryMatrix(0, H.num_cols)
        return DetectorModel(H, O, p, name=path.stem)
    raise ValueError(f"unsupported model extension {path.suffix!r}")


# -- generated models -------------------------------------------------------

def build_code_capacity_model(H: SparseBinaryMatrix, logicals: SparseBinaryMatrix | None,
                              p: float) -> DetectorModel:
    """Independent flips with probability ``p`` on every column of ``H``."""
    if logicals is None:
        logicals = SparseBinaryMatrix(0, H.num_cols)
    return DetectorModel(H, logicals, np.full(H.num_cols, float(p)), name="code-capacity")


def build_phenomenological_model(Hcss: SparseBinaryMatrix, p_data: float, p_meas: float,
                                 rounds: int,
                                 logicals: SparseBinaryMatrix | None = None) -> DetectorModel:
    """Repeated noisy syndrome extraction followed by one perfect readout.

    Detector layer ``t`` (0-based here) compares syndrome ``t`` with syndrome
    ``t - 1``; layer ``rounds`` comes from the final data readout. Columns
    are grouped by round: the ``n`` data faults of round ``t`` followed by its
    ``m`` measurement faults. A data fault of round ``t`` flips layer ``t``;
    a measurement fault of round ``t`` flips layers ``t`` and ``t + 1``.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    for p in (p_data, p_meas):
        if not 0.0 < p < 0.5:
            raise ValueError(f"probability {p} outside (0, 0.5)")
    m, n = Hcss.shape
    if logicals is None:
        logicals = SparseBinaryMatrix(0, n)
    if logicals.num_cols != n:
        raise DimensionError("logical matrix width must match Hcss")
    det_cols, obs_cols, probs = [], [], []
    for t in range(rounds):
        base = t * m
        for q in range(n):
            det_cols.append(Hcss.col(q) + base)
            obs_cols.append(logicals.col(q))
            probs.append(p_data)
        for i in range(m):
            det_cols.append((base + i, base + m + i))
            obs_cols.append(())
            probs.append(p_meas)
    H = SparseBinaryMatrix(m * (rounds + 1), len(det_cols), det_cols)
    O = SparseBinaryMatrix(logicals.num_rows, len(obs_cols), obs_cols)
    return DetectorModel(H, O, np.array(probs), name="phenomenological")
