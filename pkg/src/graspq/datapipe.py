"""Grasp record files, execution labelling and train/test splitting.

Records are stored as JSON lines, one grasp per line::

    {"grasp_id": "g1", "cluster_id": "c1", "robot": "apollo", "object": "bottle_1",
     "contacts": [{"position": [x, y, z], "normal": [x, y, z], "mu": 0.5}, ...],
     "jacobian": [[...], ...],
     "posture": {"y": [...], "y_min": [...], "y_max": [...], "a": [...]},
     "quality": {"q_a1": 0.4, ...},
     "executions": [{"outcome": "stable", "context": {"object_variant": "heavy"}}]}

``jacobian``, ``posture.a`` and ``quality`` are optional; either the geometry
(``contacts`` + ``posture``) or ``quality`` must be present.  Labelled files
also carry ``binary_label`` and ``ternary_label``.  Object models live in a
separate JSON catalog keyed by object name.
"""
import json
import os
import tempfile
from collections import Counter, OrderedDict
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (DuplicateId, InvalidInput, MissingFeature, ParseError,
                     StratificationError)
from .graspmodel import Contact, GraspInstance, HandPosture, ObjectModel
from .metrics import METRIC_NAMES

STABLE, UNSTABLE = "Stable", "Unstable"
ROBUST, FRAGILE, FUTILE = "Robust", "Fragile", "Futile"

LABEL_ENCODINGS = {
    "binary": {UNSTABLE: 0, STABLE: 1},
    "ternary": {ROBUST: 0, FRAGILE: 1, FUTILE: 2},
    "robust-fragile": {ROBUST: 0, FRAGILE: 1},
}
LABEL_SCHEMES = tuple(LABEL_ENCODINGS)


@dataclass
class ExecutionOutcome:
    outcome: str  # STABLE or UNSTABLE
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome not in (STABLE, UNSTABLE):
            raise InvalidInput(f"execution outcome must be Stable or Unstable, got {self.outcome!r}")

    @property
    def stable(self):
        return self.outcome == STABLE


@dataclass
class GraspRecord:
    """One candidate grasp and its executions.

    Geometry is kept in its JSON form (plain lists) so records compare and
    round-trip exactly; :meth:`grasp_instance` builds the numeric model.
    """

    grasp_id: str
    cluster_id: str
    robot: str
    object: str
    executions: list = field(default_factory=list)
    contacts: Optional[list] = None
    jacobian: Optional[list] = None
    posture: Optional[dict] = None
    quality: Optional[dict] = None
    binary_label: Optional[str] = None
    ternary_label: Optional[str] = None

    def grasp_instance(self, objects):
        if self.contacts is None or self.posture is None:
            raise InvalidInput(f"record {self.grasp_id!r} has no grasp geometry")
        if self.object not in objects:
            raise InvalidInput(f"record {self.grasp_id!r}: unknown object {self.object!r}")
        contacts = [Contact(c["position"], c["normal"], c.get("mu", 0.5)) for c in self.contacts]
        posture = HandPosture(self.posture["y"], self.posture["y_min"], self.posture["y_max"],
                              self.posture.get("a"))
        return GraspInstance(self.grasp_id, contacts, posture, objects[self.object], self.jacobian)

    def label(self, scheme):
        if scheme == "binary":
            return self.binary_label
        return self.ternary_label

    def to_dict(self):
        d = OrderedDict(grasp_id=self.grasp_id, cluster_id=self.cluster_id,
                        robot=self.robot, object=self.object)
        for key in ("contacts", "jacobian", "posture", "quality"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        d["executions"] = [{"outcome": e.outcome.lower(), "context": e.context}
                           for e in self.executions]
        if self.binary_label is not None:
            d["binary_label"] = self.binary_label
        if self.ternary_label is not None:
            d["ternary_label"] = self.ternary_label
        return d


@dataclass
class Dataset:
    records: list = field(default_factory=list)
    feature_order: tuple = METRIC_NAMES
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.grasp_id in seen:
                raise DuplicateId(f"duplicate grasp_id {r.grasp_id!r}")
            seen.add(r.grasp_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def subset(self, records):
        return Dataset(list(records), self.feature_order, dict(self.provenance))


# -- parsing -----------------------------------------------------------------

def _vec3(value, what, line):
    if not isinstance(value, list) or len(value) != 3 or not all(_is_number(v) for v in value):
        raise ParseError(f"{what} must be a list of 3 numbers", line)
    return value


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _number_list(value, what, line):
    if not isinstance(value, list) or not all(_is_number(v) for v in value):
        raise ParseError(f"{what} must be a list of numbers", line)
    return value


def _string(d, key, line):
    value = d.get(key)
    if not isinstance(value, str) or not value:
        raise ParseError(f"field {key!r} must be a non-empty string", line)
    return value


def parse_record(d, line=None):
    """Validate one decoded JSON object and turn it into a :class:`GraspRecord`."""
    if not isinstance(d, dict):
        raise ParseError("record must be a JSON object", line)
    contacts = d.get("contacts")
    if contacts is not None:
        if not isinstance(contacts, list) or not contacts:
            raise ParseError("contacts must be a non-empty list", line)
        for i, c in enumerate(contacts):
            if not isinstance(c, dict):
                raise ParseError(f"contact {i} must be an object", line)
            _vec3(c.get("position"), f"contact {i} position", line)
            _vec3(c.get("normal"), f"contact {i} normal", line)
            if "mu" in c and not (_is_number(c["mu"]) and c["mu"] >= 0):
                raise ParseError(f"contact {i} mu must be a number >= 0", line)
    posture = d.get("posture")
    if posture is not None:
        if not isinstance(posture, dict):
            raise ParseError("posture must be an object", line)
        for key in ("y", "y_min", "y_max"):
            _number_list(posture.get(key), f"posture.{key}", line)
        if "a" in posture:
            _number_list(posture["a"], "posture.a", line)
    jacobian = d.get("jacobian")
    if jacobian is not None:
        if not isinstance(jacobian, list) or not jacobian:
            raise ParseError("jacobian must be a list of rows", line)
        for row in jacobian:
            _number_list(row, "jacobian row", line)
        if len({len(row) for row in jacobian}) != 1:
            raise ParseError("jacobian rows have different lengths", line)
    quality = d.get("quality")
    if quality is not None:
        if not isinstance(quality, dict):
            raise ParseError("quality must be an object", line)
        for k, v in quality.items():
            if k not in METRIC_NAMES:
                raise ParseError(f"unknown metric {k!r} in quality", line)
            if v is not None and not _is_number(v):
                raise ParseError(f"quality.{k} must be a number or null", line)
    has_geometry = contacts is not None and posture is not None
    if not has_geometry and quality is None:
        raise ParseError("record needs contacts + posture or a quality vector", line)

    executions = []
    for e in d.get("executions", []):
        if not isinstance(e, dict) or e.get("outcome") not in ("stable", "unstable"):
            raise ParseError("execution outcome must be 'stable' or 'unstable'", line)
        context = e.get("context", {})
        if not isinstance(context, dict):
            raise ParseError("execution context must be an object", line)
        executions.append(ExecutionOutcome(e["outcome"].capitalize(), context))

    binary = d.get("binary_label")
    if binary is not None and binary not in LABEL_ENCODINGS["binary"]:
        raise ParseError(f"bad binary_label {binary!r}", line)
    ternary = d.get("ternary_label")
    if ternary is not None and ternary not in LABEL_ENCODINGS["ternary"]:
        raise ParseError(f"bad ternary_label {ternary!r}", line)

    return GraspRecord(
        grasp_id=_string(d, "grasp_id", line),
        cluster_id=_string(d, "cluster_id", line),
        robot=_string(d, "robot", line),
        object=_string(d, "object", line),
        executions=executions,
        contacts=contacts,
        jacobian=jacobian,
        posture=posture,
        quality=quality,
        binary_label=binary,
        ternary_label=ternary,
    )


def load_dataset(path, format="jsonl"):
    """Read and validate a JSON-lines grasp record file."""
    if format != "jsonl":
        raise ValueError(f"unsupported dataset format {format!r}")
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                d = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            record = parse_record(d, lineno)
            if record.grasp_id in seen:
                raise DuplicateId(f"line {lineno}: duplicate grasp_id {record.grasp_id!r}")
            seen.add(record.grasp_id)
            records.append(record)
    return Dataset(records, provenance={"source": os.fspath(path)})


def dumps_record(record):
    return json.dumps(record.to_dict(), separators=(",", ":"))


def atomic_write_text(path, text):
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_dataset(ds, path):
    atomic_write_text(path, "".join(dumps_record(r) + "\n" for r in ds.records))


def load_objects(path):
    """Object catalog: JSON object mapping object name -> model fields."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: object catalog must be a JSON object")
    try:
        return {name: ObjectModel.from_dict(name, d) for name, d in raw.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad object model: {exc}") from None


def save_objects(objects, path):
    data = {name: obj.to_dict() for name, obj in sorted(objects.items())}
    atomic_write_text(path, json.dumps(data, indent=1) + "\n")


def read_thresholds(path):
    """Parse ``metric lo hi`` lines ('#' starts a comment) into ``{metric: (lo, hi)}``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3 or parts[0] not in METRIC_NAMES:
                raise ParseError(f"{path}: expected 'metric lo hi'", lineno)
            try:
                lo, hi = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"{path}: thresholds must be numbers", lineno) from None
            out[parts[0]] = (lo, hi)
    return out


def format_thresholds(thresholds, comment=None):
    lines = [f"# {comment}"] if comment else []
    lines += [f"{name} {lo!r} {hi!r}" for name, (lo, hi) in sorted(thresholds.items())]
    return "\n".join(lines) + "\n"


def write_thresholds(thresholds, path, comment=None):
    atomic_write_text(path, format_thresholds(thresholds, comment))


# -- labelling -----------------------------------------------------------------

def binary_label(record):
    """Majority vote over the record's executions; ties count as Unstable."""
    if not record.executions:
        raise InvalidInput(f"record {record.grasp_id!r} has no executions")
    stable = sum(e.stable for e in record.executions)
    return STABLE if 2 * stable > len(record.executions) else UNSTABLE


def ternary_from_outcomes(outcomes):
    """Robust if every outcome is Stable, Futile if every one is Unstable, else Fragile."""
    outcomes = list(outcomes)
    if not outcomes:
        raise InvalidInput("cannot label an empty set of executions")
    stable = sum(o == STABLE for o in outcomes)
    if stable == len(outcomes):
        return ROBUST
    if stable == 0:
        return FUTILE
    return FRAGILE


def ternary_label(records_in_cluster):
    """3-category label shared by every grasp of one cluster."""
    if not records_in_cluster:
        raise InvalidInput("empty cluster")
    outcomes = []
    for r in records_in_cluster:
        if not r.executions:
            raise InvalidInput(f"record {r.grasp_id!r} has no executions")
        outcomes += [e.outcome for e in r.executions]
    return ternary_from_outcomes(outcomes)


def clusters(ds):
    """cluster_id -> records, in order of first appearance."""
    out = OrderedDict()
    for r in ds.records:
        out.setdefault(r.cluster_id, []).append(r)
    return out


def label_dataset(ds):
    """Attach binary and ternary labels.

    Returns the labelled dataset and the ids of records dropped because they
    have no executions.
    """
    skipped = [r.grasp_id for r in ds.records if not r.executions]
    kept = [r for r in ds.records if r.executions]
    kept_ds = ds.subset(kept)
    ternary = {cid: ternary_label(rs) for cid, rs in clusters(kept_ds).items()}
    labelled = [replace(r, binary_label=binary_label(r), ternary_label=ternary[r.cluster_id])
                for r in kept]
    return ds.subset(labelled), skipped


def subset_for_scheme(ds, scheme):
    """Records usable under ``scheme`` (robust-fragile drops Futile grasps)."""
    encoding = LABEL_ENCODINGS[scheme]
    return ds.subset(r for r in ds.records if r.label(scheme) in encoding)


# -- splitting and features ------------------------------------------------------

def encoded_labels(ds, scheme):
    encoding = LABEL_ENCODINGS[scheme]
    out = []
    for r in ds.records:
        label = r.label(scheme)
        if label not in encoding:
            raise InvalidInput(f"record {r.grasp_id!r} has no {scheme} label usable here ({label!r})")
        out.append(encoding[label])
    return np.array(out, dtype=int)


def split(ds, test_fraction, seed, stratified=True, mode="cluster", scheme="ternary"):
    """Random train/test partition.

    ``mode="cluster"`` keeps each cluster on one side; ``mode="record"``
    splits individual records.  The test side gets ``round(test_fraction * units)``
    units.  With ``stratified`` that count is shared between classes in
    proportion to their size (a cluster's class is its majority label, ties to
    the smallest code), and every class keeps at least one unit on each side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise InvalidInput(f"test_fraction must be in (0, 1), got {test_fraction}")
    if mode not in ("cluster", "record"):
        raise InvalidInput(f"split mode must be 'cluster' or 'record', got {mode!r}")
    rng = np.random.default_rng(seed)
    if mode == "cluster":
        index = {r.grasp_id: i for i, r in enumerate(ds.records)}
        groups = [[index[r.grasp_id] for r in rs] for rs in clusters(ds).values()]
    else:
        groups = [[i] for i in range(len(ds))]

    def n_test_for(n):
        n_test = int(np.floor(test_fraction * n + 0.5))
        return min(max(n_test, 1), n - 1) if n >= 2 else n_test

    def take(units, n_test):
        perm = rng.permutation(len(units))
        return [units[i] for i in perm[:n_test]]

    test_units = []
    if stratified:
        y = encoded_labels(ds, scheme)
        by_class = {}
        for g in groups:
            counts = Counter(int(y[i]) for i in g)
            top = max(counts.values())
            cls = min(c for c, n in counts.items() if n == top)
            by_class.setdefault(cls, []).append(g)
        classes = sorted(by_class)
        for cls in classes:
            if len(by_class[cls]) < 2:
                raise StratificationError(
                    f"class {cls} has {len(by_class[cls])} {mode}(s); need at least 2 to stratify")
        # largest-remainder allocation of the overall test size; remainder ties
        # are broken at random so no class is favoured
        quota = {c: test_fraction * len(by_class[c]) for c in classes}
        alloc = {c: int(np.floor(quota[c])) for c in classes}
        extra = n_test_for(len(groups)) - sum(alloc.values())
        tiebreak = rng.permutation(len(classes))
        remainder = [quota[c] - alloc[c] for c in classes]
        ranked = sorted(range(len(classes)), key=lambda i: (-remainder[i], tiebreak[i]))
        for i in ranked[:max(extra, 0)]:
            alloc[classes[i]] += 1
        for cls in classes:
            n = len(by_class[cls])
            test_units += take(by_class[cls], min(max(alloc[cls], 1), n - 1))
    else:
        test_units = take(groups, n_test_for(len(groups)))

    test_idx = {i for g in test_units for i in g}
    train = [r for i, r in enumerate(ds.records) if i not in test_idx]
    test = [r for i, r in enumerate(ds.records) if i in test_idx]
    return ds.subset(train), ds.subset(test)


def feature_matrix(ds, selected_metrics, scheme="ternary"):
    """Feature rows (record order) for ``selected_metrics`` and encoded labels."""
    for m in selected_metrics:
        if m not in METRIC_NAMES:
            raise InvalidInput(f"unknown metric {m!r}")
    X = np.empty((len(ds), len(selected_metrics)))
    for i, r in enumerate(ds.records):
        for j, m in enumerate(selected_metrics):
            value = (r.quality or {}).get(m)
            if value is None:
                raise MissingFeature(r.grasp_id, m)
            X[i, j] = value
    return X, encoded_labels(ds, scheme)
