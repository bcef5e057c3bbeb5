"""
Network and metadata ingestion, validation and cross-validation holdouts.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

TRAIN = 0
TEST = 1
UNOBSERVED = 2

KINDS = ("binary", "count", "unit")
UNIT_ZERO_REMAP = 1e-6


class DataError(ValueError):
    """Malformed or out-of-domain input data."""


@dataclass(frozen=True)
class NetworkData:
    """Directed n x n edge matrix plus a Train/Test/Unobserved mask."""

    edges: np.ndarray
    kind: str
    mask: np.ndarray
    directed: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown link kind {self.kind!r}")
        e = np.array(self.edges, dtype=float)
        m = np.array(self.mask, dtype=np.int8)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or m.shape != e.shape:
            raise DataError("edges and mask must be matching square matrices")
        np.fill_diagonal(m, UNOBSERVED)
        obs = m != UNOBSERVED
        _check_domain(e[obs], self.kind)
        # unobserved cells carry no value; zero them so equality is canonical
        e[~obs] = 0.0
        e.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "mask", m)

    @property
    def n(self):
        return self.edges.shape[0]

    def cells(self, state=TRAIN):
        """Row and column indices of cells in the given mask state (row-major)."""
        return np.nonzero(self.mask == state)

    def values(self, state=TRAIN):
        return self.edges[self.mask == state]

    def with_mask(self, mask):
        return NetworkData(self.edges, self.kind, mask, self.directed)

    def with_edges(self, edges):
        return NetworkData(edges, self.kind, self.mask, self.directed)

    def binarized(self):
        """Same network as binary link data, e > 0 -> 1."""
        e = np.where(self.mask != UNOBSERVED, (self.edges > 0).astype(float), 0.0)
        return NetworkData(e, "binary", self.mask, self.directed)

    def train_hash(self):
        """Digest of everything a sampler is allowed to see."""
        import hashlib
        h = hashlib.sha256()
        h.update(self.mask.tobytes())
        h.update(np.where(self.mask == TRAIN, self.edges, 0.0).tobytes())
        h.update(self.kind.encode())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, NetworkData):
            return NotImplemented
        return (self.kind == other.kind and self.directed == other.directed
                and np.array_equal(self.mask, other.mask)
                and np.array_equal(self.edges, other.edges))

    __hash__ = None


def _check_domain(values, kind):
    if values.size == 0:
        return
    if not np.all(np.isfinite(values)):
        raise DataError("edge values must be finite")
    if kind == "binary" and np.any((values != 0) & (values != 1)):
        raise DataError("binary edge values must be 0 or 1")
    if kind == "count" and np.any((values < 0) | (values != np.floor(values))):
        raise DataError("count edge values must be non-negative integers")
    if kind == "unit" and np.any((values <= 0) | (values > 1)):
        raise DataError("unit edge values must lie in (0, 1]")


def parse_edge_list(text, n, kind, remap_zero=False):
    """Parse whitespace-separated `src dst value` records.

    Unlisted off-diagonal cells are observed zeros for binary and count data.
    Unit data has no zero, so unlisted unit cells are Unobserved. With
    `remap_zero`, a unit value of exactly 0 becomes UNIT_ZERO_REMAP.
    """
    if kind not in KINDS:
        raise DataError(f"unknown link kind {kind!r}")
    edges = np.zeros((n, n))
    mask = np.full((n, n), TRAIN if kind != "unit" else UNOBSERVED, dtype=np.int8)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"line {lineno}: expected 'src dst value'")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"line {lineno}: index out of range for n={n}")
        if i == j:
            raise DataError(f"line {lineno}: self-loops are not modelled")
        if (i, j) in seen:
            raise DataError(f"line {lineno}: duplicate record ({i}, {j})")
        seen.add((i, j))
        if kind == "unit" and v == 0 and remap_zero:
            v = UNIT_ZERO_REMAP
        try:
            _check_domain(np.array([v]), kind)
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        edges[i, j] = v
        mask[i, j] = TRAIN
    return NetworkData(edges, kind, mask)


def write_edge_list(net):
    """Serialise observed non-default cells as an edge list."""
    lines = []
    for i, j in zip(*np.nonzero(net.mask != UNOBSERVED)):
        v = net.edges[i, j]
        if net.kind == "unit" or v != 0:
            lines.append(f"{i} {j} {v:.17g}" if net.kind == "unit" else f"{i} {j} {v:g}")
    return "\n".join(lines) + ("\n" if lines else "")


def read_edge_list(path, n=None, kind="binary", remap_zero=False):
    with open(path) as fh:
        text = fh.read()
    if n is None:
        n = _infer_n(text)
    return parse_edge_list(text, n, kind, remap_zero=remap_zero)


def _infer_n(text):
    top = -1
    for line in text.splitlines():
        line = line.split("#", 1)[0].split()
        if len(line) >= 2:
            top = max(top, int(line[0]), int(line[1]))
    return top + 1


# ---------------------------------------------------------------------------
# Metadata
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetadataMatrix:
    phi: np.ndarray
    attribute_names: tuple = ()

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.int8)
        if phi.ndim != 2:
            raise DataError("phi must be an n x F matrix")
        if np.any((phi != 0) & (phi != 1)):
            raise DataError("metadata entries must be 0 or 1")
        names = tuple(self.attribute_names) or tuple(f"attr{f}" for f in range(phi.shape[1]))
        if len(names) != phi.shape[1]:
            raise DataError("one attribute name per column required")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "attribute_names", names)

    @property
    def F(self):
        return self.phi.shape[1]

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 0), dtype=np.int8), ())


@dataclass
class Rule:
    kind: str                      # "threshold" or "onehot"
    threshold: float = 0.0
    levels: tuple = field(default_factory=tuple)


MISSING = ("", "na", "nan", "none", "?")


def parse_rules(text):
    """Parse `col.<name> = threshold:<t>` / `col.<name> = onehot[:a,b,c]` lines."""
    rules = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key.startswith("col."):
            raise DataError(f"rules line {lineno}: expected 'col.<name> = <rule>'")
        name = key[4:]
        head, _, arg = val.partition(":")
        if head == "threshold":
            try:
                rules[name] = Rule("threshold", threshold=float(arg))
            except ValueError:
                raise DataError(f"rules line {lineno}: bad threshold {arg!r}") from None
        elif head == "onehot":
            levels = tuple(s.strip() for s in arg.split(",") if s.strip())
            rules[name] = Rule("onehot", levels=levels)
        else:
            raise DataError(f"rules line {lineno}: unknown rule {head!r}")
    return rules


def read_metadata_csv(text):
    """CSV with header; first column is the entity id. Returns (ids, columns)."""
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    if not rows:
        raise DataError("empty metadata file")
    header, body = rows[0], rows[1:]
    ids = [int(r[0]) for r in body]
    columns = {name: [r[c].strip() if c < len(r) else "" for r in body]
               for c, name in enumerate(header[1:], 1)}
    return ids, columns


def binarize_attributes(raw, rules, missing="zero"):
    """Turn a raw attribute table into a binary MetadataMatrix.

    raw: mapping column name -> sequence of values (strings or numbers).
    A numeric column with threshold t yields one column, 1 iff value > t; a
    categorical column with m levels yields m one-hot columns. Missing cells
    become 0 (neutral) unless `missing="error"`.
    """
    missing_cols = [c for c in raw if c not in rules]
    if missing_cols:
        raise DataError(f"no binarization rule for columns {missing_cols}")
    blocks, names = [], []
    n = None
    for col, values in raw.items():
        values = list(values)
        n = len(values) if n is None else n
        if len(values) != n:
            raise DataError("attribute columns have different lengths")
        rule = rules[col]
        absent = [_is_missing(v) for v in values]
        if any(absent) and missing == "error":
            raise DataError(f"missing value in column {col!r} without imputation rule")
        if rule.kind == "threshold":
            out = np.zeros((n, 1), dtype=np.int8)
            for i, v in enumerate(values):
                if not absent[i]:
                    try:
                        out[i, 0] = float(v) > rule.threshold
                    except ValueError:
                        raise DataError(f"non-numeric value {v!r} in column {col!r}") from None
            blocks.append(out)
            names.append(f"{col}>{rule.threshold:g}")
        else:
            observed = [str(v).strip() for v, a in zip(values, absent) if not a]
            levels = rule.levels or tuple(sorted(set(observed)))
            unseen = sorted(set(observed) - set(levels))
            if unseen:
                raise DataError(f"unseen level(s) {unseen} in column {col!r}")
            out = np.zeros((n, len(levels)), dtype=np.int8)
            pos = {lv: c for c, lv in enumerate(levels)}
            for i, v in enumerate(values):
                if not absent[i]:
                    out[i, pos[str(v).strip()]] = 1
            blocks.append(out)
            names.extend(f"{col}={lv}" for lv in levels)
    if not blocks:
        return MetadataMatrix(np.zeros((n or 0, 0), dtype=np.int8), ())
    return MetadataMatrix(np.hstack(blocks), tuple(names))


def _is_missing(v):
    if v is None:
        return True
    if isinstance(v, float) and np.isnan(v):
        return True
    return str(v).strip().lower() in MISSING


def load_metadata(csv_text, rules_text, n, missing="zero"):
    ids, columns = read_metadata_csv(csv_text)
    if sorted(ids) != list(range(n)):
        raise DataError(f"metadata ids must cover 0..{n - 1} exactly once")
    order = np.argsort(ids)
    raw = {c: [v[o] for o in order] for c, v in columns.items()}
    return binarize_attributes(raw, parse_rules(rules_text), missing=missing)


def write_metadata_csv(meta):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", *meta.attribute_names])
    for i, row in enumerate(meta.phi):
        w.writerow([i, *row.tolist()])
    return buf.getvalue()


def identity_rules(meta):
    """Rules text that maps an already-binary metadata CSV onto itself."""
    return "".join(f"col.{name} = threshold:0.5\n" for name in meta.attribute_names)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HoldoutPlan:
    """Per-row partition of observed cells: folds[i, j] in 0..n_folds-1, or -1."""

    folds: np.ndarray
    seed: int
    n_folds: int = 10

    def mask_for(self, net, fold):
        mask = np.array(net.mask)
        mask[(self.folds == fold)] = TEST
        return mask

    def apply(self, net, fold):
        if not 0 <= fold < self.n_folds:
            raise ValueError(f"fold {fold} out of range")
        return net.with_mask(self.mask_for(net, fold))

    def to_csv(self):
        lines = ["i,j,fold"]
        for i, j in zip(*np.nonzero(self.folds >= 0)):
            lines.append(f"{i},{j},{self.folds[i, j]}")
        return "\n".join(lines) + "\n"


def make_cv_folds(net, seed, n_folds=10):
    """Shuffle each row's observed off-diagonal cells and deal them into folds."""
    rng = np.random.default_rng(seed)
    folds = np.full((net.n, net.n), -1, dtype=np.int16)
    observed = net.mask != UNOBSERVED
    for i in range(net.n):
        cols = np.nonzero(observed[i])[0]
        cols = cols[rng.permutation(cols.size)]
        for f, part in enumerate(np.array_split(cols, n_folds)):
            folds[i, part] = f
    folds.setflags(write=False)
    return HoldoutPlan(folds, seed, n_folds)
