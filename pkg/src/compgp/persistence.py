"""Versioned JSON archives for fitted models, and CSV files for data.

Floats are written with ``repr``, the shortest decimal string that parses
back to the same double, so every stored number round-trips exactly.
Loading rebuilds factorizations from the stored inputs with the same code
path used at fit time, which makes predictions after a round trip
bit-identical to the original.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .cgp import CgpParams, FittedCgp, NoiseSpec, VolatilityState, build_cgp
from .data import Dataset
from .errors import ArchiveError, DataParseError
from .kriging import Basis, KrigingModel, assemble

FORMAT = "compgp-model"
SCHEMA_VERSION = 1
KINDS = ("ok", "uk", "nugget", "cgp", "cgp-noisy")

# wall-clock entries would make archives differ between identical runs
_VOLATILE_INFO = ("wall_time",)


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def _clean(value):
    """Recursively convert numpy scalars and arrays to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items() if k not in _VOLATILE_INFO}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    return repr(value)


def dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _dataset_doc(ds: Dataset):
    return {
        "X": [_floats(row) for row in ds.X],
        "y": _floats(ds.y),
        "lower": _floats(ds.lower),
        "upper": _floats(ds.upper),
        "names": list(ds.names),
        "response_name": ds.response_name,
    }


def _dataset_from(doc) -> Dataset:
    X = np.array(doc["X"], dtype=float).reshape(len(doc["y"]), -1)
    return Dataset(X, np.array(doc["y"], dtype=float), np.array(doc["lower"], dtype=float),
                   np.array(doc["upper"], dtype=float), tuple(doc["names"]), doc["response_name"])


def model_kind(model) -> str:
    if isinstance(model, FittedCgp):
        return "cgp-noisy" if model.noise is not None else "cgp"
    if isinstance(model, KrigingModel):
        return model.kind
    raise ArchiveError(f"cannot archive objects of type {type(model).__name__}")


def model_to_doc(model, report=None) -> dict:
    """Archive document for a fitted model; ``report`` is stored verbatim."""
    kind = model_kind(model)
    doc = {
        "format": FORMAT,
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "dataset": _dataset_doc(model.dataset),
        "ladder": _floats(model.factor.ladder),
        "degenerate": bool(model.degenerate),
        "info": model.info,
    }
    if isinstance(model, KrigingModel):
        if not model.basis.serializable:
            raise ArchiveError("basis contains custom functions and cannot be archived")
        doc["model"] = {
            "theta": _floats(model.theta),
            "nugget": float(model.nugget),
            "basis": model.basis.names,
            "beta_hat": _floats(model.beta_hat),
            "sigma2_hat": float(model.sigma2_hat),
            "objective": float(model.objective),
            "condition": float(model.condition),
        }
    else:
        p, vol = model.params, model.vol
        doc["model"] = {
            "params": {"lambda": p.lam, "theta": _floats(p.theta), "alpha": _floats(p.alpha), "b": p.b,
                       "kappa": p.kappa},
            "volatility": {"sigma_diag": _floats(vol.sigma_diag), "s2": _floats(vol.s2),
                           "theta": _floats(vol.theta), "b": vol.b, "scale": vol.scale, "floor": vol.floor,
                           "degenerate": bool(vol.degenerate)},
            "mu_hat": float(model.mu_hat),
            "tau2_hat": float(model.tau2_hat),
            "alpha_lower": None if model.alpha_lower is None else float(model.alpha_lower),
        }
        if model.noise is not None:
            doc["model"]["noise"] = {"error_variances": _floats(model.noise.error_variances),
                                     "rho": float(model.noise.rho)}
    if report is not None:
        doc["report"] = report
    return doc


def _check_header(doc):
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ArchiveError("not a compgp model archive")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ArchiveError(f"unsupported schema version {version!r}; this build reads version {SCHEMA_VERSION}")
    if doc.get("kind") not in KINDS:
        raise ArchiveError(f"unknown model kind {doc.get('kind')!r}")


def model_from_doc(doc):
    _check_header(doc)
    try:
        ds = _dataset_from(doc["dataset"])
        ladder = tuple(doc["ladder"])
        m = doc["model"]
        info = dict(doc.get("info") or {})
        if doc["kind"] in ("ok", "uk", "nugget"):
            return assemble(ds, np.array(m["theta"], dtype=float), m["nugget"], Basis(m["basis"]), ladder,
                            doc["kind"], objective=m["objective"], info=info)
        prm, v = m["params"], m["volatility"]
        params = CgpParams(prm["lambda"], prm["theta"], prm["alpha"], prm["b"], kappa=prm["kappa"])
        vol = VolatilityState(np.array(v["sigma_diag"], dtype=float), np.array(v["s2"], dtype=float),
                              np.array(v["theta"], dtype=float), v["b"], v["scale"], v["floor"], v["degenerate"])
        noise, tau2 = None, None
        if doc["kind"] == "cgp-noisy":
            noise = NoiseSpec(np.array(m["noise"]["error_variances"], dtype=float), m["noise"]["rho"])
            tau2 = m["tau2_hat"]
        return build_cgp(ds, params, vol, alpha_lower=m["alpha_lower"], noise=noise, tau2=tau2, ladder=ladder,
                         degenerate=doc["degenerate"], info=info)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ArchiveError):
            raise
        raise ArchiveError(f"malformed archive: {type(exc).__name__}: {exc}") from exc


def save_model(model, path, report=None):
    Path(path).write_text(dumps(model_to_doc(model, report)), encoding="utf-8")


def parse_json(raw: bytes):
    """Decode archive bytes; failures carry the byte offset of the problem."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ArchiveError(f"archive is not valid UTF-8: {exc.reason}", exc.start) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ArchiveError(f"corrupt archive: {exc.msg}", offset) from exc


def load_model(path):
    return model_from_doc(parse_json(Path(path).read_bytes()))


def load_report(path):
    doc = parse_json(Path(path).read_bytes())
    _check_header(doc)
    return doc.get("report")


def _fmt(v) -> str:
    return repr(float(v))


def read_dataset_csv(path, header=True, response_column=-1) -> Dataset:
    """Numeric CSV to a standardized :class:`Dataset`.

    ``response_column`` is a column index or, with a header, a column name.
    Inputs are min-max scaled to [0, 1] and the map is kept on the dataset.
    """
    text = Path(path).read_text(encoding="utf-8-sig")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if header:
        if not rows:
            raise DataParseError(f"{path}: empty file")
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    else:
        names = None
    if not rows:
        raise DataParseError(f"{path}: no data rows")
    width = len(names) if names else len(rows[0])
    if width < 2:
        raise DataParseError(f"{path}: need at least one input column and a response column")
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        line = i + 1 + bool(header)
        if len(row) != width:
            raise DataParseError(f"{path}: line {line} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataParseError(f"{path}: line {line}, column {j + 1}: {cell.strip()!r} is not a number") from None
            if not math.isfinite(values[i, j]):
                raise DataParseError(f"{path}: line {line}, column {j + 1}: non-finite value")
    names = names or [f"x{j + 1}" for j in range(width - 1)] + ["y"]
    if isinstance(response_column, str):
        if response_column not in names:
            raise DataParseError(f"{path}: no column named {response_column!r}")
        rc = names.index(response_column)
    else:
        rc = int(response_column) % width
    keep = [j for j in range(width) if j != rc]
    return Dataset.from_raw(values[:, keep], values[:, rc], names=tuple(names[j] for j in keep),
                            response_name=names[rc])


def write_table_csv(path_or_file, header, rows):
    """Write rows of numbers and strings; floats keep full precision."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return _fmt(v)
        return str(v)

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([cell(v) for v in r])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def write_dataset_csv(dataset: Dataset, path):
    """Raw-scale inputs and the response, with a header row."""
    Z = dataset.to_raw(dataset.X)
    write_table_csv(path, list(dataset.names) + [dataset.response_name],
                    [list(z) + [y] for z, y in zip(Z, dataset.y)])


def write_design_csv(points, path_or_file):
    points = np.asarray(points, dtype=float)
    write_table_csv(path_or_file, [f"x{j + 1}" for j in range(points.shape[1])], points.tolist())


def write_columns_csv(path, columns: dict):
    """Write equal-length named columns, for plot-data files."""
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    write_table_csv(path, names, [list(r) for r in zip(*cols)])


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")
