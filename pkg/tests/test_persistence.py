import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from compgp.cgp import CgpParams, cgp_predict, with_noise
from compgp.cli import model_predict
from compgp.data import Dataset
from compgp.errors import ArchiveError, DataParseError
from compgp.estimate import fit_cgp, finalize
from compgp.kriging import fit_nugget, fit_ok, fit_uk
from compgp.persistence import (
    SCHEMA_VERSION,
    load_model,
    load_report,
    model_kind,
    parse_json,
    read_dataset_csv,
    save_model,
    write_dataset_csv,
)


def _raw_data(seed, n=6, p=2):
    rng = np.random.default_rng(seed)
    Z = 10 * rng.random((n, p)) - 3
    y = np.sin(Z.sum(axis=1)) + 0.1 * Z[:, 0]
    return Dataset.from_raw(Z, y)


def _fit(kind, ds, seed=0):
    if kind == "ok":
        return fit_ok(ds, n_starts=3, maxfev=80, seed=seed)
    if kind == "uk":
        return fit_uk(ds, "linear", n_starts=3, maxfev=80, seed=seed)
    if kind == "nugget":
        return fit_nugget(ds, n_starts=3, maxfev=80, seed=seed)
    model, _ = fit_cgp(ds, n_starts=2, maxfev=60, seed=seed)
    if kind == "cgp-noisy":
        model = with_noise(model, np.linspace(0.01, 0.05, ds.n))
    return model


def _roundtrip(model, tmp_path):
    path = tmp_path / "m.json"
    save_model(model, path)
    return load_model(path)


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(kind=st.sampled_from(["ok", "uk", "nugget", "cgp", "cgp-noisy"]), seed=st.integers(0, 10_000))
def test_roundtrip_bit_exact(kind, seed, tmp_path):
    model = _fit(kind, _raw_data(seed))
    back = _roundtrip(model, tmp_path)
    assert model_kind(back) == kind
    Xq = np.random.default_rng(seed + 1).random((25, 2)) * 1.4 - 0.2
    a, b = model_predict(model, Xq), model_predict(back, Xq)
    for field in ("mean", "sd", "glob", "local", "v"):
        assert np.array_equal(getattr(a, field), getattr(b, field)), field
    assert np.array_equal(back.dataset.lower, model.dataset.lower)
    assert np.array_equal(back.dataset.upper, model.dataset.upper)


def test_archive_is_self_contained_and_raw_queries(tmp_path):
    ds = _raw_data(1)
    model = _fit("cgp", ds)
    back = _roundtrip(model, tmp_path)
    Z = np.array([[0.5, 1.0], [2.0, -1.0]])
    assert np.array_equal(cgp_predict(back, back.dataset.to_unit(Z)).mean,
                          cgp_predict(model, ds.to_unit(Z)).mean)


def test_degenerate_flag_roundtrips(tmp_path):
    ds = _raw_data(2)
    model = finalize(ds, CgpParams(0.0, [3.0, 3.0], [80.0, 80.0], 0.5, kappa=77.0), 50.0)
    model = type(model)(**{**model.__dict__, "degenerate": True})
    back = _roundtrip(model, tmp_path)
    assert back.degenerate and back.params.lam == 0.0
    const = Dataset.from_raw(np.arange(5.0), np.full(5, 2.0))
    m, _ = fit_cgp(const)
    assert _roundtrip(m, tmp_path).degenerate


def test_report_stored(tmp_path):
    path = tmp_path / "m.json"
    save_model(_fit("ok", _raw_data(3)), path, report={"objective": 1.25})
    assert load_report(path) == {"objective": 1.25}


def test_unknown_schema_version(tmp_path):
    path = tmp_path / "m.json"
    save_model(_fit("ok", _raw_data(4)), path)
    doc = json.loads(path.read_text())
    doc["schema_version"] = SCHEMA_VERSION + 1
    path.write_text(json.dumps(doc))
    with pytest.raises(ArchiveError, match="schema version"):
        load_model(path)


def test_wrong_kind_and_missing_fields(tmp_path):
    path = tmp_path / "m.json"
    save_model(_fit("ok", _raw_data(5)), path)
    doc = json.loads(path.read_text())
    path.write_text(json.dumps({**doc, "kind": "tgp"}))
    with pytest.raises(ArchiveError, match="kind"):
        load_model(path)
    del doc["model"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ArchiveError, match="malformed"):
        load_model(path)


def test_corrupt_archive_reports_byte_offset(tmp_path):
    path = tmp_path / "m.json"
    save_model(_fit("ok", _raw_data(6)), path)
    raw = path.read_bytes()
    cut = raw.index(b'"kind"')
    path.write_bytes(raw[:cut] + b"@" + raw[cut + 1:])
    with pytest.raises(ArchiveError) as err:
        load_model(path)
    assert err.value.offset == cut
    with pytest.raises(ArchiveError) as err:
        parse_json(b'{"a": 1}\xff')
    assert err.value.offset == 8


def _write(tmp_path, text):
    path = tmp_path / "d.csv"
    path.write_text(text)
    return path


def test_read_small_csv(tmp_path):
    ds = read_dataset_csv(_write(tmp_path, "x,y\n1,2\n3,4\n2,0.5\n"))
    assert (ds.n, ds.p) == (3, 1)
    assert np.array_equal(ds.X[:, 0], [0.0, 1.0, 0.5])
    assert np.array_equal(ds.y, [2.0, 4.0, 0.5])
    assert ds.names == ("x",) and ds.response_name == "y"
    assert np.array_equal(ds.lower, [1.0]) and np.array_equal(ds.upper, [3.0])


def test_read_csv_response_selection(tmp_path):
    path = _write(tmp_path, "f,a,b\n1,0,5\n2,1,6\n3,2,4\n")
    ds = read_dataset_csv(path, response_column="f")
    assert ds.names == ("a", "b") and np.array_equal(ds.y, [1.0, 2.0, 3.0])
    ds = read_dataset_csv(_write(tmp_path, "0,5,1\n1,6,2\n2,4,3\n"), header=False)
    assert ds.p == 2 and np.array_equal(ds.y, [1.0, 2.0, 3.0])


@pytest.mark.parametrize("text, needle", [
    ("a,y\n1,2\n3\n", "fields"),
    ("a,y\n1,2\nfoo,3\n", "not a number"),
    ("a,y\n1,2\nnan,3\n", "non-finite"),
    ("a,b,y\n1,7,2\n3,7,1\n", "'b' has zero range"),
])
def test_read_csv_errors(tmp_path, text, needle):
    with pytest.raises(DataParseError, match=needle):
        read_dataset_csv(_write(tmp_path, text))


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 2**32 - 1))
def test_csv_roundtrip_full_precision(seed, tmp_path):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(5, 2)) * 10.0 ** rng.integers(-5, 5)
    ds = Dataset.from_raw(Z, rng.normal(size=5) / 3)
    path = tmp_path / "rt.csv"
    write_dataset_csv(ds, path)
    back = read_dataset_csv(path)
    assert np.array_equal(back.y, ds.y)
    # raw values are rebuilt as lower + X * span, exact to a few ulps of the span
    tol = 4e-16 * (ds.upper - ds.lower)
    assert np.all(np.abs(back.to_raw(back.X) - ds.to_raw(ds.X)) <= tol)
    assert np.all(np.abs(back.upper - ds.upper) <= tol)
    assert np.array_equal(back.lower, ds.lower)
