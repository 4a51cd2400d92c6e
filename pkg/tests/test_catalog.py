"""
Catalog of benchmark problems.

 Group 1 — Lookup
   known entries, unknown names and CLFs, sorted listing
 Group 2 — Reference values
   provenance tags and their serialized names, closed-form agreement of DERIVED values,
   values reproduced by the toolkit
 Group 3 — Export
   exported configs satisfy the schema and rebuild the same problem
"""

import json

import jsonschema
import numpy as np
import pytest

from oracles import derived_references
from sontag_clf.catalog import CatalogEntry, Provenance, export_entry, get_entry, list_entries
from sontag_clf.exceptions import CatalogError
from sontag_clf.pipeline import validate_config
from sontag_clf.schema import EXPERIMENT_SCHEMA
from sontag_clf.sontag import SontagController


# Group 1 — Lookup

def test_get_entry_examples():
    entry = get_entry("cubic1d")
    assert isinstance(entry, CatalogEntry)
    assert (entry.system.n, entry.system.m) == (1, 1)
    assert str(entry.clf()) == "0.5*x1^2"
    assert get_entry("cubic1d") is entry


def test_unknown_entry_and_clf():
    with pytest.raises(CatalogError, match="available"):
        get_entry("pendulum")
    with pytest.raises(CatalogError):
        get_entry("cubic1d").clf("riccati")


def test_list_entries():
    names = list_entries()
    assert names == sorted(names)
    assert len(names) >= 4
    assert {"integrator1d", "cubic1d", "damped1d", "double_integrator"} <= set(names)


def test_entries_are_read_only():
    entry = get_entry("integrator1d")
    with pytest.raises(TypeError):
        entry.clfs["other"] = entry.clf()


# Group 2 — Reference values

def test_every_reference_has_a_provenance():
    for name in list_entries():
        for key, ref in get_entry(name).references.items():
            assert isinstance(ref.provenance, Provenance), (name, key)
            assert np.isfinite(ref.value), (name, key)


def test_provenance_names_match_serialized_values():
    for provenance in Provenance:
        assert provenance.name == provenance.value
    ref = get_entry("double_integrator").references["lambda_riccati"]
    assert ref.provenance is Provenance("PAPER") is Provenance.PAPER


def test_derived_references_match_closed_forms():
    expected = derived_references()
    derived = {(name, key): ref.value
               for name in list_entries()
               for key, ref in get_entry(name).references.items()
               if ref.provenance is Provenance.DERIVED}
    assert set(derived) == set(expected)
    for key, value in derived.items():
        assert value == pytest.approx(expected[key], rel=1e-14, abs=1e-15), key


def test_references_reproduced_by_controller():
    cubic = get_entry("cubic1d")
    ctrl = SontagController(cubic.system, cubic.clf(), cubic.weights)
    refs = cubic.references
    assert ctrl.lambda_value([1.0]) == pytest.approx(refs["lambda_at_1"].value, rel=1e-14)
    assert ctrl([1.0])[0] == pytest.approx(refs["u_at_1"].value, rel=1e-13)
    assert ctrl([0.0])[0] == refs["u_at_0"].value

    di = get_entry("double_integrator")
    assert di.clf("riccati").value([1.0, 1.0]) == pytest.approx(di.references["v_riccati_at_11"].value, rel=1e-14)
    ctrl = SontagController(di.system, di.clf("riccati"), di.weights)
    assert ctrl.lambda_value([0.3, -0.7]) == pytest.approx(di.references["lambda_riccati"].value, abs=1e-12)


# Group 3 — Export

@pytest.mark.parametrize("name", ["integrator1d", "cubic1d", "damped1d", "double_integrator"])
def test_export_satisfies_schema(name):
    exported = export_entry(name)
    jsonschema.Draft202012Validator(EXPERIMENT_SCHEMA).validate(exported)
    assert exported["system"]["name"] == name


def test_export_checks_follow_optimal_clf():
    assert "lambda_identity" in export_entry("double_integrator")["checks"]
    assert "lambda_identity" not in export_entry("double_integrator", clf="quadratic_alt")["checks"]
    assert "lambda_identity" not in export_entry("cubic1d")["checks"]


def test_export_rebuilds_the_same_problem(tmp_path):
    entry = get_entry("double_integrator")
    path = tmp_path / "exported.json"
    path.write_text(json.dumps(export_entry("double_integrator")), encoding="utf-8")
    config = validate_config(path)
    assert config.system.to_strings() == entry.system.to_strings()
    np.testing.assert_array_equal(config.weights.Q, entry.weights.Q)
    x = [0.4, -1.2]
    assert config.clf.value(x) == pytest.approx(entry.clf().value(x), rel=1e-15)
    np.testing.assert_array_equal(config.initial_states[0], [1.0, 0.0])


def test_export_unknown_clf():
    with pytest.raises(CatalogError):
        export_entry("damped1d", clf="quartic")
