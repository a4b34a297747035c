"""
Tests for instance validators
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from src.generators import Family, GenSpec, generate
from src.instance import Instance
from src.validators import InstanceValidator, ValidationError, format_validation_errors, validate


class TestMetricValidation:
    """Test time-metric checks"""

    def test_valid_metric(self, desk1_instance):
        assert InstanceValidator.validate_time_metric(desk1_instance) == []

    def test_triangle_violation(self):
        d = np.array([[0.0, 5.0, 1.0], [5.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        inst = Instance(np.zeros(2), np.zeros((2, 1)), d)
        errors = InstanceValidator.validate_time_metric(inst)
        assert len(errors) == 1
        assert errors[0].field == "d"
        assert "triangle" in errors[0].message
        assert errors[0].suggestion
        assert errors[0].entry == (0, 1)
        assert str(errors[0]).startswith("d[0, 1]: triangle")

    def test_asymmetric_metric(self):
        d = np.array([[0.0, 1.0], [2.0, 0.0]])
        inst = Instance(np.zeros(1), np.zeros((1, 1)), d)
        assert any("symmetric" in e.message for e in InstanceValidator.validate_time_metric(inst))

    def test_nonzero_diagonal(self):
        d = np.array([[1.0, 1.0], [1.0, 0.0]])
        inst = Instance(np.zeros(1), np.zeros((1, 1)), d)
        assert any("diagonal" in e.message for e in InstanceValidator.validate_time_metric(inst))


class TestCostValidation:
    """Test cost checks"""

    def test_negative_opening_cost(self):
        inst = Instance(np.array([-1.0]), np.zeros((1, 1)), 1.0 - np.eye(2))
        errors = InstanceValidator.validate_costs(inst)
        assert [e.field for e in errors] == ["f"]

    def test_negative_connection_cost_located(self):
        inst = Instance(np.zeros(2), np.array([[1.0, 2.0], [3.0, -1.0]]), 1.0 - np.eye(3))
        errors = InstanceValidator.validate_costs(inst)
        assert [e.entry for e in errors] == [(1, 1)]

    def test_unreachable_client(self):
        inst = Instance(np.zeros(1), np.array([[math.inf]]), 1.0 - np.eye(2))
        errors = InstanceValidator.validate_costs(inst)
        assert errors and errors[0].field == "c"
        assert "client 0" in errors[0].message


class TestFamilyValidation:
    """Test tag-specific checks"""

    def test_uniform_tag_requires_unit_metric(self, desk1_instance):
        inst = replace(desk1_instance, tags=("uniform",))
        error = InstanceValidator.validate_uniform(inst)
        assert error is not None
        assert error.field == "tags"

    def test_zfc_requires_zero_costs(self, desk1_instance):
        error = InstanceValidator.validate_zero_facility_costs(replace(desk1_instance, tags=("zfc",)))
        assert error is not None
        assert error.field == "f"

    def test_mgl_costs_zero_or_infinite(self):
        c = np.array([[0.0, 3.0]])
        inst = Instance(np.zeros(1), c, 1.0 - np.eye(2), tags=("mgl",))
        assert InstanceValidator.validate_mgl(inst) is not None

    def test_related_needs_metric(self, desk1_instance):
        errors = InstanceValidator.validate_related(replace(desk1_instance, tags=("related",), related_scale=1.0))
        assert errors[0].field == "metric"

    @pytest.mark.parametrize("family", list(Family))
    def test_generated_instances_are_valid(self, family):
        spec = GenSpec(family=family, n=4, m=3, group_size=2)
        report = validate(generate(spec, 7))
        assert report.valid, format_validation_errors(report.errors)


class TestReport:
    """Test report formatting"""

    def test_valid_report(self, desk1_instance):
        report = validate(desk1_instance)
        assert report
        assert format_validation_errors(report.errors) == "Instance is valid."

    def test_error_formatting(self):
        errors = [ValidationError("d", "bad metric", "fix it"), ValidationError("f", "negative")]
        text = format_validation_errors(errors)
        assert "1. D: bad metric" in text
        assert "Suggestion: fix it" in text
        assert "2. F: negative" in text

    def test_error_to_dict(self):
        assert ValidationError("k", "too small").to_dict() == {"field": "k", "message": "too small", "suggestion": ""}

    def test_located_error(self):
        error = ValidationError("c", "negative cost", entry=(1, 0))
        assert error.to_dict()["entry"] == [1, 0]
        assert "1. C[1, 0]: negative cost" in format_validation_errors([error])
