"""Material parameter derivation, validation, and part bindings."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from mocomp.errors import MaterialValidationError, ParameterDomainError
from mocomp.materials import (
    NU_MAX,
    NU_MIN,
    MaterialParams,
    PartMaterialMap,
    assign_part_material,
    elastic_from_lame,
    lame_from_elastic,
    validate_material,
)

# Hand-derived reference values:
#   E=3, nu=0.25:  lambda = 3*0.25 / (1.25 * 0.5) = 1.2,  mu = 3 / 2.5 = 1.2
#   E=1, nu=0:     lambda = 0,                         mu = 0.5
LAME_CASES = [
    (3.0, 0.25, 1.2, 1.2),
    (1.0, 0.0, 0.0, 0.5),
    (1e4, 0.3, 1e4 * 0.3 / (1.3 * 0.4), 1e4 / 2.6),
]


@pytest.mark.parametrize("E, nu, lam, mu", LAME_CASES)
def test_lame_from_elastic_reference_values(E, nu, lam, mu):
    got_lam, got_mu = lame_from_elastic(E, nu)
    assert got_lam == pytest.approx(lam, rel=1e-14, abs=1e-14)
    assert got_mu == pytest.approx(mu, rel=1e-14)


@pytest.mark.parametrize(
    "E, nu",
    [
        (0.0, 0.3),
        (-1.0, 0.3),
        (1.0, 0.5),       # incompressible limit excluded
        (1.0, NU_MAX),    # open interval: the bound itself is out
        (1.0, NU_MIN),
        (1.0, -0.7),
        (math.nan, 0.3),
        (1.0, math.nan),
    ],
)
def test_lame_from_elastic_rejects_bad_domain(E, nu):
    with pytest.raises(ParameterDomainError):
        lame_from_elastic(E, nu)


def test_lame_from_elastic_accepts_interval_interior():
    lame_from_elastic(1.0, 0.489)
    lame_from_elastic(1.0, -0.449)


@given(
    E=st.floats(1e-3, 1e9),
    nu=st.floats(NU_MIN + 1e-6, NU_MAX - 1e-6),
)
def test_lame_properties(E, nu):
    lam, mu = lame_from_elastic(E, nu)
    # Shear modulus is always positive.
    assert mu > 0.0
    # lambda carries the sign of nu.
    assert math.copysign(1.0, lam) == math.copysign(1.0, nu) or lam == 0.0
    # Bulk modulus lambda + 2/3 mu stays positive on the admissible interval.
    assert lam + 2.0 * mu / 3.0 > 0.0


@given(
    E=st.floats(1e-3, 1e9),
    nu=st.floats(NU_MIN + 1e-3, NU_MAX - 1e-3),
)
def test_lame_round_trip(E, nu):
    lam, mu = lame_from_elastic(E, nu)
    E2, nu2 = elastic_from_lame(lam, mu)
    assert E2 == pytest.approx(E, rel=1e-10)
    assert nu2 == pytest.approx(nu, rel=1e-10, abs=1e-12)


def test_lame_continuity_under_small_perturbation():
    lam0, mu0 = lame_from_elastic(100.0, 0.3)
    lam1, mu1 = lame_from_elastic(100.0 * (1 + 1e-9), 0.3 + 1e-9)
    assert abs(lam1 - lam0) / lam0 < 1e-7
    assert abs(mu1 - mu0) / mu0 < 1e-7


class TestValidateMaterial:
    def test_valid_record_has_no_diagnostics(self):
        params = MaterialParams.from_elastic(3.0, 0.25, viscosity=0.1, density=2.0)
        assert validate_material(params) == []

    def test_decoupled_lambda_is_reported(self):
        good = MaterialParams.from_elastic(3.0, 0.25)
        bad = MaterialParams(
            young_modulus=good.young_modulus,
            poisson_ratio=good.poisson_ratio,
            lame_lambda=good.lame_lambda * 1.01,
            lame_mu=good.lame_mu,
        )
        diags = validate_material(bad)
        assert len(diags) == 1
        assert "lame_lambda" in diags[0] and "decoupled" in diags[0]

    def test_every_violation_is_listed(self):
        bad = MaterialParams(
            young_modulus=-1.0,
            poisson_ratio=0.6,
            lame_lambda=0.0,
            lame_mu=0.0,
            viscosity=-2.0,
            density=0.0,
        )
        diags = validate_material(bad)
        assert len(diags) == 4  # E, nu, viscosity, density
        joined = "\n".join(diags)
        for field in ("young_modulus", "poisson_ratio", "viscosity", "density"):
            assert field in joined

    def test_tiny_lambda_at_nu_zero_passes(self):
        # nu == 0 makes lambda exactly 0; the coupling check must not
        # degenerate into a zero-division there.
        params = MaterialParams.from_elastic(1.0, 0.0)
        assert validate_material(params) == []


class TestPartMaterialMap:
    def test_assign_and_get(self):
        m0 = PartMaterialMap.empty()
        rubber = MaterialParams.from_elastic(1e4, 0.3, density=300.0)
        m1 = assign_part_material(m0, 0, rubber)
        assert len(m0) == 0  # original untouched
        assert m1.get(0) is rubber
        assert m1.labels() == (0,)

    def test_reassign_replaces_without_growth(self):
        m = PartMaterialMap.empty()
        m = assign_part_material(m, 1, MaterialParams.from_elastic(1.0, 0.1))
        m = assign_part_material(m, 1, MaterialParams.from_elastic(2.0, 0.2))
        assert len(m) == 1
        assert m.get(1).young_modulus == 2.0

    def test_invalid_params_rejected_with_diagnostics(self):
        bad = MaterialParams(1.0, 0.3, lame_lambda=999.0, lame_mu=999.0)
        with pytest.raises(MaterialValidationError) as exc:
            assign_part_material(PartMaterialMap.empty(), 0, bad)
        assert exc.value.diagnostics

    def test_negative_part_label_rejected(self):
        with pytest.raises(ParameterDomainError):
            assign_part_material(
                PartMaterialMap.empty(), -1, MaterialParams.from_elastic(1.0, 0.1)
            )

    def test_missing_part_lookup_names_known_labels(self):
        m = assign_part_material(
            PartMaterialMap.empty(), 2, MaterialParams.from_elastic(1.0, 0.1)
        )
        with pytest.raises(KeyError, match=r"\[2\]"):
            m.get(5)

    def test_field_arrays_alignment(self):
        import numpy as np

        a = MaterialParams.from_elastic(1.0, 0.0, viscosity=0.5, density=2.0)
        b = MaterialParams.from_elastic(3.0, 0.25, viscosity=0.0, density=4.0)
        m = assign_part_material(PartMaterialMap.empty(), 0, a)
        m = assign_part_material(m, 1, b)
        lam, mu, visc, rho = m.field_arrays(np.array([1, 0, 1]))
        assert lam.tolist() == [1.2, 0.0, 1.2]
        assert mu.tolist() == [1.2, 0.5, 1.2]
        assert visc.tolist() == [0.0, 0.5, 0.0]
        assert rho.tolist() == [4.0, 2.0, 4.0]

    def test_field_arrays_unbound_label(self):
        import numpy as np

        m = assign_part_material(
            PartMaterialMap.empty(), 0, MaterialParams.from_elastic(1.0, 0.1)
        )
        with pytest.raises(KeyError, match="parts \\[3\\]"):
            m.field_arrays(np.array([0, 3]))
