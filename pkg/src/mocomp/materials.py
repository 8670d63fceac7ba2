"""Material parameters for the viscoelastic point solver.

A material is described by the pair (E, nu) — Young's modulus and Poisson's
ratio — plus a Newtonian viscosity and a rest density.  The Lame fields
(lambda, mu) are always *derived* from (E, nu):

    lambda = E * nu / ((1 + nu) * (1 - 2 nu))
    mu     = E / (2 (1 + nu))

They are stored alongside the inputs for cheap access in the stress kernel,
but they are never independent degrees of freedom; ``validate_material``
checks the coupling and optimizers re-derive them after every update.

Poisson's ratio lives in the open interval (-0.45, 0.49).  The upper bound
keeps lambda finite and the conditioning of the stress bounded; the lower
bound excludes exotic auxetic regimes the solver is not tuned for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, Mapping

from .errors import MaterialValidationError, ParameterDomainError

# Open admissible interval for Poisson's ratio.
NU_MIN = -0.45
NU_MAX = 0.49

# Relative tolerance for the (E, nu) <-> (lambda, mu) coupling check.
COUPLING_RTOL = 1e-12


def lame_from_elastic(young_modulus: float, poisson_ratio: float) -> tuple[float, float]:
    """Return (lambda, mu) for the given Young's modulus and Poisson's ratio.

    Raises ParameterDomainError if E <= 0 or nu is outside (-0.45, 0.49).
    """
    if not math.isfinite(young_modulus) or young_modulus <= 0.0:
        raise ParameterDomainError(
            f"Young's modulus must be finite and > 0, got {young_modulus!r}"
        )
    if not math.isfinite(poisson_ratio) or not (NU_MIN < poisson_ratio < NU_MAX):
        raise ParameterDomainError(
            f"Poisson's ratio must lie in the open interval ({NU_MIN}, {NU_MAX}), "
            f"got {poisson_ratio!r}"
        )
    lam = young_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio))
    mu = young_modulus / (2.0 * (1.0 + poisson_ratio))
    return lam, mu


def elastic_from_lame(lame_lambda: float, lame_mu: float) -> tuple[float, float]:
    """Invert ``lame_from_elastic``: return (E, nu) for the given Lame pair.

    Only defined for mu > 0 and lambda + mu != 0.
    """
    if lame_mu <= 0.0:
        raise ParameterDomainError(f"mu must be > 0 to invert, got {lame_mu!r}")
    denom = lame_lambda + lame_mu
    if denom == 0.0:
        raise ParameterDomainError("lambda + mu == 0 has no elastic preimage")
    young = lame_mu * (3.0 * lame_lambda + 2.0 * lame_mu) / denom
    nu = lame_lambda / (2.0 * denom)
    return young, nu


@dataclass(frozen=True)
class MaterialParams:
    """One part's material record.

    ``lame_lambda`` and ``lame_mu`` must equal the closed forms of
    (young_modulus, poisson_ratio); build instances through
    :meth:`from_elastic` unless you are deliberately constructing an
    invalid record for validation tests.
    """

    young_modulus: float
    poisson_ratio: float
    lame_lambda: float
    lame_mu: float
    viscosity: float = 0.0
    density: float = 1.0

    @classmethod
    def from_elastic(
        cls,
        young_modulus: float,
        poisson_ratio: float,
        viscosity: float = 0.0,
        density: float = 1.0,
    ) -> "MaterialParams":
        """Build a validated record, deriving the Lame fields."""
        lam, mu = lame_from_elastic(young_modulus, poisson_ratio)
        params = cls(
            young_modulus=float(young_modulus),
            poisson_ratio=float(poisson_ratio),
            lame_lambda=lam,
            lame_mu=mu,
            viscosity=float(viscosity),
            density=float(density),
        )
        diagnostics = validate_material(params)
        if diagnostics:
            raise MaterialValidationError(diagnostics)
        return params

    def with_elastic(self, young_modulus: float, poisson_ratio: float) -> "MaterialParams":
        """Return a copy with new (E, nu) and freshly derived Lame fields."""
        lam, mu = lame_from_elastic(young_modulus, poisson_ratio)
        return replace(
            self,
            young_modulus=float(young_modulus),
            poisson_ratio=float(poisson_ratio),
            lame_lambda=lam,
            lame_mu=mu,
        )


def validate_material(params: MaterialParams) -> list[str]:
    """Return a list of human-readable invariant violations (empty == valid).

    Checks every invariant independently so a bad record reports all of its
    problems in one pass: E > 0, nu in (-0.45, 0.49), viscosity >= 0,
    density > 0, and the Lame coupling within 1e-12 relative error.
    """
    problems: list[str] = []
    E = params.young_modulus
    nu = params.poisson_ratio
    if not (math.isfinite(E) and E > 0.0):
        problems.append(f"young_modulus must be finite and > 0, got {E!r}")
    if not (math.isfinite(nu) and NU_MIN < nu < NU_MAX):
        problems.append(
            f"poisson_ratio must lie in the open interval ({NU_MIN}, {NU_MAX}), got {nu!r}"
        )
    if not (math.isfinite(params.viscosity) and params.viscosity >= 0.0):
        problems.append(f"viscosity must be finite and >= 0, got {params.viscosity!r}")
    if not (math.isfinite(params.density) and params.density > 0.0):
        problems.append(f"density must be finite and > 0, got {params.density!r}")

    if not problems:
        lam_ref, mu_ref = lame_from_elastic(E, nu)
        # Relative error scaled by E so a legitimately tiny lambda (nu ~ 0)
        # does not turn the check into an absolute-zero comparison.
        scale_lam = max(abs(lam_ref), abs(E))
        scale_mu = max(abs(mu_ref), abs(E))
        if abs(params.lame_lambda - lam_ref) > COUPLING_RTOL * scale_lam:
            problems.append(
                f"lame_lambda={params.lame_lambda!r} is decoupled from (E, nu); "
                f"expected {lam_ref!r}"
            )
        if abs(params.lame_mu - mu_ref) > COUPLING_RTOL * scale_mu:
            problems.append(
                f"lame_mu={params.lame_mu!r} is decoupled from (E, nu); expected {mu_ref!r}"
            )
    return problems


@dataclass(frozen=True)
class PartMaterialMap:
    """Immutable mapping from integer part label to material record."""

    entries: Mapping[int, MaterialParams]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", dict(self.entries))

    @classmethod
    def empty(cls) -> "PartMaterialMap":
        return cls(entries={})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, part: int) -> bool:
        return part in self.entries

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.entries))

    def get(self, part: int) -> MaterialParams:
        try:
            return self.entries[part]
        except KeyError:
            known = sorted(self.entries)
            raise KeyError(f"no material bound to part {part}; bound parts: {known}") from None

    def labels(self) -> tuple[int, ...]:
        return tuple(sorted(self.entries))

    def field_arrays(self, parts) -> tuple:
        """Vectorized lookup: per-particle (lambda, mu, viscosity, density).

        ``parts`` is an integer array of part labels; every label must be
        bound.  Returns four float64 arrays aligned with ``parts``.
        """
        import numpy as np

        parts = np.asarray(parts)
        labels = self.labels()
        if len(labels) == 0:
            raise KeyError("material map is empty")
        missing = np.setdiff1d(np.unique(parts), np.asarray(labels))
        if missing.size:
            raise KeyError(
                f"no material bound to parts {missing.tolist()}; bound parts: {list(labels)}"
            )
        table = np.zeros((max(labels) + 1, 4))
        for label in labels:
            m = self.entries[label]
            table[label] = (m.lame_lambda, m.lame_mu, m.viscosity, m.density)
        rows = table[parts]
        return rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]


def assign_part_material(
    mapping: PartMaterialMap, part: int, params: MaterialParams
) -> PartMaterialMap:
    """Return a new map with ``part`` bound to ``params`` (replacing any old binding).

    The record is validated first; an invalid one raises
    MaterialValidationError carrying every violated invariant.
    """
    if part < 0 or int(part) != part:
        raise ParameterDomainError(f"part label must be a non-negative integer, got {part!r}")
    diagnostics = validate_material(params)
    if diagnostics:
        raise MaterialValidationError(diagnostics)
    entries = dict(mapping.entries)
    entries[int(part)] = params
    return PartMaterialMap(entries=entries)
