"""Named test configurations: a domain, a mesher and a material field."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from .assembly import MaterialField
from .mesh import Mesh, graded_points, mesh_domain, rectangle_mesh

# heat-capacity contrast of the two-material cases
CONTRAST = 1000.0
_UNIT_KAPPA = {0: 1.0, 1: 1.0}


@dataclass(frozen=True)
class Case:
    name: str
    domain: geo.DomainSpec
    material: MaterialField = field(default_factory=MaterialField.uniform)
    mesher: Callable[[float | None], Mesh] | None = field(default=None, repr=False, compare=False)
    default_h: float | None = None
    # the body a symmetry cell was cut from (for in-radius based bounds)
    full_body: Callable[[], geo.DomainSpec] | None = field(default=None, repr=False, compare=False)

    def mesh(self, h: float | None = None) -> Mesh:
        h = self.default_h if h is None else h
        if self.mesher is not None:
            return self.mesher(h)
        return mesh_domain(self.domain, h)

    def body(self) -> geo.DomainSpec:
        return self.full_body() if self.full_body is not None else self.domain


def _two_region_rect(width: float, height: float, x_breaks, y_breaks, region_of) -> Callable[[float | None], Mesh]:
    def build(h: float | None) -> Mesh:
        h = h or min(width, height) / 4.0
        return rectangle_mesh(graded_points(x_breaks, h), graded_points(y_breaks, h), region_of=region_of)
    return build


def recthi() -> Case:
    """1/4 x 1 rectangle split at y = 1/2; heavy material on top."""
    d = geo.rectangle(0.25, 1.0)
    mesher = _two_region_rect(0.25, 1.0, [0.0, 0.25], [0.0, 0.5, 1.0], lambda x, y: 0 if y > 0.5 else 1)
    return Case("recthi", d, MaterialField({0: CONTRAST, 1: 1.0}, _UNIT_KAPPA), mesher, 1.0 / 32)


def concentric_squares(name: str, inner_fraction: float, heavy_inside: bool) -> Case:
    """Unit square with a centred inner square of area ``inner_fraction``.

    Region 0 is the inner square, region 1 the border film.
    """
    if not 0 < inner_fraction < 1:
        raise ValueError("inner fraction must lie in (0, 1)")
    a = 0.5 * (1.0 - math.sqrt(inner_fraction))
    breaks = [0.0, a, 1.0 - a, 1.0]

    def region_of(x, y):
        return 0 if a < x < 1.0 - a and a < y < 1.0 - a else 1

    sig = {0: CONTRAST, 1: 1.0} if heavy_inside else {0: 1.0, 1: CONTRAST}
    mesher = _two_region_rect(1.0, 1.0, breaks, breaks, region_of)
    return Case(name, geo.rectangle(1.0, 1.0), MaterialField(sig, _UNIT_KAPPA), mesher, 1.0 / 32)


def gear_case(n: int, q: float) -> Case:
    d = geo.gear_halftooth(n, q)
    return Case(f"gear-{q:g}-{n}", d, full_body=lambda: geo.gear(n, q))


def _builtins() -> dict[str, Callable[[], Case]]:
    return {
        "rect": lambda: Case("rect", geo.rectangle(0.25, 0.99)),
        "square": lambda: Case("square", geo.rectangle(1.0, 1.0)),
        "sart1": lambda: Case("sart1", geo.right_triangle(0.25)),
        "sart2": lambda: Case("sart2", geo.right_triangle(1.0 / 16.0)),
        "equilateral": lambda: Case("equilateral", geo.equilateral_triangle()),
        "disk": lambda: Case("disk", geo.regular_polygon(256)),
        "recthi": recthi,
        "evfcs": lambda: concentric_squares("evfcs", 0.5, True),
        "dvfcslf": lambda: concentric_squares("dvfcslf", 20.0 / 21.0, True),
        "dvfcshf": lambda: concentric_squares("dvfcshf", 20.0 / 21.0, False),
    }


BUILTIN_NAMES = tuple(_builtins()) + ("gear-<q>-<n>",)


def builtin(name: str) -> Case:
    """Look up a named case; gears are spelled ``gear-<q>-<n>``."""
    if name.startswith("gear-"):
        try:
            _, q, n = name.split("-")
            return gear_case(int(n), float(q))
        except ValueError as exc:
            raise KeyError(f"bad gear name {name!r}; expected gear-<q>-<n>") from exc
    table = _builtins()
    if name not in table:
        raise KeyError(f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    return table[name]()


def sigma_table(case: Case, mesh: Mesh) -> dict[int, float]:
    """Normalized per-region heat capacity."""
    return dict(case.material.normalize(mesh).sigma_by_region)


__all__ = ["Case", "builtin", "BUILTIN_NAMES", "recthi", "concentric_squares", "gear_case", "sigma_table"]
