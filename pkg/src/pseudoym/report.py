"""Residual records shared by the verification suites."""

import json
from dataclasses import dataclass

import numpy as np

KEYS = ("identity_id", "fixture", "points", "seed", "max_abs_residual",
        "max_rel_residual", "tolerance", "pass")


def compare(lhs, rhs, floor=1.0):
    """Max absolute and relative deviation of two arrays.

    The relative residual divides by ``max(|rhs|, floor)`` pointwise, so
    identities whose right-hand side vanishes are judged absolutely.
    """
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    err = np.abs(lhs - rhs)
    if err.size == 0:
        return 0.0, 0.0
    scale = np.maximum(np.abs(rhs), floor)
    return float(np.max(err)), float(np.max(err / scale))


@dataclass
class Residual:
    identity_id: str
    fixture: str
    points: int
    seed: int
    max_abs_residual: float
    max_rel_residual: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.max_rel_residual <= self.tolerance)

    def as_dict(self):
        return {
            "identity_id": self.identity_id,
            "fixture": self.fixture,
            "points": int(self.points),
            "seed": int(self.seed),
            "max_abs_residual": float(self.max_abs_residual),
            "max_rel_residual": float(self.max_rel_residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }

    def to_json(self):
        return json.dumps(self.as_dict())


def record(identity_id, fixture, points, seed, lhs, rhs, tol, floor=1.0):
    a, r = compare(lhs, rhs, floor)
    return Residual(identity_id, fixture, points, seed, a, r, tol)


def scalar_record(identity_id, fixture, points, seed, abs_res, rel_res, tol):
    return Residual(identity_id, fixture, points, seed, float(abs_res),
                    float(rel_res), tol)


@dataclass
class Note:
    """Non-fatal observation (e.g. a reference value that does not check)."""

    identity_id: str
    fixture: str
    message: str
    max_abs_difference: float

    def to_json(self):
        return json.dumps({"note": self.message, "identity_id": self.identity_id,
                           "fixture": self.fixture,
                           "max_abs_difference": float(self.max_abs_difference)})
