"""Invertible affine maps of the ambient space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AffineMap:
    """x -> linear @ x + translation, with invertible linear part."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=float)
        tr = np.asarray(self.translation, dtype=float)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "translation", tr)
        if lin.ndim != 2 or lin.shape[0] != lin.shape[1] or tr.shape != (lin.shape[0],):
            raise ValueError("linear part must be square, translation matching")
        if abs(np.linalg.det(lin)) <= 1e-14 * np.linalg.norm(lin) ** lin.shape[0]:
            raise ValueError("linear part must be invertible")

    @staticmethod
    def identity(dim: int) -> "AffineMap":
        return AffineMap(np.eye(dim), np.zeros(dim))

    @staticmethod
    def reflection(normal, offset: float, direction=None) -> "AffineMap":
        """The affine involution fixing the hyperplane {x : normal . x = offset}
        pointwise, reflecting along ``direction`` (defaults to ``normal``).
        Requires normal . direction != 0."""
        normal = np.asarray(normal, dtype=float)
        d = normal if direction is None else np.asarray(direction, dtype=float)
        nd = float(normal @ d)
        if abs(nd) <= 1e-14 * np.linalg.norm(normal) * np.linalg.norm(d):
            raise ValueError("reflection direction must be transversal to the plane")
        dim = normal.size
        lin = np.eye(dim) - 2.0 * np.outer(d, normal) / nd
        trans = 2.0 * offset * d / nd
        return AffineMap(lin, trans)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.translation

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: (self . other)(x) = self(other(x))."""
        return AffineMap(self.linear @ other.linear,
                         self.linear @ other.translation + self.translation)

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.translation)
