"""Scalar nonlinearities f and their quotients g(s) = f(s)/s.

Every kind satisfies f(0) = 0, so the stochastic substep (which multiplies
each nodal value by exp(...)) preserves signs.  g is evaluated per branch,
with the s = 0 value set analytically to f'(0) instead of taking a 0/0 limit.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Nonlinearity", "Linear", "RegularizedSqrt", "HalfSqrt", "Zero", "from_config"]


def _vectorized(func):
    def wrapper(self, s):
        arr = np.asarray(s, dtype=float)
        out = func(self, np.atleast_1d(arr))
        return float(out[0]) if arr.ndim == 0 else out

    return wrapper


class Nonlinearity:
    """Base class; subclasses implement f, the raw quotient and f'(0).

    ``g_cap``, when set, clamps |g| (useful to keep the non-Lipschitz square
    root from overflowing the substep exponent; off by default).
    """

    name = "base"
    lipschitz = True

    def __init__(self, g_cap: float | None = None):
        if g_cap is not None and g_cap <= 0:
            raise ValueError("g_cap must be positive")
        self.g_cap = g_cap

    def _f(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _g(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @_vectorized
    def f(self, s):
        """f(s), vectorized over numpy arrays."""
        return self._f(s)

    @_vectorized
    def g(self, s):
        """g(s) = f(s)/s for s != 0 and f'(0) at s = 0, optionally clamped."""
        out = self._g(s)
        if self.g_cap is not None:
            out = np.clip(out, -self.g_cap, self.g_cap)
        return out

    def lipschitz_constant(self) -> float:
        """Global Lipschitz constant of f (sup of |f'|)."""
        raise NotImplementedError

    def config_items(self) -> dict:
        items = {"nonlinearity": self.name}
        if self.g_cap is not None:
            items["g_cap"] = self.g_cap
        return items


class Linear(Nonlinearity):
    """f(s) = lambda * s."""

    name = "linear"

    def __init__(self, lam: float, g_cap: float | None = None):
        super().__init__(g_cap)
        self.lam = float(lam)

    def _f(self, s):
        return self.lam * s

    def _g(self, s):
        return np.full_like(s, self.lam)

    def lipschitz_constant(self) -> float:
        return abs(self.lam)

    def config_items(self):
        return {**super().config_items(), "lambda": self.lam}


class Zero(Nonlinearity):
    """f identically zero; turns the scheme into pure heat flow."""

    name = "zero"

    def _f(self, s):
        return np.zeros_like(s)

    def _g(self, s):
        return np.zeros_like(s)

    def lipschitz_constant(self) -> float:
        return 0.0


class RegularizedSqrt(Nonlinearity):
    """C^1 globally Lipschitz approximation of the square root.

    Three branches: linear slope 1/sqrt(delta) for |s| <= delta/2, a cubic
    blend on delta/2 <= |s| <= delta, and sign(s)*sqrt(|s|) beyond delta.
    Both knots match values and one-sided derivatives.  The sup of |f'| sits
    inside the blend, at |s| = (2/3)*delta, and equals 7/(6*sqrt(delta));
    the boundary slopes are 1/sqrt(delta) and 1/(2*sqrt(delta)).
    """

    name = "reg_sqrt"

    def __init__(self, delta: float, g_cap: float | None = None):
        super().__init__(g_cap)
        if delta <= 0:
            raise ValueError(f"delta must be positive (got {delta})")
        self.delta = float(delta)

    def _f(self, s):
        d = self.delta
        sd = np.sqrt(d)
        a = np.abs(s)
        sign = np.sign(s)
        blend = (
            -(2.0 * sd / d**3) * s**3
            + sign * (4.0 / (d * sd)) * s**2
            - (3.0 / (2.0 * sd)) * s
            + sign * (sd / 2.0)
        )
        return np.where(a <= d / 2, s / sd, np.where(a <= d, blend, sign * np.sqrt(a)))

    def _g(self, s):
        d = self.delta
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = self._f(s) / s
        return np.where(s == 0.0, 1.0 / np.sqrt(d), quotient)

    def lipschitz_constant(self) -> float:
        return 7.0 / (6.0 * np.sqrt(self.delta))

    def config_items(self):
        return {**super().config_items(), "delta": self.delta}


class HalfSqrt(Nonlinearity):
    """f(s) = sqrt(max(0, s)); not Lipschitz, outside the convergence theory.

    g(s) = 1/sqrt(s) for s > 0 and 0 otherwise, singular near the origin.
    Values of g this large can overflow the substep exponent downstream; the
    scheme reports that as a run diagnostic rather than raising.
    """

    name = "half_sqrt"
    lipschitz = False

    def _f(self, s):
        return np.sqrt(np.maximum(s, 0.0))

    def _g(self, s):
        with np.errstate(divide="ignore"):
            inv = 1.0 / np.sqrt(np.maximum(s, 0.0))
        return np.where(s > 0.0, inv, 0.0)

    def lipschitz_constant(self) -> float:
        raise ValueError("half_sqrt is non-Lipschitz: |f'| is unbounded near 0")


def from_config(name: str, lam: float = 1.0, delta: float = 0.1, g_cap: float | None = None) -> Nonlinearity:
    """Build a nonlinearity from the flat config keys."""
    kinds = {
        "linear": lambda: Linear(lam, g_cap),
        "reg_sqrt": lambda: RegularizedSqrt(delta, g_cap),
        "half_sqrt": lambda: HalfSqrt(g_cap),
        "zero": lambda: Zero(g_cap),
    }
    if name not in kinds:
        raise ValueError(f"unknown nonlinearity {name!r}; expected one of {sorted(kinds)}")
    return kinds[name]()
