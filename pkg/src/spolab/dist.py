"""Scalar mixture distributions for noise and signal marginals.

A :class:`ScalarDist` is a finite mixture of point masses, Gaussians and
Cauchy atoms.  It supports reproducible sampling (counter-based streams)
and numerical expectations of the form ``E[f(c*G + Z)]`` with ``G`` a
standard normal independent of ``Z``, which is the shape of every
expectation needed by the envelope machinery.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, NonIntegrable

GH_ORDER = 81
CAUCHY_ORDER = 2001

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class PointMass:
    value: float


@dataclass(frozen=True)
class Gaussian:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise DomainError(f"Gaussian variance must be >= 0, got {self.variance}")


@dataclass(frozen=True)
class Cauchy:
    location: float
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError(f"Cauchy scale must be > 0, got {self.scale}")


Atom = Union[PointMass, Gaussian, Cauchy]


@dataclass(frozen=True)
class ScalarDist:
    """Finite mixture of scalar atoms with normalized weights.

    Zero-variance Gaussian components are normalized to point masses at
    construction so downstream code only ever sees three atom kinds.
    """

    components: tuple

    def __post_init__(self):
        comps = []
        total = 0.0
        for weight, atom in self.components:
            w = float(weight)
            if w < 0:
                raise DomainError(f"mixture weight must be >= 0, got {w}")
            total += w
            if isinstance(atom, Gaussian) and atom.variance == 0.0:
                atom = PointMass(atom.mean)
            comps.append((w, atom))
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise DomainError(f"mixture weights must sum to 1, got {total!r}")
        object.__setattr__(self, "components", tuple(comps))

    @property
    def has_cauchy(self) -> bool:
        return any(isinstance(a, Cauchy) for _, a in self.components)

    def mean(self) -> float:
        """Mixture mean; NaN when a Cauchy atom makes it undefined."""
        if self.has_cauchy:
            return math.nan
        m = 0.0
        for w, a in self.components:
            m += w * (a.value if isinstance(a, PointMass) else a.mean)
        return m

    def second_moment(self) -> float:
        """E[Z^2]; ``inf`` when a Cauchy atom is present."""
        if self.has_cauchy:
            return math.inf
        s = 0.0
        for w, a in self.components:
            if isinstance(a, PointMass):
                s += w * a.value**2
            else:
                s += w * (a.variance + a.mean**2)
        return s

    def variance(self) -> float:
        if self.has_cauchy:
            return math.inf
        m = self.mean()
        return self.second_moment() - m * m


def point_mass(value: float) -> ScalarDist:
    return ScalarDist(((1.0, PointMass(float(value))),))


def normal(mean: float, variance: float) -> ScalarDist:
    return ScalarDist(((1.0, Gaussian(float(mean), float(variance))),))


def cauchy(location: float, scale: float) -> ScalarDist:
    return ScalarDist(((1.0, Cauchy(float(location), float(scale))),))


def mix(*pairs) -> ScalarDist:
    """Build a mixture from (weight, ScalarDist-or-Atom) pairs."""
    comps = []
    for w, item in pairs:
        if isinstance(item, ScalarDist):
            for wi, atom in item.components:
                comps.append((w * wi, atom))
        else:
            comps.append((w, item))
    return ScalarDist(tuple(comps))


@dataclass(frozen=True)
class BlockSignalDist:
    """Block-sparse signal law: each length-t block is zero with
    probability ``zero_prob``, otherwise its entries are iid centered
    Gaussians with the given per-coordinate variance."""

    block_len: int
    zero_prob: float
    active_variance: float = 1.0

    def __post_init__(self):
        if self.block_len < 1:
            raise DomainError("block_len must be >= 1")
        if not 0.0 <= self.zero_prob <= 1.0:
            raise DomainError("zero_prob must lie in [0, 1]")
        if self.active_variance < 0:
            raise DomainError("active variance must be >= 0")

    def second_moment(self) -> float:
        return (1.0 - self.zero_prob) * self.active_variance


# ---------------------------------------------------------------------------
# Reproducible streams


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, key...) for parallel trials."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample(dist: ScalarDist, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` iid values: pick a component by weight, then sample it."""
    if count < 0:
        raise DomainError("count must be >= 0")
    weights = np.array([w for w, _ in dist.components])
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(count), side="right")
    out = np.empty(count)
    for j, (_, atom) in enumerate(dist.components):
        sel = idx == j
        k = int(sel.sum())
        if k == 0:
            continue
        if isinstance(atom, PointMass):
            out[sel] = atom.value
        elif isinstance(atom, Gaussian):
            out[sel] = atom.mean + math.sqrt(atom.variance) * rng.standard_normal(k)
        else:
            out[sel] = atom.location + atom.scale * rng.standard_cauchy(k)
    return out


def sample_block_signal(dist: BlockSignalDist, rng: np.random.Generator, n: int) -> np.ndarray:
    t = dist.block_len
    if n % t != 0:
        raise DomainError(f"signal length {n} is not a multiple of block length {t}")
    b = n // t
    active = rng.random(b) >= dist.zero_prob
    x = np.zeros(n)
    k = int(active.sum())
    if k:
        vals = math.sqrt(dist.active_variance) * rng.standard_normal((k, t))
        x = x.reshape(b, t)
        x[active] = vals
        x = x.reshape(n)
    return x


# ---------------------------------------------------------------------------
# Quadrature rules


@dataclass(frozen=True)
class QuadRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise DomainError("nodes and weights must have equal length")
        if np.any(np.asarray(self.weights) < 0):
            raise DomainError("quadrature weights must be nonnegative")


_GH_CACHE: dict = {}
_GL_CACHE: dict = {}


def gauss_hermite(order: int = GH_ORDER) -> QuadRule:
    """Probabilists' Gauss-Hermite rule: weights sum to 1, E over N(0,1)."""
    if order not in _GH_CACHE:
        x, w = np.polynomial.hermite_e.hermegauss(order)
        w = w / math.sqrt(2.0 * math.pi)
        _GH_CACHE[order] = QuadRule(x, w, "gauss-hermite")
    return _GH_CACHE[order]


def cauchy_rule(order: int = CAUCHY_ORDER) -> QuadRule:
    """Tail-mapped rule on u in (-pi/2, pi/2); z = loc + scale*tan(u).

    With that substitution the Cauchy law pulls back to the uniform
    measure du/pi, so Gauss-Legendre nodes on the u-interval integrate
    any Cauchy expectation.  Weights sum to 1.  The central node of an
    odd-order rule sits exactly on the distribution center; it is split
    symmetrically so integrands defined almost everywhere (e.g. sign)
    are sampled off their discontinuity without biasing odd parts.
    """
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        u = 0.5 * math.pi * x
        w = w * (0.5 * math.pi) / math.pi
        nodes = np.tan(u)
        center = nodes == 0.0
        if center.any():
            keep = ~center
            w0 = w[center].sum()
            nodes = np.concatenate([nodes[keep], [-1e-8, 1e-8]])
            w = np.concatenate([w[keep], [0.5 * w0, 0.5 * w0]])
            order_ix = np.argsort(nodes)
            nodes, w = nodes[order_ix], w[order_ix]
        _GL_CACHE[order] = QuadRule(nodes, w, "tail-mapped")
    return _GL_CACHE[order]


def _gaussian_fold(fn, mean: float, std: float, order: int) -> float:
    """E[fn(X)] for X ~ N(mean, std^2), exact for std == 0."""
    if std == 0.0:
        return float(fn(np.asarray([mean]))[0])
    rule = gauss_hermite(order)
    return float(np.dot(rule.weights, fn(mean + std * rule.nodes)))


def _probe_growth(fn) -> None:
    """Reject integrands with super-linear growth (Cauchy tails diverge)."""
    for sign in (1.0, -1.0):
        lo = abs(float(fn(np.asarray([sign * 1e6]))[0]))
        hi = abs(float(fn(np.asarray([sign * 1e8]))[0]))
        if hi > 300.0 * max(lo, 1e-300) and hi > 1e3:
            raise NonIntegrable(
                "integrand grows faster than linearly; expectation against a "
                "Cauchy component does not exist"
            )


def expectation(
    dist: ScalarDist,
    c: float,
    integrand: Callable[[np.ndarray], np.ndarray],
    *,
    gh_order: int = GH_ORDER,
    cauchy_order: int = CAUCHY_ORDER,
) -> float:
    """E over G ~ N(0,1), Z ~ dist of ``integrand(c*G + Z)``.

    Point-mass atoms are enumerated exactly, Gaussian atoms are folded
    with ``c*G`` into a single Gaussian, and Cauchy atoms use the
    tail-mapped rule with a nested Gauss-Hermite pass when ``c != 0``.
    """
    c = float(c)
    fn = lambda x: np.asarray(integrand(np.asarray(x, dtype=float)), dtype=float)
    if dist.has_cauchy:
        _probe_growth(fn)
    total = 0.0
    for w, atom in dist.components:
        if w == 0.0:
            continue
        if isinstance(atom, PointMass):
            total += w * _gaussian_fold(fn, atom.value, abs(c), gh_order)
        elif isinstance(atom, Gaussian):
            std = math.hypot(c, math.sqrt(atom.variance))
            total += w * _gaussian_fold(fn, atom.mean, std, gh_order)
        else:
            rule = cauchy_rule(cauchy_order)
            z = atom.location + atom.scale * rule.nodes
            if c == 0.0:
                vals = fn(z)
            else:
                gh = gauss_hermite(gh_order)
                grid = c * gh.nodes[None, :] + z[:, None]
                vals = fn(grid) @ gh.weights
            total += w * float(np.dot(rule.weights, vals))
    return total


# ---------------------------------------------------------------------------
# Distribution literals

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_ATOM_RE = re.compile(
    rf"^(delta|normal|cauchy)\(\s*({_NUM})\s*(?:,\s*({_NUM})\s*)?\)$"
)


def _parse_atom(text: str):
    m = _ATOM_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse distribution atom {text!r}")
    kind, a, b = m.group(1), m.group(2), m.group(3)
    if kind == "delta":
        if b is not None:
            raise ValueError("delta() takes exactly one argument")
        return PointMass(float(a))
    if b is None:
        raise ValueError(f"{kind}() takes two arguments")
    if kind == "normal":
        return Gaussian(float(a), float(b))
    return Cauchy(float(a), float(b))


def _split_top_level(text: str) -> list:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def parse_dist(text: str) -> ScalarDist:
    """Parse a distribution literal.

    Grammar (case-insensitive, whitespace-tolerant)::

        mix(0.9*delta(0), 0.1*normal(0, 10))
        normal(mean, variance) | cauchy(location, scale) | delta(value)
    """
    s = re.sub(r"\s+", "", str(text)).lower()
    if not s:
        raise ValueError("empty distribution literal")
    if s.startswith("mix(") and s.endswith(")"):
        comps = []
        for part in _split_top_level(s[4:-1]):
            if "*" not in part:
                raise ValueError(f"mixture term {part!r} must look like weight*atom")
            w_txt, atom_txt = part.split("*", 1)
            comps.append((float(w_txt), _parse_atom(atom_txt)))
        return ScalarDist(tuple(comps))
    return ScalarDist(((1.0, _parse_atom(s)),))


def format_dist(dist: ScalarDist) -> str:
    """Inverse of :func:`parse_dist` (canonical form)."""
    terms = []
    for w, a in dist.components:
        if isinstance(a, PointMass):
            atom = f"delta({a.value:g})"
        elif isinstance(a, Gaussian):
            atom = f"normal({a.mean:g},{a.variance:g})"
        else:
            atom = f"cauchy({a.location:g},{a.scale:g})"
        terms.append((w, atom))
    if len(terms) == 1 and terms[0][0] == 1.0:
        return terms[0][1]
    return "mix(" + ",".join(f"{w:g}*{atom}" for w, atom in terms) + ")"
