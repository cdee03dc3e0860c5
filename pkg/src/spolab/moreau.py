"""Proximal operators and Moreau envelopes for the loss/regularizer catalog.

Every scalar function here satisfies f(0) = 0 = min f.  Envelopes and
their derivatives are closed forms; the expressions are continuous
across branch boundaries, so no special-casing is needed there.  Each
variant also exposes its envelope (and related integrands) as piecewise
quadratics, which the expected-envelope module integrates against
Gaussians exactly.

Catalog names (config syntax): ``square``, ``abs``, ``huber(rho)``,
``l1``, ``ridge``, ``zero``, ``block_l2(t)``, ``cone(Dbar)``, ``sqrt_l2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import DomainError

_TAU_FLOOR = 1e-14

INF = math.inf

# A piece is (lo, hi, c0, c1, c2): x -> c0 + c1*x + c2*x^2 on (lo, hi].
Piece = Tuple[float, float, float, float, float]


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if tau <= 0.0:
        raise DomainError(f"envelope parameter must be > 0, got {tau}")
    return tau


class ScalarFn:
    """Base class for separable scalar losses/regularizers."""

    name = "scalar"

    def value(self, x):
        raise NotImplementedError

    def prox(self, x, tau):
        raise NotImplementedError

    def env(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        p = self.prox(x, tau)
        return (x - p) ** 2 / (2.0 * tau) + self.value(p)

    def env_dx(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        return (x - self.prox(x, tau)) / tau

    def env_dtau(self, x, tau):
        g = self.env_dx(x, tau)
        return -0.5 * g * g

    # piecewise-quadratic views used by the expected-envelope module
    def pieces_value(self) -> List[Piece]:
        raise NotImplementedError

    def pieces_env(self, tau: float) -> List[Piece]:
        raise NotImplementedError

    def pieces_grad(self, tau: float) -> List[Piece]:
        raise NotImplementedError

    def pieces_grad_sq(self, tau: float) -> List[Piece]:
        return [
            _sq_piece(p) for p in self.pieces_grad(tau)
        ]

    def pieces_x_grad(self, tau: float) -> List[Piece]:
        return [
            _x_times_piece(p) for p in self.pieces_grad(tau)
        ]

    def __repr__(self):
        return self.name


def _sq_piece(p: Piece) -> Piece:
    lo, hi, c0, c1, c2 = p
    if c2 != 0.0:
        raise ValueError("cannot square a quadratic piece exactly")
    return (lo, hi, c0 * c0, 2.0 * c0 * c1, c1 * c1)


def _x_times_piece(p: Piece) -> Piece:
    lo, hi, c0, c1, c2 = p
    if c2 != 0.0:
        raise ValueError("cannot multiply a quadratic piece by x exactly")
    return (lo, hi, 0.0, c0, c1)


class Square(ScalarFn):
    """f(x) = x^2 / 2 (least-squares loss; ridge regularizer)."""

    name = "square"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x * x

    def prox(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        if tau < _TAU_FLOOR:
            return x
        return x / (1.0 + tau)

    def env(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        return x * x / (2.0 * (1.0 + tau))

    def env_dx(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        return x / (1.0 + tau)

    def pieces_value(self):
        return [(-INF, INF, 0.0, 0.0, 0.5)]

    def pieces_env(self, tau):
        return [(-INF, INF, 0.0, 0.0, 0.5 / (1.0 + tau))]

    def pieces_grad(self, tau):
        return [(-INF, INF, 0.0, 1.0 / (1.0 + tau), 0.0)]


class Abs(ScalarFn):
    """f(x) = |x| (absolute-deviation loss; l1 regularizer)."""

    name = "abs"

    def value(self, x):
        return np.abs(np.asarray(x, dtype=float))

    def prox(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        if tau < _TAU_FLOOR:
            return x
        return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)

    def env(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return np.where(ax <= tau, x * x / (2.0 * tau), ax - 0.5 * tau)

    def env_dx(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        return np.clip(x / tau, -1.0, 1.0)

    def pieces_value(self):
        return [(-INF, 0.0, 0.0, -1.0, 0.0), (0.0, INF, 0.0, 1.0, 0.0)]

    def pieces_env(self, tau):
        return [
            (-INF, -tau, -0.5 * tau, -1.0, 0.0),
            (-tau, tau, 0.0, 0.0, 0.5 / tau),
            (tau, INF, -0.5 * tau, 1.0, 0.0),
        ]

    def pieces_grad(self, tau):
        return [
            (-INF, -tau, -1.0, 0.0, 0.0),
            (-tau, tau, 0.0, 1.0 / tau, 0.0),
            (tau, INF, 1.0, 0.0, 0.0),
        ]


class Huber(ScalarFn):
    """Huber loss: quadratic within [-rho, rho], linear outside."""

    name = "huber"

    def __init__(self, rho: float):
        rho = float(rho)
        if rho <= 0:
            raise DomainError(f"huber parameter must be > 0, got {rho}")
        self.rho = rho

    def value(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        r = self.rho
        return np.where(ax <= r, 0.5 * x * x, r * ax - 0.5 * r * r)

    def prox(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        if tau < _TAU_FLOOR:
            return x
        r = self.rho
        b = r * (1.0 + tau)
        return np.where(np.abs(x) <= b, x / (1.0 + tau), x - tau * r * np.sign(x))

    def env(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        r = self.rho
        b = r * (1.0 + tau)
        return np.where(
            np.abs(x) <= b,
            x * x / (2.0 * (1.0 + tau)),
            r * np.abs(x) - 0.5 * r * r * (1.0 + tau),
        )

    def env_dx(self, x, tau):
        tau = _check_tau(tau)
        x = np.asarray(x, dtype=float)
        r = self.rho
        return np.clip(x / (1.0 + tau), -r, r)

    def pieces_value(self):
        r = self.rho
        return [
            (-INF, -r, -0.5 * r * r, -r, 0.0),
            (-r, r, 0.0, 0.0, 0.5),
            (r, INF, -0.5 * r * r, r, 0.0),
        ]

    def pieces_env(self, tau):
        r = self.rho
        b = r * (1.0 + tau)
        k = -0.5 * r * r * (1.0 + tau)
        return [
            (-INF, -b, k, -r, 0.0),
            (-b, b, 0.0, 0.0, 0.5 / (1.0 + tau)),
            (b, INF, k, r, 0.0),
        ]

    def pieces_grad(self, tau):
        r = self.rho
        b = r * (1.0 + tau)
        return [
            (-INF, -b, -r, 0.0, 0.0),
            (-b, b, 0.0, 1.0 / (1.0 + tau), 0.0),
            (b, INF, r, 0.0, 0.0),
        ]

    def __repr__(self):
        return f"huber({self.rho:g})"


class ZeroFn(ScalarFn):
    """f(x) = 0; its prox is the identity and its envelope vanishes."""

    name = "zero"

    def value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def prox(self, x, tau):
        _check_tau(tau)
        return np.asarray(x, dtype=float)

    def env(self, x, tau):
        _check_tau(tau)
        return np.zeros_like(np.asarray(x, dtype=float))

    def env_dx(self, x, tau):
        _check_tau(tau)
        return np.zeros_like(np.asarray(x, dtype=float))

    def pieces_value(self):
        return [(-INF, INF, 0.0, 0.0, 0.0)]

    def pieces_env(self, tau):
        return self.pieces_value()

    def pieces_grad(self, tau):
        return self.pieces_value()


@dataclass(frozen=True)
class BlockL2:
    """Block l2-norm regularizer: sum of per-block Euclidean norms.

    Its Moreau envelope at a point depends only on the block radius, so
    the scalar reduction below carries all the information the expected
    envelope needs.
    """

    block_len: int

    def __post_init__(self):
        if self.block_len < 1:
            raise DomainError("block length must be >= 1")

    name = "block_l2"

    def value_vec(self, x: np.ndarray) -> float:
        t = self.block_len
        if x.size % t:
            raise DomainError("vector length is not a multiple of the block length")
        return float(np.linalg.norm(x.reshape(-1, t), axis=1).sum())

    def prox_vec(self, x: np.ndarray, tau: float) -> np.ndarray:
        tau = _check_tau(tau)
        t = self.block_len
        blocks = x.reshape(-1, t)
        norms = np.linalg.norm(blocks, axis=1)
        scale = np.zeros_like(norms)
        nz = norms > 0
        scale[nz] = np.maximum(1.0 - tau / norms[nz], 0.0)
        return (blocks * scale[:, None]).reshape(x.shape)

    def __repr__(self):
        return f"block_l2({self.block_len})"


def block_env(t: int, radius: float, tau: float) -> float:
    """Envelope of the block l2-norm as a function of the block radius."""
    tau = _check_tau(tau)
    r = float(radius)
    if r < 0:
        raise DomainError("radius must be >= 0")
    if int(t) < 1:
        raise DomainError("block length must be >= 1")
    if r <= tau:
        return r * r / (2.0 * tau)
    return r - 0.5 * tau


@dataclass(frozen=True)
class ConeReg:
    """Cone-constraint stand-in summarized by its statistical-dimension ratio."""

    stat_dim_ratio: float

    def __post_init__(self):
        if not 0.0 < self.stat_dim_ratio < 1.0:
            raise DomainError("statistical-dimension ratio must lie in (0, 1)")

    name = "cone"

    def __repr__(self):
        return f"cone({self.stat_dim_ratio:g})"


@dataclass(frozen=True)
class SqrtL2:
    """Non-separable loss sqrt(n) * ||v||_2, handled at the expected-envelope level."""

    name = "sqrt_l2"

    def value_vec(self, v: np.ndarray) -> float:
        return math.sqrt(v.size) * float(np.linalg.norm(v))

    def prox_vec(self, v: np.ndarray, tau: float) -> np.ndarray:
        tau = _check_tau(tau)
        thr = tau * math.sqrt(v.size)
        nrm = float(np.linalg.norm(v))
        if nrm <= thr:
            return np.zeros_like(v)
        return (1.0 - thr / nrm) * v

    def __repr__(self):
        return "sqrt_l2"


# ---------------------------------------------------------------------------
# Conjugate envelopes (independent closed forms for the Moreau identity).


def env_conj_abs(x, tau):
    """Envelope of the conjugate of |.| (indicator of [-1, 1])."""
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=float)
    d = np.maximum(np.abs(x) - 1.0, 0.0)
    return d * d / (2.0 * tau)


def env_conj_half_square(x, tau):
    """Envelope of the conjugate of x^2/2 (which is again x^2/2)."""
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=float)
    return x * x / (2.0 * (1.0 + tau))


def env_conj_via_identity(fn: ScalarFn, y, s):
    """Conjugate envelope derived from the conjugation identity.

    env_{f*}(y; s) = x^2/(2 tau) - env_f(x; tau) with tau = 1/s, x = y/s.
    Used for Huber, whose conjugate has no independent closed form here.
    """
    s = _check_tau(s)
    tau = 1.0 / s
    x = np.asarray(y, dtype=float) / s
    return x * x / (2.0 * tau) - fn.env(x, tau)


# ---------------------------------------------------------------------------
# Catalog parsing

_CALL_RE = re.compile(r"^([a-z0-9_]+)\(\s*([^)]*?)\s*\)$")

LOSS_NAMES = ("square", "abs", "huber", "sqrt_l2")
REG_NAMES = ("l1", "ridge", "zero", "block_l2", "cone")


def _parse_call(text: str):
    s = re.sub(r"\s+", "", str(text)).lower()
    m = _CALL_RE.match(s)
    if m:
        args = [a for a in m.group(2).split(",") if a] if m.group(2) else []
        return m.group(1), args
    return s, []


def parse_loss(text: str):
    """Parse a loss catalog name: square | abs | huber(rho) | sqrt_l2."""
    name, args = _parse_call(text)
    if name == "square" and not args:
        return Square()
    if name == "abs" and not args:
        return Abs()
    if name == "huber":
        if len(args) != 1:
            raise ValueError("huber takes exactly one parameter, e.g. huber(1.0)")
        return Huber(float(args[0]))
    if name == "sqrt_l2" and not args:
        return SqrtL2()
    raise ValueError(f"unknown loss {text!r} (expected one of {LOSS_NAMES})")


def parse_reg(text: str):
    """Parse a regularizer name: l1 | ridge | zero | block_l2(t) | cone(Dbar)."""
    name, args = _parse_call(text)
    if name == "l1" and not args:
        return Abs()
    if name == "ridge" and not args:
        return Square()
    if name == "zero" and not args:
        return ZeroFn()
    if name == "block_l2":
        if len(args) != 1:
            raise ValueError("block_l2 takes exactly one parameter, e.g. block_l2(3)")
        return BlockL2(int(args[0]))
    if name == "cone":
        if len(args) != 1:
            raise ValueError("cone takes exactly one parameter, e.g. cone(0.5)")
        return ConeReg(float(args[0]))
    raise ValueError(f"unknown regularizer {text!r} (expected one of {REG_NAMES})")
