"""Seeded synthetic ensembles with known structure.

All randomness comes from :class:`CounterRNG`, a counter-based generator
built on the SplitMix64 finalizer, so the data can be reproduced bit for bit
in any language with 64-bit unsigned arithmetic:

    z   = seed + (i + 1) * 0x9E3779B97F4A7C15          (mod 2**64)
    z   = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9         (mod 2**64)
    z   = (z ^ (z >> 27)) * 0x94D049BB133111EB         (mod 2**64)
    x_i = z ^ (z >> 31)

``i`` is the stream counter.  Uniforms are ``(x_i >> 11) * 2**-53`` and
standard normals come from Box-Muller on consecutive pairs
``(u_a, u_b)``:  ``sqrt(-2 ln(1 - u_a)) * cos(2 pi u_b)`` followed by the
matching ``sin`` value.  Independent sub-streams use the seed
``mix(seed ^ mix(tag))`` where ``mix`` is the finalizer above applied to a
single word and ``tag`` a small integer fixed per use.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .types import TRANSIENT, Ensemble, HorizonSpec, STPError

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
MASK64 = (1 << 64) - 1

RANK_LIMITED = "rank_limited"
TRAVELING_WAVE = "traveling_wave"
LINEAR_MAP = "linear_map"
DECAYING_TRANSIENT = "decaying_transient"
KINDS = (RANK_LIMITED, TRAVELING_WAVE, LINEAR_MAP, DECAYING_TRANSIENT)


class GeneratorError(STPError):
    pass


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def mix64(x: int) -> int:
    return int(_mix(np.array([x & MASK64], dtype=np.uint64))[0])


class CounterRNG:
    """SplitMix64 stream; see the module docstring for the exact recurrence."""

    def __init__(self, seed: int, tag: int = 0):
        seed &= MASK64
        self.seed = mix64(seed ^ mix64(tag)) if tag else seed
        self.counter = 0

    def raw(self, count: int) -> np.ndarray:
        i = np.arange(self.counter + 1, self.counter + count + 1, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + i * GOLDEN)

    def uniform(self, count: int) -> np.ndarray:
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        rad = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        ang = 2.0 * np.pi * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = rad * np.cos(ang)
        out[:, 1] = rad * np.sin(ang)
        return out.reshape(-1)[:count]


def orthonormalize(a: np.ndarray) -> np.ndarray:
    """Orthonormalize columns left to right (modified projection sweeps, two passes)."""
    q = np.array(a, dtype=np.float64, copy=True)
    for j in range(q.shape[1]):
        for _ in range(2):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        norm = np.linalg.norm(q[:, j])
        if norm == 0:
            raise GeneratorError("degenerate column during orthonormalization")
        q[:, j] /= norm
    return q


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters for one synthetic data set.

    Only the fields relevant to ``kind`` are used.  For ``traveling_wave``
    the output is a stationary series of ``length`` snapshots instead of an
    ensemble, so ``k``, ``n`` and ``m`` are ignored.
    """

    kind: str
    k: int = 50
    n: int = 10
    m: int = 10
    p: int = 8
    seed: int = 0
    # rank_limited
    rank: int = 5
    # traveling_wave
    length: int = 4000
    waves: int = 2
    transit_time: float = 32.0
    noise: float = 0.0
    coherence_time: Optional[float] = None
    # linear_map
    map: str = "random"
    map_scale: float = 1.0
    # decaying_transient
    perturbation: float = 0.2
    n_angle: int = 8
    decay: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeneratorError(f"unknown generator kind {self.kind!r}")
        for name in ("k", "n", "m", "p", "length", "waves"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise GeneratorError(f"{name} must be a positive integer, got {v!r}")
        if not 0 <= self.seed <= MASK64:
            raise GeneratorError("seed must be an unsigned 64-bit integer")
        if self.noise < 0 or self.perturbation < 0:
            raise GeneratorError("noise and perturbation amplitudes must be >= 0")
        if self.coherence_time is not None and self.coherence_time <= 0:
            raise GeneratorError("coherence_time must be positive")

    @property
    def horizon(self) -> HorizonSpec:
        return HorizonSpec(self.n, self.m, self.p)


def gen_rank_limited(spec: GeneratorSpec):
    """Episodes ``sum_s c_js psi_s`` over ``rank`` orthonormal space-time vectors.

    Returns ``(ensemble, basis)`` with ``basis`` of shape ``((n+m)*p, rank)``.
    """
    h = spec.horizon
    if int(spec.rank) != spec.rank or not 1 <= spec.rank <= min(spec.k, h.size):
        raise GeneratorError(
            f"rank must lie in 1..min(k, (n+m)*p) = {min(spec.k, h.size)}, got {spec.rank}")
    basis = orthonormalize(CounterRNG(spec.seed, 1).normal(h.size * spec.rank)
                         .reshape(h.size, spec.rank))
    coeffs = CounterRNG(spec.seed, 2).normal(spec.k * spec.rank).reshape(spec.k, spec.rank)
    return Ensemble(coeffs @ basis.T, h, kind=TRANSIENT), basis


def rank_limited_episode(basis: np.ndarray, seed: int, count: int = 1) -> np.ndarray:
    """Fresh episodes drawn from the same basis (rows), for out-of-sample checks."""
    c = CounterRNG(seed, 3).normal(count * basis.shape[1]).reshape(count, basis.shape[1])
    return c @ basis.T


def wave_parameters(spec: GeneratorSpec):
    """Wavenumbers, angular frequencies and amplitudes of each wave component.

    The grid covers one periodic domain of length ``2 pi``.  Wave ``w``
    (0-based) has wavenumber ``w+1`` and travels at speed
    ``2 pi / transit_time``, so its period is ``transit_time / (w+1)``.
    """
    w = np.arange(1, spec.waves + 1, dtype=np.float64)
    speed = 2.0 * np.pi / spec.transit_time
    return w, w * speed, 1.0 / w


def gen_traveling_wave(spec: GeneratorSpec) -> np.ndarray:
    """Stationary ``(length, p)`` series of waves on a periodic 1-D grid.

    ``u(x,t) = sum_w Im(z_w(t) exp(i (kappa_w x - omega_w t))) + noise * eps``.
    With ``coherence_time`` unset, ``z_w = A_w exp(i theta_w)`` is constant and
    the field is ``sum_w A_w sin(kappa_w x - omega_w t + theta_w)``.  Otherwise
    each ``z_w`` follows a complex AR(1) process with correlation
    ``exp(-1/coherence_time)`` per step and stationary variance ``A_w**2``, so
    forecasts lose skill over roughly ``coherence_time`` steps.
    """
    kappa, omega, amp = wave_parameters(spec)
    T, p = spec.length, spec.p
    x = 2.0 * np.pi * np.arange(p) / p
    t = np.arange(T, dtype=np.float64)
    phase_rng = CounterRNG(spec.seed, 4)
    theta = 2.0 * np.pi * phase_rng.uniform(spec.waves)
    if spec.coherence_time is None:
        z = np.broadcast_to(amp * np.exp(1j * theta), (T, spec.waves))
    else:
        rho = np.exp(-1.0 / spec.coherence_time)
        xi = CounterRNG(spec.seed, 5).normal(2 * T * spec.waves).reshape(T, spec.waves, 2)
        xi = (xi[..., 0] + 1j * xi[..., 1]) / np.sqrt(2.0)
        z = np.empty((T, spec.waves), dtype=np.complex128)
        z[0] = amp * xi[0]
        drive = np.sqrt(1.0 - rho * rho) * amp
        for i in range(1, T):
            z[i] = rho * z[i - 1] + drive * xi[i]
    carrier = np.exp(1j * (kappa[None, None, :] * x[None, :, None]
                           - omega[None, None, :] * t[:, None, None]))
    u = np.imag(z[:, None, :] * carrier).sum(axis=2)
    if spec.noise > 0:
        u = u + spec.noise * CounterRNG(spec.seed, 6).normal(T * p).reshape(T, p)
    return u


def linear_map_matrix(spec: GeneratorSpec) -> np.ndarray:
    """The ``(m*p, n*p)`` map taking a hindcast to its forecast."""
    h = spec.horizon
    if spec.map == "zero":
        return np.zeros((h.forecast_size, h.hindcast_size))
    if spec.map == "persistence":
        L = np.zeros((h.forecast_size, h.hindcast_size))
        last = slice((h.n - 1) * h.p, h.n * h.p)
        for i in range(h.m):
            L[i * h.p:(i + 1) * h.p, last] = np.eye(h.p)
        return L
    if spec.map == "random":
        g = CounterRNG(spec.seed, 7).normal(h.forecast_size * h.hindcast_size)
        return spec.map_scale * g.reshape(h.forecast_size, h.hindcast_size) / np.sqrt(h.hindcast_size)
    raise GeneratorError(f"unknown linear map {spec.map!r}")


def gen_linear_map(spec: GeneratorSpec):
    """Random hindcasts with forecasts ``q+ = L q-``.  Returns ``(ensemble, L)``."""
    h = spec.horizon
    L = linear_map_matrix(spec)
    q_minus = CounterRNG(spec.seed, 8).normal(spec.k * h.hindcast_size) \
        .reshape(spec.k, h.hindcast_size)
    data = np.concatenate([q_minus, q_minus @ L.T], axis=1)
    return Ensemble(data, h, kind=TRANSIENT), L


def polar_grid(spec: GeneratorSpec):
    """Radius and angle of each of the ``p`` grid points (radius-major)."""
    if spec.p % spec.n_angle:
        raise GeneratorError(f"p = {spec.p} is not a multiple of n_angle = {spec.n_angle}")
    n_radius = spec.p // spec.n_angle
    r = (np.arange(n_radius) + 0.5) / n_radius
    ang = 2.0 * np.pi * np.arange(spec.n_angle) / spec.n_angle
    rr, aa = np.meshgrid(r, ang, indexing="ij")
    return rr.reshape(-1), aa.reshape(-1)


def gen_decaying_transient(spec: GeneratorSpec) -> Ensemble:
    """Expanding, decaying shells with random strength, speed and multipoles.

    Snapshot ``i`` of episode ``j`` is

        A_j exp(-decay * t) exp(-((r - R_j(t, theta)) / width)**2)

    with ``t = (i+1)/(n+m)``, ``R_j = 0.8 t**0.5 s_j (1 + sum_l e_jl cos(l theta + phi_jl))``
    for ``l = 2..4``, ``width = 0.08``.  The random draws are
    ``A_j = 1 + P g``, ``s_j = 1 + P g / 10``, ``e_jl = P g / (2 l)`` with
    ``P = perturbation`` and ``g`` standard normal, so ``P = 0`` gives
    identical episodes.
    """
    h = spec.horizon
    r, theta = polar_grid(spec)
    k, P = spec.k, spec.perturbation
    rng = CounterRNG(spec.seed, 9)
    strength = 1.0 + P * rng.normal(k)
    speed = 1.0 + 0.1 * P * rng.normal(k)
    orders = np.arange(2, 5)
    e = P * rng.normal(k * orders.size).reshape(k, orders.size) / (2.0 * orders)
    phi = 2.0 * np.pi * rng.uniform(k * orders.size).reshape(k, orders.size)
    t = (np.arange(h.length) + 1.0) / h.length
    # shape (k, p): angular distortion of the shell
    distort = 1.0 + np.einsum("jl,jlp->jp", e,
                              np.cos(orders[None, :, None] * theta[None, None, :] + phi[:, :, None]))
    radius = 0.8 * np.sqrt(t)[None, :, None] * (speed[:, None, None] * distort[:, None, :])
    width = 0.08
    shell = np.exp(-((r[None, None, :] - radius) / width) ** 2)
    field_ = strength[:, None, None] * np.exp(-spec.decay * t)[None, :, None] * shell
    return Ensemble(field_.reshape(k, h.size), h, kind=TRANSIENT)


def cavity_like(seed: int, **overrides) -> GeneratorSpec:
    """Noisy convective-wave series sized like the cavity study.

    16000 snapshots of 64 points: cut with n=15, m=20 and stride 10 it yields
    1278 training and 316 testing episodes.
    """
    params = dict(kind=TRAVELING_WAVE, p=64, seed=seed, length=16000, waves=6,
                  transit_time=32.0, noise=0.3, coherence_time=15.0)
    params.update(overrides)
    return GeneratorSpec(**params)


def generate(spec: GeneratorSpec):
    """Dispatch on ``spec.kind``.

    Returns an :class:`Ensemble` for the ensemble generators and a
    ``(length, p)`` series for ``traveling_wave``.
    """
    if spec.kind == RANK_LIMITED:
        return gen_rank_limited(spec)[0]
    if spec.kind == LINEAR_MAP:
        return gen_linear_map(spec)[0]
    if spec.kind == DECAYING_TRANSIENT:
        return gen_decaying_transient(spec)
    return gen_traveling_wave(spec)
