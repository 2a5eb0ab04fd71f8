"""Siamese remapping network: forward, analytic backward, triplet loss.

The network re-embeds fixed u-dimensional vectors.  Two backends share one
parameter/gradient layout:

* ``attention`` — the input is reshaped into ``segments`` pseudo-tokens so a
  single transformer block (multi-head self-attention + position-wise
  feed-forward, both with residual connections and layer norm) has more than
  one position to attend over; a pooled vector fed to one-token attention
  would make the softmax constant.
* ``mlp`` — one hidden tanh layer with a final residual connection, suited to
  small embedding dims where the attention block is over-parameterized.

All arithmetic is float64 so analytic gradients can be verified against
central finite differences to tight tolerances.  The same network weights are
applied to every element of a triplet (shared-parameter Siamese use), and the
hinge loss on cosine distances drives anchors toward positives and away from
negatives.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import seeds

LN_EPS = 1e-5
COS_EPS = 1e-12

CHECKPOINT_MAGIC = b"SCCK"
CHECKPOINT_VERSION = 1

BACKENDS = ("attention", "mlp")


class RemapError(ValueError):
    """Raised for invalid network configuration or inputs."""


@dataclass(frozen=True)
class RemapConfig:
    dim: int
    backend: str = "attention"
    heads: int = 8
    hidden: int = 768
    segments: int = 8

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise RemapError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.dim < 1 or self.hidden < 1:
            raise RemapError("dim and hidden must be positive")
        if self.backend == "attention":
            if self.segments < 1 or self.dim % self.segments:
                raise RemapError(
                    f"dim {self.dim} must be divisible by segments {self.segments}"
                )
            token_dim = self.dim // self.segments
            if self.heads < 1 or token_dim % self.heads:
                raise RemapError(
                    f"token width {token_dim} must be divisible by heads {self.heads}"
                )

    @property
    def token_dim(self) -> int:
        return self.dim // self.segments

    @property
    def head_dim(self) -> int:
        return self.token_dim // self.heads


@dataclass
class RemapParams:
    """Named float64 tensors plus the architecture they belong to."""

    config: RemapConfig
    tensors: dict[str, np.ndarray]

    def copy(self) -> "RemapParams":
        return RemapParams(self.config, {k: v.copy() for k, v in self.tensors.items()})


def init_params(
    dim: int,
    backend: str = "attention",
    heads: int = 8,
    hidden: int = 768,
    segments: int = 8,
    seed: int = 0,
) -> RemapParams:
    """Scaled-uniform weight init (bound 1/sqrt(fan_in)); LN gains 1, biases 0."""
    config = RemapConfig(dim, backend, heads, hidden, segments)
    rng = np.random.default_rng(seeds.derive(seed, "remap-init", backend))

    def uniform(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    t: dict[str, np.ndarray] = {}
    if backend == "attention":
        d, f, h, dh = config.token_dim, hidden, heads, config.head_dim
        for name in ("wq", "wk", "wv"):
            t[name] = uniform((h, d, dh), d)
        t["wo"] = uniform((h, dh, d), d)  # heads concatenate back to width d
        t["ffn_w1"] = uniform((d, f), d)
        t["ffn_b1"] = np.zeros(f)
        t["ffn_w2"] = uniform((f, d), f)
        t["ffn_b2"] = np.zeros(d)
        for i in (1, 2):
            t[f"ln{i}_gain"] = np.ones(d)
            t[f"ln{i}_bias"] = np.zeros(d)
    else:
        t["w1"] = uniform((dim, hidden), dim)
        t["b1"] = np.zeros(hidden)
        t["w2"] = uniform((hidden, dim), hidden)
        t["b2"] = np.zeros(dim)
    return RemapParams(config, t)


def zeros_like_params(params: RemapParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _layer_norm(R: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    mu = R.mean(axis=-1, keepdims=True)
    var = ((R - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (R - mu) * inv
    return gain * xhat + bias, xhat, inv


def _layer_norm_backward(dout, xhat, inv, gain):
    axes = tuple(range(dout.ndim - 1))
    dgain = (dout * xhat).sum(axis=axes)
    dbias = dout.sum(axis=axes)
    dxhat = dout * gain
    dR = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dR, dgain, dbias


_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


def _gelu(x: np.ndarray):
    t = np.tanh(_GELU_C * (x + _GELU_A * x**3))
    return 0.5 * x * (1.0 + t), t


def _gelu_grad(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)


def forward_batch(params: RemapParams, X: np.ndarray, need_cache: bool = True):
    """Remap a (batch, dim) matrix; returns (Z, cache).

    The cache holds every intermediate the analytic backward pass needs and
    is only valid for the exact (params, X) pair that produced it.
    """
    cfg = params.config
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cfg.dim:
        raise RemapError(f"expected input of shape (batch, {cfg.dim}), got {X.shape}")
    if not np.isfinite(X).all():
        raise RemapError("non-finite value in network input")
    t = params.tensors

    if cfg.backend == "mlp":
        H1 = X @ t["w1"] + t["b1"]
        G = np.tanh(H1)
        Z = G @ t["w2"] + t["b2"] + X
        cache = {"X": X, "G": G} if need_cache else None
        return Z, cache

    B = X.shape[0]
    s, d = cfg.segments, cfg.token_dim
    scale = 1.0 / np.sqrt(cfg.head_dim)
    T = X.reshape(B, s, d)

    Q = np.einsum("bsd,hde->bhse", T, t["wq"])
    K = np.einsum("bsd,hde->bhse", T, t["wk"])
    V = np.einsum("bsd,hde->bhse", T, t["wv"])
    scores = np.einsum("bhse,bhte->bhst", Q, K) * scale
    P = np.exp(scores - scores.max(axis=-1, keepdims=True))
    P /= P.sum(axis=-1, keepdims=True)
    O = np.einsum("bhst,bhte->bhse", P, V)
    A = np.einsum("bhse,hed->bsd", O, t["wo"])

    R1 = T + A
    U, xhat1, inv1 = _layer_norm(R1, t["ln1_gain"], t["ln1_bias"])

    H1 = U @ t["ffn_w1"] + t["ffn_b1"]
    G, tanh_inner = _gelu(H1)
    F = G @ t["ffn_w2"] + t["ffn_b2"]

    R2 = U + F
    Y, xhat2, inv2 = _layer_norm(R2, t["ln2_gain"], t["ln2_bias"])
    Z = Y.reshape(B, cfg.dim)

    cache = None
    if need_cache:
        cache = {
            "T": T, "Q": Q, "K": K, "V": V, "P": P, "O": O,
            "xhat1": xhat1, "inv1": inv1, "U": U,
            "H1": H1, "G": G, "tanh_inner": tanh_inner,
            "xhat2": xhat2, "inv2": inv2,
        }
    return Z, cache


def forward(params: RemapParams, x: np.ndarray, need_cache: bool = True):
    """Remap a single vector; returns (z, cache)."""
    Z, cache = forward_batch(params, np.asarray(x, dtype=np.float64)[None, :], need_cache)
    return Z[0], cache


def remap_all(params: RemapParams, X: np.ndarray) -> np.ndarray:
    """Cache-free batched forward for whole-dataset remapping."""
    Z, _ = forward_batch(params, X, need_cache=False)
    return Z


def backward_batch(params: RemapParams, cache: dict, dZ: np.ndarray):
    """Gradients of sum(dZ * Z) w.r.t. every parameter and the input.

    Returns (grads, dX) where grads mirrors params.tensors.  Gradients are
    accumulated in a fixed order, so repeated runs are bit-identical.
    """
    cfg = params.config
    t = params.tensors
    grads = {}

    if cfg.backend == "mlp":
        X, G = cache["X"], cache["G"]
        grads["b2"] = dZ.sum(axis=0)
        grads["w2"] = G.T @ dZ
        dG = dZ @ t["w2"].T
        dH1 = dG * (1.0 - G**2)
        grads["b1"] = dH1.sum(axis=0)
        grads["w1"] = X.T @ dH1
        dX = dH1 @ t["w1"].T + dZ
        return grads, dX

    B = dZ.shape[0]
    s, d = cfg.segments, cfg.token_dim
    scale = 1.0 / np.sqrt(cfg.head_dim)
    dY = dZ.reshape(B, s, d)

    dR2, grads["ln2_gain"], grads["ln2_bias"] = _layer_norm_backward(
        dY, cache["xhat2"], cache["inv2"], t["ln2_gain"]
    )
    dU = dR2.copy()
    dF = dR2

    G = cache["G"]
    grads["ffn_b2"] = dF.sum(axis=(0, 1))
    grads["ffn_w2"] = np.einsum("bsf,bsd->fd", G, dF)
    dG = dF @ t["ffn_w2"].T
    dH1 = dG * _gelu_grad(cache["H1"], cache["tanh_inner"])
    grads["ffn_b1"] = dH1.sum(axis=(0, 1))
    grads["ffn_w1"] = np.einsum("bsd,bsf->df", cache["U"], dH1)
    dU += dH1 @ t["ffn_w1"].T

    dR1, grads["ln1_gain"], grads["ln1_bias"] = _layer_norm_backward(
        dU, cache["xhat1"], cache["inv1"], t["ln1_gain"]
    )
    dT = dR1.copy()
    dA = dR1

    O, P, Q, K, V, T = cache["O"], cache["P"], cache["Q"], cache["K"], cache["V"], cache["T"]
    grads["wo"] = np.einsum("bhse,bsd->hed", O, dA)
    dO = np.einsum("bsd,hed->bhse", dA, t["wo"])
    dP = np.einsum("bhse,bhte->bhst", dO, V)
    dV = np.einsum("bhst,bhse->bhte", P, dO)
    dscores = P * (dP - (dP * P).sum(axis=-1, keepdims=True))
    dQ = np.einsum("bhst,bhte->bhse", dscores, K) * scale
    dK = np.einsum("bhst,bhse->bhte", dscores, Q) * scale

    grads["wq"] = np.einsum("bsd,bhse->hde", T, dQ)
    grads["wk"] = np.einsum("bsd,bhse->hde", T, dK)
    grads["wv"] = np.einsum("bsd,bhse->hde", T, dV)
    dT += np.einsum("bhse,hde->bsd", dQ, t["wq"])
    dT += np.einsum("bhse,hde->bsd", dK, t["wk"])
    dT += np.einsum("bhse,hde->bsd", dV, t["wv"])

    return grads, dT.reshape(B, cfg.dim)


# ---------------------------------------------------------------------------
# Triplet loss
# ---------------------------------------------------------------------------

def cosine_distance(x: np.ndarray, y: np.ndarray) -> float:
    """1 - cosine similarity, with an epsilon guard on the norms."""
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise RemapError("cosine distance undefined for zero-norm vectors")
    return float(1.0 - (x @ y) / ((nx + COS_EPS) * (ny + COS_EPS)))


def triplet_loss(z_a: np.ndarray, z_p: np.ndarray, z_n: np.ndarray, beta: float = 0.2) -> float:
    """Hinge on cosine distances: max(0, d(a,p) - d(a,n) + beta)."""
    if beta < 0:
        raise RemapError("margin beta must be >= 0")
    return max(0.0, cosine_distance(z_a, z_p) - cosine_distance(z_a, z_n) + beta)


def _cos_and_grads(x: np.ndarray, y: np.ndarray):
    """Cosine similarity plus its gradients w.r.t. both arguments."""
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise RemapError("cosine distance undefined for zero-norm vectors")
    gx, gy = nx + COS_EPS, ny + COS_EPS
    dot = x @ y
    c = dot / (gx * gy)
    dc_dx = y / (gx * gy) - dot * (x / nx) / (gx**2 * gy)
    dc_dy = x / (gx * gy) - dot * (y / ny) / (gy**2 * gx)
    return c, dc_dx, dc_dy


def triplet_batch(
    params: RemapParams,
    X_a: np.ndarray,
    X_p: np.ndarray,
    X_n: np.ndarray,
    beta: float = 0.2,
):
    """Batch loss (sum over triplets) and parameter gradients.

    Each branch runs the shared network; hinge-inactive triplets contribute
    exactly zero gradient, and every active triplet's three branch
    contributions accumulate into the same parameter gradients.
    """
    Z_a, cache_a = forward_batch(params, X_a)
    Z_p, cache_p = forward_batch(params, X_p)
    Z_n, cache_n = forward_batch(params, X_n)

    B = Z_a.shape[0]
    dZ_a = np.zeros_like(Z_a)
    dZ_p = np.zeros_like(Z_p)
    dZ_n = np.zeros_like(Z_n)
    total = 0.0
    active_count = 0
    for i in range(B):
        c_ap, dap_da, dap_dp = _cos_and_grads(Z_a[i], Z_p[i])
        c_an, dan_da, dan_dn = _cos_and_grads(Z_a[i], Z_n[i])
        hinge = (1.0 - c_ap) - (1.0 - c_an) + beta
        if hinge > 0.0:
            total += hinge
            active_count += 1
            dZ_a[i] = -dap_da + dan_da
            dZ_p[i] = -dap_dp
            dZ_n[i] = dan_dn

    grads_a, _ = backward_batch(params, cache_a, dZ_a)
    grads_p, _ = backward_batch(params, cache_p, dZ_p)
    grads_n, _ = backward_batch(params, cache_n, dZ_n)
    grads = {k: grads_a[k] + grads_p[k] + grads_n[k] for k in grads_a}
    return float(total), grads, active_count


def grad_check(
    dim: int,
    backend: str = "mlp",
    trials: int = 100,
    seed: int = 0,
    heads: int = 2,
    hidden: int = 8,
    segments: int = 4,
    beta: float = 0.2,
    step: float = 1e-5,
    max_coords: int | None = None,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Each trial draws fresh parameters and a random triplet, resampled until
    the hinge is comfortably active (so the loss is smooth around the draw).
    Relative error uses a 1e-4 denominator floor: below that scale the
    central-difference estimate is itself noise-limited, and a genuinely
    wrong gradient still shows up as an O(1) mismatch.
    """
    if dim > 64:
        raise RemapError("finite-difference checking is intended for small dims (<= 64)")
    rng = np.random.default_rng(seeds.derive(seed, "grad-check", backend))
    worst = 0.0
    for trial in range(trials):
        params = init_params(dim, backend, heads, hidden, segments, seed=int(rng.integers(2**31)))
        for _ in range(200):
            xa, xp, xn = rng.standard_normal((3, dim))
            za = forward(params, xa, need_cache=False)[0]
            zp = forward(params, xp, need_cache=False)[0]
            zn = forward(params, xn, need_cache=False)[0]
            hinge = cosine_distance(za, zp) - cosine_distance(za, zn) + beta
            if hinge > 1e-2:
                break
        else:  # pragma: no cover - hinge is active for most random draws
            continue

        _, grads, _ = triplet_batch(params, xa[None], xp[None], xn[None], beta)

        def loss_at(tensors: dict[str, np.ndarray]) -> float:
            probe = RemapParams(params.config, tensors)
            za = forward(probe, xa, need_cache=False)[0]
            zp = forward(probe, xp, need_cache=False)[0]
            zn = forward(probe, xn, need_cache=False)[0]
            return triplet_loss(za, zp, zn, beta)

        for name, tensor in params.tensors.items():
            flat = tensor.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = rng.choice(flat.size, size=max_coords, replace=False)
            for idx in coords:
                original = flat[idx]
                flat[idx] = original + step
                hi = loss_at(params.tensors)
                flat[idx] = original - step
                lo = loss_at(params.tensors)
                flat[idx] = original
                fd = (hi - lo) / (2.0 * step)
                analytic = grads[name].reshape(-1)[idx]
                rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-4)
                worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# Output-deviation bound probe (scalar networks)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    lhs: float
    gradient_term: float
    hessian_term: float
    bound: float
    holds: bool


class ScalarMlp:
    """Scalar-output tanh network with analytic gradient and Hessian."""

    def __init__(self, dim: int, hidden: int = 16, seed: int = 0):
        rng = np.random.default_rng(seeds.derive(seed, "scalar-mlp"))
        self.w1 = rng.uniform(-1, 1, size=(dim, hidden)) / np.sqrt(dim)
        self.b1 = rng.uniform(-0.1, 0.1, size=hidden)
        self.w2 = rng.uniform(-1, 1, size=hidden) / np.sqrt(hidden)
        self.b2 = float(rng.uniform(-0.1, 0.1))

    def __call__(self, x: np.ndarray) -> float:
        return float(np.tanh(x @ self.w1 + self.b1) @ self.w2 + self.b2)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        t = np.tanh(x @ self.w1 + self.b1)
        return self.w1 @ (self.w2 * (1.0 - t**2))

    def hessian(self, x: np.ndarray) -> np.ndarray:
        t = np.tanh(x @ self.w1 + self.b1)
        coeff = self.w2 * (-2.0 * t * (1.0 - t**2))
        return (self.w1 * coeff) @ self.w1.T


class LinearScalar:
    """f(x) = w . x + b; zero Hessian everywhere."""

    def __init__(self, w: np.ndarray, b: float = 0.0):
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)

    def __call__(self, x: np.ndarray) -> float:
        return float(self.w @ x + self.b)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.w

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return np.zeros((len(self.w), len(self.w)))


def _fd_hessian(net, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    u = len(x)
    H = np.empty((u, u))
    for i in range(u):
        e = np.zeros(u)
        e[i] = step
        H[:, i] = (net.gradient(x + e) - net.gradient(x - e)) / (2.0 * step)
    return 0.5 * (H + H.T)


def output_bound_probe(
    net,
    x: np.ndarray,
    x_prime: np.ndarray,
    alpha: float,
    segment_points: int = 20,
    safety: float = 1.5,
) -> ProbeResult:
    """Check |f(x) - f(x')| against sqrt(u)*alpha*||grad f(x)|| + 0.5*M*alpha.

    M is the largest Hessian spectral norm along the segment [x, x'], taken
    at `segment_points` evenly spaced points (analytic Hessian when the net
    provides one, finite-difference assembly otherwise) and inflated by the
    `safety` factor to cover the gaps between sampled points.
    """
    x = np.asarray(x, dtype=np.float64)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    gap = float(np.linalg.norm(x - x_prime))
    if gap >= alpha:
        raise RemapError(f"||x - x'|| = {gap:.6g} violates the alpha = {alpha} premise")

    lhs = abs(net(x) - net(x_prime))
    gradient_term = float(np.sqrt(len(x)) * alpha * np.linalg.norm(net.gradient(x)))

    hess = getattr(net, "hessian", None)
    spectral = 0.0
    for t in np.linspace(0.0, 1.0, segment_points):
        xi = x + t * (x_prime - x)
        H = hess(xi) if hess is not None else _fd_hessian(net, xi)
        spectral = max(spectral, float(np.abs(np.linalg.eigvalsh(H)).max()))
    hessian_term = 0.5 * safety * spectral * alpha

    bound = gradient_term + hessian_term
    return ProbeResult(lhs, gradient_term, hessian_term, bound, lhs <= bound)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_params(params: RemapParams, path: str) -> None:
    """Versioned little-endian binary checkpoint; round-trips bit-exact."""
    cfg = params.config
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(
            struct.pack(
                "<IIIIII",
                CHECKPOINT_VERSION,
                BACKENDS.index(cfg.backend),
                cfg.dim,
                cfg.heads,
                cfg.hidden,
                cfg.segments,
            )
        )
        fh.write(struct.pack("<I", len(params.tensors)))
        for name in sorted(params.tensors):
            tensor = params.tensors[name]
            blob = name.encode("utf-8")
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(tensor.astype("<f8", copy=False).tobytes())


def load_params(path: str) -> RemapParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise RemapError(f"bad magic bytes {raw[:4]!r}; not a checkpoint")
    off = 4
    version, backend_idx, dim, heads, hidden, segments = struct.unpack_from("<IIIIII", raw, off)
    off += struct.calcsize("<IIIIII")
    if version != CHECKPOINT_VERSION:
        raise RemapError(f"unsupported checkpoint version {version}")
    config = RemapConfig(dim, BACKENDS[backend_idx], heads, hidden, segments)
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off : off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        tensors[name] = (
            np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        )
        off += 8 * size
    return RemapParams(config, tensors)


def forward_flop_count(config: RemapConfig) -> int:
    """Multiply-accumulate count of one forward pass; a constant in the
    dataset size (inference cost grows only linearly with sample count)."""
    if config.backend == "mlp":
        return 2 * config.dim * config.hidden
    s, d, f = config.segments, config.token_dim, config.hidden
    attention = 3 * s * d * d + 2 * s * s * d + s * d * d
    ffn = 2 * s * d * f
    return attention + ffn
