"""Monte-Carlo dropout network surrogates with optional Sobolev (gradient-matching) training.

One two-hidden-layer ReLU network per objective::

    h1 = relu(W1 x + b1) * z1
    h2 = relu(W2 h1 + b2) * z2
    y  = W3 h2 + b3

``z1`` and ``z2`` are Bernoulli keep-masks (keep probability ``1 - rate``)
on the hidden units. The same masked network is used in training and in
MC prediction, without inverted-dropout rescaling, so the predictive
moments come straight from the sampled outputs.

All backpropagation, including the second-order path through the input
gradient needed by the Sobolev term, is written out by hand in numpy.
Masks may be a single (H,) vector shared by the batch or a (B, H) array
with one row per sample; broadcasting covers both.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import Archive, BoxBounds, DimensionError, RngStream

HIDDEN = 256


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float) -> None:
        super().__init__(f"non-finite training loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass
class TrainingConfig:
    dropout_rate: float = 0.05
    epochs: int = 2000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    sobolev_weight: float = 1.0
    # None: full batch up to 512 samples, otherwise minibatches of 256
    minibatch_size: int | None = None
    hidden: int = HIDDEN
    dtype: str = "float32"
    warm_start: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.sobolev_weight < 0:
            raise ValueError("sobolev_weight must be nonnegative")
        if self.minibatch_size is not None and self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")

    def batch_size(self, n_samples: int) -> int:
        if self.minibatch_size is not None:
            return min(self.minibatch_size, n_samples)
        return n_samples if n_samples <= 512 else 256


@dataclass
class NetworkWeights:
    W1: np.ndarray  # (H, n)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, H)
    b2: np.ndarray  # (H,)
    W3: np.ndarray  # (1, H)
    b3: np.ndarray  # (1,)

    def __post_init__(self) -> None:
        H, n = self.W1.shape
        expected = {"b1": (H,), "W2": (H, H), "b2": (H,), "W3": (1, H), "b3": (1,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def arrays(self) -> Iterator[np.ndarray]:
        for f in fields(self):
            yield getattr(self, f.name)

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(*(a.copy() for a in self.arrays()))

    def astype(self, dtype) -> "NetworkWeights":
        return NetworkWeights(*(a.astype(dtype) for a in self.arrays()))

    def zeros_like(self) -> "NetworkWeights":
        return NetworkWeights(*(np.zeros_like(a) for a in self.arrays()))


@dataclass
class DropoutMask:
    z1: np.ndarray
    z2: np.ndarray

    @classmethod
    def ones(cls, hidden: int = HIDDEN, dtype=np.float64) -> "DropoutMask":
        return cls(np.ones(hidden, dtype=dtype), np.ones(hidden, dtype=dtype))

    @classmethod
    def sample(cls, rate: float, shape, rng: RngStream, dtype=np.float64) -> "DropoutMask":
        """Independent Bernoulli keep-masks; ``shape`` is (H,) or (B, H)."""
        keep = np.float32(1.0 - rate)
        z = (rng.random((2, *np.atleast_1d(shape)), dtype=np.float32) < keep).astype(dtype)
        return cls(z[0], z[1])


def init_weights(n: int, rng: RngStream, hidden: int = HIDDEN, dtype=np.float64) -> NetworkWeights:
    """Glorot-uniform weights, zero biases."""

    def glorot(fan_out: int, fan_in: int) -> np.ndarray:
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, (fan_out, fan_in)).astype(dtype)

    return NetworkWeights(
        W1=glorot(hidden, n),
        b1=np.zeros(hidden, dtype=dtype),
        W2=glorot(hidden, hidden),
        b2=np.zeros(hidden, dtype=dtype),
        W3=glorot(1, hidden),
        b3=np.zeros(1, dtype=dtype),
    )


@dataclass
class _Cache:
    x: np.ndarray
    m1: np.ndarray  # z1 * relu'(a1)
    m2: np.ndarray  # z2 * relu'(a2)
    h1: np.ndarray
    h2: np.ndarray
    y: np.ndarray


def _forward_cache(w: NetworkWeights, mask: DropoutMask, x: np.ndarray) -> _Cache:
    if x.shape[-1] != w.n:
        raise DimensionError(f"input has {x.shape[-1]} features, network expects {w.n}")
    h1 = x @ w.W1.T
    h1 += w.b1
    m1 = np.greater(h1, 0).astype(h1.dtype)
    m1 *= mask.z1
    h1 *= m1
    h2 = h1 @ w.W2.T
    h2 += w.b2
    m2 = np.greater(h2, 0).astype(h2.dtype)
    m2 *= mask.z2
    h2 *= m2
    y = h2 @ w.W3[0] + w.b3[0]
    return _Cache(x, m1, m2, h1, h2, y)


def forward(w: NetworkWeights, mask: DropoutMask, x: np.ndarray) -> np.ndarray | float:
    """Network output for one scaled input (scalar) or a batch (B,)."""
    x = np.asarray(x, dtype=w.W1.dtype)
    y = _forward_cache(w, mask, np.atleast_2d(x)).y
    return float(y[0]) if x.ndim == 1 else y


def _input_grad(w: NetworkWeights, m1: np.ndarray, m2: np.ndarray):
    v2 = m2 * w.W3[0]
    u = v2 @ w.W2
    v1 = m1 * u
    return v1 @ w.W1, v1


def input_gradient(w: NetworkWeights, mask: DropoutMask, x: np.ndarray) -> np.ndarray:
    """d output / d input, shape (n,) or (B, n). ReLU derivative is taken as 0 at exactly 0."""
    x = np.asarray(x, dtype=w.W1.dtype)
    c = _forward_cache(w, mask, np.atleast_2d(x))
    g, _ = _input_grad(w, c.m1, c.m2)
    return g[0] if x.ndim == 1 else g


def sobolev_loss(
    w: NetworkWeights,
    mask: DropoutMask,
    X: np.ndarray,
    y: np.ndarray,
    grads: np.ndarray | None = None,
    sobolev_weight: float = 1.0,
    scale: float = 1.0,
) -> tuple[float, NetworkWeights]:
    """Summed squared value error plus weighted summed squared gradient error, and its weight gradient.

    ``scale`` multiplies both the loss and its gradient (the trainer passes
    ``1 / batch_size`` to optimize the batch mean). The gradient term is
    present iff ``grads`` is given; a zero ``sobolev_weight`` drops it
    exactly, so that case follows the plain trajectory bit for bit.
    """
    X = np.atleast_2d(np.asarray(X, dtype=w.W1.dtype))
    c = _forward_cache(w, mask, X)
    w3 = w.W3[0]

    resid = c.y - y
    loss = float(resid @ resid)
    e = (2.0 * scale) * resid

    # The value backward pass and the input gradient share v2 @ W2:
    # d y / d a2 = v2 and d y / d a1 = v1 per sample.
    v2 = c.m2 * w3
    v1 = c.m1 * (v2 @ w.W2)
    gb3 = np.array([e.sum()], dtype=w.b3.dtype)
    gW3 = c.h2.T @ e
    gb2 = v2.T @ e
    gb1 = v1.T @ e
    A = e[:, None] * X
    B = e[:, None] * c.h1

    sobolev = grads is not None and sobolev_weight != 0
    if sobolev:
        grads = np.atleast_2d(np.asarray(grads, dtype=w.W1.dtype))
        R = v1 @ w.W1 - grads
        loss += sobolev_weight * float(np.sum(R * R))
        E = (2.0 * scale * sobolev_weight) * R
        A += E
        # gradient-term contribution to d/d W2 is v2.T @ dU, merged below
        dU = (E @ w.W1.T) * c.m1
        B += dU

    gW1 = v1.T @ A
    Q = c.m2.T @ B
    gW2 = w3[:, None] * Q
    if sobolev:
        # d/d w3 of the gradient term is rowsum(W2 * (m2.T @ dU)). Q also
        # carries m2.T @ (e h1), whose rowsum against W2 is (h2 - m2 b2).T @ e.
        gW3 += np.sum(w.W2 * Q, axis=1) - (c.h2 - c.m2 * w.b2).T @ e
    gW3 = gW3[None, :]

    return loss * scale, NetworkWeights(gW1, gb1, gW2, gb2, gW3, gb3)


class Adam:
    """Adam over all arrays of a NetworkWeights, updated in place.

    The weights are rebound to views of one flat buffer on the first step
    so each update is a handful of vectorized operations.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self._flat: np.ndarray | None = None

    def _bind(self, w: NetworkWeights) -> None:
        arrays = list(w.arrays())
        self._flat = np.concatenate([a.ravel() for a in arrays])
        self._grad = np.empty_like(self._flat)
        self._slices = []
        start = 0
        for f, a in zip(fields(w), arrays):
            sl = slice(start, start + a.size)
            setattr(w, f.name, self._flat[sl].reshape(a.shape))
            self._slices.append(sl)
            start += a.size
        self.m = np.zeros_like(self._flat)
        self.v = np.zeros_like(self._flat)
        self._tmp = np.empty_like(self._flat)
        self._w = w

    def step(self, w: NetworkWeights, g: NetworkWeights) -> None:
        if self._flat is None or self._w is not w:
            self._bind(w)
        for sl, ga in zip(self._slices, g.arrays()):
            self._grad[sl] = ga.ravel()
        gr, tmp = self._grad, self._tmp
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        # m and v hold the moment estimates pre-multiplied by 1 - beta so the
        # in-place updates need no scratch arrays
        self.m *= self.beta1
        self.m += gr
        np.multiply(gr, gr, out=gr)
        self.v *= self.beta2
        self.v += gr
        # m_hat / (sqrt(v_hat) + eps), folded into one sqrt, one add and one divide
        k = np.sqrt(c2 / (1.0 - self.beta2))
        np.sqrt(self.v, out=tmp)
        tmp += self.eps * k
        np.divide(self.m, tmp, out=tmp)
        tmp *= self.lr * (1.0 - self.beta1) * k / c1
        self._flat -= tmp


def train_network(
    X: np.ndarray,
    y: np.ndarray,
    grads: np.ndarray | None,
    cfg: TrainingConfig,
    rng: RngStream,
    init: NetworkWeights | None = None,
) -> tuple[NetworkWeights, np.ndarray]:
    """Fit one network on already-scaled data with Adam.

    Returns the weights and the per-epoch mean training loss. A fresh
    per-sample dropout mask is drawn for every step and shared by the value
    and gradient terms of that step.
    """
    dtype = np.dtype(cfg.dtype)
    X = np.asarray(X, dtype=dtype)
    y = np.asarray(y, dtype=dtype).ravel()
    N, n = X.shape
    if N < 2:
        raise ValueError("training needs at least 2 samples")
    if grads is not None:
        grads = np.asarray(grads, dtype=dtype)
        if grads.shape != (N, n):
            raise DimensionError(f"gradient targets have shape {grads.shape}, expected {(N, n)}")
    w = init.astype(dtype) if init is not None else init_weights(n, rng.child("init"), cfg.hidden, dtype)
    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    batch = cfg.batch_size(N)
    rate = cfg.dropout_rate
    order_rng = rng.child("order")
    mask_rng = rng.child("masks")
    history = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        order = order_rng.permutation(N) if batch < N else np.arange(N)
        total = 0.0
        for start in range(0, N, batch):
            idx = order[start : start + batch]
            mask = DropoutMask.sample(rate, (idx.size, w.hidden), mask_rng, dtype)
            g_batch = grads[idx] if grads is not None else None
            # overflow shows up as a non-finite loss, reported below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, g = sobolev_loss(w, mask, X[idx], y[idx], g_batch, cfg.sobolev_weight, 1.0 / idx.size)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            opt.step(w, g)
            total += loss * idx.size
        history[epoch] = total / N
    return w, history


@dataclass
class Prediction:
    mean: np.ndarray
    std: np.ndarray


def mc_moments(samples: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and 1/S standard deviation along ``axis``.

    Shifted by the first sample so identical samples give exactly their
    value and exactly zero spread.
    """
    s = np.asarray(samples)
    first = np.take(s, [0], axis=axis)
    d = s - first
    dm = d.mean(axis=axis, keepdims=True)
    var = ((d - dm) ** 2).mean(axis=axis)
    return np.squeeze(first + dm, axis=axis), np.sqrt(var)


@dataclass
class SurrogateEnsemble:
    """One trained network per objective plus the affine maps to and from network units."""

    models: list[NetworkWeights]
    bounds: BoxBounds
    y_mean: np.ndarray
    y_std: np.ndarray
    dropout_rate: float = 0.05
    mc_samples: int = 20
    losses: list[np.ndarray] = field(default_factory=list)
    train_seconds: float = 0.0

    def __post_init__(self) -> None:
        if len(self.models) != len(self.y_mean) or len(self.models) != len(self.y_std):
            raise DimensionError("one model and one output scaler per objective")
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be >= 2")
        if np.any(self.y_std <= 0):
            raise ValueError("output scales must be positive")

    @property
    def m(self) -> int:
        return len(self.models)

    def predict_batch(self, X: np.ndarray, rng: RngStream, chunk: int = 512) -> Prediction:
        """MC-dropout mean and std for each row of ``X``, in objective units.

        For every objective ``mc_samples`` mask pairs are drawn and shared by
        all rows, so a point's prediction does not depend on what else is in
        the batch.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        U = self.bounds.to_unit(X)
        means = np.empty((len(X), self.m))
        stds = np.empty((len(X), self.m))
        S = self.mc_samples
        for j, w in enumerate(self.models):
            masks = DropoutMask.sample(self.dropout_rate, (S, w.hidden), rng, w.W1.dtype)
            for start in range(0, len(X), chunk):
                Uc = U[start : start + chunk].astype(w.W1.dtype)
                r1 = np.maximum(Uc @ w.W1.T + w.b1, 0)
                h1 = r1[None, :, :] * masks.z1[:, None, :]
                a2 = h1 @ w.W2.T + w.b2
                h2 = np.maximum(a2, 0) * masks.z2[:, None, :]
                ys = (h2 @ w.W3[0] + w.b3[0]).astype(float)
                mu, sd = mc_moments(ys, axis=0)
                means[start : start + chunk, j] = mu * self.y_std[j] + self.y_mean[j]
                stds[start : start + chunk, j] = sd * self.y_std[j]
        return Prediction(means, stds)

    def predict(self, x: np.ndarray, rng: RngStream) -> Prediction:
        p = self.predict_batch(np.asarray(x, dtype=float)[None, :], rng)
        return Prediction(p.mean[0], p.std[0])


def scale_targets(
    archive: Archive, bounds: BoxBounds, use_gradients: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
    """Archive data mapped to network units: inputs to the unit box, outputs standardized.

    Gradients follow the chain rule: ``dy'/dx' = dy/dx * width / std``.
    """
    X = archive.X()
    F = archive.F()
    mu = F.mean(axis=0)
    sd = F.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    U = bounds.to_unit(X)
    Y = (F - mu) / sd
    G = None
    if use_gradients:
        G = archive.G() * bounds.width[None, None, :] / sd[None, :, None]
    return U, Y, mu, sd, G


def _check_gradient_availability(data: Archive) -> bool:
    flags = {e.grad is not None for e in data}
    if len(flags) > 1:
        raise ValueError("either every archive entry carries a gradient or none does")
    return flags == {True}


def train(
    data: Archive,
    objective: int,
    cfg: TrainingConfig,
    rng: RngStream,
    bounds: BoxBounds,
    init: NetworkWeights | None = None,
) -> NetworkWeights:
    """Train the network for one objective on an archive; the Sobolev term is used iff gradients are present."""
    if len(data) < 2:
        raise ValueError("training needs at least 2 archive entries")
    use_grad = _check_gradient_availability(data)
    U, Y, _, _, G = scale_targets(data, bounds, use_grad)
    w, _ = train_network(U, Y[:, objective], None if G is None else G[:, objective, :], cfg, rng, init)
    return w


def fit_ensemble(
    data: Archive,
    bounds: BoxBounds,
    cfg: TrainingConfig,
    rng: RngStream,
    mc_samples: int = 20,
    previous: SurrogateEnsemble | None = None,
) -> SurrogateEnsemble:
    """Train all m objective networks; each gets the stream ``rng.child('objective-j')``."""
    if len(data) < 2:
        raise ValueError("training needs at least 2 archive entries")
    use_grad = _check_gradient_availability(data)
    U, Y, mu, sd, G = scale_targets(data, bounds, use_grad)
    t0 = time.perf_counter()
    models, losses = [], []
    for j in range(Y.shape[1]):
        init = previous.models[j] if (cfg.warm_start and previous is not None) else None
        w, hist = train_network(
            U, Y[:, j], None if G is None else G[:, j, :], cfg, rng.child(f"objective-{j}"), init
        )
        models.append(w)
        losses.append(hist)
    return SurrogateEnsemble(
        models, bounds, mu, sd, cfg.dropout_rate, mc_samples, losses, time.perf_counter() - t0
    )


# checkpoint files ------------------------------------------------------------

_CHECKPOINT_MAGIC = "# bsmobo-weights v1"


def save_weights(path: str | Path, w: NetworkWeights) -> None:
    """Text dump: a magic line, then per array a ``name rows cols`` header followed by its rows."""
    lines = [_CHECKPOINT_MAGIC]
    for f in fields(w):
        a = np.atleast_2d(getattr(w, f.name))
        lines.append(f"{f.name} {a.shape[0]} {a.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in a)
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path: str | Path) -> NetworkWeights:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a bsmobo weight checkpoint")
    arrays: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        name, rows, cols = lines[i].split()
        rows, cols = int(rows), int(cols)
        block = [np.array(lines[i + 1 + r].split(), dtype=float) for r in range(rows)]
        a = np.array(block).reshape(rows, cols)
        arrays[name] = a[0] if name in ("b1", "b2", "b3") else a
        i += 1 + rows
    return NetworkWeights(**arrays)

