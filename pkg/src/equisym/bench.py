"""Matrix-inversion benchmark: learn A -> A^-1 with O(d)-equivariant models.

O(d) acts on inputs by left multiplication and on outputs by right
multiplication by the transpose, so the target map is equivariant:
(QA)^-1 = A^-1 Q^T.  Four model variants are provided:

- plain_mlp: unconstrained MLP, no symmetrisation
- sym_haar: symmetrised with gamma = Haar on O(d)
- sym_recursive: gamma itself symmetrised from an unconstrained
  noise-fed MLP projected onto O(d) by Gram-Schmidt, with a Haar base case
- canonical_deterministic: deterministic gamma = Gram-Schmidt of the input

Training minimizes the Jensen upper bound: one reparameterised draw per
sample, loss l(y, yhat) = ||y^-1 yhat - I||_F, averaged over the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import nn
from .stochmap import RandomStream

VARIANTS = ("plain_mlp", "sym_haar", "sym_recursive", "canonical_deterministic")


class ConfigurationError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass
class TaskSample:
    X: np.ndarray
    Y: np.ndarray  # = X^-1


@dataclass
class TrainConfig:
    d: int = 2
    variant: str = "sym_haar"
    hidden: int = 64
    steps: int = 20000
    batch_size: int = 128
    lr: float = 1e-4
    n_mc_eval: int = 100
    seed: int = 0
    condition_cap: float = 1e4
    n_test: int = 512

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}"
            )
        for name in ("d", "hidden", "steps", "batch_size", "n_mc_eval", "n_test"):
            if getattr(self, name) < 0 or (name in ("d", "hidden", "batch_size") and getattr(self, name) == 0):
                raise ConfigurationError(f"config field {name} must be positive")
        if self.lr <= 0 or self.condition_cap <= 0:
            raise ConfigurationError("lr and condition_cap must be positive")


# ---------------------------------------------------------------------------
# Data


def _haar_batch(d: int, B: int, stream: RandomStream) -> np.ndarray:
    """Stack of B Haar-distributed O(d) matrices (QR sign-fix construction)."""
    M = stream.normal((B, d, d))
    Q, R = np.linalg.qr(M)
    signs = np.sign(np.einsum("bii->bi", R))
    signs[signs == 0] = 1.0
    return Q * signs[:, None, :]


def sample_batch(d: int, B: int, stream: RandomStream,
                 condition_cap: float = 1e4) -> Tuple[np.ndarray, np.ndarray]:
    """B Gaussian matrices with cond <= cap, plus their inverses."""
    X = np.empty((B, d, d))
    filled = 0
    rejections = 0
    while filled < B:
        cand = stream.normal((B - filled, d, d))
        conds = np.linalg.cond(cand)
        ok = cand[conds <= condition_cap]
        if len(ok) == 0:
            rejections += 1
            if rejections >= 100:
                raise ConfigurationError(
                    f"condition cap {condition_cap} rejected 100 batches in a row"
                )
        else:
            rejections = 0
        X[filled:filled + len(ok)] = ok
        filled += len(ok)
    Y = np.linalg.inv(X)
    return X, Y


def sample_task(d: int, stream: RandomStream, condition_cap: float = 1e4) -> TaskSample:
    X, Y = sample_batch(d, 1, stream, condition_cap)
    return TaskSample(X=X[0], Y=Y[0])


def loss(y: np.ndarray, yhat: np.ndarray) -> float:
    """l(y, yhat) = ||y^-1 yhat - I||_F; zero iff yhat = y."""
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.det(y)) <= 1e-12:
        raise np.linalg.LinAlgError("loss target is singular")
    d = y.shape[0]
    return float(np.linalg.norm(np.linalg.solve(y, yhat) - np.eye(d)))


def _batch_losses(Yinv: np.ndarray, Yhat: np.ndarray) -> np.ndarray:
    """Losses for a batch given the precomputed inverses Yinv = y^-1 (= X)."""
    d = Yinv.shape[-1]
    R = Yinv @ Yhat - np.eye(d)
    return np.linalg.norm(R, axis=(1, 2))


# ---------------------------------------------------------------------------
# Models


@dataclass
class InversionModel:
    variant: str
    d: int
    hidden: int = 64
    gs_retries: int = 3
    k_sizes: Tuple[int, ...] = field(init=False)
    g0_sizes: Optional[Tuple[int, ...]] = field(init=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        dd = self.d * self.d
        self.k_sizes = (dd, self.hidden, self.hidden, dd)
        self.g0_sizes = (dd + self.d, self.hidden, dd) if self.variant == "sym_recursive" else None

    @property
    def deterministic(self) -> bool:
        return self.variant in ("plain_mlp", "canonical_deterministic")

    def init(self, stream: RandomStream) -> List[np.ndarray]:
        params = nn.init_mlp(self.k_sizes, stream.split(0)).as_list()
        if self.g0_sizes is not None:
            params += nn.init_mlp(self.g0_sizes, stream.split(1)).as_list()
        return params

    def _split_params(self, params):
        n_k = 2 * (len(self.k_sizes) - 1)
        pk = nn.MlpParams.from_list(self.k_sizes, params[:n_k])
        pg = None
        if self.g0_sizes is not None:
            pg = nn.MlpParams.from_list(self.g0_sizes, params[n_k:])
        return pk, pg

    # -- coset draw -------------------------------------------------------

    def _draw_coset(self, pg, X, stream: RandomStream, couple=None):
        """One gamma draw per batch row; returns (C, cache or None).

        With couple=Q, X is expected to already be Q.X and the Haar base
        draws are premultiplied by Q, realizing the coupling G -> QG.
        """
        B, d = X.shape[0], self.d
        if self.variant == "plain_mlp":
            return None, None
        if self.variant == "canonical_deterministic":
            Q, cache = nn.gram_schmidt_forward(X)
            return Q, None  # no gradient flows into gamma here
        if self.variant == "sym_haar":
            C = _haar_batch(d, B, stream.split(0))
            return (C if couple is None else couple @ C), None
        # sym_recursive: C = C1 * GS(nn_g0([flat(C1^T X); eta]))
        C1 = _haar_batch(d, B, stream.split(0))
        if couple is not None:
            C1 = couple @ C1
        Z1 = np.transpose(C1, (0, 2, 1)) @ X
        for attempt in range(self.gs_retries):
            eta = stream.split(1 + attempt).normal((B, d))
            inp = np.concatenate([Z1.reshape(B, d * d), eta], axis=1)
            U_flat, mlp_cache = nn.mlp_forward(pg, inp)
            U = U_flat.reshape(B, d, d)
            sv = np.linalg.svd(U, compute_uv=False)
            if np.all(sv[:, -1] > 1e-10 * sv[:, 0]):
                break
        else:
            raise nn.DegenerateProjectionError(
                "gamma backbone produced near-singular output on every retry"
            )
        Qu, gs_cache = nn.gram_schmidt_forward(U)
        C = C1 @ Qu
        cache = {"C1": C1, "Qu": Qu, "mlp_cache": mlp_cache, "gs_cache": gs_cache}
        return C, cache

    # -- forward ----------------------------------------------------------

    def draw(self, params, X, stream: RandomStream, couple=None) -> np.ndarray:
        """One reparameterised prediction per batch row.

        couple=Q evaluates at Q.X with the Haar base draws coupled G -> QG,
        which makes the draw exactly equal Q . (draw at X) for the
        symmetrised variants.
        """
        pk, pg = self._split_params(params)
        B, d = X.shape[0], self.d
        if couple is not None:
            X = couple @ X
        C, _ = self._draw_coset(pg, X, stream, couple=couple)
        if C is None:
            A, _ = nn.mlp_forward(pk, X.reshape(B, d * d))
            return A.reshape(B, d, d)
        Z = np.transpose(C, (0, 2, 1)) @ X
        A, _ = nn.mlp_forward(pk, Z.reshape(B, d * d))
        A = A.reshape(B, d, d)
        return A @ np.transpose(C, (0, 2, 1))

    def predict(self, params, X, n_mc: int, stream: RandomStream, couple=None) -> np.ndarray:
        """Averaged predictor: mean over n_mc draws (1 draw if deterministic)."""
        n = 1 if self.deterministic else n_mc
        acc = None
        for i in range(n):
            y = self.draw(params, X, stream.split(i), couple=couple)
            acc = y if acc is None else acc + y
        return acc / n

    # -- forward + backward ----------------------------------------------

    def objective_and_grads(self, params, X, Yinv, stream: RandomStream):
        """Jensen objective (one draw per sample) and exact parameter grads."""
        pk, pg = self._split_params(params)
        B, d = X.shape[0], self.d
        C, coset_cache = self._draw_coset(pg, X, stream)
        if C is None:
            Z = X
        else:
            Z = np.transpose(C, (0, 2, 1)) @ X
        A_flat, k_cache = nn.mlp_forward(pk, Z.reshape(B, d * d))
        A = A_flat.reshape(B, d, d)
        Yhat = A if C is None else A @ np.transpose(C, (0, 2, 1))

        losses = _batch_losses(Yinv, Yhat)
        if not np.all(np.isfinite(losses)):
            bad = int(np.argmax(~np.isfinite(losses)))
            raise DivergenceError(f"non-finite loss at batch index {bad}")
        objective = float(losses.mean())

        # dl/dYhat for l = ||Yinv Yhat - I||_F, averaged over the batch
        R = Yinv @ Yhat - np.eye(d)
        denom = np.where(losses > 1e-30, losses, 1.0)
        dYhat = np.transpose(Yinv, (0, 2, 1)) @ R / denom[:, None, None] / B

        if C is None:
            dA = dYhat
        else:
            dA = dYhat @ C
        grads_k, dZ_flat = nn.mlp_backward(pk, k_cache, dA.reshape(B, d * d))
        grads = grads_k

        if self.variant == "sym_recursive":
            # Yhat = A C^T and Z = C^T X both depend on C = C1 Qu
            dC = np.transpose(dYhat, (0, 2, 1)) @ A
            dZ = dZ_flat.reshape(B, d, d)
            dC += X @ np.transpose(dZ, (0, 2, 1))
            dQu = np.transpose(coset_cache["C1"], (0, 2, 1)) @ dC
            dU = nn.gram_schmidt_backward(coset_cache["gs_cache"], dQu)
            grads_g0, _ = nn.mlp_backward(
                pg, coset_cache["mlp_cache"], dU.reshape(B, d * d)
            )
            grads = grads_k + grads_g0

        return objective, grads


def jensen_objective(model: InversionModel, params, X, Yinv, stream: RandomStream):
    """Monte Carlo Jensen upper bound on the batch plus its gradient record."""
    if len(X) == 0:
        raise ValueError("jensen_objective needs a nonempty batch")
    return model.objective_and_grads(params, X, Yinv, stream)


# ---------------------------------------------------------------------------
# Training and evaluation


@dataclass
class TrainResult:
    config: TrainConfig
    params: List[np.ndarray]
    history: List[Tuple[int, float]]
    diverged: bool = False


def train(config: TrainConfig) -> TrainResult:
    """Fresh batch every step (no finite dataset); deterministic given seed."""
    model = InversionModel(config.variant, config.d, config.hidden)
    root = RandomStream(config.seed)
    params = model.init(root.split(0))
    state = nn.adam_init(params)
    history: List[Tuple[int, float]] = []
    for step in range(config.steps):
        s = root.split(1).split(step)
        X, _ = sample_batch(config.d, config.batch_size, s.split(0), config.condition_cap)
        try:
            objective, grads = model.objective_and_grads(params, X, X, s.split(1))
        except DivergenceError:
            return TrainResult(config, params, history, diverged=True)
        if not np.isfinite(objective) or objective > 1e6:
            return TrainResult(config, params, history, diverged=True)
        params, state = nn.adam_step(params, grads, state, config.lr)
        history.append((step + 1, objective))
    return TrainResult(config, params, history)


def equivariance_gap(model: InversionModel, params, x: np.ndarray, Q: np.ndarray,
                     stream: RandomStream, n_mc: int = 16) -> float:
    """||f(Qx) - f(x) Q^T||_F / (1 + ||f(x)||_F) under the Haar coupling.

    Both evaluations reuse the same base draws, with the Haar samples of
    the symmetrised variants premultiplied by Q; for symmetrised models the
    identity holds pointwise up to float error.
    """
    Q = np.asarray(Q, dtype=float)
    if np.linalg.norm(Q.T @ Q - np.eye(Q.shape[0])) > 1e-9:
        raise ValueError("equivariance_gap requires an orthogonal Q")
    X = x[None]
    f1 = model.predict(params, X, n_mc, stream)[0]
    f2 = model.predict(params, X, n_mc, stream, couple=Q)[0]
    return float(np.linalg.norm(f2 - f1 @ Q.T) / (1.0 + np.linalg.norm(f1)))


def evaluate(model: InversionModel, params, n_test: int, n_mc: int,
             stream: RandomStream, condition_cap: float = 1e4,
             n_gap_pairs: int = 100) -> Tuple[float, float]:
    """Mean MC-averaged test loss and mean coupled equivariance gap."""
    X, _ = sample_batch(model.d, n_test, stream.split(0), condition_cap)
    Yhat = model.predict(params, X, n_mc, stream.split(1))
    mean_loss = float(_batch_losses(X, Yhat).mean())

    gaps = []
    gap_stream = stream.split(2)
    n_pairs = min(n_gap_pairs, n_test)
    Qs = _haar_batch(model.d, n_pairs, gap_stream.split(0))
    for i in range(n_pairs):
        gaps.append(
            equivariance_gap(model, params, X[i], Qs[i], gap_stream.split(1 + i),
                             n_mc=min(n_mc, 16))
        )
    return mean_loss, float(np.mean(gaps))


# ---------------------------------------------------------------------------
# Artifacts


def write_history_csv(path: str, history: List[Tuple[int, float]]) -> None:
    with open(path, "w") as fh:
        fh.write("step,objective\n")
        for step, obj in history:
            fh.write("%d,%.17g\n" % (step, obj))


def write_summary(path: str, variant: str, d: int, final_loss: float,
                  equiv_gap: float, seed: int) -> None:
    summary = {
        "variant": variant,
        "d": d,
        "final_loss": final_loss,
        "equiv_gap": equiv_gap,
        "seed": seed,
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def run_experiment(config: TrainConfig) -> dict:
    """Train one variant and evaluate it; returns the summary fields."""
    result = train(config)
    model = InversionModel(config.variant, config.d, config.hidden)
    eval_stream = RandomStream(config.seed).split(2)
    mean_loss, gap = evaluate(
        model, result.params, config.n_test, config.n_mc_eval, eval_stream,
        config.condition_cap,
    )
    return {
        "variant": config.variant,
        "d": config.d,
        "seed": config.seed,
        "final_loss": mean_loss,
        "equiv_gap": gap,
        "history": result.history,
        "params": result.params,
        "diverged": result.diverged,
    }
