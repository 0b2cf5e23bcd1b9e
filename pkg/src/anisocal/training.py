"""Sobolev losses, optimizers, restart selection and the identification loop."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache, partial
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np
from jax.flatten_util import ravel_pytree
from scipy.optimize import minimize

from .datagen import Dataset, split
from .energy import _consts, jresponse, jtransform, trainables
from .errors import Diverged, EmptyBatch, EmptyDataset, MissingTangent, NoModelPassed
from .invariants import jinvariants_c
from .network import COORD, ModelArtifact, fit_normalization, jgate, random_artifact, to_numpy
from .structure import SetKind, StructureSpec, Symmetry, classify, jrealize, param_bounds
from .tensors import VOIGT_PAIRS, jvoigt_tangent

log = logging.getLogger(__name__)

ACTIVE_THRESHOLD = 1e-3
IDENTIFY_ORDER = (SetKind.G2, SetKind.G4, SetKind.G6, SetKind.PAIR)
_VOIGT_SQ = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


@dataclass(frozen=True)
class LossWeights:
    psi: float = 0.0
    sigma: float = 0.7
    c: float = 0.3
    gate: float = 5e-5
    p: float = 0.25
    delta: float = 1e-6

    def __post_init__(self):
        for name in ("psi", "sigma", "c"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"weight {name} must lie in [0, 1]")
        if abs(self.psi + self.sigma + self.c - 1.0) > 1e-12:
            raise ValueError("prediction weights must sum to 1")
        if self.gate < 0 or self.p <= 0 or self.delta <= 0:
            raise ValueError("need gate >= 0, p > 0, delta > 0")

    @property
    def uses_tangent(self) -> bool:
        return self.c > 0


@dataclass(frozen=True)
class AdamConfig:
    lr0: float = 0.01
    decay: float = 1.0 / 3.0
    decay_epochs: float = 500.0
    epochs: int = 2000
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def lr(self, epoch: int) -> float:
        return self.lr0 * self.decay ** (epoch / self.decay_epochs)


@dataclass(frozen=True)
class QNConfig:
    max_iter: int = 500
    gtol: float = 1e-12
    ftol: float = 1e-15


@dataclass(frozen=True)
class TrainConfig:
    restarts: int = 5
    adam: AdamConfig = field(default_factory=AdamConfig)
    qn: QNConfig = field(default_factory=QNConfig)
    seed: int = 0
    split_ratio: float = 0.7
    hidden: tuple | None = None
    lambda_gr: float = 0.01
    workers: int = 1
    q_init: float = 1.0

    def __post_init__(self):
        if self.restarts < 1 or self.adam.epochs < 0 or self.adam.batch_size < 1 or self.qn.max_iter < 0:
            raise ValueError("restarts, epochs, batch size and iterations must be positive")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split ratio must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = None if self.hidden is None else list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        adam = AdamConfig(**d.pop("adam", {}))
        qn = QNConfig(**d.pop("qn", {}))
        if d.get("hidden") is not None:
            d["hidden"] = tuple(d["hidden"])
        return cls(adam=adam, qn=qn, **d)

    def digest(self) -> str:
        # worker count does not change results, so it stays out of the digest
        d = {k: v for k, v in self.to_dict().items() if k != "workers"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class LossNorms:
    psi: float
    sigma: float
    c: float

    @classmethod
    def fit(cls, data: Dataset) -> "LossNorms":
        if len(data) == 0:
            raise EmptyDataset("cannot fit loss normalization on an empty set")
        psi = float(np.max(data.psi**2))
        sig = float(np.max(np.sum(_VOIGT_SQ * data.sigma**2, axis=1))) / 9.0
        c = float(np.max(np.sum(data.c**2, axis=(1, 2)))) / 36.0 if data.c is not None else 1.0
        return cls(*(v if v > 0 else 1.0 for v in (psi, sig, c)))


@dataclass
class ErrorReport:
    kind: str
    eps_psi: float
    eps_sigma: float
    eps_c: float
    losses: dict
    active_gates: list
    symmetry: dict | None = None
    restarts: list = field(default_factory=list)
    error_split: str = "full"
    test_errors: dict | None = None
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def passes(self, eps_tol: float, with_tangent: bool) -> bool:
        errs = [self.eps_psi, self.eps_sigma] + ([self.eps_c] if with_tangent else [])
        return all(np.isfinite(e) and e < 100.0 * eps_tol for e in errs)


# ---------------------------------------------------------------------------
# Losses


def batch_arrays(data: Dataset, need_tangent: bool) -> dict:
    if len(data) == 0:
        raise EmptyBatch("empty batch")
    if need_tangent and data.c is None:
        raise MissingTangent("tangent loss requested but records carry no tangent")
    out = {
        "F": jnp.asarray(data.F),
        "psi": jnp.asarray(data.psi),
        "sigma": jnp.asarray(data.sigma),
    }
    if need_tangent:
        out["c"] = jnp.asarray(data.c)
    return out


def gate_loss(g, p: float, delta: float):
    n = g.shape[0]
    return jnp.sum((g + delta) ** p) ** (1.0 / p) / (n * (1.0 + delta) ** p) ** (1.0 / p)


def penalty_gates(q, gamma, eps):
    """Gate values for the sparsity penalty.

    Values equal the clamped gates; the derivative is that of the unclamped
    ``gamma tanh(eps q)`` so the penalty can still pull a saturated gate back
    below the clamp. The prediction path keeps the zero clamp derivative.
    """
    raw = gamma * jnp.tanh(eps * q)
    return raw + jax.lax.stop_gradient(jnp.minimum(1.0, raw) - raw)


def _predict(kind, tr, consts, F, order):
    psi, P, A = jresponse(kind, tr, consts, F, order)
    if order >= 2:
        sigma, c, _, _ = jtransform(F, P, A)
        cv = jvoigt_tangent(c)
    else:
        sigma = P @ F.T / jnp.linalg.det(F)
        cv = jnp.zeros((6, 6))
    idx = np.array(VOIGT_PAIRS)
    return psi, sigma[idx[:, 0], idx[:, 1]], cv


def _loss_terms(kind, order, weights, tr, consts, batch, norms):
    pred = jax.vmap(partial(_predict, kind, order=order), in_axes=(None, None, 0))
    psi, sig, cv = pred(tr, consts, batch["F"])
    l_psi = jnp.mean((psi - batch["psi"]) ** 2) / norms[0]
    l_sig = jnp.mean(jnp.sum(_VOIGT_SQ * (sig - batch["sigma"]) ** 2, axis=1)) / 9.0 / norms[1]
    if order >= 2:
        l_c = jnp.mean(jnp.sum((cv - batch["c"]) ** 2, axis=(1, 2))) / 36.0 / norms[2]
    else:
        l_c = jnp.zeros(())
    l_pred = weights.psi * l_psi + weights.sigma * l_sig + weights.c * l_c
    if kind == COORD:
        l_gate = jnp.zeros(())
    else:
        l_gate = gate_loss(penalty_gates(tr["q"], consts["gamma"], consts["eps"]), weights.p, weights.delta)
    total = l_pred + weights.gate * l_gate
    return {"psi": l_psi, "sigma": l_sig, "c": l_c, "gate": l_gate, "pred": l_pred, "total": total}


def _order(weights: LossWeights) -> int:
    return 2 if weights.uses_tangent else 1


@lru_cache(maxsize=None)
def _loss_fn(kind: str, order: int, weights: LossWeights):
    return jax.jit(partial(_loss_terms, kind, order, weights))


@lru_cache(maxsize=None)
def _value_grad_fn(kind: str, order: int, weights: LossWeights):
    def total(tr, consts, batch, norms):
        terms = _loss_terms(kind, order, weights, tr, consts, batch, norms)
        return terms["total"], terms

    return jax.jit(jax.value_and_grad(total, has_aux=True))


def _norm_vec(norms: LossNorms):
    return jnp.asarray([norms.psi, norms.sigma, norms.c])


def losses(model: ModelArtifact, batch: Dataset, norms: LossNorms, weights: LossWeights, order: int | None = None) -> dict:
    """All loss terms of a model on a batch (as floats)."""
    order = _order(weights) if order is None else order
    arrays = batch_arrays(batch, order >= 2)
    terms = _loss_fn(model.kind, order, weights)(trainables(model), _consts(model), arrays, _norm_vec(norms))
    return {k: float(v) for k, v in terms.items()}


def loss_gradient(model: ModelArtifact, batch: Dataset, norms: LossNorms, weights: LossWeights) -> dict:
    """Exact gradient of the total loss over network, structure and gate parameters."""
    order = _order(weights)
    arrays = batch_arrays(batch, order >= 2)
    (_, _), grad = _value_grad_fn(model.kind, order, weights)(
        trainables(model), _consts(model), arrays, _norm_vec(norms)
    )
    return jax.tree_util.tree_map(np.asarray, grad)


# ---------------------------------------------------------------------------
# Parameter boxes


def _box(model: ModelArtifact):
    """Lower/upper bound pytrees matching ``trainables(model)``."""
    tr = trainables(model)
    lo = jax.tree_util.tree_map(lambda a: jnp.full_like(a, -jnp.inf), tr)
    hi = jax.tree_util.tree_map(lambda a: jnp.full_like(a, jnp.inf), tr)
    lo["q"] = jnp.zeros_like(tr["q"])
    hi["q"] = jnp.ones_like(tr["q"])
    if not model.is_coord:
        plo, phi = param_bounds(SetKind(model.kind))
        lo["m"], hi["m"] = jnp.asarray(plo), jnp.asarray(phi)
    lo["pnn"]["out_w"] = jnp.zeros_like(tr["pnn"]["out_w"])
    lo["pnn"]["out_b"] = jnp.zeros_like(tr["pnn"]["out_b"])
    return lo, hi


def project(tr, lo, hi):
    return jax.tree_util.tree_map(jnp.clip, tr, lo, hi)


def in_box(tr, lo, hi) -> bool:
    ok = jax.tree_util.tree_map(lambda a, l, h: bool(jnp.all((a >= l) & (a <= h))), tr, lo, hi)
    return all(jax.tree_util.tree_leaves(ok))


def _with_trainables(model: ModelArtifact, tr) -> ModelArtifact:
    return model.with_updates(
        pnn=to_numpy(tr["pnn"]),
        q=np.asarray(tr["q"], dtype=float),
        structure_params=np.asarray(tr["m"], dtype=float),
    )


# ---------------------------------------------------------------------------
# Optimizers


@lru_cache(maxsize=None)
def _adam_step_fn(kind: str, order: int, weights: LossWeights, b1: float, b2: float, eps: float):
    vg = _value_grad_fn(kind, order, weights)

    def step(tr, m, v, t, lr, consts, batch, norms, lo, hi):
        (_, terms), g = vg(tr, consts, batch, norms)
        m = jax.tree_util.tree_map(lambda a, b: b1 * a + (1 - b1) * b, m, g)
        v = jax.tree_util.tree_map(lambda a, b: b2 * a + (1 - b2) * b * b, v, g)
        mc = 1.0 - b1**t
        vc = 1.0 - b2**t
        tr = jax.tree_util.tree_map(lambda p, a, b: p - lr * (a / mc) / (jnp.sqrt(b / vc) + eps), tr, m, v)
        return project(tr, lo, hi), m, v, terms

    return jax.jit(step)


def _active(model_or_q, gamma=None, eps=None) -> np.ndarray:
    if isinstance(model_or_q, ModelArtifact):
        return model_or_q.gates() > ACTIVE_THRESHOLD
    return np.asarray(jgate(jnp.asarray(model_or_q), gamma, eps)) > ACTIVE_THRESHOLD


def adam_train(model, cal: Dataset, norms, weights, cfg: AdamConfig, rng, history=None, restart=0):
    """Mini-batch Adam with exponential learning-rate decay and box projection."""
    order = _order(weights)
    tr = trainables(model)
    consts = _consts(model)
    lo, hi = _box(model)
    tr = project(tr, lo, hi)
    step = _adam_step_fn(model.kind, order, weights, cfg.beta1, cfg.beta2, cfg.eps)
    m = jax.tree_util.tree_map(jnp.zeros_like, tr)
    v = jax.tree_util.tree_map(jnp.zeros_like, tr)
    arrays = batch_arrays(cal, order >= 2)
    n = len(cal)
    bs = min(cfg.batch_size, n)
    nv = _norm_vec(norms)
    t = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        lr = cfg.lr(epoch)
        acc = {"total": 0.0, "pred": 0.0, "gate": 0.0}
        nb = 0
        for start in range(0, n - bs + 1, bs):
            idx = jnp.asarray(np.sort(perm[start : start + bs]))
            batch = jax.tree_util.tree_map(lambda a: a[idx], arrays)
            t += 1
            tr, m, v, terms = step(tr, m, v, float(t), lr, consts, batch, nv, lo, hi)
            for k in acc:
                acc[k] += float(terms[k])
            nb += 1
        if not math.isfinite(acc["total"]):
            raise Diverged(f"non-finite loss in epoch {epoch}")
        if history is not None:
            history.append(
                {
                    "restart": restart,
                    "phase": "adam",
                    "epoch": epoch,
                    "L": acc["total"] / nb,
                    "L_pred": acc["pred"] / nb,
                    "L_gate": acc["gate"] / nb,
                    "active_gates": int(_active(tr["q"], model.gamma, model.eps).sum()) if not model.is_coord else 6,
                }
            )
    return _with_trainables(model, tr)


def qn_train(model, cal: Dataset, norms, weights, cfg: QNConfig, history=None, restart=0, epoch0=0):
    """Box-constrained L-BFGS on the full calibration set."""
    if cfg.max_iter == 0:
        return model
    order = _order(weights)
    tr = trainables(model)
    consts = _consts(model)
    lo, hi = _box(model)
    flat0, unravel = ravel_pytree(project(tr, lo, hi))
    lo_flat = np.asarray(ravel_pytree(lo)[0])
    hi_flat = np.asarray(ravel_pytree(hi)[0])
    bounds = [(None if np.isinf(a) else a, None if np.isinf(b) else b) for a, b in zip(lo_flat, hi_flat)]
    arrays = batch_arrays(cal, order >= 2)
    nv = _norm_vec(norms)
    vg = _value_grad_fn(model.kind, order, weights)
    it = [0]

    def fun(x):
        (val, terms), g = vg(unravel(jnp.asarray(x)), consts, arrays, nv)
        val = float(val)
        if not math.isfinite(val):
            return 1e300, np.zeros_like(x)
        return val, np.asarray(ravel_pytree(g)[0], dtype=float)

    def callback(xk):
        it[0] += 1
        if history is not None and it[0] % 10 == 0:
            terms = _loss_fn(model.kind, order, weights)(unravel(jnp.asarray(xk)), consts, arrays, nv)
            history.append(
                {
                    "restart": restart,
                    "phase": "qn",
                    "epoch": epoch0 + it[0],
                    "L": float(terms["total"]),
                    "L_pred": float(terms["pred"]),
                    "L_gate": float(terms["gate"]),
                    "active_gates": int(_active(unravel(jnp.asarray(xk))["q"], model.gamma, model.eps).sum())
                    if not model.is_coord
                    else 6,
                }
            )

    res = minimize(
        fun,
        np.asarray(flat0, dtype=float),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        callback=callback,
        options={"maxiter": cfg.max_iter, "gtol": cfg.gtol, "ftol": cfg.ftol, "maxcor": 20},
    )
    x = np.clip(res.x, lo_flat, hi_flat)
    if not np.all(np.isfinite(x)) or not math.isfinite(float(res.fun)):
        raise Diverged("quasi-Newton stage produced non-finite parameters")
    return _with_trainables(model, unravel(jnp.asarray(x)))


# ---------------------------------------------------------------------------
# Initialization, pruning and selection


def model_inputs(model: ModelArtifact, Fs: np.ndarray) -> np.ndarray:
    """Network inputs (invariants, or C coordinates) for a batch of F."""
    C = jnp.einsum("nkI,nkJ->nIJ", jnp.asarray(Fs), jnp.asarray(Fs))
    if model.is_coord:
        pairs = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
        return np.stack([np.asarray(C[:, i, j]) for i, j in pairs], axis=1)
    kind = SetKind(model.kind)
    tensors = jrealize(kind, jnp.asarray(model.structure_params))
    f = jax.vmap(lambda c: jinvariants_c(kind, c, tensors, 0)[0])
    return np.asarray(f(C))


def init_model(kind: str, cal: Dataset, rng: np.random.Generator, cfg: TrainConfig) -> ModelArtifact:
    """Random artifact with normalization fitted on the calibration data."""
    model = random_artifact(kind, rng, cfg.hidden, lambda_gr=cfg.lambda_gr)
    if not model.is_coord:
        model = model.with_updates(q=np.full(model.n_inputs, cfg.q_init))
    norm = fit_normalization(model_inputs(model, cal.F), cal.psi)
    return model.with_updates(norm=norm)


def prune(model: ModelArtifact) -> ModelArtifact:
    if model.is_coord:
        return model
    q = np.where(model.gates() < ACTIVE_THRESHOLD, 0.0, model.q)
    return model.with_updates(q=q)


def n_active(model: ModelArtifact) -> int:
    return int(np.sum(model.gates() > ACTIVE_THRESHOLD)) if not model.is_coord else 6


def select_restart(records: list[dict]) -> int:
    """Index of the restart minimizing ``L_pred / active``; failed restarts are skipped."""
    best, best_val = None, math.inf
    for i, rec in enumerate(records):
        if rec.get("failed"):
            continue
        val = rec["L_pred"] / max(rec["active"], 1)
        if val < best_val:
            best, best_val = i, val
    if best is None:
        raise Diverged("every restart diverged")
    return best


# ---------------------------------------------------------------------------
# Error measures


def error_measures(model: ModelArtifact, data: Dataset) -> tuple[float, float, float]:
    """Relative errors in energy, stress and tangent, in percent."""
    if len(data) == 0:
        raise EmptyDataset("cannot evaluate errors on an empty dataset")
    order = 2 if data.c is not None else 1
    pred = jax.jit(jax.vmap(partial(_predict, model.kind, order=order), in_axes=(None, None, 0)))
    psi, sig, cv = (np.asarray(a) for a in pred(trainables(model), _consts(model), jnp.asarray(data.F)))

    def sig_norm(v):
        return np.sqrt(np.sum(_VOIGT_SQ * v**2, axis=1))

    e_psi = np.sum(np.abs(psi - data.psi)) / max(np.sum(np.abs(data.psi)), 1e-300)
    e_sig = np.sum(sig_norm(sig - data.sigma)) / max(np.sum(sig_norm(data.sigma)), 1e-300)
    if data.c is None:
        e_c = math.nan
    else:
        num = np.sum(np.sqrt(np.sum((cv - data.c) ** 2, axis=(1, 2))))
        e_c = num / max(np.sum(np.sqrt(np.sum(data.c**2, axis=(1, 2)))), 1e-300)
    return 100.0 * float(e_psi), 100.0 * float(e_sig), 100.0 * float(e_c)


# ---------------------------------------------------------------------------
# Training driver


def _structure_label(model: ModelArtifact) -> dict | None:
    if model.is_coord:
        return None
    # the first three inputs never depend on the structure tensors
    if not np.any(model.gates()[3:] > ACTIVE_THRESHOLD):
        return {"group": Symmetry.ISOTROPIC.value, "diagnostics": {"reason": "no structure-dependent invariant active"}}
    try:
        return classify(StructureSpec(SetKind(model.kind), model.structure_params)).to_dict()
    except Exception as exc:  # degenerate structures still deserve a report
        return {"group": "unclassified", "error": str(exc)}


def _one_restart(kind, cal, norms, weights, cfg, seed, restart):
    rng = np.random.default_rng(seed)
    history: list = []
    try:
        model = init_model(kind, cal, rng, cfg)
        model = adam_train(model, cal, norms, weights, cfg.adam, rng, history, restart)
        model = qn_train(model, cal, norms, weights, cfg.qn, history, restart, cfg.adam.epochs)
        terms = losses(model, cal, norms, weights)
        if not math.isfinite(terms["total"]):
            raise Diverged("non-finite final loss")
    except Diverged as exc:
        log.warning("restart %d diverged: %s", restart, exc)
        return None, {"restart": restart, "seed": seed, "failed": True, "reason": str(exc)}, history
    rec = {"restart": restart, "seed": seed, "failed": False, "L_pred": terms["pred"], "L": terms["total"], "active": n_active(model)}
    return model, rec, history


def train(
    kind: str,
    cal: Dataset,
    config: TrainConfig = TrainConfig(),
    weights: LossWeights = LossWeights(),
    test: Dataset | None = None,
    error_data: Dataset | None = None,
    log_path=None,
) -> tuple[ModelArtifact, ErrorReport]:
    """Multi-restart training of one model kind on calibration data."""
    kind = kind.value if isinstance(kind, SetKind) else str(kind)
    if len(cal) == 0:
        raise EmptyDataset("calibration set is empty")
    if weights.uses_tangent and cal.c is None:
        raise MissingTangent("tangent loss requested but records carry no tangent")
    if kind == COORD and weights.gate:
        weights = replace(weights, gate=0.0)
    norms = LossNorms.fit(cal)
    seeds = np.random.SeedSequence(config.seed).generate_state(config.restarts).tolist()
    run = partial(_one_restart, kind, cal, norms, weights, config)
    if config.workers > 1 and config.restarts > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, seeds, range(config.restarts)))
    else:
        results = [run(s, r) for s, r in zip(seeds, range(config.restarts))]
    records = [r[1] for r in results]
    history = [h for r in results for h in r[2]]
    best = select_restart(records)
    model = results[best][0]
    before = records[best]["L_pred"]
    model = prune(model)
    after = losses(model, cal, norms, weights)["pred"]
    if after - before > 1e-6:
        log.warning("pruning raised L_pred by %.3g", after - before)
    model = model.with_updates(
        meta={
            "seed": config.seed,
            "restart": best,
            "restart_seed": records[best]["seed"],
            "train_config": config.digest(),
            "loss_norms": asdict(norms),
            "weights": asdict(weights),
        }
    )
    loss_table = {"cal": losses(model, cal, norms, weights)}
    test_errors = None
    if test is not None and len(test):
        loss_table["test"] = losses(model, test, norms, weights, order=2 if test.c is not None and cal.c is not None else 1)
        test_errors = dict(zip(("eps_psi", "eps_sigma", "eps_c"), error_measures(model, test)))
    err_set = error_data if error_data is not None else cal
    e_psi, e_sig, e_c = error_measures(model, err_set)
    report = ErrorReport(
        kind=kind,
        eps_psi=e_psi,
        eps_sigma=e_sig,
        eps_c=e_c,
        losses=loss_table,
        active_gates=[int(a) for a in (model.gates() > ACTIVE_THRESHOLD)],
        symmetry=_structure_label(model),
        restarts=records,
        test_errors=test_errors,
    )
    if log_path is not None:
        write_log(history, log_path, append=True)
    report.history = history
    return model, report


def write_log(history: list[dict], path, append: bool = False) -> None:
    with open(Path(path), "a" if append else "w") as fh:
        for rec in history:
            fh.write(json.dumps(rec) + "\n")


def identify(
    dataset: Dataset,
    config: TrainConfig = TrainConfig(),
    weights: LossWeights = LossWeights(),
    eps_tol: float = 0.01,
    extrapolation: bool = False,
    test: Dataset | None = None,
    kinds=IDENTIFY_ORDER,
    log_path=None,
) -> tuple[ModelArtifact, ErrorReport]:
    """Train structure-tensor models of increasing order until errors drop below ``eps_tol``.

    In interpolation mode the dataset is split into calibration/test parts and
    errors are measured on the full dataset. In extrapolation mode the whole
    dataset calibrates, errors are measured on it, and ``test`` (if given) is
    only reported.
    """
    if len(dataset) == 0:
        raise EmptyDataset("dataset is empty")
    if extrapolation:
        cal, err_set, error_split = dataset, dataset, "calibration"
    else:
        cal, test = split(dataset, config.split_ratio, config.seed)
        err_set, error_split = dataset, "full"
    if log_path is not None:
        Path(log_path).write_text("")
    tried = []
    best = None
    for kind in kinds:
        model, report = train(kind, cal, config, weights, test=test, error_data=err_set, log_path=log_path)
        report.error_split = error_split
        tried.append({"kind": report.kind, "eps_psi": report.eps_psi, "eps_sigma": report.eps_sigma, "eps_c": report.eps_c})
        log.info("identify %s: eps = %.3g / %.3g / %.3g %%", report.kind, report.eps_psi, report.eps_sigma, report.eps_c)
        score = max(report.eps_psi, report.eps_sigma, report.eps_c if weights.uses_tangent else 0.0)
        if best is None or score < best[0]:
            best = (score, model, report)
        if report.passes(eps_tol, weights.uses_tangent):
            report.losses["tried"] = tried
            return model, report
    _, model, report = best
    report.losses["tried"] = tried
    raise NoModelPassed(f"no structure-tensor set reached eps_tol = {eps_tol:g}", model=model, report=report)
