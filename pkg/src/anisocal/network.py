"""Normalization layers, gate layer, positive network and model files.

The network maps invariants to energy as ``out_norm(pnn(gate(in_norm(I))))``.
The positive network uses softplus hidden layers and a non-negative output
layer, so its value is non-negative for any input. Values, input gradients and
input Hessians are propagated layer by layer in closed form.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import jax
import jax.numpy as jnp
import numpy as np

from .errors import CorruptPayload, EmptyData, SchemaMismatch
from .structure import SetKind

SCHEMA_VERSION = 1
GATE_GAMMA = 1.025
GATE_EPS = 2.5
COORD = "coord"
MODEL_KINDS = tuple(k.value for k in SetKind) + (COORD,)


class DegenerateColumn(UserWarning):
    """An input column has zero range; it passes through with unit scale."""


@dataclass(frozen=True)
class NormLayers:
    X_min: np.ndarray
    X_max: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    Y_min: float
    Y_max: float
    y_min: float = 0.0
    y_max: float = 1.0
    degenerate: tuple = ()

    @property
    def in_scale(self) -> np.ndarray:
        width = self.X_max - self.X_min
        safe = np.where(width > 0, width, 1.0)
        return np.where(width > 0, (self.x_max - self.x_min) / safe, 1.0)

    @property
    def in_shift(self) -> np.ndarray:
        width = self.X_max - self.X_min
        safe = np.where(width > 0, width, 1.0)
        affine = (self.x_max * self.X_min - self.x_min * self.X_max) / -safe
        passthrough = 0.5 * (self.x_min + self.x_max) - self.X_min
        return np.where(width > 0, affine, passthrough)

    @property
    def out_scale(self) -> float:
        width = self.Y_max - self.Y_min
        return width / (self.y_max - self.y_min) if width > 0 else 1.0

    def to_dict(self) -> dict:
        return {
            "X_min": self.X_min.tolist(),
            "X_max": self.X_max.tolist(),
            "x_min": self.x_min.tolist(),
            "x_max": self.x_max.tolist(),
            "Y_min": float(self.Y_min),
            "Y_max": float(self.Y_max),
            "y_min": float(self.y_min),
            "y_max": float(self.y_max),
            "degenerate": [bool(d) for d in self.degenerate],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormLayers":
        return cls(
            X_min=np.asarray(d["X_min"], dtype=float),
            X_max=np.asarray(d["X_max"], dtype=float),
            x_min=np.asarray(d["x_min"], dtype=float),
            x_max=np.asarray(d["x_max"], dtype=float),
            Y_min=float(d["Y_min"]),
            Y_max=float(d["Y_max"]),
            y_min=float(d["y_min"]),
            y_max=float(d["y_max"]),
            degenerate=tuple(bool(x) for x in d["degenerate"]),
        )


def fit_normalization(inputs, energies, x_range=(0.0, 1.0), y_range=(0.0, 1.0)) -> NormLayers:
    """Fit the input and output affine maps from sample data."""
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    Y = np.asarray(energies, dtype=float).ravel()
    if X.shape[0] < 2 or Y.size < 2:
        raise EmptyData("normalization needs at least two samples")
    if x_range[1] <= x_range[0] or y_range[1] <= y_range[0]:
        raise ValueError("target ranges must have positive width")
    X_min, X_max = X.min(axis=0), X.max(axis=0)
    degenerate = tuple(bool(d) for d in (X_max - X_min) <= 0.0)
    if any(degenerate):
        cols = [k for k, d in enumerate(degenerate) if d]
        warnings.warn(f"constant input columns {cols} pass through unscaled", DegenerateColumn)
    n = X.shape[1]
    return NormLayers(
        X_min=X_min,
        X_max=X_max,
        x_min=np.full(n, float(x_range[0])),
        x_max=np.full(n, float(x_range[1])),
        Y_min=float(Y.min()),
        Y_max=float(Y.max()),
        y_min=float(y_range[0]),
        y_max=float(y_range[1]),
        degenerate=degenerate,
    )


def jgate(q, gamma=GATE_GAMMA, eps=GATE_EPS):
    return jnp.minimum(1.0, gamma * jnp.tanh(eps * q))


def gate_eval(q, gamma: float = GATE_GAMMA, eps: float = GATE_EPS):
    """Gate values ``min(1, gamma tanh(eps q))`` and their derivative."""
    q = np.asarray(q, dtype=float)
    raw = gamma * np.tanh(eps * q)
    g = np.minimum(1.0, raw)
    dg = np.where(raw < 1.0, gamma * eps / np.cosh(eps * q) ** 2, 0.0)
    return g, dg


def jpnn(params: dict, x, order: int = 2):
    """Value, input gradient and input Hessian of the positive network."""
    n = x.shape[0]
    z = x
    jac = jnp.eye(n)
    hess = jnp.zeros((n, n, n))
    for layer in params["hidden"]:
        W, b = layer["W"], layer["b"]
        pre = W @ z + b
        s1 = jax.nn.sigmoid(pre)
        z = jax.nn.softplus(pre)
        if order >= 1:
            dpre = W @ jac
            if order >= 2:
                hpre = jnp.einsum("ma,aij->mij", W, hess)
                s2 = s1 * (1.0 - s1)
                hess = s2[:, None, None] * dpre[:, :, None] * dpre[:, None, :] + s1[:, None, None] * hpre
            jac = s1[:, None] * dpre
    w, B = params["out_w"], params["out_b"]
    value = w @ z + B
    grad = w @ jac if order >= 1 else jnp.zeros(n)
    h = jnp.einsum("m,mij->ij", w, hess) if order >= 2 else jnp.zeros((n, n))
    return value, grad, h


def pnn_eval(params: dict, x, order: int = 2):
    v, g, h = jpnn(to_jax(params), jnp.asarray(x, dtype=float), order)
    return float(v), np.asarray(g), np.asarray(h)


def init_pnn(n_in: int, hidden: tuple, rng: np.random.Generator) -> dict:
    layers = []
    fan_in = n_in
    for width in hidden:
        bound = 1.0 / np.sqrt(fan_in)
        layers.append(
            {
                "W": rng.uniform(-bound, bound, size=(width, fan_in)),
                "b": rng.uniform(-bound, bound, size=width),
            }
        )
        fan_in = width
    return {
        "hidden": layers,
        "out_w": rng.uniform(0.0, 0.1, size=fan_in),
        "out_b": np.array(0.0),
    }


def to_jax(params: dict) -> dict:
    return jax.tree_util.tree_map(lambda a: jnp.asarray(a, dtype=float), params)


def to_numpy(params: dict) -> dict:
    return jax.tree_util.tree_map(lambda a: np.asarray(a, dtype=float), params)


@dataclass(frozen=True)
class ModelArtifact:
    """A complete model: structure, gates, network, normalization, growth term."""

    kind: str
    structure_params: np.ndarray
    q: np.ndarray
    pnn: dict
    norm: NormLayers
    lambda_gr: float = 0.01
    gamma: float = GATE_GAMMA
    eps: float = GATE_EPS
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "structure_params", np.asarray(self.structure_params, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))

    @property
    def is_coord(self) -> bool:
        return self.kind == COORD

    @property
    def set_kind(self) -> SetKind | None:
        return None if self.is_coord else SetKind(self.kind)

    @property
    def n_inputs(self) -> int:
        return 6 if self.is_coord else SetKind(self.kind).n_invariants

    def gates(self) -> np.ndarray:
        if self.is_coord:
            return np.ones(6)
        return gate_eval(self.q, self.gamma, self.eps)[0]

    def with_updates(self, **kw) -> "ModelArtifact":
        return replace(self, **kw)


def random_artifact(
    kind: str,
    rng: np.random.Generator,
    hidden: tuple | None = None,
    norm: NormLayers | None = None,
    lambda_gr: float = 0.01,
    q: np.ndarray | None = None,
) -> ModelArtifact:
    """Freshly initialized artifact; default normalization is the identity map."""
    from .structure import random_params

    is_coord = kind == COORD
    n = 6 if is_coord else SetKind(kind).n_invariants
    hidden = hidden or ((16, 16, 16) if is_coord else (16, 16))
    if norm is None:
        norm = NormLayers(
            X_min=np.zeros(n), X_max=np.ones(n), x_min=np.zeros(n), x_max=np.ones(n), Y_min=0.0, Y_max=1.0
        )
    params = np.zeros(0) if is_coord else random_params(SetKind(kind), rng)
    if q is None:
        q = np.ones(0 if is_coord else n)
    return ModelArtifact(
        kind=kind,
        structure_params=params,
        q=q,
        pnn=init_pnn(n, hidden, rng),
        norm=norm,
        lambda_gr=lambda_gr,
    )


def _array_list(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def to_document(model: ModelArtifact) -> dict:
    layers = [
        {"W": _array_list(l["W"]), "b": _array_list(l["b"]), "activation": "softplus"}
        for l in model.pnn["hidden"]
    ]
    layers.append(
        {
            "W": [_array_list(model.pnn["out_w"])],
            "b": [float(model.pnn["out_b"])],
            "activation": "linear",
        }
    )
    return {
        "schema_version": SCHEMA_VERSION,
        "set_kind": model.kind,
        "structure_params": _array_list(model.structure_params),
        "q": _array_list(model.q),
        "layers": layers,
        "norm": model.norm.to_dict(),
        "lambda_gr": float(model.lambda_gr),
        "gate": {"gamma": float(model.gamma), "eps": float(model.eps)},
        "meta": model.meta,
    }


def serialize(model: ModelArtifact) -> bytes:
    return json.dumps(to_document(model), indent=1, sort_keys=True).encode("utf-8")


def deserialize(payload: bytes | str) -> ModelArtifact:
    try:
        doc = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptPayload(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise CorruptPayload("model file lacks a schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaMismatch(f"schema version {doc['schema_version']} != {SCHEMA_VERSION}")
    try:
        hidden = [
            {"W": np.asarray(l["W"], dtype=float), "b": np.asarray(l["b"], dtype=float)}
            for l in doc["layers"][:-1]
        ]
        last = doc["layers"][-1]
        pnn = {
            "hidden": hidden,
            "out_w": np.asarray(last["W"], dtype=float)[0],
            "out_b": np.asarray(last["b"][0], dtype=float),
        }
        model = ModelArtifact(
            kind=doc["set_kind"],
            structure_params=doc["structure_params"],
            q=doc["q"],
            pnn=pnn,
            norm=NormLayers.from_dict(doc["norm"]),
            lambda_gr=float(doc["lambda_gr"]),
            gamma=float(doc["gate"]["gamma"]),
            eps=float(doc["gate"]["eps"]),
            meta=dict(doc.get("meta", {})),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise CorruptPayload(f"malformed model file: {exc}") from exc
    _check_shapes(model)
    return model


def _check_shapes(model: ModelArtifact) -> None:
    n = model.n_inputs
    fan_in = n
    for layer in model.pnn["hidden"]:
        if layer["W"].ndim != 2 or layer["W"].shape[1] != fan_in or layer["b"].shape != (layer["W"].shape[0],):
            raise CorruptPayload("hidden layer shapes are inconsistent")
        fan_in = layer["W"].shape[0]
    if model.pnn["out_w"].shape != (fan_in,):
        raise CorruptPayload("output layer shape is inconsistent")
    if model.norm.X_min.shape != (n,):
        raise CorruptPayload("normalization size does not match the input count")
    if not model.is_coord:
        kind = SetKind(model.kind)
        if model.structure_params.shape != (kind.n_params,) or model.q.shape != (n,):
            raise CorruptPayload("structure or gate parameter count does not match the set kind")


def save_model(model: ModelArtifact, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(model))


def load_model(path) -> ModelArtifact:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
