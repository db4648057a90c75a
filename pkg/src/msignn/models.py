"""GCN, H2GCN-K and GCNII on top of :mod:`msignn.autodiff`.

Each model takes a dense 0-th layer input, either the raw features or an
MSI matrix from :func:`msignn.structure.build_msi_layer`; the MSI variant
of a model is the same model fed a different input matrix.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .graph import Graph
from .structure import HopAdjacency, MsiConfig, compute_hop_adjacency

KINDS = ("gcn", "h2gcn", "gcnii")


# --------------------------------------------------------------------------
# normalized adjacency

def self_loop_normalized(graph: Graph) -> sp.csr_matrix:
    """(D+I)^-1/2 (A+I) (D+I)^-1/2."""
    n = graph.num_nodes
    a_hat = (graph.adjacency() + sp.identity(n, format="csr")).tocsr()
    inv = 1.0 / np.sqrt(graph.degrees() + 1.0)
    return sp.csr_matrix(sp.diags(inv) @ a_hat @ sp.diags(inv))


def hop_normalized(hop: HopAdjacency) -> sp.csr_matrix:
    """D_i^-1/2 A_i D_i^-1/2 with zero rows for nodes that have no i-hop neighbor."""
    deg = hop.degrees().astype(np.float64)
    inv = np.zeros_like(deg)
    inv[deg > 0] = deg[deg > 0] ** -0.5
    m = hop.matrix.astype(np.float64)
    return sp.csr_matrix(sp.diags(inv) @ m @ sp.diags(inv))


@dataclass
class Propagation:
    """Graph operators shared by all models on one graph (built lazily)."""

    graph: Graph
    hops: list = field(default_factory=list)
    _gcn: sp.csr_matrix | None = None
    _hop_norm: dict = field(default_factory=dict)

    def hop_adjacency(self, max_hop: int) -> list[HopAdjacency]:
        if len(self.hops) < max_hop:
            self.hops = compute_hop_adjacency(self.graph, max_hop)
        return self.hops[:max_hop]

    @property
    def gcn(self) -> sp.csr_matrix:
        if self._gcn is None:
            self._gcn = self_loop_normalized(self.graph)
        return self._gcn

    def hop(self, i: int) -> sp.csr_matrix:
        if i not in self._hop_norm:
            self._hop_norm[i] = hop_normalized(self.hop_adjacency(i)[i - 1])
        return self._hop_norm[i]


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ModelConfig:
    kind: str = "gcn"
    layers: int = 2
    hidden: int = 64
    activation: str = "relu"
    alpha: float = 0.1
    beta: float = 0.5
    dropout: float = 0.5
    weight_decay: float = 5e-4
    msi: MsiConfig | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.activation not in ("relu", "none"):
            raise ValueError(f"activation must be relu or none, got {self.activation!r}")
        if self.kind == "gcn" and self.layers != 2:
            raise ValueError("GCN uses exactly 2 layers")
        if self.kind == "h2gcn" and self.layers not in (1, 2):
            raise ValueError("H2GCN supports K in {1, 2}")
        if self.kind == "gcnii" and not (0 < self.alpha < 1 and self.beta > 0):
            raise ValueError("GCNII needs alpha in (0, 1) and beta > 0")
        if self.layers < 1 or self.hidden < 1:
            raise ValueError("layers and hidden must be positive")

    @property
    def name(self) -> str:
        base = f"h2gcn-{self.layers}" if self.kind == "h2gcn" else self.kind
        return f"msi-{base}" if self.msi is not None else base

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.msi is not None:
            d["msi"]["c_a"] = list(self.msi.c_a)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        msi = d.pop("msi", None)
        return cls(**d, msi=MsiConfig(**msi) if msi else None)

    def plain(self) -> "ModelConfig":
        return replace(self, msi=None)


def parse_model_name(name: str) -> tuple[str, int | None, bool]:
    """``"msi-h2gcn-2"`` -> ``("h2gcn", 2, True)``."""
    key = name.lower()
    msi = key.startswith("msi-")
    if msi:
        key = key[4:]
    layers = None
    if key.startswith("h2gcn"):
        layers = int(key.split("-")[1]) if "-" in key else 2
        key = "h2gcn"
    if key not in KINDS:
        raise ValueError(f"unknown model {name!r}")
    return key, layers, msi


# --------------------------------------------------------------------------
# parameters

def glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Model:
    """Parameters plus forward pass for one :class:`ModelConfig`."""

    def __init__(self, config: ModelConfig, in_dim: int, num_classes: int, rng):
        if in_dim < 1:
            raise ValueError("zero-width input")
        self.config = config
        self.in_dim, self.num_classes = in_dim, num_classes
        self.params: dict[str, ad.Tensor] = {}
        h, k = config.hidden, config.layers
        if config.kind == "gcn":
            self._weight("W1", glorot(rng, in_dim, h))
            self._weight("W2", glorot(rng, h, num_classes))
        elif config.kind == "h2gcn":
            self._weight("W_e", glorot(rng, in_dim, h))
            width = h * (2 ** (k + 1) - 1)
            self._weight("W_c", glorot(rng, width, num_classes))
        else:
            self._weight("W_0", glorot(rng, in_dim, h))
            self._bias("b_0", h)
            for i in range(1, k + 1):
                self._weight(f"W_{i}", glorot(rng, h, h))
            self._weight("W_out", glorot(rng, h, num_classes))
            self._bias("b_out", num_classes)

    def _weight(self, name, value):
        self.params[name] = ad.Tensor(value, requires_grad=True, name=name)

    def _bias(self, name, width):
        self.params[name] = ad.Tensor(np.zeros((1, width)), requires_grad=True, name=name)

    def decay_mask(self) -> list[bool]:
        return [not name.startswith("b_") for name in self.params]

    def zeroth_layer(self, x: ad.Tensor, rng=None, training=False) -> ad.Tensor:
        """The model's 0-th layer applied to the input matrix."""
        cfg, p = self.config, self.params
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input width {x.shape[1]} != model input {self.in_dim}")
        if cfg.kind == "gcn":
            return x
        x = ad.dropout(x, cfg.dropout, rng, training)
        if cfg.kind == "h2gcn":
            h0 = ad.matmul(x, p["W_e"])
            return ad.relu(h0) if cfg.activation == "relu" else h0
        return ad.relu(ad.add(ad.matmul(x, p["W_0"]), p["b_0"]))

    def forward(self, x: ad.Tensor, prop: Propagation, rng=None, training=False) -> ad.Tensor:
        h0 = self.zeroth_layer(x, rng, training)
        return getattr(self, f"_{self.config.kind}")(h0, prop, rng, training)

    def _gcn(self, h, prop, rng, training):
        cfg, p = self.config, self.params
        for k in (1, 2):
            h = ad.dropout(h, cfg.dropout, rng, training)
            h = ad.spmm(prop.gcn, ad.matmul(h, p[f"W{k}"]), symmetric=True)
            if k == 1:
                h = ad.relu(h)
        return h

    def _h2gcn(self, h0, prop, rng, training):
        cfg = self.config
        a1, a2 = prop.hop(1), prop.hop(2)
        reps, h = [h0], h0
        for _ in range(cfg.layers):
            h = ad.concat_cols([ad.spmm(a1, h, True), ad.spmm(a2, h, True)])
            reps.append(h)
        final = ad.dropout(ad.concat_cols(reps), cfg.dropout, rng, training)
        return ad.matmul(final, self.params["W_c"])

    def _gcnii(self, h0, prop, rng, training):
        cfg, p = self.config, self.params
        a, b = cfg.alpha, cfg.beta
        h = h0
        for k in range(1, cfg.layers + 1):
            h = ad.dropout(h, cfg.dropout, rng, training)
            support = ad.add(ad.scale(ad.spmm(prop.gcn, h, True), 1 - a), ad.scale(h0, a))
            mixed = ad.add(ad.scale(support, 1 - b), ad.scale(ad.matmul(support, p[f"W_{k}"]), b))
            h = ad.relu(mixed)
        h = ad.dropout(h, cfg.dropout, rng, training)
        return ad.add(ad.matmul(h, p["W_out"]), p["b_out"])

    # ------------------------------------------------------------------
    def state(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        for k, v in state.items():
            if self.params[k].shape != v.shape:
                raise ValueError(f"shape mismatch for {k}: {v.shape} vs {self.params[k].shape}")
            self.params[k].value = np.array(v, dtype=np.float64)


def make_zeroth_layer(model: Model, inputs, rng=None, training=False) -> ad.Tensor:
    """Raw input for GCN, sigma(S W_0 + b) for GCNII, sigma(S W_e) for H2GCN."""
    x = inputs if isinstance(inputs, ad.Tensor) else ad.Tensor(inputs)
    return model.zeroth_layer(x, rng, training)


# --------------------------------------------------------------------------
# checkpoints
#
# A checkpoint is an uncompressed .npz archive readable by numpy.load: one
# row-major float64 .npy member per parameter under its own name, plus
# "__meta__" holding a JSON string (model config, split, MSI columns).
# Members carry a fixed timestamp so identical runs give identical bytes.

_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_checkpoint(path, state: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {k: np.ascontiguousarray(v, dtype=np.float64) for k, v in state.items()}
    arrays["__meta__"] = np.array(json.dumps(meta or {}, sort_keys=True))
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, arr, allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH), buf.getvalue())
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        state = {k: z[k] for k in z.files if k != "__meta__"}
    return state, meta
