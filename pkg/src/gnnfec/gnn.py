"""Learned iterative message passing on the Tanner graph.

The decoder keeps a state vector per variable node and per check node.
Each iteration runs four phases in a fixed flooding order — variable-to-
check messages, check-state update, check-to-variable messages,
variable-state update — where every phase reads only values produced
before it.  Four small MLPs (shared across all edges, nodes, and
iterations) compute messages and state updates; message inputs
concatenate the sender state, receiver state, and optional per-edge
attributes, node updates concatenate the old state, the aggregated
incoming messages, and optional per-node attributes.

Channel LLRs enter through a learned linear embedding (state = llr *
input_embedding) and leave through a learned projection (llr estimate =
output_embedding . state).  With bias-free MLPs and tanh-like
activations, an all-zero input therefore produces exactly zero output
at every iteration.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from . import nn
from .errors import (
    AttributeSizeMismatch,
    InvalidParameter,
    LengthMismatch,
    UnboundGraph,
)

#: Reference hyperparameters: the strongest searched configuration.
DEFAULT_F_N = 20
DEFAULT_F_M = 20
DEFAULT_HIDDEN = 40
DEFAULT_MLP_LAYERS = 2
DEFAULT_N_ITER = 8


@dataclass
class GnnConfig:
    """Architecture/inference hyperparameters of the learned decoder."""

    f_n: int = DEFAULT_F_N
    f_m: int = DEFAULT_F_M
    f_na: int = 0
    f_ma: int = 0
    hidden_units: int = DEFAULT_HIDDEN
    mlp_layers: int = DEFAULT_MLP_LAYERS
    activation: str = "tanh"
    aggregation: str = "mean"
    use_bias: bool = False
    n_iter_train: int = DEFAULT_N_ITER
    llr_clip: float | None = None

    def __post_init__(self):
        if self.f_n < 1 or self.f_m < 1:
            raise InvalidParameter("state and message dimensions must be >= 1")
        if self.f_na < 0 or self.f_ma < 0:
            raise InvalidParameter("attribute dimensions must be >= 0")
        if self.hidden_units < 1 or self.mlp_layers < 1:
            raise InvalidParameter("MLP shape parameters must be >= 1")
        if self.activation not in nn.ACTIVATIONS:
            raise InvalidParameter(
                f"activation must be one of {sorted(nn.ACTIVATIONS)}, "
                f"got {self.activation!r}"
            )
        if self.aggregation not in ("mean", "sum"):
            raise InvalidParameter(
                f"aggregation must be 'mean' or 'sum', got {self.aggregation!r}"
            )
        if self.n_iter_train < 1:
            raise InvalidParameter("n_iter_train must be >= 1")
        if self.llr_clip is not None and not self.llr_clip > 0:
            raise InvalidParameter("llr_clip must be positive when set")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class GnnParameters:
    """All trainable state of one decoder instance.

    The four MLPs and the two embedding vectors are graph-independent;
    attribute tables are sized to the graph the parameters were
    initialized on (empty at the default attribute dimension 0).
    """

    msg_vn_to_fn: nn.Mlp
    msg_fn_to_vn: nn.Mlp
    update_vn: nn.Mlp
    update_fn: nn.Mlp
    input_embedding: nn.Tensor
    output_embedding: nn.Tensor
    vn_attributes: nn.Tensor
    fn_attributes: nn.Tensor
    edge_attr_vn_to_fn: nn.Tensor
    edge_attr_fn_to_vn: nn.Tensor
    n_vn: int
    n_fn: int
    n_edges: int

    def named_parameters(self):
        """(name, tensor) pairs of all non-empty trainables, fixed order."""
        named = []
        for mlp_name in ("msg_vn_to_fn", "msg_fn_to_vn", "update_vn", "update_fn"):
            mlp = getattr(self, mlp_name)
            for i, layer in enumerate(mlp.layers):
                named.append((f"{mlp_name}.layer{i}.weight", layer.weight))
                if layer.bias is not None:
                    named.append((f"{mlp_name}.layer{i}.bias", layer.bias))
        named.append(("input_embedding", self.input_embedding))
        named.append(("output_embedding", self.output_embedding))
        for attr_name in ("vn_attributes", "fn_attributes",
                          "edge_attr_vn_to_fn", "edge_attr_fn_to_vn"):
            tensor = getattr(self, attr_name)
            if tensor.data.size:
                named.append((attr_name, tensor))
        return named

    def trainable_parameters(self):
        return [t for _, t in self.named_parameters()]

    def parameter_count(self):
        """Total number of trainable scalars."""
        return sum(t.data.size for t in self.trainable_parameters())


def gnn_init(graph, config, rng):
    """Fresh parameters: Glorot-initialized MLPs and embeddings, zero attributes.

    The embedding vectors use Glorot fans (1, f_n); attribute tables
    start at zero so that an untrained attribute contributes nothing.
    """
    msg_in = 2 * config.f_n + config.f_ma
    node_in = config.f_n + config.f_m + config.f_na

    def make_msg_mlp():
        return nn.Mlp.create(msg_in, config.hidden_units, config.f_m,
                             config.mlp_layers, config.activation,
                             config.use_bias, rng)

    def make_node_mlp():
        return nn.Mlp.create(node_in, config.hidden_units, config.f_n,
                             config.mlp_layers, config.activation,
                             config.use_bias, rng)

    msg_vn_to_fn = make_msg_mlp()
    msg_fn_to_vn = make_msg_mlp()
    update_vn = make_node_mlp()
    update_fn = make_node_mlp()
    input_embedding = nn.Tensor(
        nn.glorot_uniform_init(1, config.f_n, rng)[:, 0], requires_grad=True
    )
    output_embedding = nn.Tensor(
        nn.glorot_uniform_init(1, config.f_n, rng)[:, 0], requires_grad=True
    )
    return GnnParameters(
        msg_vn_to_fn=msg_vn_to_fn,
        msg_fn_to_vn=msg_fn_to_vn,
        update_vn=update_vn,
        update_fn=update_fn,
        input_embedding=input_embedding,
        output_embedding=output_embedding,
        vn_attributes=nn.Tensor(np.zeros((graph.n_vn, config.f_na)), requires_grad=True),
        fn_attributes=nn.Tensor(np.zeros((graph.n_fn, config.f_na)), requires_grad=True),
        edge_attr_vn_to_fn=nn.Tensor(np.zeros((graph.n_edges, config.f_ma)), requires_grad=True),
        edge_attr_fn_to_vn=nn.Tensor(np.zeros((graph.n_edges, config.f_ma)), requires_grad=True),
        n_vn=graph.n_vn,
        n_fn=graph.n_fn,
        n_edges=graph.n_edges,
    )


def rebind_graph(params, new_graph):
    """Bind existing update weights to a different Tanner graph.

    Graph-independent weights are shared with the input; attribute
    tables are shared when the graph sizes match and recreated as empty
    zeros otherwise (only legal when the attribute dimensions are 0).
    """
    same_sizes = (params.n_vn == new_graph.n_vn
                  and params.n_fn == new_graph.n_fn
                  and params.n_edges == new_graph.n_edges)
    has_attributes = any(
        getattr(params, name).data.size
        for name in ("vn_attributes", "fn_attributes",
                     "edge_attr_vn_to_fn", "edge_attr_fn_to_vn")
    )
    if has_attributes and not same_sizes:
        raise AttributeSizeMismatch(
            "trained node/edge attributes cannot be carried to a graph of "
            f"different size ({params.n_vn},{params.n_fn},{params.n_edges}) -> "
            f"({new_graph.n_vn},{new_graph.n_fn},{new_graph.n_edges})"
        )
    if same_sizes:
        attrs = (params.vn_attributes, params.fn_attributes,
                 params.edge_attr_vn_to_fn, params.edge_attr_fn_to_vn)
    else:
        f_na = params.vn_attributes.data.shape[1]
        f_ma = params.edge_attr_vn_to_fn.data.shape[1]
        attrs = (
            nn.Tensor(np.zeros((new_graph.n_vn, f_na)), requires_grad=True),
            nn.Tensor(np.zeros((new_graph.n_fn, f_na)), requires_grad=True),
            nn.Tensor(np.zeros((new_graph.n_edges, f_ma)), requires_grad=True),
            nn.Tensor(np.zeros((new_graph.n_edges, f_ma)), requires_grad=True),
        )
    return GnnParameters(
        msg_vn_to_fn=params.msg_vn_to_fn,
        msg_fn_to_vn=params.msg_fn_to_vn,
        update_vn=params.update_vn,
        update_fn=params.update_fn,
        input_embedding=params.input_embedding,
        output_embedding=params.output_embedding,
        vn_attributes=attrs[0],
        fn_attributes=attrs[1],
        edge_attr_vn_to_fn=attrs[2],
        edge_attr_fn_to_vn=attrs[3],
        n_vn=new_graph.n_vn,
        n_fn=new_graph.n_fn,
        n_edges=new_graph.n_edges,
    )


def _broadcast_rows(tensor, n_batch):
    """(R, F) trainable table -> (B, R, F) with summing backward."""
    return nn.mul(nn.Tensor(np.ones((n_batch, 1, 1))), tensor)


def gnn_decode(graph, params, config, llr, n_iter=None,
               readout_every_iteration=False):
    """Run the message-passing decoder.

    Parameters
    ----------
    graph : TannerGraph
    params : GnnParameters
    config : GnnConfig
        Architecture switches (aggregation, clipping); the MLP widths
        are fixed by ``params`` itself.
    llr : array
        Channel LLRs, (n,) or (B, n).
    n_iter : int, optional
        Iterations to run; defaults to ``config.n_iter_train``.  Any
        positive count works with the same weights.
    readout_every_iteration : bool
        Return the projected LLRs of every iteration (needed by the
        multi-iteration training loss) instead of only the last.

    Returns
    -------
    list of Tensor
        Output LLRs; data shaped like ``llr``.  Under an open gradient
        tape the batch axis is kept as given.
    """
    if n_iter is None:
        n_iter = config.n_iter_train
    if n_iter < 1:
        raise InvalidParameter(f"iteration count must be >= 1, got {n_iter}")
    if (params.n_vn, params.n_fn, params.n_edges) != (
        graph.n_vn, graph.n_fn, graph.n_edges
    ):
        raise UnboundGraph(
            "parameters were initialized for a graph of size "
            f"({params.n_vn},{params.n_fn},{params.n_edges}), not "
            f"({graph.n_vn},{graph.n_fn},{graph.n_edges}); use rebind_graph"
        )
    llr = np.asarray(llr, dtype=np.float64)
    single = llr.ndim == 1
    if single:
        llr = llr[None, :]
    if llr.ndim != 2 or llr.shape[1] != graph.n_vn:
        raise LengthMismatch(
            f"LLR length {llr.shape[-1]} does not match n = {graph.n_vn}"
        )
    if config.llr_clip is not None:
        llr = np.clip(llr, -config.llr_clip, config.llr_clip)
    n_batch = llr.shape[0]
    mean = config.aggregation == "mean"
    use_node_attr = params.vn_attributes.data.shape[1] > 0
    use_edge_attr = params.edge_attr_vn_to_fn.data.shape[1] > 0

    h_v = nn.mul(nn.Tensor(llr[:, :, None]), params.input_embedding)
    h_u = nn.Tensor(np.zeros((n_batch, graph.n_fn, params.input_embedding.data.shape[0])))
    if use_edge_attr:
        attr_vu = _broadcast_rows(params.edge_attr_vn_to_fn, n_batch)
        attr_uv = _broadcast_rows(params.edge_attr_fn_to_vn, n_batch)
    if use_node_attr:
        attr_v = _broadcast_rows(params.vn_attributes, n_batch)
        attr_u = _broadcast_rows(params.fn_attributes, n_batch)

    outputs = []
    for it in range(n_iter):
        # variable-to-check messages read the previous iteration's states
        parts = [nn.gather(h_v, graph.edge_vn, graph.vn_plan),
                 nn.gather(h_u, graph.edge_fn, graph.fn_plan)]
        if use_edge_attr:
            parts.append(attr_vu)
        m_vu = params.msg_vn_to_fn(nn.concat(parts, axis=-1))

        # check-state update sees the fresh variable-to-check messages
        parts = [h_u, nn.segment_aggregate(m_vu, graph.fn_plan, mean=mean)]
        if use_node_attr:
            parts.append(attr_u)
        h_u = params.update_fn(nn.concat(parts, axis=-1))

        # check-to-variable messages: new check states, old variable states
        parts = [nn.gather(h_u, graph.edge_fn, graph.fn_plan),
                 nn.gather(h_v, graph.edge_vn, graph.vn_plan)]
        if use_edge_attr:
            parts.append(attr_uv)
        m_uv = params.msg_fn_to_vn(nn.concat(parts, axis=-1))

        # variable-state update closes the iteration
        parts = [h_v, nn.segment_aggregate(m_uv, graph.vn_plan, mean=mean)]
        if use_node_attr:
            parts.append(attr_v)
        h_v = params.update_vn(nn.concat(parts, axis=-1))

        if readout_every_iteration or it == n_iter - 1:
            outputs.append(nn.readout(h_v, params.output_embedding))

    if single and not nn.is_recording():
        outputs = [nn.Tensor(out.data[0]) for out in outputs]
    return outputs


def expected_parameter_count(config, n_vn=0, n_fn=0, n_edges=0):
    """Closed-form trainable-scalar count for a configuration.

    Four MLPs (two message nets, two node nets) plus the two embedding
    vectors plus any attribute tables.
    """
    def mlp_count(in_dim, out_dim):
        widths = [in_dim] + [config.hidden_units] * (config.mlp_layers - 1) + [out_dim]
        weights = sum(a * b for a, b in zip(widths[:-1], widths[1:]))
        biases = sum(widths[1:]) if config.use_bias else 0
        return weights + biases

    total = 2 * mlp_count(2 * config.f_n + config.f_ma, config.f_m)
    total += 2 * mlp_count(config.f_n + config.f_m + config.f_na, config.f_n)
    total += 2 * config.f_n
    total += config.f_na * (n_vn + n_fn) + 2 * config.f_ma * n_edges
    return total
