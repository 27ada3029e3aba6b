"""Loop-unrolled SGD training of the learned decoder, plus checkpoint files.

Every optimizer step draws a fresh batch of random information words,
pushes them through encode → BPSK → AWGN → LLR demapping, runs the
decoder with per-iteration readout, and minimizes a binary cross-entropy
that averages over all output iterations and all bits.  Randomness is
split into named substreams of one seed, and the per-step channel noise
comes from counter-based streams, so a fixed seed reproduces training
bit for bit.

Checkpoints are self-describing text: a version header, the
architecture configuration, the code identity (name plus a hash of the
canonical alist serialization of H), and one block of 17-significant-
digit decimals per named parameter.  Loading verifies the code hash
against the code the weights are applied to; carrying weights onto a
different graph is possible but must be requested explicitly.
"""

import time
import warnings
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from . import nn
from .channel import AwgnChannel, bpsk_modulate, demap_llr, ebno_to_sigma2, hard_decision
from .codes import encode
from .errors import (
    DigestMismatch,
    InvalidParameter,
    LengthMismatch,
    NonFiniteLoss,
    ParseError,
    VersionMismatch,
)
from .gnn import GnnConfig, GnnParameters, gnn_decode, gnn_init, rebind_graph
from .rng import substream

CHECKPOINT_HEADER = "gnnfec-checkpoint v1"
DIGEST_ALGORITHM = "sha256"

# Probabilities inside the cross-entropy logs are floored at 1e-300, so a
# single maximally wrong bit contributes at most -log(1e-300) to the sum.
_LOSS_TERM_CAP = -np.log(1e-300)


def default_training_ebno(rate):
    """Mid-waterfall training SNR: 4 dB for high-rate codes, else 2 dB."""
    return 4.0 if rate > 0.6 else 2.0


def default_lr_schedule(total_steps):
    """Piecewise-constant 1e-3 / 1e-4 / 1e-5 at thirds of the run.

    Very short runs collapse the colliding thresholds instead of
    emitting duplicate entries.
    """
    first = -(-total_steps // 3)
    second = -(-2 * total_steps // 3)
    schedule = [(0, 1e-3)]
    if first > 0:
        schedule.append((first, 1e-4))
    if second > first:
        schedule.append((second, 1e-5))
    return schedule


def _validate_schedule(schedule):
    if not schedule:
        raise InvalidParameter("learning-rate schedule is empty")
    if schedule[0][0] != 0:
        raise InvalidParameter("the first schedule entry must start at step 0")
    prev_step, prev_rate = -1, np.inf
    for step, rate in schedule:
        if step <= prev_step:
            raise InvalidParameter("schedule step thresholds must increase")
        if not rate > 0:
            raise InvalidParameter("learning rates must be positive")
        if rate > prev_rate:
            raise InvalidParameter("learning rates must be non-increasing")
        prev_step, prev_rate = step, rate
    return [(int(s), float(r)) for s, r in schedule]


def learning_rate_at(schedule, step):
    """Rate of the last schedule entry whose threshold is <= step."""
    rate = schedule[0][1]
    for threshold, value in schedule:
        if step >= threshold:
            rate = value
    return rate


@dataclass
class TrainConfig:
    """Optimization settings; architecture lives in GnnConfig."""

    total_steps: int
    batch_size: int = 256
    lr_schedule: list | None = None
    ebno_train_db: float | None = None
    seed: int = 0
    eval_every: int = 1000
    val_words: int = 10_000

    def __post_init__(self):
        if self.total_steps < 1:
            raise InvalidParameter("total_steps must be >= 1")
        if self.batch_size < 1:
            raise InvalidParameter("batch_size must be >= 1")
        if self.eval_every < 1:
            raise InvalidParameter("eval_every must be >= 1")
        if self.val_words < 0:
            raise InvalidParameter("val_words must be >= 0")
        if self.lr_schedule is None:
            self.lr_schedule = default_lr_schedule(self.total_steps)
        self.lr_schedule = _validate_schedule(self.lr_schedule)


@dataclass
class MetricsRow:
    step: int
    loss: float
    lr: float
    val_ber: float | None
    wall_time_s: float


def bce_multiloss(per_iteration_llrs, c):
    """Cross-entropy averaged over bits and over all output iterations.

    Under the log p(0)/p(1) convention the probability of bit 1 is
    sigmoid(-llr), so each term is ``softplus(llr)`` for a 1-bit and
    ``softplus(-llr)`` for a 0-bit, capped where the floored probability
    would saturate.  Returns a scalar Tensor; gradients flow into every
    iteration's LLR tensor.
    """
    if not per_iteration_llrs:
        raise LengthMismatch("need at least one iteration of LLRs")
    tensors = [nn.as_tensor(llr) for llr in per_iteration_llrs]
    shape = tensors[0].data.shape
    for t in tensors[1:]:
        if t.data.shape != shape:
            raise LengthMismatch(
                f"iteration LLR shapes differ: {t.data.shape} vs {shape}"
            )
    labels = np.asarray(c, dtype=np.float64)
    if labels.shape != shape:
        raise LengthMismatch(
            f"bit vector shape {labels.shape} does not match LLRs {shape}"
        )

    stacked = np.stack([t.data for t in tensors])
    sp_pos = np.logaddexp(0.0, stacked)
    sp_neg = np.logaddexp(0.0, -stacked)
    terms = labels * np.minimum(sp_pos, _LOSS_TERM_CAP) \
        + (1.0 - labels) * np.minimum(sp_neg, _LOSS_TERM_CAP)
    loss = np.asarray(terms.mean())
    count = terms.size

    def backward(g):
        sig = expit(stacked)
        grad = labels * sig * (sp_pos <= _LOSS_TERM_CAP) \
            + (1.0 - labels) * (sig - 1.0) * (sp_neg <= _LOSS_TERM_CAP)
        grad *= g / count
        return tuple(grad[i] for i in range(len(tensors)))

    return nn.make_op(loss, tensors, backward)


def _validation_ber(graph, params, config, llr, bits, chunk=256):
    """Hard-decision BER of the final iteration on a fixed probe set."""
    errors = 0
    for start in range(0, llr.shape[0], chunk):
        out = gnn_decode(graph, params, config, llr[start:start + chunk])[-1]
        errors += int(np.sum(hard_decision(out.data) != bits[start:start + chunk]))
    return errors / bits.size


def train(code, gnn_config, train_config):
    """Train a decoder for one code; returns (Checkpoint, metrics rows).

    The metrics log holds one row per step; validation BER is filled on
    every ``eval_every``-th step and on the last.
    """
    graph = code.graph
    generator = code.generator
    ebno_db = train_config.ebno_train_db
    if ebno_db is None:
        ebno_db = default_training_ebno(code.rate)
    sigma2 = ebno_to_sigma2(ebno_db, code.rate)

    params = gnn_init(graph, gnn_config, substream(train_config.seed, "init"))
    trainables = params.trainable_parameters()
    optimizer = nn.Adam(trainables)
    data_rng = substream(train_config.seed, "train-data")
    channel = AwgnChannel(sigma2, train_config.seed, label="train-channel")

    val_llr = val_bits = None
    if train_config.val_words:
        val_rng = substream(train_config.seed, "validation")
        val_info = val_rng.integers(
            0, 2, size=(train_config.val_words, code.k), dtype=np.uint8
        )
        val_bits = encode(generator, val_info)
        val_channel = AwgnChannel(sigma2, train_config.seed, label="validation-channel")
        val_llr = demap_llr(val_channel.transmit(bpsk_modulate(val_bits)), sigma2)

    metrics = []
    start_time = time.perf_counter()
    for step in range(train_config.total_steps):
        lr = learning_rate_at(train_config.lr_schedule, step)
        info = data_rng.integers(
            0, 2, size=(train_config.batch_size, code.k), dtype=np.uint8
        )
        if not info.any():
            warnings.warn(
                f"step {step}: batch contains only all-zero information words; "
                "such batches cannot distinguish the code from its complement"
            )
        bits = encode(generator, info)
        y = channel.transmit(bpsk_modulate(bits), stream=step)
        llr = demap_llr(y, sigma2)

        with nn.GradientTape() as tape:
            outputs = gnn_decode(
                graph, params, gnn_config, llr, readout_every_iteration=True
            )
            loss = bce_multiloss(outputs, bits)
        loss_value = float(loss.data)
        if not np.isfinite(loss_value):
            raise NonFiniteLoss(f"loss became non-finite ({loss_value}) at step {step}")
        grads = tape.gradient(loss, trainables)
        optimizer.learning_rate = lr
        optimizer.step(grads)

        val_ber = None
        probe_due = (step + 1) % train_config.eval_every == 0
        if val_llr is not None and (probe_due or step == train_config.total_steps - 1):
            val_ber = _validation_ber(graph, params, gnn_config, val_llr, val_bits)
        metrics.append(MetricsRow(
            step=step,
            loss=loss_value,
            lr=lr,
            val_ber=val_ber,
            wall_time_s=time.perf_counter() - start_time,
        ))

    ckpt = Checkpoint(
        config=gnn_config,
        code_name=code.name,
        code_digest=code.digest,
        parameters={name: t.data.copy() for name, t in params.named_parameters()},
        step=train_config.total_steps,
    )
    return ckpt, metrics


def write_metrics_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("step,loss,lr,val_ber,wall_time_s\n")
        for row in rows:
            val = "" if row.val_ber is None else f"{row.val_ber:.9e}"
            fh.write(
                f"{row.step},{row.loss:.9e},{row.lr:.9e},{val},{row.wall_time_s:.3f}\n"
            )


@dataclass
class Checkpoint:
    """Trained weights plus everything needed to rebuild the decoder."""

    config: GnnConfig
    code_name: str
    code_digest: str
    parameters: dict
    step: int = 0


def _format_config_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _parse_config_value(text, target_type, line_no):
    if text == "none":
        return None
    if target_type is bool or text in ("true", "false"):
        if text not in ("true", "false"):
            raise ParseError(f"expected true/false, got {text!r}", line=line_no)
        return text == "true"
    try:
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
    except ValueError:
        raise ParseError(f"bad config value {text!r}", line=line_no) from None
    return text


def save_checkpoint(ckpt, path):
    """Write a checkpoint as self-describing text (lossless round trip)."""
    lines = [CHECKPOINT_HEADER]
    for f in fields(ckpt.config):
        lines.append(f"config {f.name}={_format_config_value(getattr(ckpt.config, f.name))}")
    lines.append(f"code_name {ckpt.code_name}")
    lines.append(f"code_digest {DIGEST_ALGORITHM}:{ckpt.code_digest}")
    lines.append(f"step {ckpt.step}")
    for name, array in ckpt.parameters.items():
        shape = " ".join(str(d) for d in array.shape)
        lines.append(f"param {name} shape {shape}".rstrip())
        lines.extend(f"{v:.17g}" for v in np.asarray(array, dtype=np.float64).ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Parse a checkpoint file; raises VersionMismatch/ParseError."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty checkpoint file", line=1)
    if lines[0] != CHECKPOINT_HEADER:
        if lines[0].startswith("gnnfec-checkpoint"):
            raise VersionMismatch(
                f"unsupported checkpoint version {lines[0]!r}; "
                f"this build reads {CHECKPOINT_HEADER!r}"
            )
        raise ParseError("not a checkpoint file (bad header)", line=1)

    config_types = {f.name: f.type for f in fields(GnnConfig)}
    config_kwargs = {}
    code_name = code_digest = None
    step = 0
    parameters = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("param "):
        line = lines[i]
        line_no = i + 1
        if line.startswith("config "):
            body = line[len("config "):]
            key, sep, value = body.partition("=")
            if not sep:
                raise ParseError(f"malformed config line {line!r}", line=line_no)
            if key not in config_types:
                raise ParseError(f"unknown config key {key!r}", line=line_no)
            type_name = str(config_types[key])
            target = int if "int" in type_name else float if "float" in type_name else str
            config_kwargs[key] = _parse_config_value(value, target, line_no)
        elif line.startswith("code_name "):
            code_name = line[len("code_name "):]
        elif line.startswith("code_digest "):
            body = line[len("code_digest "):]
            algorithm, sep, digest = body.partition(":")
            if not sep or algorithm != DIGEST_ALGORITHM:
                raise ParseError(
                    f"unsupported digest spec {body!r}", line=line_no
                )
            code_digest = digest
        elif line.startswith("step "):
            try:
                step = int(line[len("step "):])
            except ValueError:
                raise ParseError("bad step count", line=line_no) from None
        elif line.strip():
            raise ParseError(f"unexpected line {line!r}", line=line_no)
        i += 1
    if code_name is None or code_digest is None:
        raise ParseError("checkpoint lacks code_name/code_digest", line=i)
    try:
        config = GnnConfig(**config_kwargs)
    except (TypeError, InvalidParameter) as exc:
        raise ParseError(f"bad configuration block: {exc}", line=i) from None

    while i < len(lines):
        header = lines[i]
        line_no = i + 1
        if not header.strip():
            i += 1
            continue
        parts = header.split()
        if len(parts) < 3 or parts[0] != "param" or parts[2] != "shape":
            raise ParseError(f"expected a param block, got {header!r}", line=line_no)
        name = parts[1]
        try:
            shape = tuple(int(d) for d in parts[3:])
        except ValueError:
            raise ParseError(f"bad shape in {header!r}", line=line_no) from None
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        values = lines[i + 1:i + 1 + count]
        if len(values) < count:
            raise ParseError(
                f"parameter {name!r} truncated: expected {count} values, "
                f"found {len(values)}",
                line=len(lines),
            )
        try:
            array = np.asarray([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise ParseError(f"non-numeric value in parameter {name!r}", line=line_no) from None
        parameters[name] = array.reshape(shape)
        i += 1 + count

    return Checkpoint(
        config=config,
        code_name=code_name,
        code_digest=code_digest,
        parameters=parameters,
        step=step,
    )


def _mlp_from_arrays(arrays, name, config):
    layers = []
    for i in range(config.mlp_layers):
        weight_key = f"{name}.layer{i}.weight"
        if weight_key not in arrays:
            raise ParseError(f"checkpoint lacks parameter {weight_key!r}")
        bias = arrays.get(f"{name}.layer{i}.bias")
        if config.use_bias and bias is None:
            raise ParseError(f"checkpoint lacks parameter {name}.layer{i}.bias")
        layers.append(nn.DenseLayer(
            nn.Tensor(arrays[weight_key].copy(), requires_grad=True),
            nn.Tensor(bias.copy(), requires_grad=True) if bias is not None else None,
            config.activation,
        ))
    return nn.Mlp(layers)


def restore_parameters(ckpt, code, allow_rebind=False):
    """Bind checkpoint weights to a code's Tanner graph.

    The stored code digest must match the target code; with
    ``allow_rebind`` a mismatch only warns and the graph-independent
    weights are carried over (impossible when trained attribute tables
    exist, since those are sized to the original graph).
    """
    config = ckpt.config
    arrays = ckpt.parameters
    graph = code.graph
    matches = ckpt.code_digest == code.digest
    if not matches and not allow_rebind:
        raise DigestMismatch(
            f"checkpoint was trained on {ckpt.code_name!r} "
            f"(digest {ckpt.code_digest[:12]}...), which is not this code; "
            "pass allow_rebind to carry the weights over anyway"
        )
    if not matches:
        warnings.warn(
            f"rebinding weights trained on {ckpt.code_name!r} to a different code"
        )

    mlps = {
        name: _mlp_from_arrays(arrays, name, config)
        for name in ("msg_vn_to_fn", "msg_fn_to_vn", "update_vn", "update_fn")
    }
    for key in ("input_embedding", "output_embedding"):
        if key not in arrays:
            raise ParseError(f"checkpoint lacks parameter {key!r}")

    def attribute(key, n_rows, width):
        stored = arrays.get(key)
        if stored is not None:
            return nn.Tensor(stored.copy(), requires_grad=True), stored.shape[0]
        return nn.Tensor(np.zeros((n_rows, width)), requires_grad=True), n_rows

    vn_attr, n_vn = attribute("vn_attributes", graph.n_vn, config.f_na)
    fn_attr, n_fn = attribute("fn_attributes", graph.n_fn, config.f_na)
    edge_vu, n_edges = attribute("edge_attr_vn_to_fn", graph.n_edges, config.f_ma)
    edge_uv, _ = attribute("edge_attr_fn_to_vn", graph.n_edges, config.f_ma)

    params = GnnParameters(
        msg_vn_to_fn=mlps["msg_vn_to_fn"],
        msg_fn_to_vn=mlps["msg_fn_to_vn"],
        update_vn=mlps["update_vn"],
        update_fn=mlps["update_fn"],
        input_embedding=nn.Tensor(arrays["input_embedding"].copy(), requires_grad=True),
        output_embedding=nn.Tensor(arrays["output_embedding"].copy(), requires_grad=True),
        vn_attributes=vn_attr,
        fn_attributes=fn_attr,
        edge_attr_vn_to_fn=edge_vu,
        edge_attr_fn_to_vn=edge_uv,
        n_vn=n_vn,
        n_fn=n_fn,
        n_edges=n_edges,
    )
    if (n_vn, n_fn, n_edges) != (graph.n_vn, graph.n_fn, graph.n_edges):
        params = rebind_graph(params, graph)
    return params
