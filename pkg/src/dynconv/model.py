"""Encoder-decoder sequence model with attention or convolution sub-blocks.

Blocks are pre-norm: each sub-block sees ``LN(x)`` and its output is added
back to ``x``. Parameters live in a flat ``name -> Tensor`` dict so they can be
checkpointed, optimized and gradient-checked uniformly.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import (AttentionParams, attend, attention_mask, init_attention,
                        multi_head_self_attention, project_kv)
from .conv import (NORMALIZERS, ConvConfig, apply_windows, dropconnect, expand_shared_weights,
                   lightconv, normalize_kernel, window_start)
from .dynamic import dynamic_conv, dynamic_kernels
from .kvconfig import dump_kv, parse_kv, to_bool, to_int_list
from .rng import Rng
from .tensor import ContractError, Tensor

MECHANISMS = ("self_attention", "lightconv", "dynamicconv", "cnn_nonseparable", "cnn_depthwise")
PAD, BOS, EOS = 0, 1, 2
FIRST_SYMBOL = 3
BASE_SCHEDULE = (3, 7, 15, 31)


def kernel_schedule(n_layers: int) -> tuple[int, ...]:
    """3, 7, 15, then 31 for every further layer, truncated to ``n_layers``."""
    return tuple(BASE_SCHEDULE[i] if i < len(BASE_SCHEDULE) else 31 for i in range(n_layers))


@dataclass
class ModelConfig:
    mechanism: str = "lightconv"
    enc_layers: int = 2
    dec_layers: int = 2
    d: int = 64
    d_ff: int = 256
    heads: int = 4
    enc_kernels: tuple[int, ...] = ()
    dec_kernels: tuple[int, ...] = ()
    use_glu: bool = True
    dropconnect_p: float = 0.0
    dropout_p: float = 0.0
    normalizer: str = "softmax"
    attention_window: bool = False
    src_vocab: int = 20
    tgt_vocab: int = 20
    max_positions: int = 256

    def __post_init__(self):
        self.enc_kernels = tuple(self.enc_kernels) or kernel_schedule(self.enc_layers)
        self.dec_kernels = tuple(self.dec_kernels) or kernel_schedule(self.dec_layers)
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if self.normalizer not in NORMALIZERS:
            raise ValueError(f"unknown normalizer {self.normalizer!r}")
        if len(self.enc_kernels) != self.enc_layers or len(self.dec_kernels) != self.dec_layers:
            raise ValueError("kernel schedules must have one width per block")
        if self.d % self.heads:
            raise ValueError(f"heads={self.heads} does not divide d={self.d}")
        if self.d % 2:
            raise ValueError(f"sinusoidal positions need an even d, got {self.d}")
        if any(k % 2 == 0 for k in self.enc_kernels):
            raise ValueError(f"encoder kernels must be odd: {self.enc_kernels}")
        if min(self.src_vocab, self.tgt_vocab) < 3:
            raise ValueError("vocabularies need at least the 3 reserved ids")

    @property
    def conv_heads(self) -> int:
        return self.d if self.mechanism == "cnn_depthwise" else self.heads

    def to_text(self) -> str:
        return dump_kv(dataclasses.asdict(self))

    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "ModelConfig":
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in pairs:
                continue
            raw = pairs[f.name]
            if f.name in ("enc_kernels", "dec_kernels"):
                kwargs[f.name] = to_int_list(raw)
            elif f.type == "bool":
                kwargs[f.name] = to_bool(raw)
            elif f.type == "int":
                kwargs[f.name] = int(raw)
            elif f.type == "float":
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = raw
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        return cls.from_pairs(parse_kv(text))


@dataclass
class Vocab:
    """Integer symbols plus the reserved pad/bos/eos ids."""
    size: int
    pad: int = PAD
    bos: int = BOS
    eos: int = EOS

    def __post_init__(self):
        if len({self.pad, self.bos, self.eos}) != 3:
            raise ValueError("reserved ids must be distinct")

    def symbols(self) -> range:
        return range(FIRST_SYMBOL, self.size)

    def encode(self, text: str) -> list[int]:
        ids = [int(t) for t in text.split()]
        for i in ids:
            if not 0 <= i < self.size:
                raise ValueError(f"token id {i} outside vocabulary of size {self.size}")
        return ids

    def decode(self, ids) -> str:
        return " ".join(str(int(i)) for i in ids if i not in (self.pad, self.bos, self.eos))


def sinusoidal_positions(n: int, d: int, offset: int = 0) -> np.ndarray:
    if d % 2:
        raise ValueError(f"sinusoidal positions need an even d, got {d}")
    pos = np.arange(offset, offset + n, dtype=np.float64)[:, None]
    div = np.power(10000.0, np.arange(0, d, 2, dtype=np.float64) / d)
    pe = np.zeros((n, d))
    pe[:, 0::2] = np.sin(pos / div)
    pe[:, 1::2] = np.cos(pos / div)
    return pe


def label_smoothed_nll(logits, targets, smoothing: float = 0.1, pad_id: int = PAD) -> Tensor:
    """``(1-s) * NLL(target) + s * mean_v NLL(v)``, averaged over non-pad targets."""
    if not 0.0 <= smoothing < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {smoothing}")
    logits = T.tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != logits.shape[:-1]:
        raise T.ShapeError(f"targets {targets.shape} vs logits {logits.shape}")
    keep = targets != pad_id
    count = int(keep.sum())
    if count == 0:
        raise ContractError("label_smoothed_nll: every target is padding")
    lp = T.log_softmax(logits, axis=-1)
    onehot = np.eye(logits.shape[-1])[targets]
    per_token = T.scale((lp * onehot).sum(axis=-1), -(1.0 - smoothing))
    if smoothing:
        per_token = per_token + T.scale(lp.mean(axis=-1), -smoothing)
    return T.scale((per_token * keep).sum(), 1.0 / count)


# -- parameters ---------------------------------------------------------------

def _xavier(rng: Rng, fan_in: int, fan_out: int, shape=None) -> Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, shape or (fan_in, fan_out)), requires_grad=True)


def _init_block(p: dict, prefix: str, cfg: ModelConfig, k: int, rng: Rng, decoder: bool):
    d = cfg.d
    ones, zeros = (lambda: Tensor(np.ones(d), requires_grad=True)), (lambda: Tensor(np.zeros(d), requires_grad=True))
    p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"] = ones(), zeros()
    if cfg.mechanism == "self_attention":
        a = init_attention(d, cfg.heads, rng.child(0))
        for name, w in zip(("wq", "wk", "wv", "wo"), a.tensors()):
            p[f"{prefix}.attn.{name}"] = w
    else:
        p[f"{prefix}.in_proj"] = _xavier(rng.child(1), d, 2 * d if cfg.use_glu else d)
        if cfg.mechanism == "dynamicconv":
            p[f"{prefix}.predictor"] = _xavier(rng.child(2), d, cfg.heads * k, (cfg.heads, k, d))
        elif cfg.mechanism == "cnn_nonseparable":
            p[f"{prefix}.kernel"] = _xavier(rng.child(2), k * d, d)
        else:
            p[f"{prefix}.kernel"] = _xavier(rng.child(2), k, cfg.conv_heads, (cfg.conv_heads, k))
        p[f"{prefix}.out_proj"] = _xavier(rng.child(3), d, d)
    if decoder:
        p[f"{prefix}.ln_src.g"], p[f"{prefix}.ln_src.b"] = ones(), zeros()
        a = init_attention(d, cfg.heads, rng.child(4))
        for name, w in zip(("wq", "wk", "wv", "wo"), a.tensors()):
            p[f"{prefix}.src.{name}"] = w
    p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"] = ones(), zeros()
    p[f"{prefix}.ffn.w1"] = _xavier(rng.child(5), d, cfg.d_ff)
    p[f"{prefix}.ffn.b1"] = Tensor(np.zeros(cfg.d_ff), requires_grad=True)
    p[f"{prefix}.ffn.w2"] = _xavier(rng.child(6), cfg.d_ff, d)
    p[f"{prefix}.ffn.b2"] = zeros()


def init_params(cfg: ModelConfig, seed: int = 1) -> dict[str, Tensor]:
    rng = Rng(seed, 100)
    p: dict[str, Tensor] = {}
    d = cfg.d
    for side, vocab in (("enc", cfg.src_vocab), ("dec", cfg.tgt_vocab)):
        emb = rng.child(0 if side == "enc" else 1).normal(0.0, d ** -0.5, (vocab, d))
        emb[PAD] = 0.0
        p[f"{side}.embed"] = Tensor(emb, requires_grad=True)
    for i, k in enumerate(cfg.enc_kernels):
        _init_block(p, f"enc.{i}", cfg, k, rng.child(10 + i), False)
    p["enc.ln.g"], p["enc.ln.b"] = Tensor(np.ones(d), requires_grad=True), Tensor(np.zeros(d), requires_grad=True)
    for i, k in enumerate(cfg.dec_kernels):
        _init_block(p, f"dec.{i}", cfg, k, rng.child(50 + i), True)
    p["dec.ln.g"], p["dec.ln.b"] = Tensor(np.ones(d), requires_grad=True), Tensor(np.zeros(d), requires_grad=True)
    # small output weights keep the initial prediction close to uniform
    p["dec.out"] = Tensor(rng.child(2).normal(0.0, 0.02, (d, cfg.tgt_vocab)), requires_grad=True)
    return p


def count_model_params(params: dict[str, Tensor], prefix: str = "") -> int:
    return sum(t.size for name, t in params.items() if name.startswith(prefix))


def block_param_count(cfg: ModelConfig, layer: int = 0) -> int:
    """Parameters of one encoder block (self sub-block + FFN + norms)."""
    return count_model_params(init_params(cfg), f"enc.{layer}.")


# -- incremental decoding state ---------------------------------------------

@dataclass
class LayerCache:
    window: np.ndarray | None = None       # last k conv inputs, [B, <=k, d]
    keys: np.ndarray | None = None         # self-attention keys, [B, H, t, d_k]
    values: np.ndarray | None = None
    src_keys: np.ndarray | None = None
    src_values: np.ndarray | None = None


@dataclass
class IncrementalState:
    layers: list[LayerCache]
    src_pad: np.ndarray
    position: int = 0

    def reorder(self, idx) -> None:
        """Keep only batch rows ``idx`` (beam reselection)."""
        idx = np.asarray(idx, dtype=np.int64)
        self.src_pad = self.src_pad[idx]
        for c in self.layers:
            for f in dataclasses.fields(c):
                v = getattr(c, f.name)
                if v is not None:
                    setattr(c, f.name, v[idx])


# -- model --------------------------------------------------------------------

@dataclass
class Seq2Seq:
    config: ModelConfig
    params: dict[str, Tensor] = field(default=None)
    seed: int = 1

    def __post_init__(self):
        if self.params is None:
            self.params = init_params(self.config, self.seed)

    def parameters(self) -> list[Tensor]:
        return [self.params[k] for k in sorted(self.params)]

    def names(self) -> list[str]:
        return sorted(self.params)

    def _attn(self, prefix: str, window=None) -> AttentionParams:
        p = self.params
        return AttentionParams(p[f"{prefix}.wq"], p[f"{prefix}.wk"], p[f"{prefix}.wv"], p[f"{prefix}.wo"],
                               heads=self.config.heads, window=window)

    def _embed(self, tokens: np.ndarray, side: str, offset: int = 0) -> Tensor:
        cfg = self.config
        vocab = cfg.src_vocab if side == "enc" else cfg.tgt_vocab
        if tokens.size and (tokens.min() < 0 or tokens.max() >= vocab):
            raise ValueError(f"token id out of range for vocabulary of size {vocab}")
        n = tokens.shape[-1]
        if offset + n > cfg.max_positions:
            raise ValueError(f"sequence length {offset + n} exceeds max_positions={cfg.max_positions}")
        emb = T.take(self.params[f"{side}.embed"], tokens, axis=0)
        # pad rows contribute nothing and so never receive gradient
        emb = emb * (tokens != PAD)[..., None]
        return T.scale(emb, math.sqrt(cfg.d)) + sinusoidal_positions(n, cfg.d, offset)

    def _dropout(self, x: Tensor, rng: Rng | None, training: bool) -> Tensor:
        p = self.config.dropout_p
        if not training or p == 0.0:
            return x
        keep = ~rng.bernoulli(p, x.shape)
        return x * (keep / (1.0 - p))

    def _conv_input(self, prefix: str, h: Tensor) -> Tensor:
        u = T.matmul(h, self.params[f"{prefix}.in_proj"])
        if self.config.use_glu:
            a, b = T.split(u, 2, axis=-1)
            u = a * T.sigmoid(b)
        return u

    def _conv_config(self, k: int, causal: bool) -> ConvConfig:
        cfg = self.config
        return ConvConfig(cfg.d, cfg.conv_heads, k, "causal" if causal else "centered",
                          cfg.normalizer, cfg.dropconnect_p)

    def _conv(self, prefix: str, u: Tensor, k: int, causal: bool, rng, training) -> Tensor:
        cfg = self.config
        cc = self._conv_config(k, causal)
        if cfg.mechanism == "dynamicconv":
            return dynamic_conv(u, self.params[f"{prefix}.predictor"], cc, rng, training)
        if cfg.mechanism == "cnn_nonseparable":
            windows = T.unfold(u, k, window_start(k, cc.padding))
            flat = T.reshape(windows, windows.shape[:-2] + (k * cfg.d,))
            return T.matmul(flat, self.params[f"{prefix}.kernel"])
        return lightconv(u, self.params[f"{prefix}.kernel"], cc, rng, training)

    def _self_block(self, prefix: str, x: Tensor, k: int, causal: bool, pad, rng, training) -> Tensor:
        cfg = self.config
        h = T.layer_norm(x, self.params[f"{prefix}.ln1.g"], self.params[f"{prefix}.ln1.b"])
        if cfg.mechanism == "self_attention":
            window = k if cfg.attention_window else None
            out = multi_head_self_attention(h, self._attn(f"{prefix}.attn", window), causal,
                                            key_padding=None if causal else pad)
        else:
            u = self._conv_input(prefix, h)
            if pad is not None:
                u = u * (~pad)[..., None]
            c = self._conv(prefix, u, k, causal, rng.child(1) if rng else None, training)
            out = T.matmul(c, self.params[f"{prefix}.out_proj"])
        return x + self._dropout(out, rng.child(2) if rng else None, training)

    def _ffn(self, prefix: str, x: Tensor, rng, training) -> Tensor:
        p = self.params
        h = T.layer_norm(x, p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"])
        f = T.relu(T.matmul(h, p[f"{prefix}.ffn.w1"]) + p[f"{prefix}.ffn.b1"])
        f = T.matmul(f, p[f"{prefix}.ffn.w2"]) + p[f"{prefix}.ffn.b2"]
        return x + self._dropout(f, rng.child(3) if rng else None, training)

    def encode(self, src, rng: Rng | None = None, training: bool = False) -> tuple[Tensor, np.ndarray]:
        src = np.atleast_2d(np.asarray(src, dtype=np.int64))
        pad = src == PAD
        x = self._embed(src, "enc")
        for i, k in enumerate(self.config.enc_kernels):
            r = rng.child(i) if rng else None
            x = self._self_block(f"enc.{i}", x, k, False, pad, r, training)
            x = self._ffn(f"enc.{i}", x, r, training)
        return T.layer_norm(x, self.params["enc.ln.g"], self.params["enc.ln.b"]), pad

    def decode(self, tgt_in, enc_out: Tensor, src_pad: np.ndarray, rng: Rng | None = None,
               training: bool = False) -> Tensor:
        """Logits ``[B, m, V]`` for every target prefix position."""
        p = self.params
        tgt_in = np.atleast_2d(np.asarray(tgt_in, dtype=np.int64))
        x = self._embed(tgt_in, "dec")
        for i, k in enumerate(self.config.dec_kernels):
            prefix = f"dec.{i}"
            r = rng.child(100 + i) if rng else None
            x = self._self_block(prefix, x, k, True, None, r, training)
            h = T.layer_norm(x, p[f"{prefix}.ln_src.g"], p[f"{prefix}.ln_src.b"])
            a = self._attn(f"{prefix}.src")
            keys, values = project_kv(enc_out, a)
            ctx = attend(h, keys, values, a, src_pad[:, None, None, :])
            x = x + self._dropout(ctx, r.child(4) if r else None, training)
            x = self._ffn(prefix, x, r, training)
        h = T.layer_norm(x, p["dec.ln.g"], p["dec.ln.b"])
        return T.matmul(h, p["dec.out"])

    def forward(self, src, tgt_in, rng: Rng | None = None, training: bool = False) -> Tensor:
        enc_out, pad = self.encode(src, rng.child(0) if rng else None, training)
        return self.decode(tgt_in, enc_out, pad, rng.child(1) if rng else None, training)

    def loss(self, src, tgt_in, tgt_out, smoothing: float = 0.1, rng: Rng | None = None,
             training: bool = False) -> Tensor:
        return label_smoothed_nll(self.forward(src, tgt_in, rng, training), tgt_out, smoothing)

    # -- incremental decoding ------------------------------------------------

    def init_state(self, enc_out: Tensor, src_pad: np.ndarray) -> IncrementalState:
        layers = []
        with T.no_grad():
            for i in range(self.config.dec_layers):
                keys, values = project_kv(enc_out, self._attn(f"dec.{i}.src"))
                layers.append(LayerCache(src_keys=keys.data, src_values=values.data))
        return IncrementalState(layers, np.asarray(src_pad, dtype=bool))

    def step(self, state: IncrementalState, tokens) -> np.ndarray:
        """Logits ``[B, V]`` for the next position given the newest tokens ``[B]``."""
        cfg, p = self.config, self.params
        t = state.position
        tokens = np.asarray(tokens, dtype=np.int64).reshape(-1, 1)
        with T.no_grad():
            x = self._embed(tokens, "dec", offset=t)
            for i, k in enumerate(cfg.dec_kernels):
                prefix, cache = f"dec.{i}", state.layers[i]
                h = T.layer_norm(x, p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"])
                if cfg.mechanism == "self_attention":
                    a = self._attn(f"{prefix}.attn", k if cfg.attention_window else None)
                    kk, vv = project_kv(h, a)
                    cache.keys = kk.data if cache.keys is None else np.concatenate([cache.keys, kk.data], axis=-2)
                    cache.values = vv.data if cache.values is None else np.concatenate([cache.values, vv.data], axis=-2)
                    mask = attention_mask(1, t + 1, True, a.window, offset=t)
                    out = attend(h, Tensor(cache.keys), Tensor(cache.values), a, mask)
                else:
                    u = self._conv_input(prefix, h)
                    buf = u.data if cache.window is None else np.concatenate([cache.window, u.data], axis=-2)
                    cache.window = buf[:, -k:]
                    c = self._conv_step(prefix, cache.window, u, k)
                    out = T.matmul(c, p[f"{prefix}.out_proj"])
                x = x + out
                h = T.layer_norm(x, p[f"{prefix}.ln_src.g"], p[f"{prefix}.ln_src.b"])
                ctx = attend(h, Tensor(cache.src_keys), Tensor(cache.src_values), self._attn(f"{prefix}.src"),
                             state.src_pad[:, None, None, :])
                x = self._ffn(prefix, x + ctx, None, False)
            h = T.layer_norm(x, p["dec.ln.g"], p["dec.ln.b"])
            logits = T.matmul(h, p["dec.out"])
        state.position += 1
        return logits.data[:, 0, :]

    def _conv_step(self, prefix: str, window: np.ndarray, u: Tensor, k: int) -> Tensor:
        """Causal conv output for the newest position from its ``[B, <=k, d]`` window."""
        cfg = self.config
        b, have, d = window.shape
        win = np.zeros((b, 1, k, d))
        win[:, 0, k - have:] = window
        if cfg.mechanism == "cnn_nonseparable":
            return T.matmul(win.reshape(b, 1, k * d), self.params[f"{prefix}.kernel"])
        cc = self._conv_config(k, True)
        if cfg.mechanism == "dynamicconv":
            wn = dynamic_kernels(u, self.params[f"{prefix}.predictor"], cc)
        else:
            wn = dropconnect(normalize_kernel(self.params[f"{prefix}.kernel"], cc.normalizer),
                             0.0, None, False)
        return apply_windows(win, expand_shared_weights(wn, cfg.d))

    def incremental_logits(self, src, tgt_in) -> np.ndarray:
        """Teacher-forced logits computed one step at a time, ``[B, m, V]``."""
        with T.no_grad():
            enc_out, pad = self.encode(src)
            state = self.init_state(enc_out, pad)
            tgt_in = np.atleast_2d(np.asarray(tgt_in, dtype=np.int64))
            return np.stack([self.step(state, tgt_in[:, t]) for t in range(tgt_in.shape[1])], axis=1)


# -- decoding -----------------------------------------------------------------

def greedy_decode(model: Seq2Seq, src, max_len: int, banned=(PAD, BOS)) -> np.ndarray:
    """Batched greedy decoding; rows are padded with PAD after EOS."""
    src = np.atleast_2d(np.asarray(src, dtype=np.int64))
    with T.no_grad():
        enc_out, pad = model.encode(src)
    state = model.init_state(enc_out, pad)
    b = src.shape[0]
    out = np.full((b, max_len), PAD, dtype=np.int64)
    prev = np.full(b, BOS, dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    for t in range(max_len):
        logits = model.step(state, prev)
        logits[:, list(banned)] = -np.inf
        tok = np.argmax(logits, axis=-1)
        out[:, t] = np.where(done, PAD, tok)
        done |= tok == EOS
        prev = tok
        if done.all():
            break
    return out


def length_penalty(length: int, alpha: float) -> float:
    return ((5.0 + length) / 6.0) ** alpha


def beam_decode(model: Seq2Seq, src, beam: int = 4, max_len: int | None = None, alpha: float = 1.0,
                eos: int | None = EOS, banned=(PAD, BOS)) -> list[int]:
    """Beam search over summed log-probabilities.

    Finished hypotheses are ranked by ``logprob / ((5 + len) / 6) ** alpha``;
    hypotheses still alive at ``max_len`` are finished by truncation. With
    ``eos=None`` no hypothesis ends early.
    """
    if beam < 1:
        raise ValueError(f"beam must be >= 1, got {beam}")
    src = np.asarray(src, dtype=np.int64).reshape(1, -1)
    if max_len is None:
        max_len = src.shape[1] + 10
    with T.no_grad():
        enc_out, pad = model.encode(src)
    state = model.init_state(enc_out, pad)
    alive: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[float, list[int]]] = []
    prev = np.array([BOS])
    for _ in range(max_len):
        logits = model.step(state, prev)
        lp = T.log_softmax(Tensor(logits)).data
        if banned:
            lp[:, list(banned)] = -np.inf
        scores = np.array([s for _, s in alive])[:, None] + lp
        # the top `beam` extensions; finished ones shrink the live beam
        order = np.argsort(-scores, axis=None, kind="stable")[: beam - len(finished)]
        parents, nxt = [], []
        for flat in order:
            r, tok = divmod(int(flat), lp.shape[1])
            score = float(scores[r, tok])
            if not np.isfinite(score):
                break
            seq = alive[r][0] + [tok]
            if eos is not None and tok == eos:
                finished.append((score / length_penalty(len(seq), alpha), seq))
            elif len(nxt) < beam:
                parents.append(r)
                nxt.append((seq, score))
        if len(finished) >= beam or not nxt:
            break
        alive = nxt
        state.reorder(parents)
        prev = np.array([s[-1] for s, _ in alive])
    else:
        for seq, score in alive:
            finished.append((score / length_penalty(len(seq), alpha), seq))
    if not finished:
        finished = [(s / length_penalty(len(q), alpha), q) for q, s in alive]
    best = max(finished, key=lambda f: f[0])
    return best[1]
