"""Multimodal joint-perception network.

Image pyramid from a small CNN, per-point features from a shared-MLP point
encoder, softmax-weighted multi-scale image aggregation conditioned on the
point features, a positional-embedding-free transformer over
point-plus-image tokens with a CLS token, and four decoder heads.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .. import tensor as T
from ..errors import ShapeError
from ..tensor import MLP, BatchNorm, Conv2d, EncoderLayer, Linear, ParameterRegistry, Tensor

# parameter groups, used by the training stages to freeze/unfreeze
BACKBONE, POINTS, MLDM, MLDM_WEIGHT, FUSION = "backbone", "points", "mldm", "mldm_weight", "fusion"
HEAD_MOV, HEAD_TYPE, HEAD_PARA, HEAD_SCORE = "mov", "type", "para", "score"
ENCODER_GROUPS = (BACKBONE, POINTS, MLDM, MLDM_WEIGHT, FUSION)


@dataclass(frozen=True)
class PerceptConfig:
    K: int = 32
    n_scales: int = 4
    layers: int = 2
    heads: int = 4
    n_points: int = 256
    resolution: int = 64
    channels: tuple[int, ...] = (16, 32, 64, 128)
    second_kernel: int = 1
    use_mldm: bool = True
    normalize_votes: bool = False
    seed: int = 0

    def manifest(self) -> dict:
        d = asdict(self)
        d["channels"] = ",".join(map(str, self.channels))
        return d


@dataclass
class Prediction:
    tau: Tensor  # (B,) movability probability
    rho: Tensor  # (B,) probability the joint is prismatic
    h: Tensor  # (B, 3)
    u: Tensor  # (B, 3) unit
    v: Tensor  # (B,)
    gamma: Tensor  # (B,) perception score
    votes: Tensor  # (B, N, 7): position, raw orientation, state
    cls: Tensor  # (B, 2K)
    weights: Tensor  # (B, n_scales) scale weights

    @property
    def vote_h(self):
        return self.votes[:, :, 0:3]

    @property
    def vote_u(self):
        return self.votes[:, :, 3:6]

    @property
    def vote_v(self):
        return self.votes[:, :, 6]


class PerceptionModel:
    def __init__(self, config: PerceptConfig = PerceptConfig()):
        self.config = c = config
        if not 1 <= c.n_scales <= len(c.channels):
            raise ValueError(f"n_scales must be in [1, {len(c.channels)}]")
        if (2 * c.K) % c.heads:
            raise ValueError(f"token width {2 * c.K} not divisible by {c.heads} heads")
        self.reg = reg = ParameterRegistry()
        rng = np.random.default_rng(c.seed)
        K = c.K

        self.stages = []
        c_in = 3
        for i, ch in enumerate(c.channels):
            self.stages.append((Conv2d(reg, f"cnn{i}.conv_a", c_in, ch, 3, BACKBONE, rng),
                                BatchNorm(reg, f"cnn{i}.bn_a", ch, BACKBONE, rng),
                                Conv2d(reg, f"cnn{i}.conv_b", ch, ch, c.second_kernel, BACKBONE, rng),
                                BatchNorm(reg, f"cnn{i}.bn_b", ch, BACKBONE, rng)))
            c_in = ch

        self.pt_mlp = MLP(reg, "pts.mlp", (3, 64, K), POINTS, rng)
        self.pt_ctx = Linear(reg, "pts.ctx", 2 * K, K, POINTS, rng)

        scale_channels = c.channels[len(c.channels) - c.n_scales:]
        self.pwconv = [Conv2d(reg, f"mldm.pw{i}", ch, K, 1, MLDM, rng) for i, ch in enumerate(scale_channels)]
        self.pw_bn = [BatchNorm(reg, f"mldm.bn{i}", K, MLDM, rng) for i in range(c.n_scales)]
        self.theta_w = MLP(reg, "mldm.w", (K, 4 * K, 1), MLDM_WEIGHT, rng)

        self.cls_token = reg.add("fusion.cls", (2 * K,), "normal", FUSION, rng)
        self.encoder = [EncoderLayer(reg, f"fusion.l{i}", 2 * K, c.heads, FUSION, rng) for i in range(c.layers)]

        self.theta_mov = MLP(reg, "head.mov", (2 * K, K, 1), HEAD_MOV, rng)
        self.theta_type = MLP(reg, "head.type", (2 * K, K, 1), HEAD_TYPE, rng)
        self.theta_para = MLP(reg, "head.para", (3 + 2 * K, K, 7), HEAD_PARA, rng)
        self.theta_score = MLP(reg, "head.score", (2 * K, K, 1), HEAD_SCORE, rng)
        self._bns = [m for s in self.stages for m in s if isinstance(m, BatchNorm)] + self.pw_bn
        self.train(False)

    def train(self, mode: bool = True) -> "PerceptionModel":
        for bn in self._bns:
            bn.training = mode
        return self

    # ------------------------------------------------------------- pieces

    def cnn_backbone(self, rgb) -> list[Tensor]:
        """(B, H, W, 3) image in [0, 1] -> four (B, C, H/2^i, W/2^i) feature maps."""
        x = T.as_tensor(rgb)
        R = self.config.resolution
        if x.ndim != 4 or x.shape[1:] != (R, R, 3):
            raise ShapeError(f"cnn_backbone expects (B, {R}, {R}, 3) images, got {x.shape}")
        x = T.transpose(x, (0, 3, 1, 2))
        pyramid = []
        for conv_a, bn_a, conv_b, bn_b in self.stages:
            x = T.relu(bn_a(conv_a(x)))
            x = T.relu(bn_b(conv_b(x)))
            x = T.max_pool2d(x, 2)
            pyramid.append(x)
        return pyramid

    def point_encoder(self, points) -> Tensor:
        """(B, N, 3) centred points -> (B, N, K) per-point features."""
        p = T.as_tensor(points)
        if p.ndim != 3 or p.shape[1:] != (self.config.n_points, 3):
            raise ShapeError(f"point_encoder expects (B, {self.config.n_points}, 3), got {p.shape}")
        f = T.relu(self.pt_mlp(p))
        B, N, K = f.shape
        ctx = T.expand(T.reshape(T.max_over(f, 1), (B, 1, K)), 1, N)
        return T.relu(self.pt_ctx(T.concat([f, ctx], axis=-1)))

    def mldm_aggregate_image(self, pyramid: list[Tensor]) -> list[Tensor]:
        """Per scale: pointwise conv to K channels, BN, relu, global average pool."""
        scales = pyramid[len(pyramid) - self.config.n_scales:]
        return [T.global_avg_pool(T.relu(bn(pw(f)))) for f, pw, bn in zip(scales, self.pwconv, self.pw_bn)]

    def mldm_fuse(self, fbar: list[Tensor], point_feats: Tensor) -> tuple[Tensor, Tensor]:
        """Scale-weighted image feature (B, K) and the scale weights (B, n)."""
        B, K = fbar[0].shape
        if not self.config.use_mldm:
            w = np.zeros((B, len(fbar)))
            w[:, -1] = 1.0
            return fbar[-1], Tensor(w)
        fp = T.max_over(point_feats, 1)
        logits = T.concat([self.theta_w(f + fp) for f in fbar], axis=1)
        w = T.softmax(logits, axis=1)
        fr = None
        for i, f in enumerate(fbar):
            term = T.expand(w[:, i:i + 1], 1, K) * f
            fr = term if fr is None else fr + term
        return fr, w

    def fuse(self, point_feats: Tensor, f_r: Tensor) -> tuple[Tensor, Tensor]:
        """Transformer over [CLS; point_j ++ f_r] tokens -> (cls (B, 2K), per-point (B, N, 2K))."""
        B, N, K = point_feats.shape
        if f_r.shape != (B, K):
            raise ShapeError(f"fuse: image feature must be ({B}, {K}), got {f_r.shape}")
        img = T.expand(T.reshape(f_r, (B, 1, K)), 1, N)
        tokens = T.concat([point_feats, img], axis=-1)
        cls = T.expand(T.reshape(self.cls_token, (1, 1, 2 * K)), 0, B)
        x = T.concat([cls, tokens], axis=1)
        for layer in self.encoder:
            x = layer(x)
        return x[:, 0, :], x[:, 1:, :]

    def decode_movability(self, cls: Tensor) -> Tensor:
        return T.sigmoid(T.reshape(self.theta_mov(cls), (cls.shape[0],)))

    def decode_score(self, cls: Tensor) -> Tensor:
        return T.sigmoid(T.reshape(self.theta_score(cls), (cls.shape[0],)))

    def decode_joint(self, cls: Tensor, points, fused: Tensor):
        """Joint-type probability and mean-of-votes h, u, v.

        ``points`` are camera-frame coordinates (B, N, 3); each point votes
        for the joint position as an offset from itself.
        """
        p = T.as_tensor(points)
        B, N, _ = p.shape
        rho = T.sigmoid(T.reshape(self.theta_type(cls), (B,)))
        centre = T.expand(T.mean(p, axis=1, keepdims=True), 1, N)
        raw = self.theta_para(T.concat([p - centre, fused], axis=-1))
        votes = T.concat([raw[:, :, 0:3] + p, raw[:, :, 3:7]], axis=-1)
        h = T.mean(votes[:, :, 0:3], axis=1)
        vu = votes[:, :, 3:6]
        if self.config.normalize_votes:
            vu = vu / T.expand(T.reshape(T.norm(vu, axis=-1), (B, N, 1)), 2, 3)
        um = T.mean(vu, axis=1)
        u = um / T.expand(T.reshape(T.norm(um, axis=-1), (B, 1)), 1, 3)
        v = T.mean(votes[:, :, 6], axis=1)
        return rho, h, u, v, votes

    # -------------------------------------------------------------- full

    def encode(self, rgb, cloud):
        """Shared trunk: returns (cls, per-point fused features, scale weights, points)."""
        pts = np.asarray(cloud, dtype=np.float64)
        centred = pts - pts.mean(axis=1, keepdims=True)
        pf = self.point_encoder(centred)
        fbar = self.mldm_aggregate_image(self.cnn_backbone(np.asarray(rgb, dtype=np.float64)))
        f_r, w = self.mldm_fuse(fbar, pf)
        cls, fused = self.fuse(pf, f_r)
        return cls, fused, w, pts

    def __call__(self, rgb, cloud) -> Prediction:
        cls, fused, w, pts = self.encode(rgb, cloud)
        rho, h, u, v, votes = self.decode_joint(cls, pts, fused)
        return Prediction(tau=self.decode_movability(cls), rho=rho, h=h, u=u, v=v,
                          gamma=self.decode_score(cls), votes=votes, cls=cls, weights=w)

    def predict(self, rgb, cloud, batch: int = 32) -> dict[str, np.ndarray]:
        """Inference in chunks; returns plain arrays."""
        self.train(False)
        rgb, cloud = np.asarray(rgb), np.asarray(cloud)
        keys = ("tau", "rho", "h", "u", "v", "gamma", "cls", "weights")
        out = {k: [] for k in keys}
        with T.no_grad():
            for s in range(0, len(rgb), batch):
                p = self(rgb[s:s + batch], cloud[s:s + batch])
                for k in keys:
                    out[k].append(getattr(p, k).data)
        return {k: np.concatenate(v) for k, v in out.items()}
