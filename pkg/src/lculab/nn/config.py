from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ShapeMismatch


@dataclass(frozen=True)
class ModelConfig:
    decoder_layers: int = 4
    model_dim: int = 16
    heads: int = 4
    vocab_out: int = 6
    max_seq: int = 512
    cnn_stem_channels: int = 16
    cnn_stage_channels: tuple[int, int, int, int] = (16, 32, 64, 128)
    qp_max: int = 63
    ffn_dim: int = 64

    def __post_init__(self) -> None:
        object.__setattr__(self, "cnn_stage_channels", tuple(int(c) for c in self.cnn_stage_channels))
        if len(self.cnn_stage_channels) != 4:
            raise ShapeMismatch("cnn_stage_channels needs four entries")
        if self.vocab_out != 6:
            raise ShapeMismatch("vocab_out is fixed at 6")
        if self.model_dim % self.heads:
            raise ShapeMismatch("model_dim must be divisible by heads")
        if min(self.decoder_layers, self.model_dim, self.max_seq, self.cnn_stem_channels,
               self.qp_max, self.ffn_dim, *self.cnn_stage_channels) <= 0:
            raise ShapeMismatch("all sizes must be positive")

    @classmethod
    def reduced(cls, **overrides) -> "ModelConfig":
        """Small configuration used for gradient checks and desk-scale training."""
        base = cls(decoder_layers=1, model_dim=16, heads=2, cnn_stage_channels=(8, 8, 8, 8))
        return replace(base, **overrides)

    def as_ints(self) -> list[int]:
        """Flat integer list in field order; the weights-file config block."""
        out: list[int] = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.extend(v if isinstance(v, tuple) else [v])
        return out

    @classmethod
    def from_ints(cls, values) -> "ModelConfig":
        v = list(values)
        return cls(v[0], v[1], v[2], v[3], v[4], v[5], tuple(v[6:10]), v[10], v[11])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cnn_stage_channels"] = list(self.cnn_stage_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: (tuple(v) if k == "cnn_stage_channels" else v) for k, v in d.items()})


CONFIG_INTS = len(ModelConfig().as_ints())
