"""Network definitions.

Every generator ends in a sigmoid so outputs stay in [0,1] for any
parameter values. Normalization is GroupNorm(1, c), which is batch-size
independent and has no train/eval mode split, keeping inference a pure
function of the parameters.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .charset import N_CHARS


def _down(c_in: int, c_out: int, kernel: int = 4) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, kernel, stride=2, padding=1),
        nn.GroupNorm(1, c_out),
        nn.LeakyReLU(0.2),
    )


def _up(c_in: int, c_out: int, kernel: int = 4) -> nn.Sequential:
    # kernel 3 needs output_padding to exactly double the spatial size
    return nn.Sequential(
        nn.ConvTranspose2d(c_in, c_out, kernel, stride=2, padding=1,
                           output_padding=kernel % 2),
        nn.GroupNorm(1, c_out),
        nn.ReLU(),
    )


class ContextEncoder(nn.Module):
    """Encoder → fully-connected bottleneck → decoder.

    The encoder downsamples the masked image to a 4x4 feature map, a linear
    layer maps it to a flat latent code, and the decoder upsamples a linear
    projection of that code back to a full-size image.
    """

    def __init__(self, input_size: int = 128, in_channels: int = 3,
                 base_channels: int = 16, latent_dim: int = 256):
        super().__init__()
        if input_size & (input_size - 1) or input_size < 16:
            raise ValueError(f"input_size must be a power of two >= 16, "
                             f"got {input_size}")
        self.input_size = input_size
        self.latent_dim = latent_dim
        n_down = input_size.bit_length() - 3  # down to 4x4
        chans = [in_channels] + [base_channels * min(2 ** i, 8) for i in range(n_down)]
        self.encoder = nn.Sequential(*[_down(chans[i], chans[i + 1])
                                       for i in range(n_down)])
        feat = chans[-1] * 4 * 4
        self.to_latent = nn.Linear(feat, latent_dim)
        self.from_latent = nn.Linear(latent_dim, feat)
        ups = [_up(chans[i + 1], chans[i]) for i in reversed(range(1, n_down))]
        self.decoder = nn.Sequential(
            *ups,
            nn.ConvTranspose2d(chans[1], in_channels, 4, stride=2, padding=1),
            nn.Sigmoid(),
        )
        self._feat_shape = (chans[-1], 4, 4)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        h = self.encoder(x)
        return self.to_latent(h.flatten(1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.encode(x)
        h = self.from_latent(z).view(-1, *self._feat_shape)
        return self.decoder(h)


class Discriminator(nn.Module):
    """Real/fake logit for a fixed-size image patch."""

    def __init__(self, input_size: int = 64, in_channels: int = 3,
                 base_channels: int = 16):
        super().__init__()
        n_down = max(1, input_size.bit_length() - 3)
        chans = [in_channels] + [base_channels * min(2 ** i, 8) for i in range(n_down)]
        self.features = nn.Sequential(*[_down(chans[i], chans[i + 1])
                                        for i in range(n_down)])
        side = input_size // (2 ** n_down)
        self.head = nn.Linear(chans[-1] * side * side, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x).flatten(1)).squeeze(1)


class GlyphNet(nn.Module):
    """Completes a partially observed 62-slot glyph stack with shape masks.

    U-Net over the stack treated as 62 channels: unobserved slots enter as
    zeros, the output always carries all 62 masks.
    """

    def __init__(self, glyph_size: int = 64, base_channels: int = 32,
                 depth: int = 3, kernel: int = 4):
        super().__init__()
        if glyph_size % (2 ** depth):
            raise ValueError(f"glyph_size {glyph_size} not divisible by 2^{depth}")
        self.glyph_size = glyph_size
        self.depth = depth
        chans = [N_CHARS] + [base_channels * 2 ** i for i in range(depth)]
        self.downs = nn.ModuleList(
            [_down(chans[i], chans[i + 1], kernel) for i in range(depth)])
        ups = []
        for i in reversed(range(1, depth)):
            c_in = chans[i + 1] * (1 if i == depth - 1 else 2)
            ups.append(_up(c_in, chans[i], kernel))
        self.ups = nn.ModuleList(ups)
        c_last = chans[1] * (1 if depth == 1 else 2)
        self.final = nn.Sequential(
            nn.ConvTranspose2d(c_last, N_CHARS, kernel, stride=2, padding=1,
                               output_padding=kernel % 2),
            nn.Sigmoid(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        h = x
        for down in self.downs:
            h = down(h)
            skips.append(h)
        for i, up in enumerate(self.ups):
            h = up(h)
            h = torch.cat([h, skips[self.depth - 2 - i]], dim=1)
        return self.final(h)


class OrnaNet(nn.Module):
    """Predicts ink RGB for one glyph slot from its shape mask plus a
    broadcast style color (4 input channels → 3 output channels)."""

    def __init__(self, base_channels: int = 16):
        super().__init__()
        b = base_channels
        self.net = nn.Sequential(
            nn.Conv2d(4, b, 3, padding=1),
            nn.GroupNorm(1, b),
            nn.LeakyReLU(0.2),
            _down(b, b),
            _up(b, b),
            nn.Conv2d(b, 3, 3, padding=1),
            nn.Sigmoid(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)
