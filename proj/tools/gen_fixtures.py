#!/usr/bin/env python3
# Copyright 2026 The Pipeplan Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the synthetic profiles in fixtures/.

Layer times follow t(b) = t64 * (a + (1 - a) * b / 64): a fixed per-call
share `a` plus a part linear in the batch. a = 0.15 for trainable layers and
0.11 for frozen ones reproduces a frozen-to-trainable time ratio of about
0.38 / 0.40 / 0.42 / 0.44 at batch 8 / 16 / 32 / 64 on one device.

Usage: gen_fixtures.py [output_dir]
"""

import json
import math
import pathlib
import sys

KEYS = [1, 2, 4, 8, 12, 16, 24, 32, 48, 64, 96, 128]
TRAINABLE_FIXED = 0.15
FROZEN_FIXED = 0.11


def curve(t64, fixed):
    return [[b, round(t64 * (fixed + (1 - fixed) * b / 64), 9)] for b in KEYS]


def byte_curve(per_sample):
    return [[b, int(per_sample * b)] for b in KEYS]


def const_bytes(n):
    return [[b, int(n)] for b in KEYS]


def trainable_layer(fwd64, act_per_sample, params):
    return {
        "fwd_time": curve(fwd64, TRAINABLE_FIXED),
        "bwd_time": curve(2.0 * fwd64, TRAINABLE_FIXED),
        "fwd_comm_bytes": byte_curve(act_per_sample),
        "bwd_comm_bytes": byte_curve(act_per_sample),
        "grad_bytes": const_bytes(2 * params),
        "out_bytes": byte_curve(act_per_sample),
    }


def frozen_layer(fwd64, out_per_sample):
    return {
        "fwd_time": curve(fwd64, FROZEN_FIXED),
        "out_bytes": byte_curve(out_per_sample),
    }


def unet(name, blocks, fwd64_total, act_scale, params_total):
    """U-Net shaped backbone: cost and activation size vary by resolution."""
    weights = []
    acts = []
    for level in blocks:
        weights.append(1.0 + 0.5 * math.sin(level))
        acts.append(act_scale / (2 ** level))
    w = sum(weights)
    layers = []
    for i, (wt, act) in enumerate(zip(weights, acts)):
        layers.append(trainable_layer(fwd64_total * wt / w, act,
                                      params_total * wt / w))
    return {"name": name, "trainable": True, "layers": layers}


def frozen(name, times64, out_per_sample):
    return {
        "name": name,
        "trainable": False,
        "layers": [frozen_layer(t, out_per_sample) for t in times64],
    }


def sd21_like():
    # 12 down, 1 middle, 12 up blocks at resolution levels 0..3.
    levels = [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 3,
              3, 3, 3, 2, 2, 2, 1, 1, 1, 0, 0, 0]
    fwd_total = 1.5
    backbone = unet("unet", levels, fwd_total, 1.3e6, 865e6)
    trainable64 = 3.0 * fwd_total  # forward plus backward at batch 64
    frozen_total = 0.44 * trainable64
    text = [0.006] * 22
    moderate = [0.012 + 0.001 * i for i in range(17)]
    long_each = (frozen_total - sum(text) - sum(moderate)) / 3
    image = moderate[:8] + [long_each] + moderate[8:12] + [long_each] + \
        moderate[12:] + [long_each]
    return {
        "format": "pipeplan.profile",
        "version": 1,
        "selfcond_prob": 0.0,
        "backbones": [backbone],
        "frozen": [frozen("text_encoder", text, 2.0e5),
                   frozen("image_encoder", image, 6.5e4)],
        "frozen_deps": [],
    }


def cdm_like():
    base_levels = [0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 1, 1, 0, 0]
    sr_levels = [0, 0, 0, 1, 1, 1, 2, 2, 3, 3, 2, 2, 1, 1, 1, 0, 0, 0]
    base = unet("base_unet", base_levels, 0.9, 4.0e5, 300e6)
    sr = unet("sr_unet", sr_levels, 1.2, 1.6e6, 400e6)
    text = [0.01] * 24
    # Low-resolution conditioning for the super-resolution backbone: an
    # image encoder followed by a noise-augmentation step that needs it.
    image = [0.02 + 0.002 * i for i in range(10)] + [0.35]
    augment = [0.015, 0.015]
    return {
        "format": "pipeplan.profile",
        "version": 1,
        "selfcond_prob": 0.0,
        "backbones": [base, sr],
        "frozen": [frozen("text_encoder", text, 4.0e5),
                   frozen("image_encoder", image, 5.0e4),
                   frozen("noise_augment", augment, 5.0e4)],
        "frozen_deps": [[1, 2]],
    }


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
    out.mkdir(parents=True, exist_ok=True)
    for name, doc in (("sd21-like.profile", sd21_like()),
                      ("cdm-like.profile", cdm_like())):
        (out / name).write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
