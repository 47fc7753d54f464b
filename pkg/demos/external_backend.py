"""Score through a subprocess instead of in-process, and compare.

The search only ever talks to a classifier through the scoring interface,
so a model served by a separate process over the line-JSON protocol is a
drop-in replacement for the in-process one. This demo saves a model to
JSON, launches `python -m cfseg.serve` on it, scores the same images both
ways, and runs the same explanation through each path.

Images are kept on the 8-bit lattice (k/255) and removal paints constant
black, so the PNG frames exchanged with the subprocess are lossless and
the two paths agree bit-for-bit on the decision, not just approximately.

    python3 demos/external_backend.py
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from cfseg import (
    BuiltinLinear,
    ConstantColor,
    ExternalProcess,
    Grid,
    Image,
    LinearModel,
    SearchConfig,
    sedc,
    segment,
)


def lattice_image(rng, side):
    return Image(rng.integers(0, 256, size=(side, side, 1)) / 255.0)


def main():
    rng = np.random.default_rng(42)
    model = LinearModel(rng.normal(size=(3, 16, 16, 1)) * 0.1, rng.normal(size=3))

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.json"
        model.save(path)
        print(f"saved a 3-class linear model to {path.name}")

        local = BuiltinLinear(model)
        remote = ExternalProcess(
            [sys.executable, "-m", "cfseg.serve", "--model", str(path)]
        )
        print(f"backend up, serving {remote.class_count} classes")
        print()

        try:
            images = [lattice_image(rng, 16) for _ in range(32)]
            ours = local.score(images)
            theirs = remote.score(images)
            worst = float(np.max(np.abs(ours - theirs)))
            print(f"scored 32 images both ways; largest deviation {worst:.3g}")
            agree = (ours.argmax(axis=1) == theirs.argmax(axis=1)).all()
            print(f"argmax agreement on every image: {agree}")
            print()

            config = SearchConfig(replacement=ConstantColor((0.0,)))
            image = images[0]
            segmap = segment(image, Grid(4))
            a = sedc(image, local, segmap, config).explanation
            b = sedc(image, remote, segmap, config).explanation
            print("explanation via in-process scoring:", list(a.segments))
            print("explanation via the subprocess:    ", list(b.segments))
            print(f"identical: {a.segments == b.segments}")
            print()
            print(f"in-process calls counted: {local.evaluations}")
            print(f"subprocess calls counted: {remote.evaluations}")
        finally:
            remote.close()


if __name__ == "__main__":
    main()
