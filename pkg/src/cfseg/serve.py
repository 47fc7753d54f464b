"""Reference scoring server: wraps a linear model file behind the wire
protocol so the external-process path can be exercised end to end.

    python -m cfseg.serve --model model.json

Reads newline-delimited JSON requests on stdin, writes one JSON reply per
line on stdout. Malformed score requests get an error reply with the same
id; the process only exits when stdin closes.
"""

from __future__ import annotations

import argparse
import base64
import json
import sys

from .classifiers import LinearModel
from .fileio import decode_png_bytes


def _reply(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _handle_score(model: LinearModel, req: dict) -> dict:
    rid = req["id"]
    try:
        image = decode_png_bytes(base64.b64decode(req["png_b64"]))
        k, h, w, c = model.weights.shape
        if (req["height"], req["width"], req["channels"]) != (h, w, c):
            raise ValueError(
                f"declared {(req['height'], req['width'], req['channels'])}, "
                f"model wants {(h, w, c)}"
            )
        if image.pixels.shape != (h, w, c):
            raise ValueError(f"decoded shape {image.pixels.shape}, model wants {(h, w, c)}")
        flat = image.pixels.reshape(-1)
        scores = model.weights.reshape(k, -1) @ flat + model.biases
        return {"type": "scores", "id": rid, "scores": [float(s) for s in scores]}
    except Exception as exc:
        return {"type": "error", "id": rid, "message": str(exc)}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cfseg.serve", description=__doc__)
    parser.add_argument("--model", required=True, help="path to a linear model JSON file")
    args = parser.parse_args(argv)

    model = LinearModel.load(args.model)

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            continue  # nothing useful to attach an id to
        kind = req.get("type")
        if kind == "hello":
            _reply({"type": "ready", "classes": model.class_count})
        elif kind == "score":
            if "id" not in req:
                continue
            _reply(_handle_score(model, req))
        # unknown message types are ignored
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
