#!/usr/bin/env python3
"""Write a small demo scene (driving, reference, lighting, config) for lcvd."""

import argparse
import json
import math
import pathlib


def light(angle, dc=(1.8, 1.7, 1.6)):
    rows = []
    for c in dc:
        row = [0.0] * 9
        row[0] = c
        row[1] = 0.1
        row[2] = 0.4 * math.cos(angle)
        row[3] = 0.4 * math.sin(angle)
        rows.append(row)
    return {"sh": rows}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--frames", type=int, default=24)
    ap.add_argument("--shape-dims", type=int, default=100)
    ap.add_argument("--expr-dims", type=int, default=50)
    ap.add_argument("--light-angle", type=float, default=0.7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    frames = []
    for i in range(args.frames):
        t = i / 6.0
        frames.append({
            "rotation": [0.05 * math.sin(t), 0.3 * math.sin(t), 0.0],
            "translation": [0.02 * math.cos(t), 0.0, 0.0],
            "expression": [0.5 * math.sin(t + 0.3 * k) for k in range(args.expr_dims)],
        })
    reference = {
        "pose": {"rotation": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, 0.0]},
        "shape": [0.2] * args.shape_dims,
        "lighting": light(0.0),
        "albedo": [0.9, 0.7, 0.6],
        "background": [0.1, 0.15, 0.2],
    }
    config = {
        "driving": "driving.json",
        "reference": "reference.json",
        "lighting": "lighting.json",
        "output_dir": "out",
        "resolution": 128,
        "seed": 7,
    }
    files = {
        "driving.json": {"frames": frames},
        "reference.json": reference,
        "lighting.json": light(args.light_angle),
        "config.json": config,
    }
    for name, payload in files.items():
        (args.out / name).write_text(json.dumps(payload, indent=2) + "\n")


if __name__ == "__main__":
    main()
