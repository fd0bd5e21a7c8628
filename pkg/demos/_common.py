"""Shared bits for the demo scripts: a headless matplotlib and an output folder."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)
