"""Render standard figure panels from donorspin CSV outputs.

Strictly a read-only consumer of the CSV schema: every plotted value,
including the fig3b shaded-region boundary, comes straight out of the file.
No physics is recomputed here.

Panels
  fig2b  flip probability vs the modulated hyperfine constant (log-log)
  fig2c  flip probability vs magnetic field (log-log)
  fig3a  flip-flop probability vs Stark shift, one curve per input CSV
  fig3b  flip vs flip-flop vs Stark shift with the budget-boundary shading
  figS1  nuclear-probability time traces from a single-pulse run
  figS2  flip rate vs ionization/neutralization rate

Recipes are small YAML files:

    panel: fig3b
    inputs: [stark117.csv]
    output: fig3b.png
    x_scale: log        # optional, panel default otherwise
    y_scale: log        # optional
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import yaml

PANELS = ("fig2b", "fig2c", "fig3a", "fig3b", "figS1", "figS2")


class RecipeError(ValueError):
    """Malformed recipe file."""


class SchemaError(ValueError):
    """Input CSV does not match the expected sweep/run schema."""


@dataclass(frozen=True)
class FigureRecipe:
    panel: str
    inputs: tuple[str, ...]
    output: str
    x_scale: str | None = None
    y_scale: str | None = None

    def __post_init__(self):
        if self.panel not in PANELS:
            raise RecipeError(f"panel must be one of {PANELS}, got {self.panel!r}")
        if not self.inputs:
            raise RecipeError("recipe needs at least one input CSV")
        for scale in (self.x_scale, self.y_scale):
            if scale is not None and scale not in ("linear", "log"):
                raise RecipeError(f"axis scale must be 'linear' or 'log', got {scale!r}")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    style: str = "o-"


@dataclass
class RenderResult:
    """What was drawn: enough to verify plots without reading pixels."""

    panel: str
    output: str
    series: list[Series] = field(default_factory=list)
    shaded_from: float | None = None


def load_recipe(path: str) -> FigureRecipe:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise RecipeError(f"recipe is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise RecipeError("recipe must be a YAML mapping")
    unknown = sorted(set(data) - {"panel", "inputs", "output", "x_scale", "y_scale"})
    if unknown:
        raise RecipeError(f"unknown recipe key {unknown[0]!r}")
    try:
        inputs = data["inputs"]
        if isinstance(inputs, str):
            inputs = [inputs]
        return FigureRecipe(
            panel=data["panel"],
            inputs=tuple(str(p) for p in inputs),
            output=str(data["output"]),
            x_scale=data.get("x_scale"),
            y_scale=data.get("y_scale"),
        )
    except KeyError as exc:
        raise RecipeError(f"recipe is missing required key {exc.args[0]!r}") from None


def read_table(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file, no header row")
    header, body = rows[0], rows[1:]
    if not body:
        raise SchemaError(f"{path}: no data rows under header {header}")
    cols = {}
    for i, name in enumerate(header):
        cols[name] = np.array([float(r[i]) for r in body])
    return cols


def _need(cols: dict[str, np.ndarray], names: list[str], path: str) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise SchemaError(
            f"{path}: expected columns {names}, found {sorted(cols)} (missing {missing})"
        )


def _prefixed(cols: dict[str, np.ndarray], prefix: str) -> list[str]:
    return sorted(n for n in cols if n.startswith(prefix))


def _flip_panel(result: RenderResult, recipe: FigureRecipe, x_col: str):
    for path in recipe.inputs:
        cols = read_table(path)
        _need(cols, [x_col, "flip_prob_me_n1", "flip_prob_analytic_n1"], path)
        stem = Path(path).stem
        for name in _prefixed(cols, "flip_prob_me_n"):
            nucleus = name.removeprefix("flip_prob_me_")
            result.series.append(Series(f"{stem} {nucleus} (master eq.)", cols[x_col], cols[name]))
        for name in _prefixed(cols, "flip_prob_analytic_n"):
            nucleus = name.removeprefix("flip_prob_analytic_")
            result.series.append(
                Series(f"{stem} {nucleus} (analytic)", cols[x_col], cols[name], style="--")
            )


def _panel_fig2b(result, recipe):
    _flip_panel(result, recipe, "a1_mhz")


def _panel_fig2c(result, recipe):
    _flip_panel(result, recipe, "b_field_t")


def _panel_fig3a(result, recipe):
    for path in recipe.inputs:
        cols = read_table(path)
        _need(cols, ["stark_shift_mhz", "flipflop_prob_me", "flipflop_prob_approx"], path)
        stem = Path(path).stem
        result.series.append(
            Series(f"{stem} flip-flop (master eq.)", cols["stark_shift_mhz"], cols["flipflop_prob_me"])
        )
        result.series.append(
            Series(
                f"{stem} flip-flop (analytic)",
                cols["stark_shift_mhz"],
                cols["flipflop_prob_approx"],
                style="--",
            )
        )


def _panel_fig3b(result, recipe):
    if len(recipe.inputs) != 1:
        raise RecipeError("fig3b takes exactly one Stark-shift sweep CSV")
    path = recipe.inputs[0]
    cols = read_table(path)
    _need(
        cols,
        [
            "stark_shift_mhz",
            "flip_prob_me_n1",
            "flipflop_prob_me",
            "flip_prob_analytic_n1",
            "flipflop_prob_approx",
            "flip_prob_analytic_total",
            "budget_boundary_mhz",
        ],
        path,
    )
    x = cols["stark_shift_mhz"]
    result.series.append(Series("flip (master eq.)", x, cols["flip_prob_me_n1"]))
    result.series.append(Series("flip-flop (master eq.)", x, cols["flipflop_prob_me"]))
    result.series.append(Series("flip (analytic)", x, cols["flip_prob_analytic_n1"], style="--"))
    result.series.append(Series("flip-flop (analytic)", x, cols["flipflop_prob_approx"], style="--"))
    result.series.append(Series("1P flip at A_total", x, cols["flip_prob_analytic_total"], style=":"))
    boundary = float(cols["budget_boundary_mhz"][0])
    if np.isfinite(boundary):
        result.shaded_from = boundary


def _panel_figS1(result, recipe):
    if len(recipe.inputs) != 1:
        raise RecipeError("figS1 takes exactly one time-series CSV")
    path = recipe.inputs[0]
    cols = read_table(path)
    _need(cols, ["time_us"], path)
    nuclear = [
        n for n in _prefixed(cols, "P_") if not n.startswith("P_e_")
    ]
    if not nuclear:
        raise SchemaError(f"{path}: expected nuclear-probability columns P_<config>, found {sorted(cols)}")
    for name in nuclear:
        result.series.append(Series(name, cols["time_us"], cols[name], style="-"))


def _panel_figS2(result, recipe):
    for path in recipe.inputs:
        cols = read_table(path)
        _need(cols, ["tunnel_rate_per_us", "flip_rate_me_n1_per_us"], path)
        result.series.append(
            Series(
                f"{Path(path).stem} flip rate",
                cols["tunnel_rate_per_us"],
                cols["flip_rate_me_n1_per_us"],
            )
        )


_PANEL_BUILDERS = {
    "fig2b": _panel_fig2b,
    "fig2c": _panel_fig2c,
    "fig3a": _panel_fig3a,
    "fig3b": _panel_fig3b,
    "figS1": _panel_figS1,
    "figS2": _panel_figS2,
}

_PANEL_SCALES = {
    "fig2b": ("log", "log"),
    "fig2c": ("log", "log"),
    "fig3a": ("log", "log"),
    "fig3b": ("log", "log"),
    "figS1": ("linear", "linear"),
    "figS2": ("log", "log"),
}

_PANEL_AXES = {
    "fig2b": ("modulated hyperfine A1 (MHz)", "flip probability"),
    "fig2c": ("magnetic field (T)", "flip probability"),
    "fig3a": ("Stark shift A1-A2 (MHz)", "flip-flop probability"),
    "fig3b": ("Stark shift A1-A2 (MHz)", "transition probability"),
    "figS1": ("time (us)", "nuclear-state probability"),
    "figS2": ("ionization/neutralization rate (1/us)", "flip rate (1/us)"),
}


def render(recipe: FigureRecipe) -> RenderResult:
    """Build the panel's line data and write the image file."""
    result = RenderResult(panel=recipe.panel, output=recipe.output)
    _PANEL_BUILDERS[recipe.panel](result, recipe)

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    try:
        for s in result.series:
            ax.plot(s.x, s.y, s.style, label=s.label, markersize=4)
        if result.shaded_from is not None:
            ax.axvspan(result.shaded_from, float(np.max(result.series[0].x)), alpha=0.2, color="tab:green")
            ax.axvline(result.shaded_from, color="tab:green", linewidth=1)
        x_scale, y_scale = _PANEL_SCALES[recipe.panel]
        ax.set_xscale(recipe.x_scale or x_scale)
        ax.set_yscale(recipe.y_scale or y_scale)
        xlabel, ylabel = _PANEL_AXES[recipe.panel]
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(recipe.output, dpi=150)
    finally:
        plt.close(fig)
    return result


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figure", description="Render a figure panel from donorspin CSV output."
    )
    parser.add_argument("recipe", help="YAML recipe file")
    args = parser.parse_args(argv)
    try:
        result = render(load_recipe(args.recipe))
    except (RecipeError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"{result.panel}: {len(result.series)} series -> {result.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
