"""Figure rendering for donorspin CSV outputs."""

from .render import FigureRecipe, RecipeError, RenderResult, SchemaError, load_recipe, render

__version__ = "0.1.0"
