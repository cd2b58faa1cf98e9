"""Loads defaults.toml, the single documented source of physical defaults."""

from importlib import resources

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

DEFAULTS = tomllib.loads(
    resources.files("cdsim").joinpath("defaults.toml").read_text()
)
