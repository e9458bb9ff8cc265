from .config import RunConfig, load_config, parse_config
from .main import build_parser, main

__all__ = ["RunConfig", "load_config", "parse_config", "build_parser", "main"]
