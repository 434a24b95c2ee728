from .router import build_parser, dispatch, parse

__all__ = ["build_parser", "dispatch", "parse"]
