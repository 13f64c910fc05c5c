from functools import lru_cache
from pathlib import Path

from flask_caching import Cache
from flask_compress import Compress

GRAMMAR_PATH = Path(__file__).resolve().parent / "services" / "grammar.lark"

# Initialize extensions
cache = Cache(config={'CACHE_TYPE': 'SimpleCache'})
compress = Compress()


@lru_cache(maxsize=1)
def get_parser():
    from lark import Lark

    return Lark(
        GRAMMAR_PATH.read_text(encoding="utf-8"),
        parser="lalr",
        start=["file", "expectation", "predicate"],
    )
