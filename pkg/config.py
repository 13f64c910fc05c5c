import os

from dotenv import load_dotenv

from utils.log import configure_logging

load_dotenv()


class Config:
    # Analysis limits
    STATE_BUDGET = int(os.getenv("PGCL_STATE_BUDGET") or 200000)
    VALUE_ITERATION_EPSILON = float(os.getenv("PGCL_EPSILON") or 1e-9)
    MAX_ITERATIONS = int(os.getenv("PGCL_MAX_ITERATIONS") or 1000000)

    # "error" raises DomainEscape, "stop" routes escaping assignments to an absorbing state
    ESCAPE_MODE = os.getenv("PGCL_ESCAPE") or "error"

    LOG_LEVEL = os.getenv("PGCL_LOG_LEVEL") or "WARNING"

    # Flask-Caching
    CACHE_TYPE = os.getenv("CACHE_TYPE") or "SimpleCache"
    CACHE_DEFAULT_TIMEOUT = int(os.getenv("CACHE_DEFAULT_TIMEOUT") or 300)

    MAX_CONTENT_LENGTH = 1024 * 1024  # 1MB of program text

    @staticmethod
    def init_app(app):
        configure_logging(app.config.get("LOG_LEVEL", Config.LOG_LEVEL), logger=app.logger)

    @classmethod
    def analysis_options(cls, mapping=None) -> dict:
        """Analysis limits from a Flask config (or this class), keyed for the pipelines."""
        source = mapping if mapping is not None else {k: getattr(cls, k) for k in dir(cls) if k.isupper()}
        return {
            "budget": int(source.get("STATE_BUDGET", cls.STATE_BUDGET)),
            "epsilon": float(source.get("VALUE_ITERATION_EPSILON", cls.VALUE_ITERATION_EPSILON)),
            "max_iterations": int(source.get("MAX_ITERATIONS", cls.MAX_ITERATIONS)),
            "escape": source.get("ESCAPE_MODE", cls.ESCAPE_MODE),
        }
