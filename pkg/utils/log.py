import logging

import coloredlogs

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def configure_logging(level: str = "WARNING", logger: logging.Logger = None) -> None:
    """Install colored console logging on ``logger`` (the root logger by default)."""
    coloredlogs.install(level=level.upper(), logger=logger, fmt=LOG_FORMAT, milliseconds=True)
    # lark logs grammar construction at DEBUG
    logging.getLogger("lark").setLevel(logging.WARNING)
