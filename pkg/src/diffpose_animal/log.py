import logging
import os
import sys

ROOT = "diffpose-animal"
FORMAT = "%(asctime)s | %(levelname)s | diffpose-animal | %(message)s"
DATEFMT = "%Y-%m-%d %H:%M:%S"


def get_logger(name: str = ROOT) -> logging.Logger:
    """
    Logger główny pakietu (konfigurowany raz):
    - format:  YYYY-mm-dd HH:MM:SS | LEVEL | diffpose-animal | message
    - poziom z env LOG_LEVEL (domyślnie INFO), wyjście na stdout
    - ostrzeżenia numpy/Pythona (RuntimeWarning: overflow, invalid value) lądują w tym samym strumieniu
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    level_name = os.getenv("LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)

    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(fmt=FORMAT, datefmt=DATEFMT))

    logger.setLevel(level)
    logger.addHandler(handler)
    logger.propagate = False

    logging.captureWarnings(True)
    warn_log = logging.getLogger("py.warnings")
    if not warn_log.handlers:
        warn_log.addHandler(handler)
        warn_log.propagate = False
    return logger


def area_logger(area: str) -> logging.Logger:
    """Logger potomny `diffpose-animal.<area>`; propaguje do handlera głównego."""
    get_logger()
    return logging.getLogger(f"{ROOT}.{area}")


log = get_logger()
