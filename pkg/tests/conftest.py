# tests/conftest.py
# Izolacja testów: test_cfg przeładowuje moduł cfg (importlib.reload), co podmienia
# klasy konfiguracji widziane przez inne moduły. Przywracamy przestrzeń nazw po teście.
import pytest

from diffpose_animal import cfg as _cfg


@pytest.fixture(autouse=True)
def _restore_cfg_module():
    saved = dict(vars(_cfg))
    yield
    vars(_cfg).clear()
    vars(_cfg).update(saved)
