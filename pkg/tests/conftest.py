import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile("default")


@pytest.fixture(scope="session")
def square_mesh():
    from polyprion.mesh import generate_structured
    return generate_structured(4, 4)


@pytest.fixture(scope="session")
def poly_mesh():
    from polyprion.mesh import agglomerate, generate_disc
    return agglomerate(generate_disc(6), 20, 7)
