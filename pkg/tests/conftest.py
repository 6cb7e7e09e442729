from __future__ import annotations

import pytest

from capmatch.termdb import load_termdb


@pytest.fixture
def tiny_db():
    return load_termdb(
        [
            "0\tlion\tlion",
            "1\tgoose\tgoose|geese",
            "2\tgreat white shark\tgreat white shark|shark",
        ],
        name="tiny",
    )
