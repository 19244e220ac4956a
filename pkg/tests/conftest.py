import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def trained_mapper():
    """One well-trained hedge mapper shared across test modules."""
    from hedgebench import synth
    from hedgebench.mapper import (
        MapperHyperparams,
        examples_from_levels,
        train_mapper,
    )

    questions = synth.make_questions(8, seed=21)
    exprs = synth.synthesize_corpus(questions, ["gen-a", "gen-b"], seed=21)
    hp = MapperHyperparams(epochs=30, seed=7)
    return train_mapper(examples_from_levels(exprs), hp)
