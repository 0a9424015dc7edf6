import numpy as np
import pytest

from thermoshift.symbolic import build_system, cylinder_of, metric_D, representative

DYADIC = {
    (0, 0): ("affine", "0.5", "0"),
    (0, 1): ("affine", "0.5", "0"),
    (1, 0): ("affine", "0.5", "0.5"),
    (1, 1): ("affine", "0.5", "0.5"),
}

GOLDEN = {
    (0, 0): ("affine", "0.6", "0"),
    (0, 1): ("affine", "0.6", "0"),
    (1, 0): ("affine", repr(2 / 3), "0.6"),
}


@pytest.fixture(scope="session")
def full2():
    return build_system(2, [[1, 1], [1, 1]], DYADIC)


@pytest.fixture(scope="session")
def golden():
    return build_system(2, [[1, 1], [1, 0]], GOLDEN)


@pytest.fixture(scope="session")
def quad_roof():
    return lambda x: 1 + x * x / 2


@pytest.fixture(scope="session")
def affine_roof():
    return lambda x: 1 + x / 2


def all_representatives(system, max_depth):
    """Representatives of every cylinder up to max_depth."""
    from thermoshift.symbolic import admissible_words

    reps = []
    for n in range(1, max_depth + 1):
        for w in admissible_words(system, n):
            reps.append(representative(cylinder_of(system, w)))
    return reps


def rep_distance_matrix(system, reps):
    n = len(reps)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = metric_D(reps[i], reps[j])
    return D
