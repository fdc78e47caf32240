import numpy as np
import pytest

from seeding import MAX_SEED, Stream, derive_rng, derive_seed, seed_sequence


def test_stream_roles_are_distinct():
    assert len({int(s) for s in Stream}) == len(Stream)


def test_trial_seeds_do_not_reuse_role_streams():
    """A per-trial child seed never shares state with the parent's role streams."""
    for seed in (0, 7, MAX_SEED):
        roles = {tuple(seed_sequence(seed, stream).generate_state(4)) for stream in Stream}
        for trial in range(5):
            assert tuple(seed_sequence(seed, Stream.TRIAL, trial).generate_state(4)) not in roles
        assert derive_seed(seed, Stream.TRIAL, 0) != derive_seed(seed, Stream.OPERATOR)


def test_derived_streams_are_reproducible():
    np.testing.assert_array_equal(derive_rng(3, Stream.SIGNAL).standard_normal(5),
                                  derive_rng(3, Stream.SIGNAL).standard_normal(5))
    assert derive_seed(3, Stream.TRIAL, 1, 2) == derive_seed(3, Stream.TRIAL, 1, 2)
    assert derive_seed(3, Stream.TRIAL, 1, 2) != derive_seed(3, Stream.TRIAL, 2, 1)


def test_invalid_seeds_and_keys():
    with pytest.raises(ValueError, match="unsigned 64-bit"):
        derive_rng(-1)
    with pytest.raises(ValueError, match="unsigned 64-bit"):
        derive_seed(MAX_SEED + 1)
    with pytest.raises(ValueError, match="non-negative"):
        seed_sequence(0, -2)
