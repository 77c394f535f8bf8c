"""
Test the numeric policy helpers, seeded randomness and key distributions
"""
import numpy as np
import pytest

from utilities import (
    KeyDistribution,
    PreconditionError,
    SizingError,
    all_bit_strings,
    binomial_standard_error,
    bits,
    bits_to_int,
    check_dimension,
    format_value,
    get_default_seed,
    make_rng,
    mean_and_standard_error,
    optional_float,
    within_sigmas,
    xor_bits,
)


class TestDimensionCap:
    def test_set_returns_previous(self, dimension_cap):
        previous = dimension_cap(16)
        assert dimension_cap(previous) == 16

    def test_check_dimension_raises_above_cap(self, dimension_cap):
        dimension_cap(8)
        check_dimension(8)
        with pytest.raises(SizingError, match="above the cap of 8"):
            check_dimension(9, "Tensor power")

    @pytest.mark.parametrize("cap", [0, -3, "many"])
    def test_invalid_cap(self, dimension_cap, cap):
        with pytest.raises(ValueError):
            dimension_cap(cap)


class TestSeeds:
    def test_same_seed_same_stream(self):
        assert np.array_equal(make_rng(7).integers(0, 1000, 20), make_rng(7).integers(0, 1000, 20))

    def test_default_seed_from_environment(self, monkeypatch):
        monkeypatch.setenv("OWSG_WB_SEED", "0x10")
        assert get_default_seed() == 16
        monkeypatch.delenv("OWSG_WB_SEED")
        assert get_default_seed() == 0

    def test_bad_seed_environment(self, monkeypatch):
        monkeypatch.setenv("OWSG_WB_SEED", "seven")
        with pytest.raises(ValueError, match="OWSG_WB_SEED"):
            get_default_seed()


class TestStatistics:
    def test_mean_and_standard_error(self):
        mean, error = mean_and_standard_error([1, 0, 1, 0])
        assert mean == pytest.approx(0.5)
        assert error == pytest.approx(np.std([1, 0, 1, 0], ddof=1) / 2)

    def test_single_outcome_has_no_error(self):
        assert mean_and_standard_error([1.0]) == (1.0, 0.0)
        assert mean_and_standard_error([]) == (0.0, 0.0)

    def test_binomial_standard_error(self):
        assert binomial_standard_error(0.5, 100) == pytest.approx(0.05)
        assert binomial_standard_error(1.0, 100) == 0.0

    def test_within_sigmas(self):
        assert within_sigmas(0.52, 0.5, 0.01)
        assert not within_sigmas(0.54, 0.5, 0.01)
        assert within_sigmas(0.5, 0.5, 0.0)

    @pytest.mark.parametrize(
        "value, text",
        [(None, ""), (True, "true"), (3, "3"), (0.1, "0.10000000000000001"), (np.int64(5), "5")],
    )
    def test_format_value(self, value, text):
        assert format_value(value) == text


class TestBits:
    def test_big_endian(self):
        assert bits(6, 4) == (0, 1, 1, 0)
        assert bits_to_int((0, 1, 1, 0)) == 6

    def test_all_bit_strings(self):
        assert all_bit_strings(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert all_bit_strings(0) == [()]

    def test_xor(self):
        assert xor_bits((1, 0, 1), (1, 1, 0)) == (0, 1, 1)
        with pytest.raises(ValueError):
            xor_bits((1,), (1, 0))

    def test_optional_float(self):
        assert optional_float(None, 2.5) == 2.5
        assert optional_float(" ", 2.5) == 2.5
        assert optional_float("0.25", 2.5) == 0.25


class TestKeyDistribution:
    def test_uniform(self):
        keys = KeyDistribution.uniform("abc")
        assert len(keys) == 3
        assert keys.probability("b") == pytest.approx(1 / 3)
        assert keys.probability("z") == 0.0
        assert "a" in keys and [1] not in keys

    @pytest.mark.parametrize(
        "keys, probabilities",
        [((), ()), ((0, 1), (1.0,)), ((0, 0), (0.5, 0.5)), ((0, 1), (1.5, -0.5)), ((0, 1), (0.5, 0.4))],
    )
    def test_invalid(self, keys, probabilities):
        with pytest.raises(PreconditionError):
            KeyDistribution(keys, probabilities)

    def test_product(self):
        joint = KeyDistribution.product(
            [KeyDistribution.from_mapping({0: 0.25, 1: 0.75}), KeyDistribution.uniform("xy")]
        )
        assert joint.keys == ((0, "x"), (0, "y"), (1, "x"), (1, "y"))
        assert joint.probability((1, "y")) == pytest.approx(0.375)

    def test_index_unknown_key(self):
        with pytest.raises(PreconditionError, match="Unknown key"):
            KeyDistribution.uniform((0, 1)).index(2)

    def test_most_likely_and_sampling(self, rng):
        keys = KeyDistribution.from_mapping({"rare": 0.0, "common": 1.0})
        assert keys.most_likely() == "common"
        assert {keys.sample(rng) for _ in range(20)} == {"common"}
        assert set(keys.sample_indices(rng, 10)) == {1}
