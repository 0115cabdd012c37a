"""Deterministic generator and seed derivation."""

import pytest

from decodelab.rng import SplitMix64, derive_seed


def test_reference_stream():
    # Published output sequence for seed 0 of this generator family.
    r = SplitMix64(0)
    assert r.next_u64() == 0xE220A8397B1DCDAF
    assert r.next_u64() == 0x6E789E6AA1B965F4
    assert r.next_u64() == 0x06C45D188009454F


def test_float_convention():
    # random() takes the top 53 bits of the next word.
    assert SplitMix64(0).random() == (0xE220A8397B1DCDAF >> 11) / float(1 << 53)


def test_same_seed_same_stream():
    a = SplitMix64(12345)
    b = SplitMix64(12345)
    assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]
    c = SplitMix64(12346)
    assert c.next_u64() != SplitMix64(12345).next_u64()


def test_unit_interval_and_mean():
    r = SplitMix64(99)
    vals = [r.random() for _ in range(10000)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert abs(sum(vals) / len(vals) - 0.5) < 0.02


def test_seed_wraps_to_64_bits():
    assert SplitMix64(2**64).next_u64() == SplitMix64(0).next_u64()
    assert SplitMix64(-1).next_u64() == SplitMix64(2**64 - 1).next_u64()


def test_derive_seed_is_order_sensitive():
    assert derive_seed("a", 1) != derive_seed(1, "a")
    assert derive_seed("ab") != derive_seed("a", "b")
    assert derive_seed("a", 1) == derive_seed("a", 1)


def test_derive_seed_stability_pin():
    # Frozen so recorded experiment seeds stay replayable across releases.
    assert derive_seed("a", 1) == 14416667421279330133


def test_derive_seed_type_rejection():
    with pytest.raises(TypeError):
        derive_seed(1.5)
    with pytest.raises(TypeError):
        derive_seed(True)
    with pytest.raises(TypeError):
        derive_seed("a", None)
