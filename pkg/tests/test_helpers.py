import pytest
import sparsemf._helpers


def test_baredoc():
    """
       Badly formatted docstring .. .

    With some content.

    """
    expected = 'Badly formatted docstring'
    assert sparsemf._helpers.baredoc(test_baredoc) == expected


def test_baredoc_missing():
    assert sparsemf._helpers.baredoc(lambda: None) == ''


@pytest.mark.parametrize('value,expected', [('3', 3), ('0', 1), ('', None),
                                            ('many', None)])
def test_worker_count(monkeypatch, value, expected):
    monkeypatch.setenv('SMF_THREADS', value)
    count = sparsemf._helpers.worker_count()
    if expected is None:
        assert count >= 1
    else:
        assert count == expected


def test_derived_seed():
    seeds = {sparsemf._helpers.derived_seed(7, i) for i in range(50)}
    assert len(seeds) == 50
    assert sparsemf._helpers.derived_seed(7, 3) == \
        sparsemf._helpers.derived_seed(7, 3)
    assert sparsemf._helpers.derived_seed(7, 3) != \
        sparsemf._helpers.derived_seed(8, 3)
    assert all(0 <= s < 2**64 for s in seeds)


def test_rng_streams():
    first = sparsemf._helpers.rng(1, 0).random(4)
    again = sparsemf._helpers.rng(1, 0).random(4)
    other = sparsemf._helpers.rng(1, 1).random(4)
    assert (first == again).all()
    assert not (first == other).all()


class _Lazy:
    calls = 0

    @sparsemf._helpers.CachedReadOnlyProperty
    def answer(self):
        """The answer."""
        _Lazy.calls += 1
        return 42


def test_cached_property():
    obj = _Lazy()
    assert obj.answer == 42
    assert obj.answer == 42
    assert _Lazy.calls == 1
    with pytest.raises(AttributeError):
        obj.answer = 0
