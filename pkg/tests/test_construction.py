from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradcode.construction import (
    CodeParams,
    MaskMatrix,
    expected_row_weights,
    mask_layout,
    mask_matrix,
    row_balanced_mask,
    straggler_budget,
)

DATA = Path(__file__).parent / "data"


def test_row_balanced_mask_reproduces_worked_example():
    mask = row_balanced_mask(8, 4, 6, 0)
    golden = MaskMatrix.load(DATA / "mask_8_4_6_0.txt")
    assert mask == golden
    assert (mask.column_weights == 6).all()
    assert mask.row_weight == 3


def test_single_full_column():
    mask = row_balanced_mask(7, 1, 7, 0)
    assert mask.entries.shape == (7, 1)
    assert mask.entries.all()


def test_offset_example():
    mask = row_balanced_mask(5, 2, 2, 1)
    assert set(np.flatnonzero(mask.entries[:, 0])) == {1, 2}
    assert set(np.flatnonzero(mask.entries[:, 1])) == {3, 4}
    assert mask.row_weights.tolist() == [0, 1, 1, 1, 1]


@pytest.mark.parametrize("args", [(4, 2, 5, 0), (4, 0, 2, 0), (0, 2, 1, 0), (4, 2, 0, 0), (4, 2, 2, 4)])
def test_row_balanced_mask_rejects_bad_input(args):
    with pytest.raises(ValueError):
        row_balanced_mask(*args)


def test_row_weights_match_closed_form_exhaustively():
    for n in range(1, 25):
        for k in range(1, 9):
            for d in range(1, n + 1):
                for t in range(n):
                    mask = row_balanced_mask(n, k, d, t)
                    np.testing.assert_array_equal(mask.row_weights, expected_row_weights(n, k, d, t))


def test_uniform_case_when_n_divides_kd():
    mask = row_balanced_mask(6, 4, 3, 2)
    assert (mask.row_weights == 2).all()


def test_mask_matrix_divisible_case_equals_row_balanced():
    assert mask_matrix(8, 4, 3) == row_balanced_mask(8, 4, 6, 0)
    assert mask_layout(8, 4, 3).k_heavy == 0


def test_mask_matrix_general_example():
    layout = mask_layout(5, 3, 2)
    assert (layout.k_heavy, layout.d_heavy, layout.k_light, layout.d_light, layout.offset) == (1, 4, 2, 3, 4)
    mask = mask_matrix(5, 3, 2)
    assert (mask.row_weights == 2).all()
    assert mask.column_weights.tolist() == [4, 3, 3]


def test_permutation_mask():
    mask = mask_matrix(6, 6, 1)
    assert (mask.row_weights == 1).all() and (mask.column_weights == 1).all()


@pytest.mark.parametrize("w", [0, -1, 5])
def test_mask_matrix_rejects_bad_weight(w):
    with pytest.raises(ValueError):
        mask_matrix(6, 4, w)


def test_mask_matrix_requires_two_when_asked():
    with pytest.raises(ValueError, match="straggler"):
        mask_matrix(5, 4, 1, require_stragglers=True)
    mask_matrix(9, 4, 1, require_stragglers=True)


def _light_rows_heavy_block(n, k, w):
    layout = mask_layout(n, k, w)
    if layout.k_heavy == 0:
        return None
    heavy = row_balanced_mask(n, layout.k_heavy, layout.d_heavy, 0).row_weights
    light = row_balanced_mask(n, layout.k_light, layout.d_light, layout.offset).row_weights
    return heavy, light


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_mask_matrix_properties(data):
    n = data.draw(st.integers(1, 60))
    k = data.draw(st.integers(1, 60))
    w = data.draw(st.integers(1, k))
    if n * w < k:
        with pytest.raises(ValueError):
            mask_matrix(n, k, w)
        return
    mask = mask_matrix(n, k, w)
    assert (mask.row_weights == w).all()
    lo, hi = n * w // k, -(-n * w // k)
    assert set(mask.column_weights.tolist()) <= {lo, hi}
    if (n * w) % k == 0:
        assert mask == row_balanced_mask(n, k, n * w // k, 0)
    blocks = _light_rows_heavy_block(n, k, w)
    if blocks is not None:
        heavy, light = blocks
        # light rows of the heavy block coincide with heavy rows of the light block
        if heavy.min() != heavy.max():
            n_light = int((heavy == heavy.min()).sum())
            n_heavy = int((light == light.max()).sum()) if light.min() != light.max() else 0
            assert n_light == n_heavy
            assert np.array_equal(heavy == heavy.min(), light == light.max())


def test_mask_text_round_trip(tmp_path):
    mask = mask_matrix(7, 5, 3)
    mask.save(tmp_path / "m.txt")
    assert MaskMatrix.load(tmp_path / "m.txt") == mask
    assert (tmp_path / "m.txt").read_text().splitlines()[0] == "".join(map(str, mask.entries[0]))


def test_mask_rejects_non_binary():
    with pytest.raises(ValueError):
        MaskMatrix(np.array([[0, 2]]))


@pytest.mark.parametrize(
    "n,k,w,s,f",
    [(8, 4, 3, 5, 3), (10, 5, 3, 5, 5), (6, 3, 3, 5, 1), (9, 9, 9, 8, 1), (5, 5, 1, 0, 5)],
)
def test_straggler_budget(n, k, w, s, f):
    p = straggler_budget(n, k, w)
    assert (p.s, p.f) == (s, f)


def test_straggler_budget_rejects_negative():
    with pytest.raises(ValueError):
        straggler_budget(3, 4, 1)
    with pytest.raises(ValueError):
        straggler_budget(4, 4, 5)


def test_code_params_consistency():
    with pytest.raises(ValueError):
        CodeParams(n=8, k=4, w=3, s=4, f=4)
    assert straggler_budget(8, 4, 3).alpha == 0.75
