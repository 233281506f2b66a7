import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treegibbs import serialize, tree
from treegibbs.gibbs import SpinField
from treegibbs.renorm import ImageField

images = st.integers(0, 4).flatmap(
    lambda d: st.tuples(
        st.lists(st.sampled_from([-1, 0, 1]), min_size=tree.ball_size(d), max_size=tree.ball_size(d)).map(
            lambda v, d=d: np.array(v)
        ),
        st.booleans(),
    ).map(lambda t, d=d: ImageField(d, t[0], partial=t[1]))
)


@given(images)
def test_image_roundtrip(eta):
    assert serialize.from_csv(serialize.to_csv(eta)) == eta
    assert serialize.from_json(serialize.to_json(eta)) == eta


def test_spin_roundtrip():
    sigma = SpinField(2, np.array([1, -1, 1, 1, -1, -1, 1]))
    text = serialize.to_csv(sigma)
    assert text.splitlines()[:3] == ["address,spin", "r,1", "0,-1"]
    assert serialize.from_csv(text) == sigma
    assert serialize.from_json(serialize.to_json(sigma)) == sigma


def test_partial_root_marker():
    eta = ImageField.constant(1, 0, partial=True)
    assert serialize.to_csv(eta).splitlines()[1] == "r,?"


def test_rows_in_any_order():
    text = "address,value\n1,0\nr,?\n0,1\n"
    eta = serialize.from_csv(text)
    assert eta.partial and eta["0"] == 1


@pytest.mark.parametrize(
    "text",
    [
        "",
        "foo,bar\nr,1\n",
        "address,value\nr,1\n0,1\n",
        "address,value\nr,1\n0,1\n0,1\n",
        "address,value\nr,1\n0,2\n1,0\n",
        "address,spin\nr,?\n0,1\n1,1\n",
        "address,value\nr,1\n0,x\n1,0\n",
    ],
)
def test_malformed_files(text):
    with pytest.raises(ValueError):
        serialize.from_csv(text)


def test_load_detects_json(tmp_path):
    eta = ImageField.constant(2, -1)
    path = tmp_path / "eta.json"
    path.write_text(serialize.to_json(eta))
    assert serialize.load(str(path)) == eta
