import numpy as np
import pytest

from pinchcone.curvature import cylinder, identity_tensor, random_algebraic, zero
from pinchcone.io import (
    TRAJECTORY_KEYS,
    TensorFileError,
    format_tensor,
    format_trajectory,
    parse_tensor,
    read_tensor,
    read_trajectory,
    write_tensor,
)
from pinchcone.transversality import EvolutionState, ode_integrate


def test_round_trip(tmp_path, rng):
    R = random_algebraic(6, rng)
    path = tmp_path / "r.txt"
    write_tensor(R, path)
    back = read_tensor(path)
    np.testing.assert_array_equal(back.components, R.components)


def test_format_is_canonical():
    text = format_tensor(identity_tensor(4))
    lines = text.splitlines()
    assert lines[0] == "curvature n=4 bianchi=1"
    assert lines[1] == "1 2 1 2 2.0"
    assert len(lines) == 1 + 6


def test_missing_generators_are_zero():
    R = parse_tensor("curvature n=4 bianchi=1\n")
    assert R.norm() == 0.0


def test_symmetric_completion():
    R = parse_tensor("curvature n=4 bianchi=1\n1 2 1 2 1.5\n")
    assert R.components[1, 0, 0, 1] == -1.5
    assert R.components[0, 1, 0, 1] == 1.5


def test_comments_and_blank_lines():
    R = parse_tensor("# comment\n\ncurvature n=5 bianchi=0\n1 2 3 4 0.5\n")
    assert not R.bianchi and R.components[2, 3, 0, 1] == 0.5


@pytest.mark.parametrize(
    "text",
    [
        "",
        "curvature n=4\n",
        "curvature n=4 bianchi=1\n1 2 1\n",
        "curvature n=4 bianchi=1\n2 1 1 2 1.0\n",
        "curvature n=4 bianchi=1\n1 3 1 2 1.0\n",
        "curvature n=4 bianchi=1\n1 2 1 5 1.0\n",
        "curvature n=4 bianchi=1\n1 2 1 2 x\n",
        "curvature n=4 bianchi=1\n1 2 1 2 nan\n",
        "curvature n=4 bianchi=1\n1 2 1 2 1\n1 2 1 2 1\n",
        "curvature n=4 bianchi=1\n1 2 3 4 1.0\n",
        "curvature n=3 bianchi=1\n",
    ],
)
def test_parse_errors(text):
    with pytest.raises(TensorFileError):
        parse_tensor(text)


def test_missing_file(tmp_path):
    with pytest.raises(TensorFileError):
        read_tensor(tmp_path / "none.txt")


def test_trajectory_dump_round_trip(tmp_path):
    state = EvolutionState(cylinder(5), zero(5), 0.0, None, 1e-3)
    traj = ode_integrate(state, 1e-3, 4, record_every=2, margins=False)
    path = tmp_path / "t.jsonl"
    path.write_text(format_trajectory(traj))
    rows = read_trajectory(path)
    assert len(rows) == 3
    assert list(rows[0]) == list(TRAJECTORY_KEYS)
    assert rows[0]["margin1"] is None
    assert rows[-1]["t"] == pytest.approx(4e-3)
    assert "# truncated = 0" in path.read_text()
