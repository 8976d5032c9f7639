import math

import numpy as np
import pytest

from mfhmc.diagnostics import summarize
from mfhmc.io import fmt, read_chain, read_report, write_chain, write_report, write_rows
from mfhmc.sampler import KernelConfig, run_chain
from mfhmc.targets import DualFidelityTarget, MvnTarget


@pytest.fixture
def chain():
    A = np.array([[1.5, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 2.0]])
    t = MvnTarget(A)
    return run_chain("mfhmc", np.zeros(3), DualFidelityTarget.from_targets(t, MvnTarget(1.1 * A)),
                     KernelConfig(0.3, 5, 100, seed=3))


def test_fmt():
    assert fmt(True) == "1" and fmt(np.bool_(False)) == "0"
    assert fmt(None) == "" and fmt(math.nan) == "nan"
    assert fmt(np.int64(7)) == "7"
    assert float(fmt(0.1)) == 0.1 and fmt(0.1) == "0.10000000000000001"


def test_chain_header_and_rows(tmp_path, chain):
    p = tmp_path / "c.csv"
    write_chain(chain, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "iter,stage1,stage2,n_hf_cum,x_0,x_1,x_2"
    assert len(lines) - 1 == 101
    assert lines[1].startswith("0,0,0,1,")


def test_chain_thinning(tmp_path, chain):
    p = tmp_path / "c.csv"
    write_chain(chain, p, thin=10)
    data = read_chain(p)
    assert list(data["iter"]) == list(range(0, 101, 10))
    with pytest.raises(ValueError):
        write_chain(chain, p, thin=0)


def test_chain_round_trip(tmp_path, chain):
    p = tmp_path / "c.csv"
    write_chain(chain, p)
    data = read_chain(p)
    assert np.max(np.abs(data["samples"] - chain.samples)) <= 1e-12
    assert np.array_equal(data["stage1"][1:], chain.stage1_accepted)
    assert np.array_equal(data["stage2"][1:], chain.stage2_accepted)
    assert np.array_equal(data["n_hf_cum"][1:], chain.n_hf_cumulative)


def test_chain_bytes_deterministic(tmp_path, chain):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_chain(chain, a)
    write_chain(chain, b)
    assert a.read_bytes() == b.read_bytes()


def test_report_rows(tmp_path, chain):
    rep = summarize(chain, 0.25, true_mean=np.ones(3))
    p = tmp_path / "r.csv"
    write_report(rep, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "metric,value"
    assert len(lines) - 1 == len(rep.as_dict())
    back = read_report(p)
    assert 0 <= back["coverage95"] <= 1
    for k, v in rep.as_dict().items():
        assert (math.isnan(v) and math.isnan(back[k])) or back[k] == v


def test_unwritable_path(tmp_path, chain):
    with pytest.raises(OSError):
        write_chain(chain, tmp_path / "missing" / "c.csv")


def test_write_rows(tmp_path):
    p = tmp_path / "t.csv"
    write_rows([{"a": 1, "b": 0.5, "c": "x"}, {"a": 2, "b": None}], ("a", "b"), p)
    assert p.read_text() == "a,b\n1,0.5\n2,\n"
