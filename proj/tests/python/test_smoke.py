import math
from pathlib import Path

import numpy as np
import pytest

import infoprobe as ip

DATA = Path(__file__).resolve().parents[1] / "data"

SENT = "1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n2\tdog\tdog\tNOUN\t_\t_\t0\troot\t_\t_\n"


def fnv(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def test_fnv_matches_reference():
    assert ip.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert ip.fnv1a64(b"") == 0xCBF29CE484222325
    assert ip.corpus_token_hash(SENT) == fnv(b"The\ndog")


def test_conllu():
    assert ip.conllu_forms(SENT + "\n" + SENT) == [["The", "dog"], ["The", "dog"]]
    with pytest.raises(ip.ParseError):
        ip.conllu_forms("1\tx\tx\n")


def test_pemb_round_trip_and_errors():
    m = np.arange(6, dtype=np.float64).reshape(3, 2) / 4
    blob = ip.encode_pemb(m, 42)
    assert blob[:4] == b"PEMB" and len(blob) == 28 + 6 * 4
    back, h = ip.decode_pemb(blob)
    assert h == 42
    np.testing.assert_array_equal(back, m)
    with pytest.raises(ip.FormatError):
        ip.decode_pemb(b"PEMX" + blob[4:])
    with pytest.raises(ip.FormatError):
        ip.decode_pemb(blob[:-1])
    assert issubclass(ip.HashMismatchError, ip.AlignmentError)
    assert issubclass(ip.CountMismatchError, ip.AlignmentError)


def test_entropy_and_synthetic():
    assert ip.plugin_entropy([5] * 8) == pytest.approx(3.0, abs=1e-12)
    assert ip.plugin_entropy([3, 1]) == pytest.approx(0.811278, abs=1e-6)
    p = np.array([[0.3, 0.1, 0.1], [0.05, 0.25, 0.2]])
    q = ip.true_quantities(p)
    pt, pr = p.sum(1), p.sum(0)
    mi = sum(p[t, r] * math.log2(p[t, r] / (pt[t] * pr[r])) for t in range(2) for r in range(3))
    assert q["mi"] == pytest.approx(mi, abs=1e-12)
    assert q["h_t"] - q["h_t_given_r"] == pytest.approx(mi, abs=1e-12)
    assert ip.conditional_mi(p, [0, 0, 0], 1) == pytest.approx(mi, abs=1e-12)
    s = ip.run_sweep(20, 3)
    assert s["passed"] and s["cases"] == 20


def test_cli_in_process():
    code, out, _ = ip.run_cli(["estimate", "--replay", str(DATA / "table1_pos.csv")])
    assert code == 0 and "0.16 (4.4%)" in out
    code, _, _ = ip.run_cli(["no-such-command"])
    assert code == 3
