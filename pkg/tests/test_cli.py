import json

import pytest

from pinchcone.cli import (
    DEFAULT_SEED,
    RunConfig,
    UsageError,
    beta_values,
    build_config,
    build_parser,
    main,
    parse_n_list,
)
from pinchcone.curvature import cylinder, identity_tensor, zero
from pinchcone.io import read_trajectory, write_tensor

QUICK = ["--n", "9", "--samples", "2", "--grid", "500"]


def test_params_contains_a(capsys):
    assert main(["params", "--n", "9", "--b", "0.05"]) == 0
    out = capsys.readouterr().out
    assert "a = 6.00271739" in out and "e-2" in out


def test_params_out_of_range(capsys):
    assert main(["params", "--n", "9", "--b", "0.9"]) != 0
    assert "error" in capsys.readouterr().err


def test_params_shows_both_zeta_toggles(capsys):
    assert main(["params", "--n", "9", "--b", "0.022222"]) == 0
    out = capsys.readouterr().out
    assert "second.zeta[off]" in out and "second.zeta[on]" in out


def test_params_requires_single_values():
    assert main(["params", "--n", "9,10", "--b", "0.01"]) == 2


def test_empty_n_list_is_usage_error():
    assert main(["verify", "--n", ""]) == 2


def test_unknown_flag_is_usage_error():
    assert main(["verify", "--bogus"]) == 2


def test_unsupported_dimension():
    assert main(["verify", "--n", "12"]) == 2


def test_verify_quick_passes(tmp_path):
    out = tmp_path / "r.txt"
    assert main(["verify", *QUICK, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    records = [json.loads(ln) for ln in lines if not ln.startswith("#")]
    assert len(records) >= 20
    assert list(records[0])[:3] == ["lemma_id", "n", "b_or_grid"]
    assert any(ln.startswith("# min_margin[") for ln in lines)


def test_verify_forced_rho_threshold_fails(tmp_path):
    out = tmp_path / "r.txt"
    assert main(["verify", *QUICK, "--rho-threshold", "1.0", "--out", str(out)]) == 1


def test_verify_workers_same_report(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    main(["verify", *QUICK, "--out", str(a)])
    main(["verify", *QUICK, "--workers", "2", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nn = 9..10\nsamples = 4\nseed = 7\n")
    args = build_parser().parse_args(["verify", "--config", str(cfg), "--seed", "11"])
    rc = build_config(args, environ={})
    assert rc.n == (9, 10) and rc.samples == 4 and rc.seed == 11


def test_env_seed_overrides_default_only(tmp_path):
    args = build_parser().parse_args(["verify"])
    assert build_config(args, environ={"PINCH_SEED": "99"}).seed == 99
    assert build_config(args, environ={}).seed == DEFAULT_SEED
    args = build_parser().parse_args(["verify", "--seed", "5"])
    assert build_config(args, environ={"PINCH_SEED": "99"}).seed == 5


def test_bad_config(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("unknown_key = 1\n")
    assert main(["verify", "--config", str(cfg)]) == 2
    cfg.write_text("samples\n")
    assert main(["verify", "--config", str(cfg)]) == 2
    assert main(["verify", "--config", str(tmp_path / "missing")]) == 2


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig(n=())
    with pytest.raises(UsageError):
        RunConfig(samples=0)
    with pytest.raises(UsageError):
        RunConfig(gamma_factor="maybe")


def test_list_parsers():
    assert parse_n_list("9..11") == (9, 10, 11)
    assert parse_n_list("9, 11") == (9, 11)
    assert parse_n_list("") == ()
    with pytest.raises(UsageError):
        parse_n_list("nine")
    assert len(beta_values("200", 0.07)) == 200
    assert list(beta_values("0.03", 0.07)) == [0.03]
    assert len(beta_values("0.01:0.06:6", 0.07)) == 6
    with pytest.raises(UsageError):
        beta_values("0.08", 0.07)


def _rows(path):
    return [ln.split() for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_sweep_single_beta(tmp_path):
    out = tmp_path / "s.txt"
    assert main(["sweep", "--n", "9", "--beta-grid", "0.03", "--out", str(out)]) == 0
    assert len(_rows(out)) == 1


def test_sweep_family_switch_and_pinching(tmp_path):
    out = tmp_path / "s.txt"
    assert main(["sweep", "--n", "9", "--beta-grid", "40", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 40
    fam = [r[1] for r in rows]
    k = fam.index("second")
    assert all(f == "first" for f in fam[:k]) and all(f == "second" for f in fam[k:])
    assert float(rows[k - 1][0]) <= 0.05 < float(rows[k][0])
    eps = [float(r[-1]) for r in rows[k:]]
    tail = eps[len(eps) // 2:]
    assert all(b < a for a, b in zip(tail, tail[1:]))
    assert eps[-1] < 0.3 * max(eps)


def test_sweep_pinching_vanishes_at_the_end(tmp_path):
    out = tmp_path / "s.txt"
    B = 0.05 + 1 / 45
    betas = ",".join(repr(B - d) for d in (1e-3, 1e-5, 1e-7))
    assert main(["sweep", "--n", "9", "--beta-grid", betas, "--out", str(out)]) == 0
    eps = [float(r[-1]) for r in _rows(out)]
    assert eps[0] > eps[1] > eps[2] and eps[2] < 1e-4


def test_evolve_identity(tmp_path, capsys):
    src, out = tmp_path / "id.txt", tmp_path / "t.jsonl"
    write_tensor(identity_tensor(9) * (1 / 144), src)
    assert main(["evolve", str(src), "--b", "0.05", "--steps", "5", "--dt", "1e-3", "--out", str(out)]) == 0
    rows = read_trajectory(out)
    scal = [r["scal"] for r in rows]
    assert all(b > a for a, b in zip(scal, scal[1:]))
    assert all(r[k] >= -1e-8 for r in rows for k in ("margin1", "margin2", "margin3", "margin4"))
    assert "final t" in capsys.readouterr().err


def test_evolve_zero_tensor(tmp_path):
    src, out = tmp_path / "z.txt", tmp_path / "t.jsonl"
    write_tensor(zero(9), src)
    assert main(["evolve", str(src), "--steps", "4", "--out", str(out)]) == 0
    rows = read_trajectory(out)
    assert len(rows) == 5 and all(r["norm"] == 0.0 and r["scal"] == 0.0 for r in rows)


def test_evolve_cylinder_logs_each_step(tmp_path):
    src, out = tmp_path / "c.txt", tmp_path / "t.jsonl"
    write_tensor(cylinder(9) * (1 / 56), src)
    assert main(["evolve", str(src), "--b", "0.05", "--steps", "3", "--dt", "1e-3", "--out", str(out)]) == 0
    rows = read_trajectory(out)
    assert len(rows) == 4 and all(r["margin1"] is not None for r in rows)


def test_evolve_parse_failure(tmp_path):
    src = tmp_path / "bad.txt"
    src.write_text("not a tensor\n")
    assert main(["evolve", str(src)]) == 2


def test_evolve_blow_up_exit_zero(tmp_path):
    src, out = tmp_path / "id.txt", tmp_path / "t.jsonl"
    write_tensor(identity_tensor(5), src)
    assert main(["evolve", str(src), "--dt", "0.05", "--steps", "100", "--out", str(out)]) == 0
    assert "# truncated = 1" in out.read_text()


def test_evolve_with_family_rejects_dimension_four(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("curvature n=4 bianchi=1\n1 2 1 2 1.0\n")
    assert main(["evolve", str(path), "--b", "0.01", "--steps", "1"]) == 2
