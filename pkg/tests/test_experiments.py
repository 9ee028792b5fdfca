import dataclasses
import json
import math

import numpy as np
import pytest

from elasticqmc.experiments import (CacheCorruptError, ConfigError, ConvergenceReport,
                                    ReferenceCache, build_reference, emit_plot_data,
                                    parse_config, preset_config, read_report, run_experiment)
from elasticqmc.fem import empirical_rate

TINY = """
[experiment]
example = 2
mode = tensor
J = 4
degree = 1
s1 = 4
levels = 2 3 4
vary = y

[reference]
mode = tensor
m1 = 7
"""


def tiny(**edits):
    """The tiny study with ``[experiment]`` keys replaced."""
    text = TINY
    for key, value in edits.items():
        assert f"\n{key} = " in text
        text = text.replace(f"\n{key} = ", f"\n{key} = {value} ; was ", 1)
    return parse_config(text)


def test_preset_inheritance_and_overrides():
    cfg = parse_config("[experiment]\npreset = 4a\nJ = 16\nlevels = 8 9\n")
    base = preset_config("4a")
    assert cfg.J == (16,) and cfg.levels == (8, 9)
    assert (cfg.s1, cfg.s2, cfg.reference) == (base.s1, base.s2, base.reference)
    paper = parse_config("[experiment]\npreset = 2\n", paper_scale=True)
    assert paper.J == (128,) and paper.s1 == 256 and paper.reference.m1 == 10


def test_tiny_config_fields():
    cfg = tiny()
    assert cfg.reference.J == 4 and cfg.reference.s1 == 4 and cfg.reference.m1 == 7
    assert cfg.digest() == tiny().digest()
    assert cfg.digest() != tiny(J=8).digest()


@pytest.mark.parametrize("text, msg", [
    ("[other]\nx = 1\n", "missing \\[experiment\\]"),
    ("[experiment]\npreset = 9\n", "unknown preset"),
    ("[experiment]\npreset = 2\ncolour = red\n", "unknown key 'colour'"),
    ("[experiment]\npreset = 2\n[extra]\n", "unknown section"),
    ("[experiment]\npreset = 2\nJ = many\n", "bad value"),
    ("[experiment]\npreset = 2\ns2 = 4\n", "constant lambda"),
    ("[experiment]\npreset = 2\nlevels = 5 4\n", "increasing"),
    ("[experiment]\npreset = 2\nlevels = 3 19\n", "double precision"),
    ("[experiment]\npreset = 1\nmode = tensor\n", "fem mode"),
    ("[experiment]\nexample = 2\nmode = tensor\nJ = 4\ndegree = 1\ns1 = 2\nlevels = 2\n", "reference"),
    ("[experiment]\npreset = 2\nworkers = 0\n", "workers"),
])
def test_rejected_configs(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_rejected_config_writes_nothing(tmp_path, tmp_cache):
    with pytest.raises(ConfigError):
        preset_config("2", out=str(tmp_path / "o"), workers=0)
    assert not (tmp_path / "o").exists() and not tmp_cache.exists()


def test_reference_cache_hit_miss_and_corruption(tmp_cache):
    cache = ReferenceCache()
    first = build_reference(tiny(), cache)
    assert not first.hit and first.n_solves == 2 ** 7 and math.isfinite(first.value)
    again = build_reference(tiny(), cache)
    assert again.hit and again.n_solves == 0 and again.value == first.value
    # bit-exact on recomputation
    assert build_reference(tiny(), cache, rebuild=True).value == first.value
    # changed J misses
    other = parse_config(TINY.replace("mode = tensor\nm1", "mode = tensor\nJ = 8\nm1"))
    assert not build_reference(other, cache).hit
    path = cache.path(first.key)
    record = json.loads(path.read_text())
    record["value"] = (first.value * 2).hex()
    path.write_text(json.dumps(record))
    with pytest.raises(CacheCorruptError, match="checksum"):
        build_reference(tiny(), cache)
    path.write_text("{not json")
    with pytest.raises(CacheCorruptError):
        build_reference(tiny(), cache)


def test_report_is_byte_reproducible_and_rates_recompute(tmp_path, tmp_cache):
    a = run_experiment(tiny())
    b = run_experiment(dataclasses.replace(tiny(), workers=2))
    pa = a.write(tmp_path / "a.csv")
    pb = b.write(tmp_path / "b.csv")
    assert pa.read_bytes() == pb.read_bytes()
    assert a.metadata["reference"]["cache_hit"] is False and b.metadata["reference"]["cache_hit"]
    rep = read_report(pa)
    assert rep.columns == ["N_1", "|Xi_ref-Xi_Q|", "CR"]
    assert [r[0] for r in rep.rows] == ["4", "8", "16"]
    errs = [float(r[1]) for r in rep.rows]
    for r, cr in zip(rep.rows[1:], empirical_rate(errs)):
        assert abs(float(r[2]) - cr) <= 1e-12
    meta = json.loads(pa.with_suffix(".meta.json").read_text())
    assert meta["config_hash"] == tiny().digest() and len(meta["wall_times"]) == 3


def test_stage_errors_are_named(tmp_cache):
    cfg = tiny()
    cache = ReferenceCache()
    build_reference(cfg, cache)
    cache.path(build_reference(cfg, cache).key).write_text("{}")
    with pytest.raises(RuntimeError, match="reference stage failed"):
        run_experiment(cfg, cache)


def test_fem_report_layout(tmp_path):
    rep = run_experiment(preset_config("1", J=(4, 8)))
    assert rep.columns == ["J", "||u-u_h||", "CR", "|L_1(u-u_h)|", "CR"]
    assert len(rep.rows) == 2 and rep.rows[0][2] == "" and rep.rows[0][1].count("e") == 1


def test_plot_data_guide_slope(tmp_path):
    rep = ConvergenceReport(["N_1", "|Xi_ref-Xi_Q|", "CR"],
                            [["8", "1.0000e-03", ""], ["16", "2.6000e-04", "1.94"],
                             ["32", "6.1000e-05", "2.09"]])
    out = emit_plot_data(rep, tmp_path / "p.dat")
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    data = np.loadtxt(out)
    assert data.shape == (3, 3)
    assert data[1, 2] == data[0, 2] * (16 / 8) ** -2
    assert data[:, 1].tolist() == [1e-3, 2.6e-4, 6.1e-5]


def test_plot_data_uses_point_count_for_sparse(tmp_path):
    rep = ConvergenceReport(["L", "M", "|Xi_Q_L-Xi_ref|", "(log M)M^-1"],
                            [["5", "128", "1e-4", "0.03"], ["6", "320", "4e-5", "0.018"]])
    data = np.loadtxt(emit_plot_data(rep, tmp_path / "s.dat", slope=1.0))
    assert data[:, 0].tolist() == [128.0, 320.0]


def test_empty_report_writes_no_file(tmp_path):
    with pytest.raises(ValueError):
        emit_plot_data(ConvergenceReport(["N_1", "|e|", "CR"], []), tmp_path / "x.dat")
    assert list(tmp_path.iterdir()) == []


def test_failed_write_leaves_no_partial_file(tmp_path, monkeypatch):
    import elasticqmc.experiments as ex

    rep = ConvergenceReport(["N_1", "|e|", "CR"], [["8", "1e-3", ""]])

    def broken(fd, *a, **k):
        ex.os.close(fd)
        raise OSError("disk full")

    monkeypatch.setattr(ex.os, "fdopen", broken)
    with pytest.raises(OSError):
        rep.write(tmp_path / "r.csv")
    assert list(tmp_path.iterdir()) == []
