from pathlib import Path

import pytest

from ftrcontact.benchmark import BLOCK, ZONES
from ftrcontact.config import ConfigError, RunConfig, load_config, parse_config
from ftrcontact.mesh import DIRICHLET


def test_empty_text_gives_defaults():
    cfg = parse_config("")
    assert cfg.benchmark == "ironing" and cfg.refine == 1 and cfg.phases == (1, 2)
    assert cfg.zones == ZONES and cfg.basis == "dual" and cfg.block == BLOCK
    assert cfg.ftr_config().lumped and not cfg.ftr_config(exact_hessian=True).lumped


def test_full_config(tmp_path):
    text = """
    # a comment
    benchmark = mesh
    mesh_file = meshes/a.msh     # relative to the config file
    bind.7 = dirichlet
    bind.lower = body1
    refine = 2
    phases = all
    out = res
    basis = lagrange
    zone.1 = -2, 0.5
    lambda_block = 1.5
    mu_pipe = 30
    press = 1.0
    ftr.delta0 = 0.25
    ftr.max_outer = 40
    ftr.lumped = false
    """
    cfg = parse_config(text, tmp_path)
    assert cfg.mesh_file == tmp_path / "meshes/a.msh" and cfg.out == tmp_path / "res"
    assert cfg.bindings == {7: DIRICHLET, "lower": 1}
    assert cfg.refine == 2 and cfg.phases == (1, 2) and cfg.basis == "lagrange"
    assert cfg.zones == {1: (-2.0, 0.5)}                 # mesh runs only get zones that are given
    assert cfg.block.lam == 1.5 and cfg.pipe.mu == 30.0 and cfg.press == 1.0
    f = cfg.ftr_config()
    assert f.delta0 == 0.25 and f.max_outer == 40 and f.lumped is False


def test_phase_forms():
    assert parse_config("phases = 2").phases == (2,)
    assert parse_config("phases = 1, 2").phases == (1, 2)
    assert parse_config("zone.2 = none").zones[2] is None


@pytest.mark.parametrize("text,key", [
    ("refin e = 1", "refin e"),
    ("bogus = 1", "bogus"),
    ("refine = one", "refine"),
    ("refine = 0", "refine"),
    ("refine = 1\nrefine = 2", "refine"),
    ("phases = 2, 1", "phases"),
    ("phases = 3", "phases"),
    ("basis = cubic", "basis"),
    ("zone.1 = 1", "zone.1"),
    ("zone.1 = 2 1", "zone.1"),
    ("press = inf", "press"),
    ("ftr.nonsense = 1", "ftr.nonsense"),
    ("ftr.lumped = maybe", "ftr.lumped"),
    ("ftr.eta1 = 0.95", "ftr"),
    ("mu_block = -1", "material"),
    ("bind.3 = floor", "bind.3"),
    ("benchmark = mesh", "mesh_file"),
    ("just words", "just"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key
    assert key in str(err.value)


def test_run_config_rejects_refinement_below_one():
    with pytest.raises(ConfigError):
        RunConfig(refine=0)


def test_load_config_resolves_against_file_directory(tmp_path):
    (tmp_path / "run.cfg").write_text("out = results\n")
    assert load_config(tmp_path / "run.cfg").out == tmp_path / "results"
    assert isinstance(parse_config("").out, Path)
