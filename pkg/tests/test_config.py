from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seglab.config import load_config, parse_config
from seglab.errors import ConfigSemanticError, ConfigSyntaxError
from seglab.freeboundary import Variant

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.cfg"))

MINIMAL = """
[grid]
dim = 1
extent = [0.0, 1.0]
n = 64

[groups]
breakpoints = [0, 1, 2]

[sweep]
schedule = [10.0]
"""


def with_lines(*extra, base=MINIMAL):
    return base + "\n" + "\n".join(extra) + "\n"


def test_minimal_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.d == 2
    assert cfg.grid.n == (64,)
    assert cfg.solver.tol == 1e-9
    assert cfg.solver.omega is None
    assert cfg.solver.p == 1.0
    assert cfg.warm_start
    assert cfg.schedule == [10.0]
    assert cfg.coupling.entries[0, 1] == 1.0
    assert cfg.coupling.entries[0, 0] == 0.0
    assert cfg.forcing.family.name == "ZERO"
    assert cfg.classification.delta == 0.02
    assert cfg.classification.variant is Variant.FULL
    assert cfg.output_dir == "out"
    assert np.all(cfg.boundary() == 0.0)


def test_explicit_omega():
    cfg = parse_config(MINIMAL.replace("[sweep]", "[solver]\nomega = 0.8\n\n[sweep]"))
    assert cfg.solver.omega == 0.8


def test_schedule_not_ascending():
    with pytest.raises(ConfigSemanticError) as exc:
        parse_config(MINIMAL.replace("[10.0]", "[100.0, 10.0]"))
    assert any("schedule not ascending" in e for e in exc.value.errors)


def test_probe_outside_domain_named():
    with pytest.raises(ConfigSemanticError) as exc:
        parse_config(with_lines("[diagnostics]", "probes = [1.5]"))
    assert any("probe [1.5]" in e and "outside" in e for e in exc.value.errors)


def test_all_errors_collected():
    text = MINIMAL.replace("[10.0]", "[100.0, 10.0]") + with_lines(
        "[diagnostics]", "probes = [1.5]", "alphas = [1.5]",
        "[classification]", "delta = 0.9", base="")
    with pytest.raises(ConfigSemanticError) as exc:
        parse_config(text)
    errs = exc.value.errors
    assert len(errs) == 4
    for needle in ("schedule", "probe [1.5]", "alphas", "classification.delta"):
        assert any(needle in e for e in errs)


def test_syntax_error_line():
    text = MINIMAL.replace("n = 64", "n = = 64")
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_config(text)
    assert exc.value.line == 5
    assert "line 5" in str(exc.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigSyntaxError):
        load_config(tmp_path / "absent.cfg")


@pytest.mark.parametrize("snippet, needle", [
    ("[coupling]\nmatrix = [[0.0, 1.0], [2.0, 0.0]]", "NotSymmetric"),
    ("[coupling]\nmatrix = [[0.0, 0.0], [0.0, 0.0]]", "ZeroCrossGroup"),
    ("[coupling]\nvalue = -1.0", "positive"),
    ("[solver]\nomega = 2.5", "omega"),
    ("[solver]\nomega = \"fast\"", "omega"),
    ("[[boundary]]\ncomponent = 3\nkind = \"edges\"", "component 3"),
    ("[[boundary]]\ncomponent = 1\nkind = \"spline\"", "kind"),
    ("[[boundary]]\ncomponent = 1\nkind = \"edges\"\ntop = 1.0", "unknown edge"),
    ("[diagnostics]\nwindow = [0.5, 1.5]", "window"),
    ("[diagnostics]\nmode = \"fancy\"", "mode"),
    ("[classification]\nvariant = \"half\"", "variant"),
    ("[extras]\nx = 1", "unknown section"),
])
def test_semantic_errors(snippet, needle):
    with pytest.raises(ConfigSemanticError) as exc:
        parse_config(with_lines(snippet))
    assert any(needle in e for e in exc.value.errors)


def test_group_breakpoints_checked():
    with pytest.raises(ConfigSemanticError) as exc:
        parse_config(MINIMAL.replace("[0, 1, 2]", "[0, 2, 1]"))
    assert any("NonMonotoneBreakpoints" in e for e in exc.value.errors)


def test_boundary_kinds_2d():
    text = """
[grid]
dim = 2
extent = [[0.0, 1.0], [0.0, 2.0]]
n = [15, 31]

[groups]
breakpoints = [0, 1, 2]

[sweep]
schedule = [0.0, 1.0]

[[boundary]]
component = 1
kind = "ramp"
value = 1.0
slope = [-1.0, 0.0]

[[boundary]]
component = 2
kind = "sine"
amplitude = 2.0
wavenumber = [0.5, 0.0]
"""
    cfg = parse_config(text)
    b = cfg.boundary()
    X, Y = cfg.grid.mesh()
    assert np.allclose(b[0], np.maximum(1.0 - X, 0.0))
    assert np.allclose(b[1], 2.0 * np.sin(np.pi * X))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_bundled_configs_parse(path):
    cfg = load_config(path)
    assert cfg.schedule == sorted(cfg.schedule)


@given(sched=st.lists(st.floats(0.0, 1e6), min_size=1, max_size=6))
def test_schedule_order_property(sched):
    text = MINIMAL.replace("[10.0]", "[" + ", ".join(repr(float(s)) for s in sched) + "]")
    ascending = all(b > a for a, b in zip(sched, sched[1:]))
    if ascending:
        assert parse_config(text).schedule == [float(s) for s in sched]
    else:
        with pytest.raises(ConfigSemanticError):
            parse_config(text)


@given(seed=st.integers(0, 2**31 - 1))
def test_hash_tracks_content(seed):
    a = parse_config(f"seed = {seed}\n" + MINIMAL)
    b = parse_config(f"seed = {seed}\n" + MINIMAL)
    c = parse_config(f"seed = {seed + 1}\n" + MINIMAL)
    assert a.config_hash == b.config_hash != c.config_hash
    assert a.solver.seed == seed
