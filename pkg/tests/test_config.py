import json
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqcwit.config import (
    ConfigError,
    RunConfig,
    check_writable,
    config_from_dict,
    config_hash,
    config_to_dict,
    engine_axis,
    load_config,
    parse_config,
    serialize_config,
)
from mqcwit.params import SpinAxis


def parse(obj, **kw):
    return parse_config(json.dumps(obj), check_output=False, **kw)


FIG3 = {
    "model": {"N": 48, "J": 2900.0},
    "rates": {"total": 60.0, "ratio": [1, 1, 10]},
    "protocol": {"t": 6e-4},
}


def test_minimal_config_defaults():
    cfg = parse({"N": 4, "J": 1, "t": 1})
    assert cfg.model.N == 4 and cfg.model.Omega == 0.0 and cfg.model.twist == "x"
    assert not cfg.rates.any
    assert cfg.axis == "optimize" and cfg.phi_samples is None and cfg.backend == "auto"
    assert cfg.analysis.echo and cfg.analysis.qfi and cfg.analysis.entropies == ()
    assert cfg.outputs.formats == ("csv", "json")
    assert cfg.sweep is None and len(cfg.points()) == 1
    assert cfg.points()[0].t == 1.0


def test_fig3_config_is_accepted_on_the_symmetric_engine():
    from mqcwit.protocol import resolve_backend

    cfg = parse(FIG3)
    assert cfg.model.twist == "z"
    assert (cfg.rates.gamma_ud, cfg.rates.gamma_du, cfg.rates.gamma_el) == pytest.approx((10, 10, 100))
    pt = cfg.points()[0]
    assert resolve_backend(pt.params, pt.rates, pt.backend) == "sym_liouville"
    assert cfg.t == pytest.approx(6e-4)


def test_jt_is_kept_as_given():
    cfg = parse({"model": {"N": 6, "J": 2900.0}, "protocol": {"Jt": 1.74}})
    assert cfg.t == pytest.approx(6e-4)
    assert config_to_dict(cfg)["protocol"]["Jt"] == 1.74


@pytest.mark.parametrize("obj,path", [
    ({"N": 4, "J": 1, "t": 1, "colour": 3}, "colour"),
    ({"model": {"N": 4, "J": 1, "spin": 1}, "t": 1}, "model.spin"),
    ({"model": {"N": 4, "J": 1}, "protocol": {"t": 1, "axes": "x"}}, "protocol.axes"),
    ({"model": {"J": 1}, "t": 1}, "model.N"),
    ({"N": 0, "J": 1, "t": 1}, "model.N"),
    ({"N": 4.5, "J": 1, "t": 1}, "model.N"),
    ({"N": 4, "J": 1}, "protocol.t"),
    ({"N": 4, "J": 1, "t": 1, "Jt": 1}, "protocol.t"),
    ({"N": 4, "J": 1, "t": -1}, "protocol.t"),
    ({"N": 4, "J": 1, "t": 1, "rates": {"gamma_ud": -1}}, "rates.gamma_ud"),
    ({"N": 4, "J": 1, "t": 1, "rates": {"gamma_ud": 1, "total": 2}}, "rates"),
    ({"N": 4, "J": 1, "t": 1, "protocol": {"axis": [0, 0, 0]}}, "protocol.axis"),
    ({"N": 4, "J": 1, "t": 1, "protocol": {"axis": "w"}}, "protocol.axis"),
    ({"N": 4, "J": 1, "t": 1, "protocol": {"phi_samples": 8}}, "protocol.phi_samples"),
    ({"N": 4, "J": 1, "t": 1, "protocol": {"backend": "gpu"}}, "protocol.backend"),
    ({"N": 4, "J": 1, "t": 1, "sweep": {"parameter": "temperature", "values": [1]}}, "sweep.parameter"),
    ({"N": 4, "J": 1, "t": 1, "sweep": {"parameter": "t", "values": []}}, "sweep.values"),
    ({"N": 4, "J": 1, "t": 1, "sweep": {"parameter": "t", "values": [1], "ratio": [1, 1, 1]}}, "sweep.ratio"),
    ({"N": 4, "J": 1, "t": 1, "analysis": {"entropies": [4]}}, "analysis.entropies"),
    ({"N": 4, "J": 1, "t": 1, "analysis": {"echo": "yes"}}, "analysis.echo"),
    ({"N": 4, "J": 1, "t": 1, "outputs": {"formats": ["xlsx"]}}, "outputs.formats"),
    ({"N": 4, "J": 1, "t": 1, "model": {"N": 4, "J": 1}}, "model"),
])
def test_rejections_name_the_field(obj, path):
    with pytest.raises(ConfigError) as exc:
        parse(obj)
    assert exc.value.path == path


def test_duplicate_keys_are_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config('{"N": 4, "N": 5, "J": 1, "t": 1}', check_output=False)


@pytest.mark.parametrize("token", ["NaN", "Infinity", "-Infinity"])
def test_non_finite_numbers_are_rejected(token):
    with pytest.raises(ConfigError, match="NaN and Infinity"):
        parse_config(f'{{"N": 4, "J": {token}, "t": 1}}', check_output=False)


def test_syntax_errors_report_line_and_column():
    with pytest.raises(ConfigError) as exc:
        parse_config('{\n  "N": 4,\n  "J": 1,,\n}', check_output=False)
    assert exc.value.path == "line 3, column 10"
    with pytest.raises(ConfigError, match="top level"):
        parse_config("[1, 2]", check_output=False)


def test_field_with_rates_beyond_the_oracle_is_rejected_with_advice():
    obj = dict(FIG3, model={"N": 48, "J": 2900.0, "Omega": 1450.0})
    with pytest.raises(ConfigError) as exc:
        parse(obj)
    assert exc.value.path == "protocol.backend"
    assert "N <= 6" in str(exc.value) and "Omega=0" in str(exc.value)
    small = dict(FIG3, model={"N": 5, "J": 2900.0, "Omega": 1450.0})
    assert parse(small).model.N == 5


def test_sweep_errors_point_at_the_value():
    obj = {"model": {"N": 4, "J": 1, "Omega": 0.5}, "t": 1,
           "sweep": {"parameter": "N", "values": [3, 6, 7]}, "rates": {"gamma_el": 0.1}}
    with pytest.raises(ConfigError) as exc:
        parse(obj)
    assert exc.value.path == "sweep.values[2]"


def test_gamma_sweeps():
    cfg = parse({"model": {"N": 12, "J": 2.0}, "protocol": {"Jt": 1.74},
                 "sweep": {"parameter": "gamma_scaled", "linspace": [0, 2, 5]}})
    assert cfg.model.twist == "z"
    pts = cfg.points()
    assert [p.value for p in pts] == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert pts[2].rates.total == pytest.approx(1.0 * 2.0 / 12)
    assert pts[2].rates.gamma_el == pytest.approx(10 * pts[2].rates.gamma_ud)
    cfg = parse({"N": 4, "J": 1, "t": 1, "sweep": {"parameter": "gamma", "values": [0.0, 0.3], "ratio": [0, 0, 1]}})
    assert cfg.points()[1].rates.gamma_el == pytest.approx(0.6)


def test_twist_auto_and_axis_frames():
    assert parse({"N": 4, "J": 1, "t": 1, "sweep": {"parameter": "gamma", "values": [0.0]}}).model.twist == "x"
    cfg = parse({"N": 4, "J": 1, "t": 1, "protocol": {"axis": [1, 2, 3]}})
    assert np.allclose(cfg.axis.vector, np.array([1, 2, 3]) / np.sqrt(14))
    ax = SpinAxis.normalized((0.2, -0.4, 0.9))
    assert np.allclose(engine_axis(engine_axis(ax, "z"), "z").vector, ax.vector)
    assert np.allclose(engine_axis(ax, "x").vector, ax.vector)


def test_axis_and_n_sweeps():
    cfg = parse({"N": 4, "J": 1, "t": 1, "sweep": {"parameter": "axis", "values": ["x", [0, 1, 1], "optimize"]}})
    vals = [p.axis for p in cfg.points()]
    assert np.allclose(vals[0].vector, [1, 0, 0]) and vals[2] == "optimize"
    cfg = parse({"N": 4, "J": 1, "t": 1, "sweep": {"parameter": "N", "values": [2, 8]}})
    assert [p.params.N for p in cfg.points()] == [2, 8]


def test_load_config_and_writability(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"N": 3, "J": 1, "t": 0.5, "outputs": {"directory": str(tmp_path / "a" / "b")}}))
    cfg = load_config(path)
    assert cfg.outputs.directory.endswith("b")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError, match="not a directory"):
        check_writable(blocker / "sub")
    if os.geteuid() != 0:
        ro = tmp_path / "ro"
        ro.mkdir(mode=0o500)
        with pytest.raises(ConfigError, match="not writable"):
            check_writable(ro / "out")


def test_hash_ignores_outputs_but_not_physics():
    a = parse({"N": 4, "J": 1, "t": 1})
    b = parse({"N": 4, "J": 1, "t": 1, "outputs": {"directory": "elsewhere", "formats": ["json"]}})
    c = parse({"N": 4, "J": 1, "t": 1.5})
    assert config_hash(a) == config_hash(b) != config_hash(c)
    assert len(config_hash(a)) == 16


def test_serialization_is_canonical():
    cfg = parse({"model": {"N": 6, "J": 1.0}, "protocol": {"Jt": 1.0},
                 "sweep": {"parameter": "Jt", "linspace": [0, 1, 3]}})
    text = serialize_config(cfg)
    assert json.loads(text)["sweep"]["values"] == [0.0, 0.5, 1.0]
    assert text == serialize_config(parse_config(text, check_output=False))
    assert list(json.loads(text)) == sorted(json.loads(text))


finite = st.floats(0, 10, allow_nan=False, allow_infinity=False)
axes = st.one_of(
    st.sampled_from(["x", "y", "z", "optimize", "optimize-pure"]),
    st.tuples(finite, finite, finite).filter(lambda v: sum(v) > 0.1).map(list),
)


@st.composite
def configs(draw):
    N = draw(st.integers(1, 6))
    obj = {
        "model": {"N": N, "J": draw(st.floats(0.1, 10)), "Omega": draw(st.sampled_from([0.0, 0.5]))},
        "protocol": {draw(st.sampled_from(["t", "Jt"])): draw(finite), "axis": draw(axes),
                     "phi_samples": draw(st.one_of(st.none(), st.integers(2 * N + 1, 60)))},
        "rates": {"gamma_ud": draw(finite), "gamma_du": draw(finite), "gamma_el": draw(finite)},
        "analysis": {"echo": draw(st.booleans()), "entropies": draw(st.lists(st.integers(0, N - 1), max_size=2))},
        "seed": draw(st.integers(0, 1000)),
    }
    if draw(st.booleans()):
        obj["sweep"] = {"parameter": "gamma", "values": draw(st.lists(finite, min_size=1, max_size=3))}
    return obj


@given(configs())
def test_round_trip(obj):
    cfg = config_from_dict(obj, check_output=False)
    again = config_from_dict(json.loads(serialize_config(cfg)), check_output=False)
    assert serialize_config(again) == serialize_config(cfg)
    assert config_hash(again) == config_hash(cfg)
    assert isinstance(again, RunConfig)
