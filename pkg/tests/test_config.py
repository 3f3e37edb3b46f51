import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsediff.config import ConfigError, ExperimentConfig, RunConfig, SweepConfig, parse_config

BASIC = """\
[model]
id = kuramoto
kappa = 1.0
frequencies = -0.5, 0.5

[sweep]
n = 128, 512
p_rule = power
c = 1.0
gamma = 0.5
replicates = 2

[run]
T = 1.0
dt = 0.001

[seed]
master = 42
"""


def test_parse_basic():
    cfg = parse_config(BASIC)
    assert cfg.model_id == "kuramoto"
    assert cfg.model_params == {"kappa": 1.0, "frequencies": (-0.5, 0.5)}
    assert cfg.sweep.n == (128, 512)
    assert cfg.schedule() == [(128, 128 ** -0.5), (512, 512 ** -0.5)]
    assert cfg.seed == 42
    assert cfg.build_model().sup_phi == 1.0


def test_round_trip_is_idempotent():
    cfg = parse_config(BASIC)
    text = cfg.to_ini()
    again = parse_config(text)
    assert again == cfg
    assert again.to_ini() == text


@given(
    st.lists(st.integers(2, 5000), min_size=1, max_size=4, unique=True),
    st.floats(0.1, 1.0), st.floats(0.0, 1.0), st.integers(1, 9),
    st.sampled_from([1e-3, 2e-3, 5e-3]), st.integers(0, 2**64 - 1),
)
def test_round_trip_property(ns, c, gamma, reps, dt, seed):
    cfg = ExperimentConfig(model_params={"kappa": 0.5}, sweep=SweepConfig(n=tuple(ns), c=c, gamma=gamma,
                                                                          replicates=reps),
                           run=RunConfig(T=1.0, dt=dt), seed=seed)
    assert parse_config(cfg.to_ini()) == cfg


def test_explicit_p_list_single_n():
    text = BASIC.replace("n = 128, 512", "n = 512").replace("p_rule = power", "p_rule = list\np = 0.015625, 0.0625")
    cfg = parse_config(text)
    assert cfg.schedule() == [(512, 0.015625), (512, 0.0625)]


@pytest.mark.parametrize("edit, line, fragment", [
    (("replicates = 2", "replicates = two"), 11, "replicates"),
    (("dt = 0.001", "dt = 0.3"), 15, "multiple of dt"),
    (("gamma = 0.5", "gamma = 0.5\nbogus = 1"), 11, "unknown key"),
    (("[run]", "[runs]"), 13, "unknown section"),
    (("kappa = 1.0", "kappa = 1.0\nfoo = 2"), 1, "[model]"),
])
def test_errors_carry_line_numbers(edit, line, fragment):
    text = BASIC.replace(*edit)
    with pytest.raises(ConfigError) as exc:
        parse_config(text, source="cfg.ini")
    assert f"cfg.ini:{line}" in str(exc.value)
    assert fragment in str(exc.value)


def test_sparsity_guard_rejects_before_sampling():
    text = BASIC.replace("c = 1.0", "c = 40.0")
    with pytest.raises(ConfigError, match="outside"):
        parse_config(text)
    text = BASIC.replace("p_rule = power", "p_rule = list\np = 0.5")
    with pytest.raises(ConfigError, match="one value per n"):
        parse_config(text)


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("no section header\n")
