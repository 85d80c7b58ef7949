"""Named run presets: figure and table scenarios at their reference parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError
from .config import validate

ALL_DOWN = "↓↓↓"
MIDDLE_UP = "↓↑↓"
LAST_UP = "↓↓↑"

SINGLE_MODE_SETS = {"a": (1, 6), "b": (2, 10), "c": (2, 12), "d": (4, 16)}
MULTI_MODE_SETS = {"a": (2, 10, 1000), "b": (2, 10, 1500), "c": (4, 16, 1500)}
GHZ_RABI_KHZ = [6.0, 8.0, 10.0, 12.0, 14.0]

STATE_KEYS = {ALL_DOWN: "down_down_down", MIDDLE_UP: "down_up_down", LAST_UP: "down_down_up"}


@dataclass(frozen=True)
class Preset:
    """One or more runs; ``table`` groups run summaries as {param_key: {state_key: value}}."""

    name: str
    runs: list = field(default_factory=list)  # (param_key, state_key, RunConfig)
    table: str | None = None  # summary scalar collected into the table


def _single(name, pair, spins, model="single_mode_2drive", **extra):
    delta, rabi = pair
    return validate(
        dict(
            model=model,
            name=name,
            delta_khz=delta,
            omega_r_khz=rabi,
            initial_spins=spins,
            t_final_ms=40.0,
            **extra,
        )
    )


def _multi(name, triple, spins, **extra):
    delta, rabi, wz = triple
    return validate(
        dict(
            model="multi_mode_2drive",
            name=name,
            delta_khz=delta,
            omega_r_khz=rabi,
            omega_z_khz=wz,
            initial_spins=spins,
            t_final_ms=40.0,
            **extra,
        )
    )


def _key(values):
    return "{" + ",".join(f"{v:g}" for v in values) + "}"


def _build():
    p = {}
    for tag, pair in SINGLE_MODE_SETS.items():
        extra = {"convergence_check": True} if tag == "d" else {}
        p[f"fig2{tag}"] = Preset(f"fig2{tag}", [(_key(pair), STATE_KEYS[ALL_DOWN], _single(f"fig2{tag}", pair, ALL_DOWN, **extra))])
        p[f"fig3{tag}"] = Preset(f"fig3{tag}", [(_key(pair), STATE_KEYS[MIDDLE_UP], _single(f"fig3{tag}", pair, MIDDLE_UP))])
    d = SINGLE_MODE_SETS["d"]
    p["fig4"] = Preset(
        "fig4",
        [
            (_key(d), STATE_KEYS[s], _single(f"fig4{t}", d, s, model="single_mode_1drive"))
            for t, s in (("a", ALL_DOWN), ("b", MIDDLE_UP))
        ],
    )
    for tag, triple in MULTI_MODE_SETS.items():
        p[f"fig5{tag}"] = Preset(f"fig5{tag}", [(_key(triple), STATE_KEYS[ALL_DOWN], _multi(f"fig5{tag}", triple, ALL_DOWN))])
    for row, spins in ((("a", "b", "c"), MIDDLE_UP), (("d", "e", "f"), LAST_UP)):
        for tag, triple in zip(row, MULTI_MODE_SETS.values()):
            p[f"fig6{tag}"] = Preset(f"fig6{tag}", [(_key(triple), STATE_KEYS[spins], _multi(f"fig6{tag}", triple, spins))])
    p["fig7"] = Preset(
        "fig7",
        [
            (
                "",
                "",
                validate(
                    dict(
                        model="ghz_scan",
                        name="fig7",
                        delta_khz=2.0,
                        omega_r_khz=GHZ_RABI_KHZ[0],
                        omega_z_khz=1500.0,
                        initial_spins=ALL_DOWN,
                        sweep={"omega_r_khz": GHZ_RABI_KHZ},
                    )
                ),
            )
        ],
    )
    p["table1"] = Preset(
        "table1",
        [
            (_key(pair), STATE_KEYS[s], _single(f"table1_{tag}_{STATE_KEYS[s]}", pair, s))
            for tag, pair in SINGLE_MODE_SETS.items()
            for s in (ALL_DOWN, MIDDLE_UP)
        ],
        table="n_com_mean",
    )
    p["table2"] = Preset(
        "table2",
        [
            (_key(d), STATE_KEYS[s], _single(f"table2_{STATE_KEYS[s]}", d, s, model="single_mode_1drive"))
            for s in (ALL_DOWN, MIDDLE_UP)
        ],
        table="n_com_mean",
    )
    p["table3"] = Preset(
        "table3",
        [
            (_key(triple), STATE_KEYS[s], _multi(f"table3_{tag}_{STATE_KEYS[s]}", triple, s))
            for tag, triple in MULTI_MODE_SETS.items()
            for s in (ALL_DOWN, MIDDLE_UP, LAST_UP)
        ],
        table="n_total_mean",
    )
    p["fig8-string"] = Preset("fig8-string", [("", "", validate(dict(model="qlm", name="fig8-string")))])
    p["gate-check"] = Preset("gate-check", [("", "", validate(dict(model="gate_check", name="gate-check")))])
    return p


PRESETS = _build()


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; known presets: {known}") from None
