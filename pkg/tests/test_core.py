import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molphase.core import (
    ComplexTransmission,
    DriveField,
    EmitterParams,
    OutOfRange,
    drive_from_power,
    lifetime_from_linewidth,
    linewidth_from_lifetime,
    validate,
    wrap_phase,
)
from molphase.steadystate import transmission_physical


def test_validate_accepts_paper_emitter():
    e = EmitterParams(gamma=21.0, eta=0.1, psi=0.0, tau=1.0)
    assert validate(e) is e


@pytest.mark.parametrize(
    "changes, field",
    [({"eta": 1.5}, "eta"), ({"gamma": 0.0}, "gamma"), ({"eta": -0.01}, "eta"),
     ({"psi": -math.pi}, "psi"), ({"tau": -1.0}, "tau")],
)
def test_validate_rejects(changes, field):
    with pytest.raises(OutOfRange) as info:
        validate(EmitterParams(**{**dict(gamma=21.0, eta=0.1, psi=0.0, tau=1.0), **changes}))
    assert info.value.field == field


def test_psi_pi_is_allowed():
    validate(EmitterParams(psi=math.pi))


def test_default_tau_follows_gamma():
    e = EmitterParams(gamma=21.0)
    assert e.tau == pytest.approx(1e9 / (2 * math.pi * 21e6))
    assert e.replace(gamma=42.0).tau == pytest.approx(e.tau / 2)


def test_gamma_tau_conversion_is_inverse():
    tau = lifetime_from_linewidth(21e6)
    assert linewidth_from_lifetime(tau) == pytest.approx(21e6, rel=1e-15)
    with pytest.raises(OutOfRange):
        lifetime_from_linewidth(0.0)


@pytest.mark.parametrize("power, s", [(1, 0.01), (100, 1.0), (1e4, 100.0)])
def test_drive_from_power(power, s):
    d = drive_from_power(power, 0.01)
    assert d.saturation == pytest.approx(s, rel=1e-12)
    assert d.rabi == pytest.approx(math.sqrt(s / 2), rel=1e-12)


def test_drive_from_power_at_1e4_gives_rabi_sqrt50():
    assert drive_from_power(1e4, 0.01).rabi == pytest.approx(math.sqrt(50.0), rel=1e-12)


@pytest.mark.parametrize("args", [(-1.0, 0.01), (1.0, 0.0), (1.0, -0.1)])
def test_drive_from_power_rejects(args):
    with pytest.raises(OutOfRange):
        drive_from_power(*args)


@settings(max_examples=200)
@given(st.floats(1e-8, 1e6))
def test_saturation_rabi_round_trip(s):
    d = DriveField.from_saturation(0.0, s)
    back = DriveField.from_rabi(0.0, d.rabi)
    assert back.saturation == pytest.approx(s, rel=1e-12)


@settings(max_examples=200)
@given(
    st.floats(-1e3, 1e3), st.floats(0, 1e3), st.floats(0.0, 1.0), st.floats(-3.0, 3.0),
    st.floats(-3, 3),
)
def test_transmission_homogeneous_degree_zero(delta, rabi, eta, psi, log_k):
    k = 10.0**log_k
    a = transmission_physical(eta, psi, 21.0, delta, rabi)
    b = transmission_physical(eta, psi, 21.0 * k, delta * k, rabi * k)
    assert abs(a - b) <= 1e-12


def test_complex_transmission_derived_fields():
    ct = ComplexTransmission(0.95 - 0.05j)
    assert ct.phase == np.angle(0.95 - 0.05j)
    assert ct.extinction == 1 - abs(0.95 - 0.05j) ** 2


def test_wrap_phase_principal_branch():
    assert wrap_phase(math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
