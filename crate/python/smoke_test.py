"""Smoke test for the Python extension.

Build it first with ``cargo build --release -p smdi-py``; the script copies
``target/release/libsmdi.so`` to a temporary ``smdi`` module and imports it.
Set ``SMDI_LIB`` to use a different shared library.
"""

import importlib.util
import math
import os
import pathlib
import shutil
import sys
import sysconfig
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    lib = pathlib.Path(os.environ.get("SMDI_LIB", ROOT / "target" / "release" / "libsmdi.so"))
    if not lib.exists():
        sys.exit(f"{lib} not found; run `cargo build --release -p smdi-py`")
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / ("smdi" + sysconfig.get_config_var("EXT_SUFFIX"))
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("smdi", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    smdi = load()

    assert math.isclose(smdi.bessel_i0(1.0), 1.2660658777520083, rel_tol=1e-12)
    assert math.isclose(smdi.binary_entropy(0.11), 0.4999159581645280, rel_tol=1e-12)

    ch = smdi.ChannelParams()
    assert ch.eta_d == 0.4 and ch.p_d == 3e-6
    q, e = smdi.gain_and_qber("Z", 0.45, 0.45, 0.0, ch)
    assert math.isclose(q, 0.012376678059647877, rel_tol=1e-12)
    assert math.isclose(e, 0.015067890565271954, rel_tol=1e-12)

    signal = smdi.IntensitySet(0.45)
    rate, flags = smdi.key_rate(0.0, signal)
    assert math.isclose(rate, 0.0042267354990249353, rel_tol=1e-12), rate
    assert flags == ""

    two_decoy, _ = smdi.key_rate(50.0, signal, mode="two-decoy")
    asymptotic, _ = smdi.key_rate(50.0, signal)
    assert 0.0 < two_decoy <= asymptotic

    mu, best = smdi.optimize_signal(0.0)
    assert best >= rate and 0.01 <= mu <= 1.0

    reach = smdi.max_distance(signal)
    assert 250.0 < reach < 300.0, reach

    rows = smdi.sweep("l_max = 2\neta_s_list = 1, 0.9\nmu_signal = 0.45, 0.1\n")
    assert len(rows) == 6 and rows[0][1] == 1.0 and rows[-1][1] == 0.9

    text, ok = smdi.attack_report()
    assert ok and "PASS" in text

    _, ok = smdi.validate("mc_trials = 200000\n")
    assert ok

    for bad in (lambda: smdi.ChannelParams(e_d=2.0),
                lambda: smdi.IntensitySet(0.005),
                lambda: smdi.sweep("nonsense = 1\n")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
