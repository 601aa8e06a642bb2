"""Large-spin magnetization dynamics in the linearized (bosonic) picture.

AFM coupling relaxes without oscillation; FM coupling with
G_g + G_l < 2g relaxes with oscillation. Both use S = 1000 and
<S_A^z>(0) = 0.9 S.

    python demos/magnetization_dynamics.py
"""
import numpy as np

from openquad import build_structure, preset
from openquad.dynamics import evolve, hp_initial_state, observable_series


def run_case(name, gg, gl, g, t1):
    model, frame = preset(name, gamma_g=gg, gamma_l=gl, g=g, S=1000)
    sm = build_structure(model)
    times = np.linspace(0, t1, 401)
    series = evolve(sm.X, sm.Y, hp_initial_state(frame, 900.0), times)
    sz = observable_series(series, frame)["sz_0"]
    turns = np.count_nonzero(np.diff(np.sign(np.diff(sz))) != 0)
    print(f"{name} G_g={gg} G_l={gl} g={g}: <S_A^z>/S {sz[0]:.3f} -> {sz[-1]:.4f}, "
          f"{turns} turning points, method {series.method}")


if __name__ == "__main__":
    run_case("afm_2spin", 2.0, 2.0, 1.0, 10.0)
    run_case("fm_2spin_up", 0.5, 0.45, 1.0, 200.0)
