"""Quick end-to-end check of the embedguide_py extension."""

import json
import math
import os
import tempfile

import embedguide_py as eg


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    ham, n = eg.Hamiltonian.builtin("impurity8")
    assert ham.n_modes == 8 and n == 4

    e0, psi = eg.ground_state(ham, n)
    spectrum = eg.dense_spectrum(ham, n)
    assert close(e0, spectrum[0]), (e0, spectrum[0])
    assert psi.dim == math.comb(8, 4)
    assert close(psi.norm(), 1.0)
    assert close(psi.energy(ham), e0)

    occ = psi.natural_occupations()
    assert close(sum(occ), n)
    assert all(-1e-12 <= x <= 1 + 1e-12 for x in occ)

    mf = eg.hartree_fock(ham, n)
    assert mf.converged and mf.energy >= e0 - 1e-9
    eta_hf = abs(mf.state().overlap(psi))
    assert 0.0 < eta_hf <= 1.0

    sos_full, weight = psi.sos_overlap(psi.dim)
    assert close(sos_full, 1.0) and close(weight, 1.0)
    assert close(psi.mps_overlap(16), 1.0, 1e-8)

    dmet = eg.embed(ham, n, "dmet", list(range(8)))
    assert close(dmet["e_total"], e0, 1e-8), (dmet["e_total"], e0)

    cost = eg.qpe_cost(eta_hf, 1e-3, "standard")
    assert cost["repetitions"] > 0 and cost["total_evolution_time"] > 0
    two_q, toffoli = eg.gate_counts("sos", n_modes=8, n_electrons=4, l=5)
    assert two_q > 0

    hub = eg.Hamiltonian.hubbard(2, 1.0, 2.0)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "dimer.int")
        hub.to_file(path, 2)
        back, n_back = eg.Hamiltonian.from_file(path)
        assert n_back == 2 and back.model_hash(2) == hub.model_hash(2)

        cfg = {
            "model": {"builtin": {"name": "dimer4"}},
            "tasks": [{"task": "solve"}, {"task": "guiding", "guide": {"kind": "hf"}}],
            "output": os.path.join(tmp, "out"),
            "seed": 3,
        }
        cfg_path = os.path.join(tmp, "cfg.json")
        with open(cfg_path, "w") as fh:
            json.dump(cfg, fh)
        assert eg.validate_config(cfg_path) == []
        files = eg.run_config(cfg_path)
        assert "00_solve.csv" in files, files
        assert os.path.exists(os.path.join(tmp, "out", "manifest.json"))

        cfg["electrons"] = 9
        with open(cfg_path, "w") as fh:
            json.dump(cfg, fh)
        assert eg.validate_config(cfg_path)
        try:
            eg.run_config(cfg_path)
        except ValueError:
            pass
        else:
            raise AssertionError("invalid config ran")

    print(f"smoke test ok: E0={e0:.10f} eta_hf={eta_hf:.6f} version={eg.__version__}")


if __name__ == "__main__":
    main()
