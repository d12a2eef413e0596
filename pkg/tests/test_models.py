import numpy as np
import pytest

from dqmesq.errors import NoTableAvailable, UnknownModel, UnknownParameter
from dqmesq.models import MODELS, instantiate_model, model_parameters, paper_mode_table
from dqmesq.modes import eval_correlation
from dqmesq.propagate import PropagationConfig, propagate, reduced_density

CASES = [("spin_boson", "low"), ("spin_boson", "high"), ("siam", "low"), ("siam", "high"),
         ("excitonic_dimer", None), ("diam", None)]


@pytest.mark.parametrize("name, regime", CASES)
def test_jobs_are_consistent(name, regime):
    job = instantiate_model(name, regime=regime)
    d = job.system.dim
    assert job.rho0.shape == (d, d) and abs(np.trace(job.rho0) - 1) <= 1e-15
    for ms in job.modesets.values():
        pairing = ms.pairing
        assert all(pairing[pairing[k]] == k for k in range(len(ms)))
    gen = job.generator
    assert gen.dim == job.initial_state().vec.size
    assert set(job.observable_spec().names) == set(job.observables)


def test_spin_boson_tables_verbatim():
    low = paper_mode_table("spin_boson", "low")
    assert [m.eta for m in low.modes] == [0.497 + 0.082j, 0.035 - 0.082j, -0.032]
    assert [m.gamma for m in low.modes] == [0.5 + 0.866j, 0.5 - 0.866j, 3.873]
    high = paper_mode_table("spin_boson", "high")
    assert [m.eta for m in high.modes] == [2.231 + 1.155j, 1.769 - 1.155j]
    assert eval_correlation(high, 0.0) == pytest.approx(4.0, abs=1e-12)
    assert low.modes[2].eta.imag == 0 and low.modes[2].gamma.imag == 0
    assert not low.generated


def test_siam_tables_verbatim():
    high = paper_mode_table("siam", "high")
    plus = [m for m in high.modes if m.sigma == 1]
    assert [m.eta for m in plus] == [0.062 + 0.138j, -0.164j, 0.026j]
    assert [m.gamma for m in plus] == [1.0, 0.786, 3.261]
    low = paper_mode_table("siam", "low")
    assert len(low) == 6 and {m.sigma for m in low.modes} == {1, -1}


def test_generated_flags():
    assert paper_mode_table("diam").generated
    assert paper_mode_table("excitonic_dimer").generated
    assert instantiate_model("spin_boson", {"T": 2.0}).generated
    assert not instantiate_model("spin_boson").generated


def test_errors():
    with pytest.raises(UnknownModel):
        instantiate_model("hubbard")
    with pytest.raises(UnknownParameter):
        instantiate_model("siam", {"beta": 3})
    with pytest.raises(NoTableAvailable):
        paper_mode_table("spin_boson", "medium")
    with pytest.raises(NoTableAvailable):
        paper_mode_table("qubit")
    with pytest.raises(ValueError):
        instantiate_model("spin_boson", regime="medium")


def test_decoupled_spin_boson_precesses():
    job = instantiate_model("spin_boson", {"lam": 0.0, "V": 0.0, "initial": np.eye(2) / 2 + 0.5 *
                                                                      np.array([[0, 1], [1, 0]])})
    traj = propagate(job.generator, job.initial_state(), PropagationConfig(0.01, 2.0, stride=20))
    for t, rdt in zip(traj.times, traj.records):
        rho = reduced_density(rdt)
        # H = Omega sz: coherence rotates at 2 Omega
        assert rho[0, 1] == pytest.approx(0.5 * np.exp(2j * t), abs=1e-8)


def test_defaults_and_initial_states():
    assert model_parameters("spin_boson")["N_max"] == 3
    assert model_parameters("diam")["dt"] == 0.002
    sb = instantiate_model("spin_boson")
    assert sb.rho0[1, 1] == 1 and sb.parameters["T"] == 0.5
    assert instantiate_model("spin_boson", regime="high").parameters["T"] == 5.0
    siam = instantiate_model("siam")
    assert siam.rho0[3, 3] == 1 and siam.parameters["E0"] == -0.5
    diam = instantiate_model("diam")
    assert diam.rho0[0b1100, 0b1100] == 1
    assert instantiate_model("excitonic_dimer").rho0[1, 1] == 1
    two = instantiate_model("siam", {"leads": 2, "bias": 0.4, "K": 1})
    assert set(two.modesets) == {"L_up", "L_down", "R_up", "R_down"}
    with pytest.raises(ValueError):
        instantiate_model("siam", {"leads": 3})
    with pytest.raises(ValueError):
        instantiate_model("spin_boson", {"initial": 5})


@pytest.mark.parametrize("name", MODELS)
def test_overrides_recorded(name):
    job = instantiate_model(name, {"dt": 0.005, "t_final": 1.0})
    assert job.prop.dt == 0.005 and job.prop.t_final == 1.0 and job.lcu.dt == 0.005
