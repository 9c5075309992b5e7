import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hybridil.errors import ValidationError
from hybridil.estimators import DemoProcessor, ImitationPolicy, check_obs_array
from hybridil.pipeline import generate_dataset
from hybridil.sim import EnvConfig


@pytest.fixture(scope="module")
def raw_dataset():
    return generate_dataset(EnvConfig(), 2, base_seed=60)


def test_processor_transform(raw_dataset):
    proc = DemoProcessor()
    out = proc.fit_transform(raw_dataset)
    assert out.labeled is not None
    assert len(out.labeled) == len(out.demos)


def test_processor_is_sklearn_compatible(raw_dataset):
    proc = DemoProcessor(relabel=False, add_waypoints=1)
    params = proc.get_params()
    assert params["relabel"] is False and params["add_waypoints"] == 1
    clone(proc)  # sklearn clone round-trip


def test_policy_estimator_fit_predict(raw_dataset):
    proc = DemoProcessor()
    labeled = proc.transform(raw_dataset)
    est = ImitationPolicy(variant="hybrid", steps=15, hidden=8,
                          batch_size=4, window=4, eval_every=0)
    est.fit(labeled)
    obs = np.stack([s.obs.to_array() for s in labeled.demos[0].steps[:5]])
    actions = est.predict(obs)
    assert actions.shape == (5, 4)
    waypoints = est.predict_waypoints(obs)
    assert waypoints.shape == (5, 4)
    modes = est.predict_modes(obs)
    assert set(np.unique(modes)) <= {0, 1}


def test_policy_estimator_not_fitted():
    est = ImitationPolicy()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((2, 11)))


def test_policy_estimator_clone_and_params():
    est = ImitationPolicy(variant="bc_rnn", gamma=0.3, steps=10)
    params = est.get_params()
    assert params["variant"] == "bc_rnn" and params["gamma"] == 0.3
    clone(est)


def test_check_obs_array_validation():
    with pytest.raises(ValidationError):
        check_obs_array(np.zeros((3, 5)))
    assert check_obs_array(np.zeros(11)).shape == (1, 11)
