import json

import numpy as np
import pytest

from spherepart.io import load_config, load_weights, read_json, save_weights, write_json
from spherepart.transport import CostKind, DualWeights, SolveReport


def test_write_json_handles_numpy_and_non_finite(tmp_path):
    path = write_json({'b': np.float64(np.inf), 'a': np.arange(3), 'c': float('nan'), 'd': np.bool_(True)},
                      tmp_path / 'out' / 'data.json')
    data = read_json(path)
    assert data == {'a': [0, 1, 2], 'b': 'inf', 'c': None, 'd': True}
    assert list(json.loads(path.read_text())) == ['a', 'b', 'c', 'd']


def test_weights_round_trip(tmp_path):
    weights = DualWeights(np.array([0.0, 0.125, 1 / 3]), np.eye(3), CostKind.intrinsic(2.5))
    report = SolveReport(4, 1e-3, 0.2, 0.3, 500, converged=True, quad_seed=2, quad_stream=(12,),
                         dual_history=[0.1, 0.2])
    save_weights(weights, report, tmp_path / 'weights.json')
    loaded_weights, loaded_report = load_weights(tmp_path / 'weights.json')
    assert np.array_equal(loaded_weights.lambdas, weights.lambdas)
    assert loaded_weights.cost_kind == weights.cost_kind
    assert loaded_report == report


def test_load_config(tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text("global:\n  seed: 7\nsolve:\n  L: 32\n")
    config = load_config(path)
    assert config['global']['seed'] == 7
    assert config['solve']['L'] == 32

    path.write_text("- just\n- a list\n")
    with pytest.raises(ValueError):
        load_config(path)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / 'missing.yaml')
