"""
Service tests: health, preset listing and run requests through the Flask test client.
The service has no auth layer, so /run is called without credentials.
"""
import multiprocessing
import runpy
from pathlib import Path

import pytest

from app import app, validate_overrides


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


def test_health_check(client):
    response = client.get('/health')
    assert response.status_code == 200
    assert response.get_json() == {'status': 'healthy', 'service': 'dwsim', 'version': '1.0.0'}


def test_security_headers(client):
    response = client.get('/health')
    assert "default-src 'none'" in response.headers['Content-Security-Policy']
    assert response.headers['X-Content-Type-Options'] == 'nosniff'


def test_presets_listing(client):
    presets = client.get('/presets').get_json()['presets']
    assert len(presets) == 14
    assert {'name', 'description', 'budget'} <= set(presets[0])


@pytest.mark.parametrize('payload', [
    None,
    {'overrides': {}},
    {'preset': 'warp-drive'},
    {'preset': 'mean-mode', 'overrides': {'bad key!': 1}},
    {'preset': 'mean-mode', 'overrides': {'grid.N': 'many'}},
    {'preset': 'mean-mode', 'overrides': ['grid.N=16']},
])
def test_rejected_requests(client, payload):
    response = client.post('/run', json=payload) if payload is not None else client.post('/run', data='x')
    assert response.status_code == 400
    assert response.get_json()['status'] == 'error'


def test_run_preset(client):
    response = client.post('/run', json={'preset': 'dirichlet-extension', 'overrides': {'experiment.samples': 3}})
    assert response.status_code == 200
    report = response.get_json()
    assert report['kind'] == 'report'
    assert report['status'] == 'passed'
    assert {fit['estimate'] for fit in report['fits']} >= {'extension-oddness', 'extension-norm-ratio'}


def test_diverging_run(client):
    overrides = {'model.nonlinearity': [0, 0, -1], 'initial.amplitude': 10, 'integrator.T': 1, 'grid.N': 16}
    response = client.post('/run', json={'preset': 'mean-mode', 'overrides': overrides})
    assert response.status_code == 422
    assert response.get_json()['time'] > 0


def test_validate_overrides():
    assert validate_overrides(None) == []
    assert validate_overrides({'ensemble.norms': [1, 10], 'output.dump_coefficients': True}) == [
        'ensemble.norms=1, 10', 'output.dump_coefficients=true']
    with pytest.raises(ValueError):
        validate_overrides({str(i): 1 for i in range(65)})
    with pytest.raises(ValueError):
        validate_overrides({'model.gamma': {'nested': 1}})


def load_gunicorn_config(monkeypatch, **env):
    for key in ('PORT', 'WORKERS', 'DWSIM_WORKERS', 'RUN_TIMEOUT'):
        monkeypatch.delenv(key, raising=False)
    for key, value in env.items():
        monkeypatch.setenv(key, value)
    monkeypatch.setattr(multiprocessing, 'cpu_count', lambda: 8)
    return runpy.run_path(str(Path(__file__).parent / 'gunicorn.conf.py'))


@pytest.mark.parametrize('env, workers', [
    ({}, 8),
    ({'DWSIM_WORKERS': '4'}, 2),
    ({'DWSIM_WORKERS': '16'}, 1),
    ({'DWSIM_WORKERS': '4', 'WORKERS': '3'}, 3),
])
def test_gunicorn_workers_share_the_cores(monkeypatch, env, workers):
    config = load_gunicorn_config(monkeypatch, **env)
    assert config['workers'] == workers
    assert config['worker_class'] == 'sync'


def test_gunicorn_settings_from_environment(monkeypatch):
    config = load_gunicorn_config(monkeypatch, PORT='9000', RUN_TIMEOUT='60')
    assert config['bind'] == '0.0.0.0:9000'
    assert config['timeout'] == 60
    assert config['proc_name'] == 'dwsim'
