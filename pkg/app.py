import os
import re
import logging

from flask import Flask, jsonify, request
from flask_talisman import Talisman

from config import Settings
from errors import ConfigurationError, DivergenceError
from presets import get_preset, list_presets, run_config
from storage import envelope

app = Flask(__name__)

# Security headers; the service only speaks JSON
csp = {
    'default-src': "'none'",
    'frame-ancestors': "'none'",
}

# Disable HTTPS enforcement in development
if os.getenv('FLASK_ENV') != 'production':
    Talisman(app, content_security_policy=csp, force_https=False)
else:
    Talisman(app, content_security_policy=csp)

app.config['SECRET_KEY'] = os.getenv('SECRET_KEY', 'dev-key-change-in-production')
app.config['DEBUG'] = os.getenv('FLASK_DEBUG', 'False').lower() == 'true'

settings = Settings.from_env()

logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO))
logger = logging.getLogger(__name__)

SERVICE = 'dwsim'
VERSION = '1.0.0'
_KEY = re.compile(r'^[A-Za-z0-9_.]+$')


def validate_overrides(overrides, max_items=64):
    """Turn the request's overrides object into key=value strings"""
    if overrides is None:
        return []
    if not isinstance(overrides, dict):
        raise ValueError("overrides must be an object of key: value pairs")
    if len(overrides) > max_items:
        raise ValueError(f"at most {max_items} overrides per run")

    items = []
    for key, value in overrides.items():
        if not isinstance(key, str) or not _KEY.match(key):
            raise ValueError(f"invalid override key {key!r}")
        if isinstance(value, (list, tuple)):
            value = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = 'true' if value else 'false'
        elif not isinstance(value, (str, int, float)):
            raise ValueError(f"override {key} must be a string, a number or a list")
        items.append(f"{key}={value}")
    return items


@app.route('/health')
def health_check():
    """Public health check endpoint for monitoring"""
    return jsonify({
        'status': 'healthy',
        'service': SERVICE,
        'version': VERSION
    })


@app.route('/presets')
def presets_listing():
    return jsonify({
        'presets': [{'name': p.name, 'description': p.description, 'budget': p.budget}
                    for p in list_presets()]
    })


@app.route('/run', methods=['POST'])
def run_preset():
    payload = request.get_json(silent=True)
    name = None
    try:
        if not isinstance(payload, dict):
            raise ValueError("expected a JSON object with a preset name")
        name = payload.get('preset')
        if not isinstance(name, str) or not name:
            raise ValueError("preset is required")

        config = get_preset(name).config(validate_overrides(payload.get('overrides')))
        logger.info(f"Running preset {name} with {len(config.lines)} configured keys")
        result = run_config(config, settings.workers)

        return jsonify(envelope('report', {
            'experiment': config.experiment,
            'status': 'passed' if result.passed else 'failed',
            'failing': result.failing,
            'fits': [fit.to_dict() for fit in result.fits],
            'artifacts': result.artifacts,
        }))

    except (ConfigurationError, ValueError) as e:
        logger.warning(f"Rejected run request: {e}")
        return jsonify({'status': 'error', 'error': str(e)}), 400
    except DivergenceError as e:
        logger.error(f"Preset {name} diverged: {e}")
        return jsonify({'status': 'diverged', 'error': str(e), 'time': e.time}), 422
    except Exception as e:
        logger.error(f"Run failed: {str(e)[:200]}")
        return jsonify({'status': 'error', 'error': 'internal error while running the preset'}), 500


if __name__ == '__main__':
    port = int(os.getenv('PORT', 5000))
    debug_mode = os.getenv('FLASK_DEBUG', 'False').lower() == 'true'
    app.run(host='0.0.0.0', port=port, debug=debug_mode)
