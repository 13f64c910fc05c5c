import hashlib
from fractions import Fraction

from flask import Blueprint, current_app, jsonify, request
from pydantic import ValidationError

from config import Config
from extensions import cache
from schemas import CheckRequest, MdpRequest, TransformRequest, WpRequest
from services.mdp import AnalysisOptions
from services.parser import parse_expectation, parse_program
from services.pipelines import run_check, run_mdp, run_transform, run_wp
from utils.errors import PgclError, UsageError
from utils.helpers import from_json, to_json

# Create blueprint
analysis_bp = Blueprint('analysis', __name__)


def _cache_key(command: str, body: str) -> str:
    return f"pgcl:{command}:" + hashlib.sha256(body.encode()).hexdigest()


def _options(payload) -> AnalysisOptions:
    options = Config.analysis_options(current_app.config)
    options.update(payload.analysis_overrides())
    return AnalysisOptions(**options)


def _error(exc: PgclError):
    status = 400 if isinstance(exc, UsageError) else 422
    current_app.logger.info(f'{type(exc).__name__}: {exc.message}')
    return jsonify(exc.to_dict()), status


def _handle(command: str, schema, run):
    """Validate, run and memoize one analysis request."""
    raw = request.get_data(as_text=True)
    try:
        payload = schema.model_validate(from_json(raw) or {})
    except ValidationError as e:
        return jsonify({'error': 'invalid request', 'kind': 'ValidationError',
                        'details': from_json(e.json(include_url=False))}), 400
    except ValueError as e:
        return jsonify({'error': f'malformed JSON: {str(e)}', 'kind': 'ValidationError'}), 400

    key = _cache_key(command, payload.model_dump_json())
    cached = cache.get(key)
    if cached is not None:
        return current_app.response_class(cached, mimetype='application/json')

    try:
        source = parse_program(payload.source)
        report = run(payload, source)
    except PgclError as e:
        return _error(e)
    except ValueError as e:
        return jsonify({'error': str(e), 'kind': 'ValueError'}), 400
    except Exception as e:
        current_app.logger.error(f'Error running {command}: {str(e)}', exc_info=True)
        return jsonify({'error': str(e), 'kind': type(e).__name__}), 500

    body = to_json(report)
    cache.set(key, body)
    return current_app.response_class(body, mimetype='application/json')


def _expectation(text, source):
    return parse_expectation(text, source.domain) if text else None


@analysis_bp.route('/health')
def health():
    return jsonify({'status': 'ok'})


@analysis_bp.route('/wp', methods=['POST'])
def wp():
    def run(payload, source):
        states = [{k: Fraction(v) for k, v in state.items()} for state in payload.eval]
        return run_wp(source, payload.transformer, _expectation(payload.post, source), states)

    return _handle('wp', WpRequest, run)


@analysis_bp.route('/check', methods=['POST'])
def check():
    def run(payload, source):
        return run_check(source, payload.provider, payload.direction, _expectation(payload.post, source),
                         _expectation(payload.threshold, source), _options(payload))

    return _handle('check', CheckRequest, run)


@analysis_bp.route('/transform', methods=['POST'])
def transform():
    def run(payload, source):
        return run_transform(source, payload.direction, _expectation(payload.post, source),
                             payload.determinize, payload.oracle, _options(payload))

    return _handle('transform', TransformRequest, run)


@analysis_bp.route('/mdp', methods=['POST'])
def mdp():
    def run(payload, source):
        return run_mdp(source, _expectation(payload.post, source), payload.mode, payload.strategy,
                       payload.export, _expectation(payload.escape_reward, source), _options(payload))

    return _handle('mdp', MdpRequest, run)
