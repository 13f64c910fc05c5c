from flask import Flask

from config import Config
from extensions import cache, compress


def create_app(config_object=Config):
    # Create and configure the app
    app = Flask(__name__)
    app.config.from_object(config_object)
    config_object.init_app(app)

    # Initialize extensions
    compress.init_app(app)
    cache.init_app(app, config={
        'CACHE_TYPE': app.config['CACHE_TYPE'],
        'CACHE_DEFAULT_TIMEOUT': app.config['CACHE_DEFAULT_TIMEOUT'],
    })

    # Register blueprints
    from routes.analysis import analysis_bp

    app.register_blueprint(analysis_bp, url_prefix="/api")

    return app


if __name__ == "__main__":
    app = create_app()
    app.run(debug=True)
