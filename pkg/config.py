import os


class Config:
    """Base configuration."""

    # Logging Configuration
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    STRUCTURED_LOGGING = os.environ.get('STRUCTURED_LOGGING', 'true').lower() in ('true', '1', 'yes', 'on')

    # Metrics textfile (Prometheus exposition format), empty disables
    METRICS_FILE = os.environ.get('PED_TOOLKIT_METRICS_FILE', '')

    # Parallelism; 0 means "one worker per logical core"
    DEFAULT_JOBS = int(os.environ.get('PED_TOOLKIT_JOBS', 0))

    # Dataset defaults
    TARGET_SIZE = int(os.environ.get('PED_TOOLKIT_TARGET_SIZE', 640))
    FRAME_STRIDE = int(os.environ.get('PED_TOOLKIT_STRIDE', 30))


class DevelopmentConfig(Config):
    """Development configuration."""

    LOG_LEVEL = 'DEBUG'
    STRUCTURED_LOGGING = False


class TestingConfig(Config):
    """Testing configuration."""

    LOG_LEVEL = 'WARNING'
    STRUCTURED_LOGGING = False
    METRICS_FILE = ''

    # Tests run in-process
    DEFAULT_JOBS = 1


class ProductionConfig(Config):
    """Production configuration."""

    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    STRUCTURED_LOGGING = True


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': ProductionConfig
}


def get_config(config_name=None):
    """Get configuration class based on environment."""
    if config_name is None:
        config_name = os.environ.get('PED_TOOLKIT_ENV', 'production')

    return config.get(config_name, config['default'])
