import pytest

import config as profiles
from src.config.settings import ConvertConfig, EvalConfig, Settings, resolve_jobs
from src.utils.error_handling import UsageError


class TestGetConfig:
    """Test profile selection."""

    def test_named_profiles(self):
        """Each name maps to its profile class."""
        assert profiles.get_config('development') is profiles.DevelopmentConfig
        assert profiles.get_config('testing') is profiles.TestingConfig
        assert profiles.get_config('production') is profiles.ProductionConfig

    def test_unknown_falls_back(self):
        """Unknown names use the production profile."""
        assert profiles.get_config('staging') is profiles.ProductionConfig

    def test_environment_variable(self, monkeypatch):
        """PED_TOOLKIT_ENV picks the profile when no name is given."""
        monkeypatch.setenv('PED_TOOLKIT_ENV', 'testing')
        assert profiles.get_config() is profiles.TestingConfig
        monkeypatch.delenv('PED_TOOLKIT_ENV')
        assert profiles.get_config() is profiles.ProductionConfig


class TestSettings:
    """Test environment-backed defaults."""

    def test_testing_profile(self, monkeypatch):
        """The testing profile runs one job without structured logs."""
        for key in ('PED_TOOLKIT_JOBS', 'LOG_LEVEL', 'STRUCTURED_LOGGING', 'PED_TOOLKIT_METRICS_FILE'):
            monkeypatch.delenv(key, raising=False)
        settings = Settings(profiles.TestingConfig)
        assert settings.runtime.jobs == 1
        assert settings.runtime.log_level == 'WARNING'
        assert settings.runtime.structured_logging is False
        assert settings.runtime.metrics_file is None

    def test_environment_overrides(self, monkeypatch):
        """Environment values beat profile defaults."""
        monkeypatch.setenv('PED_TOOLKIT_JOBS', '3')
        monkeypatch.setenv('PED_TOOLKIT_STRIDE', '10')
        monkeypatch.setenv('PED_TOOLKIT_ANCHORS_K', '6')
        monkeypatch.setenv('PED_TOOLKIT_EVAL_IOU', '0.7')
        monkeypatch.setenv('STRUCTURED_LOGGING', 'yes')
        monkeypatch.setenv('PED_TOOLKIT_METRICS_FILE', '/tmp/m.prom')
        settings = Settings(profiles.TestingConfig)
        assert settings.runtime.jobs == 3
        assert settings.convert.stride == 10
        assert settings.anchors.k == 6
        assert settings.eval.iou_threshold == 0.7
        assert settings.runtime.structured_logging is True
        assert settings.runtime.metrics_file == '/tmp/m.prom'

    def test_malformed_numbers_use_default(self, monkeypatch):
        """Non-numeric values fall back instead of raising."""
        monkeypatch.setenv('PED_TOOLKIT_STRIDE', 'many')
        monkeypatch.setenv('PED_TOOLKIT_EVAL_IOU', 'half')
        settings = Settings(profiles.TestingConfig)
        assert settings.convert.stride == 30
        assert settings.eval.iou_threshold == 0.5


class TestResolveJobs:
    """Test worker count resolution."""

    def test_flag_wins(self):
        """An explicit flag beats the fallback."""
        assert resolve_jobs(4, 2) == 4

    def test_fallback(self):
        """Without a flag the fallback is used."""
        assert resolve_jobs(None, 2) == 2

    def test_core_count(self, mocker):
        """Zero everywhere means one worker per logical core."""
        mocker.patch('src.config.settings.psutil.cpu_count', return_value=12)
        assert resolve_jobs(None, 0) == 12

    def test_core_count_unknown(self, mocker):
        """An unknown core count still gives one worker."""
        mocker.patch('src.config.settings.psutil.cpu_count', return_value=None)
        assert resolve_jobs(0, 0) == 1


class TestStageConfigs:
    """Test validation and serialization of stage settings."""

    @pytest.mark.parametrize('kwargs', [
        {'stride': 0},
        {'target_size': 0},
        {'occlusion_policy': 'ignore'},
        {'val_fraction': 1.0},
        {'classes': ('people',)},
    ])
    def test_convert_rejects(self, kwargs):
        """Invalid conversion settings are usage errors."""
        with pytest.raises(UsageError) as excinfo:
            ConvertConfig(**kwargs)
        assert excinfo.value.exit_code == 1

    def test_convert_to_dict(self):
        """Tuples become lists and splits are sorted by name."""
        data = ConvertConfig(splits={'test': ('set06',), 'train': ['set00']}).to_dict()
        assert data['classes'] == ['person']
        assert list(data['splits']) == ['test', 'train']
        assert data['splits']['train'] == ['set00']

    def test_class_lookup(self):
        """Kept labels map to ids, everything else to None."""
        config = ConvertConfig()
        assert config.class_id('person') == 0
        assert config.class_id('people') is None

    def test_eval_iou_range(self):
        """IoU must lie in (0, 1]."""
        with pytest.raises(UsageError):
            EvalConfig(iou_threshold=0.0)
        assert EvalConfig(iou_threshold=1.0).iou_threshold == 1.0
