import logging
from pathlib import Path

import yaml

from text_polarization.errors import ConfigError, MissingArtifactError

PATH_KEYS = ('tweets', 'follows', 'labels', 'events', 'dem_handles',
             'rep_handles', 'stopwords', 'embeddings', 'lexicons',
             'context_events', 'pronouns', 'vote_share')

# key -> (type, default, minimum), floats must exceed a 0.0 minimum
PARAMETERS = {
    'min_count': (int, 50, 1),
    'joint_min_count': (int, 10, 1),
    'joint_min_events': (int, 3, 1),
    'sample_size': (int, 10000, 1),
    'lexicon_size': (int, 30, 1),
    'min_mentions': (int, 100, 0),
    'days': (int, 10, 1),
    'topic_days': (int, 9, 1),
    'baseline_trials': (int, 20, 1),
    'glove_dim': (int, 100, 2),
    'glove_window': (int, 5, 1),
    'glove_x_max': (float, 100.0, 0.0),
    'glove_alpha': (float, 0.75, 0.0),
    'glove_iters': (int, 25, 0),
    'glove_learning_rate': (float, 0.05, 0.0),
    'prior_alpha': (float, 0.01, 0.0),
    'z_threshold': (float, 0.5, None),
    'collocation_min_events': (int, 3, 1),
    'intrusion_items': (int, 50, 0),
    'jobs': (int, 1, 1),
}


class RunConfig:
    """
    Paths and hyperparameters of a pipeline run, from a flat YAML mapping.
    Paths left out fall back to the bundled data files.
    """

    def __init__(self, **kwargs):
        self.logger = logging.getLogger(self.__class__.__name__)
        unknown = set(kwargs) - set(PATH_KEYS) - set(PARAMETERS) - \
            {'k', 'percentile', 'seed', 'output_dir'}
        if unknown:
            raise ConfigError(f"Unknown configuration keys: "
                              f"{sorted(unknown)}")
        self.paths = {}
        for key in PATH_KEYS:
            self.set_path(key, kwargs.get(key))
        self.params = {}
        for key, (_, default, _) in PARAMETERS.items():
            self.set_param(key, kwargs.get(key, default))
        self.k = kwargs.get('k', 8)
        self.percentile = kwargs.get('percentile', 75)
        self.seed = kwargs.get('seed')
        self.output_dir = kwargs.get('output_dir', 'out')
        self.logger.debug("k=%d percentile=%s seed=%s output_dir=%s",
                          self.k, self.percentile, self.seed,
                          self.output_dir)

    def __getattr__(self, item):
        params = self.__dict__.get('params', {})
        if item in params:
            return params[item]
        paths = self.__dict__.get('paths', {})
        if item in paths:
            return paths[item]
        raise AttributeError(item)

    @classmethod
    def load(cls, path=None, **overrides) -> 'RunConfig':
        data = {}
        if path:
            try:
                with open(path, encoding='utf-8') as fd:
                    data = yaml.safe_load(fd) or {}
            except OSError as ex:
                raise MissingArtifactError(f"The config '{path}' can not be "
                                           f"read.") from ex
            except yaml.YAMLError as ex:
                raise ConfigError(f"The config '{path}' is not valid "
                                  f"YAML.") from ex
            if not isinstance(data, dict):
                raise ConfigError(f"The config '{path}' must be a flat "
                                  f"mapping.")
            nested = [k for k, v in data.items() if isinstance(v, dict)]
            if nested:
                raise ConfigError(f"The config keys {nested} must not be "
                                  f"nested.")
            # relative paths are relative to the config file
            base = Path(path).parent
            for key in PATH_KEYS:
                if data.get(key) and not Path(data[key]).is_absolute():
                    data[key] = base / data[key]
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def set_path(self, key: str, value):
        self.paths[key] = Path(value) if value else None

    def set_param(self, key: str, value):
        kind, _, minimum = PARAMETERS[key]
        try:
            value = kind(value)
        except (TypeError, ValueError) as ex:
            raise ConfigError(f"The parameter '{key}' has got an invalid "
                              f"value '{value}'.") from ex
        if minimum is not None and (value < minimum or
                                    (kind is float and value == minimum)):
            raise ConfigError(f"The parameter '{key}' is out of range.")
        self.params[key] = value

    @property
    def k(self) -> int:
        return self._k

    @k.setter
    def k(self, val):
        if not isinstance(val, int) or val < 2:
            raise ConfigError(f"The number of topics must be an integer "
                              f">= 2, got '{val}'.")
        self._k = val

    @property
    def percentile(self) -> float:
        return self._percentile

    @percentile.setter
    def percentile(self, val):
        try:
            val = float(val)
        except (TypeError, ValueError) as ex:
            raise ConfigError(f"The percentile '{val}' is not a "
                              f"number.") from ex
        if not 0 < val <= 100:
            raise ConfigError(f"The percentile must be in (0, 100], got "
                              f"{val}.")
        self._percentile = val

    @property
    def seed(self) -> int:
        return self._seed

    @seed.setter
    def seed(self, val):
        if val is not None and not isinstance(val, int):
            raise ConfigError(f"The seed must be an integer, got '{val}'.")
        self._seed = val

    def require_seed(self, stage: str) -> int:
        if self._seed is None:
            raise ConfigError(f"The stage '{stage}' is stochastic and needs "
                              f"a seed.")
        return self._seed

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    @output_dir.setter
    def output_dir(self, val):
        if not val:
            raise ConfigError("The parameter 'output_dir' is required.")
        self._output_dir = Path(val)

    def require(self, key: str) -> Path:
        """
        The path of an input the stage can not run without.
        """
        path = self.paths.get(key)
        if path is None:
            raise ConfigError(f"The input '{key}' is not configured.")
        if not path.exists():
            raise MissingArtifactError(f"The input file '{path}' does not "
                                       f"exist.")
        return path

    def check_paths(self):
        missing = [str(p) for p in self.paths.values()
                   if p is not None and not p.exists()]
        if missing:
            raise MissingArtifactError(f"Configured files do not exist: "
                                       f"{missing}")
