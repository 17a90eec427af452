class PolarizationException(Exception): pass                # flake8: E701
class CorpusError(PolarizationException): pass              # flake8: E701
class VocabularyError(PolarizationException): pass          # flake8: E701
class EstimatorError(PolarizationException): pass           # flake8: E701
class EmbeddingError(PolarizationException): pass           # flake8: E701
class TopicModelError(PolarizationException): pass          # flake8: E701
class LogOddsError(PolarizationException): pass             # flake8: E701
class StatisticsError(PolarizationException): pass          # flake8: E701
class ConfigError(PolarizationException): pass              # flake8: E701
class MissingArtifactError(PolarizationException): pass     # flake8: E701
class EmptyInputError(CorpusError): pass                    # flake8: E701
