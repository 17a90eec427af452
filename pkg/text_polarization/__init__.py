# flake8: noqa
from .errors import PolarizationException, CorpusError, VocabularyError, \
    EstimatorError, EmbeddingError, TopicModelError, LogOddsError, \
    StatisticsError, ConfigError, MissingArtifactError, EmptyInputError
from .corpus import PartyLabel, TweetRecord, EventMeta, FollowEdge, \
    TweetCollection, load_tweets, save_tweets, load_events, filter_relevant, \
    assign_party, partisan_coverage
from .textprep import Vocab, UserTokenCounts, tokenize, stem, \
    build_event_vocab, build_joint_vocab, count_user_tokens
from .polarization import PolarizationEstimate, leave_out, plug_in, \
    random_assignment_baseline, temporal_series, exclude_multiday_users, \
    user_follow_regression, pooled_day_regression
from .embed import EmbeddingTable, SentenceEmbedding, train_glove, \
    load_embeddings, sif_weights, first_principal_component, sif_embed
from .topics import TopicModel, TopicAssignment, kmeans_cosine, \
    assign_topics, filter_ambiguous, within_topic_partisanship, \
    between_topic_partisanship, topic_log_odds, topic_partisan_items
from .lexica import LogOddsEntry, LogOddsTable, Lexicon, token_log_odds, \
    zscore_within_group, induce_lexicon, category_log_odds
from .devices import track_token, grounding_log_odds, modal_partisanship, \
    modal_topic_representation, pronoun_partisanship, modal_collocations
from .oracle import GenerativeSpec, generate, true_partisanship
from .config import RunConfig
