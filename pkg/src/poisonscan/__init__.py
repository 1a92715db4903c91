"""Detection, clustering, and economics of blockchain address-poisoning attacks.

The pipeline reads ordered token-transfer events, labels poisoning and
payoff transfers (detector), merges attacks into groups over shared
infrastructure while discarding copy bots (clustering), and prices each
group's revenue, cost, and competition (analytics). Supporting modules
provide the domain types and file formats (core, ingest, rpc), address
similarity and mining-cost models (similarity, addrgen), a labeled
scenario generator for testing and benchmarks (scenario), and a
command-line driver with reproducible output bundles (cli).
"""

__version__ = "0.1.0"

from .addrgen import (
    GenStats,
    Match,
    SearchSpec,
    benchmark,
    derive_address,
    read_matches,
    search,
    write_matches,
)
from .analytics import (
    CompetitionRecord,
    Competitor,
    GroupEconomics,
    build_competitions,
    group_economics,
    most_imitated_targets,
    similarity_distribution,
    spearman,
    success_ranks,
    targeting_correlation,
    win_loss_matrix,
)
from .cli import SCHEMA_VERSION, main, run
from .clustering import (
    AccountProfile,
    AttackGroup,
    AttackTransferSet,
    account_profiles,
    attack_ratio,
    build_transfer_sets,
    cluster,
    cross_chain_reuse,
    groups_to_csv,
    rand_index,
    temporal_clusters,
)
from .core import (
    TRANSFER_TOPIC,
    USD_QUANTUM,
    Address,
    AddressError,
    AnalyticsError,
    ChainConfig,
    ClusteringError,
    ConfigError,
    Label,
    MissingPriceError,
    OrderingError,
    ParseError,
    PoisonscanError,
    PriceTable,
    RegistryEntry,
    RegistryError,
    RpcError,
    ScenarioError,
    TokenRef,
    TokenRegistry,
    TransactionRecord,
    TransferEvent,
    default_config,
    event_date,
    hex_digits,
    parse_address,
    to_usd,
    usd_amount,
)
from .detector import (
    AttackContext,
    DetectionReport,
    EventDetail,
    PayoffRecord,
    birthday_filter,
    confirm_payoffs,
    detect_accidental,
    scan,
    sensitivity_run,
)
from .ingest import (
    EventBatch,
    EventStore,
    iter_events,
    load_account_history,
    read_events,
    validate_stream,
    write_account_history,
    write_events,
)
from .rpc import fetch_logs
from .scenario import (
    BotSpec,
    GroundTruth,
    GroupSpec,
    ScenarioBundle,
    ScenarioSpec,
    ScoreCard,
    benign_stream,
    generate,
    score_labels,
)
from .similarity import (
    GenModel,
    HardwareEstimate,
    SimilarityScore,
    birthday_collision_prob,
    expected_trials,
    hardware_estimate,
    match_probability,
    osa_distance,
    positional_matches,
    score,
)

__all__ = [
    "AccountProfile",
    "Address",
    "AddressError",
    "AnalyticsError",
    "AttackContext",
    "AttackGroup",
    "AttackTransferSet",
    "BotSpec",
    "ChainConfig",
    "ClusteringError",
    "CompetitionRecord",
    "Competitor",
    "ConfigError",
    "DetectionReport",
    "EventBatch",
    "EventDetail",
    "EventStore",
    "GenModel",
    "GenStats",
    "GroundTruth",
    "GroupEconomics",
    "GroupSpec",
    "HardwareEstimate",
    "Label",
    "Match",
    "MissingPriceError",
    "OrderingError",
    "ParseError",
    "PayoffRecord",
    "PoisonscanError",
    "PriceTable",
    "RegistryEntry",
    "RegistryError",
    "RpcError",
    "SCHEMA_VERSION",
    "ScenarioBundle",
    "ScenarioError",
    "ScenarioSpec",
    "ScoreCard",
    "SearchSpec",
    "SimilarityScore",
    "TokenRef",
    "TokenRegistry",
    "TRANSFER_TOPIC",
    "TransactionRecord",
    "TransferEvent",
    "USD_QUANTUM",
    "account_profiles",
    "attack_ratio",
    "benchmark",
    "benign_stream",
    "birthday_collision_prob",
    "birthday_filter",
    "build_competitions",
    "build_transfer_sets",
    "cluster",
    "confirm_payoffs",
    "cross_chain_reuse",
    "default_config",
    "derive_address",
    "detect_accidental",
    "event_date",
    "expected_trials",
    "fetch_logs",
    "generate",
    "group_economics",
    "groups_to_csv",
    "hardware_estimate",
    "hex_digits",
    "iter_events",
    "load_account_history",
    "main",
    "match_probability",
    "most_imitated_targets",
    "osa_distance",
    "parse_address",
    "positional_matches",
    "rand_index",
    "read_events",
    "read_matches",
    "run",
    "scan",
    "score",
    "score_labels",
    "search",
    "sensitivity_run",
    "similarity_distribution",
    "spearman",
    "success_ranks",
    "targeting_correlation",
    "temporal_clusters",
    "to_usd",
    "usd_amount",
    "validate_stream",
    "win_loss_matrix",
    "write_account_history",
    "write_events",
    "write_matches",
]
