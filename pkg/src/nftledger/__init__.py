"""NFT transaction analytics: ingestion, lateral-swap filtering, rarity
scoring, wash-trade screening and market statistics."""

from nftledger.market_stats import daily_aggregate, daily_log_returns, realized_volatility, summarize
from nftledger.model import (
    Chain,
    CollectionManifest,
    TokenTraitSet,
    TransactionRecord,
    ValidationReport,
    parse_manifest,
    parse_traits,
    parse_transactions,
)
from nftledger.preprocess import Flag, SwapFilterConfig, apply_filter, flag_lateral_swaps
from nftledger.rarity import average_token_price, price_rarity_regression, rarity_score, trait_frequencies
from nftledger.tradegraph import (
    WashConfig,
    benford_test,
    build_graph,
    find_elementary_circuits,
    flag_wash_suspects,
    unique_wallet_ratio,
    wallet_pair_repetition,
)

__all__ = [
    "Chain",
    "CollectionManifest",
    "Flag",
    "SwapFilterConfig",
    "TokenTraitSet",
    "TransactionRecord",
    "ValidationReport",
    "WashConfig",
    "apply_filter",
    "average_token_price",
    "benford_test",
    "build_graph",
    "daily_aggregate",
    "daily_log_returns",
    "find_elementary_circuits",
    "flag_lateral_swaps",
    "flag_wash_suspects",
    "parse_manifest",
    "parse_traits",
    "parse_transactions",
    "price_rarity_regression",
    "rarity_score",
    "realized_volatility",
    "summarize",
    "trait_frequencies",
    "unique_wallet_ratio",
    "wallet_pair_repetition",
]

__version__ = "0.1.0"
