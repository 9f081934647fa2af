"""GPS event streams to estimation-ready RP choice observations."""

from .anchors import AnchorConfig, AnchorResult, StayEpisode, infer_anchors, stay_episodes
from .clustering import ClusterKey, cluster_trips, period_of, round3
from .context import enrich_context, season_of, weather_category
from .cost import estimate_cost, transit_fare
from .decomposition import LinkRules, TransitDecomposition, decompose_transit_journey
from .events import GpsEvent, Leg, Trip, load_events, segment_legs
from .providers import (CachedRouting, ProviderError, SyntheticRouting, SyntheticWeather, TransitRoute,
                        generate_alternatives)
from .run import PipelineConfig, PipelineResult, run_files, run_pipeline
from .screening import ScreeningReport, screen_trajectories
from .sp_gate import GateHistory, sp_gate

__all__ = [
    "AnchorConfig", "AnchorResult", "CachedRouting", "ClusterKey", "GateHistory", "GpsEvent", "Leg", "LinkRules",
    "PipelineConfig", "PipelineResult", "ProviderError", "ScreeningReport", "StayEpisode", "SyntheticRouting",
    "SyntheticWeather", "TransitDecomposition", "TransitRoute", "Trip", "cluster_trips",
    "decompose_transit_journey", "enrich_context", "estimate_cost", "generate_alternatives", "infer_anchors",
    "load_events", "period_of", "round3", "run_files", "run_pipeline", "screen_trajectories", "season_of",
    "segment_legs", "sp_gate", "stay_episodes", "transit_fare", "weather_category",
]
