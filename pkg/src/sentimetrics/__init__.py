"""Transcript sentiment scoring, factor event studies, and market-timing tools."""

from .corpus import (
    FirmDictionary,
    MentionSet,
    TranscriptDay,
    TranscriptRecord,
    build_days,
    extract_mentions,
    load_firm_dictionary,
    load_transcripts,
    tokenize,
)
from .econometrics import (
    DesignMatrix,
    RegressionResult,
    TimingRegressionSet,
    build_design,
    fit_logit,
    fit_ols,
    render_report,
    run_timing_regressions,
)
from .eventstudy import (
    ArPath,
    EventStudyResult,
    EventStudyRun,
    EventWindowConfig,
    ExposureEstimate,
    align_event_date,
    compute_ar,
    estimate_exposures,
    pool_aar_caar,
    run_event_study,
)
from .factors import (
    ControlSeries,
    FactorSeries,
    PanelRow,
    SecurityPanel,
    construct_factors,
    load_controls,
    load_panel,
    market_excess_return,
    read_factors_csv,
    read_rf_csv,
)
from .sentiment import (
    Lexicon,
    SentimentObservation,
    StockSentimentEvent,
    build_stock_events,
    load_lexicon,
    score_day,
)
from .synthetic import DeterministicRng, SynthConfig, SynthDataset, gen_dataset, write_dataset
from .timing import (
    BacktestResult,
    SignalSeries,
    backtest_strategy,
    build_signal,
    r2_scan,
    timing_observations,
)

__version__ = "0.1.0"

__all__ = [
    "ArPath",
    "BacktestResult",
    "ControlSeries",
    "DesignMatrix",
    "DeterministicRng",
    "EventStudyResult",
    "EventStudyRun",
    "EventWindowConfig",
    "ExposureEstimate",
    "FactorSeries",
    "FirmDictionary",
    "Lexicon",
    "MentionSet",
    "PanelRow",
    "RegressionResult",
    "SecurityPanel",
    "SentimentObservation",
    "SignalSeries",
    "StockSentimentEvent",
    "SynthConfig",
    "SynthDataset",
    "TimingRegressionSet",
    "TranscriptDay",
    "TranscriptRecord",
    "align_event_date",
    "backtest_strategy",
    "build_days",
    "build_design",
    "build_signal",
    "build_stock_events",
    "compute_ar",
    "construct_factors",
    "estimate_exposures",
    "extract_mentions",
    "fit_logit",
    "fit_ols",
    "gen_dataset",
    "load_controls",
    "load_firm_dictionary",
    "load_lexicon",
    "load_panel",
    "load_transcripts",
    "market_excess_return",
    "pool_aar_caar",
    "r2_scan",
    "read_factors_csv",
    "read_rf_csv",
    "render_report",
    "run_event_study",
    "run_timing_regressions",
    "score_day",
    "timing_observations",
    "tokenize",
    "write_dataset",
]
