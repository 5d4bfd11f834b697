"""Driver identification from short vehicle-sensor traces at recurring turns."""

from .align import AlignedSegment, align_segment, align_site, select_baseline, smoothness
from .evaluate import (EvalReport, SiteDataset, balance_sessions, evaluate_site,
                       fit_fold_model, select_top_drivers, stratified_kfold)
from .features import (FeatureVector, PcaModel, SimpleStats, featurize,
                       feature_names, fit_pca, fit_pca_model, haar_dwt,
                       inverse_haar_dwt, simple_features)
from .ingest import (ChangeEvent, DenseTrace, LogParseError, MissingSignalError,
                     Session, densify, interpolate_gps, parse_log)
from .model import (ForestModel, ForestParams, LogisticModel, feature_importance,
                    load_model, predict, predict_batch, predict_logistic,
                    save_model, sensor_importance, train_forest, train_logistic)
from .signals import COLUMNS, SAMPLE_PERIOD_S, SITE_RADIUS_M, Signal
from .simgen import (DriverStyle, FleetConfig, InfeasibleRouteError, RouteLeg,
                     RouteSpec, default_route, gen_fleet, ground_truth_turns,
                     make_styles, simulate_session, write_log)
from .turndetect import (RawSegment, TurnEvent, TurnSite, cluster_turn_sites,
                         detect_turns, extract_after_segment, extract_segment)

__version__ = "0.1.0"
