//! End-to-end orchestration over a persistent run directory.
//!
//! The run directory is the only interface between stages: ingest persists
//! epoch corpora, analysis lanes persist per-epoch artifacts, and the later
//! stages (drift, field, report) consume only what earlier stages wrote.
//! Lanes (period x level) run in parallel and fail independently. With the
//! same config and dataset, rerunning any stage rewrites byte-identical
//! artifacts; wall-clock timestamps live only in `run_info.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{
    filter_timestamped, load_catalog, partition_epochs, vocabulary, ArtworkRecord, EpochCorpus,
    IndexLevel, TermNormalizer,
};
use crate::clusterer::{
    cluster_codebook, cluster_composition, hca_codebook, write_assignment_csv,
    write_composition_csv, write_dendrogram,
};
use crate::config::{derive_seed, AnchorStrategy, InitStrategy, PeriodConfig, RunConfig};
use crate::cooccur::{build_graph, term_matrix, write_graph, write_matrix, TermMatrix};
use crate::driftlog::{
    anchored_coordinates, build_drift_log, distance_matrices, write_drift_log_csv,
    write_drift_log_text, AnchoredCoordinates, DriftLog,
};
use crate::error::{Error, Result};
use crate::esom::{
    best_matching_units, pca_initialize, random_initialize, read_codebook, train, umatrix,
    write_codebook, BmuMap, Codebook, GridCoord, GridSpec,
};
use crate::mechanics::{
    epoch_series, write_field_csv, write_surface_csv, write_term_matrix_csv, EpochInputs,
    MassTable,
};
use crate::report::{
    assemble_report, render_heatmap, topical_histogram, write_histogram_csv, HeatmapOptions,
    ReportBundle, RunInfo,
};
use crate::termgraph::{
    pagerank, ranked_terms, reciprocal_rank_fusion, write_scores_csv, PageRankScores,
};

pub const CONFIG_ECHO: &str = "config.toml";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const STATS_JSON: &str = "stats.json";
pub const STATS_TEXT: &str = "stats.txt";

const GRAPH_FILE: &str = "graph.txt";
const VECTORS_FILE: &str = "vectors.dftm";
const CODEBOOK_FILE: &str = "codebook.dfcb";
const BMUS_FILE: &str = "bmus.json";
const UMATRIX_CSV: &str = "umatrix.csv";
const UMATRIX_PNG: &str = "umatrix.png";
const CLUSTERS_FILE: &str = "clusters.csv";
const COMPOSITION_FILE: &str = "composition.csv";
const DENDROGRAM_FILE: &str = "dendrogram.txt";
const DISTANCES_FILE: &str = "distances.csv";
const FORCE_FILE: &str = "force.csv";
const POTENTIAL_FILE: &str = "potential.csv";
const SURFACE_CSV: &str = "surface.csv";
const SURFACE_PNG: &str = "surface.png";
const FIELD_FILE: &str = "field.csv";
const HISTOGRAM_FILE: &str = "histogram.csv";

const PAGERANK_CSV: &str = "pagerank.csv";
const PAGERANK_JSON: &str = "pagerank.json";
const DRIFT_TEXT: &str = "drift_log.txt";
const DRIFT_CSV: &str = "drift_log.csv";
const ANCHOR_FILE: &str = "anchor.json";
const ANCHORED_FILE: &str = "anchored.csv";
const EPSILON_FILE: &str = "epsilon.csv";

const EPOCH_ARTIFACTS: [&str; 16] = [
    GRAPH_FILE,
    VECTORS_FILE,
    CODEBOOK_FILE,
    BMUS_FILE,
    UMATRIX_CSV,
    UMATRIX_PNG,
    CLUSTERS_FILE,
    COMPOSITION_FILE,
    DENDROGRAM_FILE,
    DISTANCES_FILE,
    FORCE_FILE,
    POTENTIAL_FILE,
    SURFACE_CSV,
    SURFACE_PNG,
    FIELD_FILE,
    HISTOGRAM_FILE,
];

const LANE_ARTIFACTS: [&str; 7] = [
    PAGERANK_CSV,
    PAGERANK_JSON,
    DRIFT_TEXT,
    DRIFT_CSV,
    ANCHOR_FILE,
    ANCHORED_FILE,
    EPSILON_FILE,
];

/// Path schema of a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ingest_dir(&self) -> PathBuf {
        self.root.join("ingest")
    }

    pub fn period_dir(&self, period: &str) -> PathBuf {
        self.ingest_dir().join(period)
    }

    pub fn epoch_corpus(&self, period: &str, epoch: usize) -> PathBuf {
        self.period_dir(period).join(format!("epoch_{epoch:02}.jsonl"))
    }

    pub fn lane_dir(&self, lane: &str) -> PathBuf {
        self.root.join("lanes").join(lane)
    }

    pub fn epoch_dir(&self, lane: &str, epoch: usize) -> PathBuf {
        self.lane_dir(lane).join(format!("epoch_{epoch:02}"))
    }
}

/// Directory name of one (period, level) lane.
pub fn lane_label(period: &PeriodConfig, level: IndexLevel) -> String {
    format!("{}-{}", period.label(), level.label())
}

/// One (period, level) work unit.
#[derive(Debug, Clone)]
pub struct LaneContext {
    pub lane: String,
    pub period: PeriodConfig,
    pub level: IndexLevel,
    pub grid: GridSpec,
}

/// All lanes of a config, period-major.
pub fn lane_contexts(config: &RunConfig) -> Result<Vec<LaneContext>> {
    let mut lanes = Vec::new();
    for period in &config.periods {
        for &level in &config.levels {
            lanes.push(LaneContext {
                lane: lane_label(period, level),
                period: *period,
                level,
                grid: config.grids.spec_for(level)?,
            });
        }
    }
    Ok(lanes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelVocab {
    pub level: IndexLevel,
    pub unique_terms: usize,
    pub persistent_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodIngest {
    pub label: String,
    pub records: usize,
    pub per_epoch: Vec<usize>,
    pub levels: Vec<LevelVocab>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// Parseable records in the raw catalog (after dedup).
    pub parsed: usize,
    pub skipped: usize,
    /// Records carrying an acquisition year.
    pub timestamped: usize,
    pub periods: Vec<PeriodIngest>,
}

impl IngestSummary {
    /// Records falling inside any configured period.
    pub fn combined_period_records(&self) -> usize {
        self.periods.iter().map(|p| p.records).sum()
    }
}

/// Loads the raw catalog, slices it into per-period epochs, and persists one
/// JSONL file per epoch plus vocabulary statistics. Idempotent: reruns
/// rewrite identical bytes.
pub fn run_ingest(config: &RunConfig) -> Result<IngestSummary> {
    config.validate()?;
    let paths = RunPaths::new(&config.output_dir);
    let normalizer = TermNormalizer::default();
    let (records, load_stats) =
        load_catalog(&config.dataset.source, config.dataset.format, &normalizer)?;
    let timestamped = filter_timestamped(records);

    let mut periods = Vec::new();
    for period in &config.periods {
        let spec = period.epoch_spec()?;
        let epochs = partition_epochs(&timestamped, &spec)?;
        let dir = paths.period_dir(&period.label());
        fs::create_dir_all(&dir).map_err(|e| Error::io(dir.clone(), e))?;
        for epoch in &epochs {
            let path = paths.epoch_corpus(&period.label(), epoch.epoch_index);
            write_to(&path, |w| {
                for record in &epoch.records {
                    let line = serde_json::to_string(record)
                        .map_err(|e| Error::Format(format!("encoding record: {e}")))?;
                    writeln!(w, "{line}").map_err(|e| Error::io(path.clone(), e))?;
                }
                Ok(())
            })?;
        }
        let levels = config
            .levels
            .iter()
            .map(|&level| {
                let stats = vocabulary(&epochs, level)?;
                Ok(LevelVocab {
                    level,
                    unique_terms: stats.unique_terms.len(),
                    persistent_terms: stats.persistent_terms.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        periods.push(PeriodIngest {
            label: period.label(),
            records: epochs.iter().map(|e| e.records.len()).sum(),
            per_epoch: epochs.iter().map(|e| e.records.len()).collect(),
            levels,
        });
    }

    let summary = IngestSummary {
        parsed: load_stats.parsed,
        skipped: load_stats.skipped,
        timestamped: timestamped.len(),
        periods,
    };
    write_json(&paths.ingest_dir().join(STATS_JSON), &summary)?;
    write_to(&paths.ingest_dir().join(STATS_TEXT), |w| {
        write!(w, "{}", format_stats_table(&summary))
            .map_err(|e| Error::io("<stats stream>", e))
    })?;
    Ok(summary)
}

/// The statistics table persisted next to the epoch files.
pub fn format_stats_table(summary: &IngestSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "catalog: {} records parsed, {} skipped, {} timestamped\n",
        summary.parsed, summary.skipped, summary.timestamped
    ));
    out.push_str(&format!(
        "combined period records: {}\n",
        summary.combined_period_records()
    ));
    for period in &summary.periods {
        out.push_str(&format!("period {}: {} records\n", period.label, period.records));
        for (i, count) in period.per_epoch.iter().enumerate() {
            out.push_str(&format!("  epoch {i:02}: {count}\n"));
        }
        for level in &period.levels {
            out.push_str(&format!(
                "  {}: {} unique terms, {} persistent\n",
                level.level, level.unique_terms, level.persistent_terms
            ));
        }
    }
    out
}

/// Reads one period's persisted epoch corpora back from the ingest stage.
pub fn load_period_corpora(paths: &RunPaths, period: &PeriodConfig) -> Result<Vec<EpochCorpus>> {
    let spec = period.epoch_spec()?;
    (0..spec.epoch_count as usize)
        .map(|e| {
            let path = paths.epoch_corpus(&period.label(), e);
            if !path.is_file() {
                return Err(Error::Input(format!(
                    "missing ingest output {}; run the ingest stage first",
                    path.display()
                )));
            }
            let file = File::open(&path).map_err(|err| Error::io(path.clone(), err))?;
            let mut records = Vec::new();
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|err| Error::io(path.clone(), err))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: ArtworkRecord = serde_json::from_str(&line).map_err(|err| {
                    Error::Format(format!("corrupt epoch file {}: {err}", path.display()))
                })?;
                records.push(record);
            }
            Ok(EpochCorpus { epoch_index: e, year_range: spec.year_range(e), records })
        })
        .collect()
}

/// In-memory products of one lane's core analysis, shared by later stages.
pub struct LaneCore {
    pub bmus: Vec<BmuMap>,
    pub codebooks: Vec<Codebook>,
    pub scores: Vec<PageRankScores>,
    pub unique_terms: usize,
}

pub(crate) fn initialize_codebook(
    strategy: InitStrategy,
    matrix: &TermMatrix,
    grid: &GridSpec,
    seed: u64,
) -> Result<Codebook> {
    match strategy {
        InitStrategy::Random => random_initialize(matrix, grid, seed),
        InitStrategy::Pca => match pca_initialize(matrix, grid, seed) {
            Err(Error::Init(_)) => random_initialize(matrix, grid, seed),
            other => other,
        },
    }
}

/// Graph construction, SOM training, BMU assignment, clustering, and
/// PageRank for every epoch of one lane. The vocabulary is the period's
/// persistent terms at this level.
pub fn lane_core(
    config: &RunConfig,
    paths: &RunPaths,
    ctx: &LaneContext,
    corpora: &[EpochCorpus],
) -> Result<LaneCore> {
    let stats = vocabulary(corpora, ctx.level)?;
    let vocab = stats.persistent_terms;
    if vocab.len() < 2 {
        return Err(Error::Input(format!(
            "{} persistent terms at {}; at least 2 are needed to train a map",
            vocab.len(),
            ctx.level
        )));
    }

    let mut bmus_all = Vec::with_capacity(corpora.len());
    let mut codebooks = Vec::with_capacity(corpora.len());
    let mut scores_all = Vec::with_capacity(corpora.len());
    for epoch in corpora {
        let e = epoch.epoch_index;
        let dir = paths.epoch_dir(&ctx.lane, e);
        fs::create_dir_all(&dir).map_err(|err| Error::io(dir.clone(), err))?;

        let graph = build_graph(epoch, ctx.level, &vocab);
        write_to(&dir.join(GRAPH_FILE), |w| write_graph(&graph, w))?;
        let matrix = term_matrix(&graph, config.training.l2_normalize);
        write_to(&dir.join(VECTORS_FILE), |w| write_matrix(&matrix, w))?;

        let epoch_tag = e.to_string();
        let init_seed = derive_seed(config.seed, &[&ctx.lane, "init", &epoch_tag]);
        let train_seed = derive_seed(config.seed, &[&ctx.lane, "train", &epoch_tag]);
        let initial = initialize_codebook(config.training.init, &matrix, &ctx.grid, init_seed)?;
        let schedule = config.training.schedule_for(&ctx.grid, train_seed);
        let codebook = train(&initial, &matrix, &schedule)?;
        write_to(&dir.join(CODEBOOK_FILE), |w| write_codebook(&codebook, w))?;

        let bmus = best_matching_units(&codebook, &matrix)?;
        write_json(&dir.join(BMUS_FILE), &bmus)?;
        let um = umatrix(&codebook);
        write_to(&dir.join(UMATRIX_CSV), |w| write_grid_csv(&um.heights, &ctx.grid, w))?;

        let assignment = cluster_codebook(&codebook, &config.clustering.to_params())?;
        write_to(&dir.join(CLUSTERS_FILE), |w| write_assignment_csv(&assignment, &ctx.grid, w))?;
        let composition = cluster_composition(&assignment, &bmus, &ctx.grid)?;
        write_to(&dir.join(COMPOSITION_FILE), |w| write_composition_csv(&composition, w))?;
        let dendrogram = hca_codebook(&codebook)?;
        write_to(&dir.join(DENDROGRAM_FILE), |w| write_dendrogram(&dendrogram, w))?;

        let scores = pagerank(
            &graph,
            config.pagerank.damping,
            config.pagerank.tolerance,
            config.pagerank.max_iter,
        )?;

        bmus_all.push(bmus);
        codebooks.push(codebook);
        scores_all.push(scores);
    }

    let lane_dir = paths.lane_dir(&ctx.lane);
    write_to(&lane_dir.join(PAGERANK_CSV), |w| write_scores_csv(&scores_all, w))?;
    write_json(&lane_dir.join(PAGERANK_JSON), &scores_all)?;

    Ok(LaneCore {
        bmus: bmus_all,
        codebooks,
        scores: scores_all,
        unique_terms: stats.unique_terms.len(),
    })
}

/// The selected coordinate origin for a lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorChoice {
    pub strategy: AnchorStrategy,
    pub term: String,
    /// Fused RRF scores (importance strategy only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fused_scores: Option<BTreeMap<String, f64>>,
    /// Total wrapped displacement in cells (least-displacement only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_displacement: Option<f64>,
}

/// Persistent term moving the least across the whole period; ties go to the
/// lexicographically first term.
pub fn least_displacement_anchor(bmus: &[BmuMap], spec: &GridSpec) -> Result<(String, f64)> {
    let first = bmus.first().ok_or_else(|| Error::Input("no epochs".into()))?;
    let mut best: Option<(f64, &str)> = None;
    for (i, term) in first.terms.iter().enumerate() {
        let mut total = 0.0;
        for pair in bmus.windows(2) {
            let a = pair[0].coords[i];
            let b = pair[1]
                .coord_of(term)
                .ok_or_else(|| Error::Input(format!("term {term:?} missing from an epoch")))?;
            total += spec.distance(a, b);
        }
        if best.is_none_or(|(d, _)| total < d) {
            best = Some((total, term));
        }
    }
    let (d, term) = best.expect("at least one term");
    Ok((term.to_string(), d))
}

pub struct LaneDrift {
    pub log: DriftLog,
    pub anchor: AnchorChoice,
    pub anchored: AnchoredCoordinates,
}

/// Drift logs, anchor selection, and anchored coordinates for one lane.
pub fn lane_drift(
    config: &RunConfig,
    paths: &RunPaths,
    ctx: &LaneContext,
    bmus: &[BmuMap],
    scores: &[PageRankScores],
) -> Result<LaneDrift> {
    let first = bmus
        .first()
        .ok_or_else(|| Error::Input("drift stage needs at least one epoch".into()))?;
    let terms = first.terms.clone();
    let log = build_drift_log(&ctx.period.label(), ctx.level, bmus, &terms, &ctx.grid)?;
    let lane_dir = paths.lane_dir(&ctx.lane);
    write_to(&lane_dir.join(DRIFT_TEXT), |w| write_drift_log_text(&log, w))?;
    write_to(&lane_dir.join(DRIFT_CSV), |w| write_drift_log_csv(&log, w))?;

    let anchor = match config.anchor.strategy {
        AnchorStrategy::Importance => {
            let ranks: Vec<Vec<String>> = scores.iter().map(ranked_terms).collect();
            let selection = reciprocal_rank_fusion(&ranks, config.fusion.k)?;
            AnchorChoice {
                strategy: AnchorStrategy::Importance,
                term: selection.anchor_term,
                fused_scores: Some(selection.fused_scores),
                total_displacement: None,
            }
        }
        AnchorStrategy::LeastDisplacement => {
            let (term, total) = least_displacement_anchor(bmus, &ctx.grid)?;
            AnchorChoice {
                strategy: AnchorStrategy::LeastDisplacement,
                term,
                fused_scores: None,
                total_displacement: Some(total),
            }
        }
    };
    let anchored = anchored_coordinates(bmus, &anchor.term, &ctx.grid)?;
    write_json(&lane_dir.join(ANCHOR_FILE), &anchor)?;
    write_to(&lane_dir.join(ANCHORED_FILE), |w| write_anchored_csv(&anchored, w))?;
    Ok(LaneDrift { log, anchor, anchored })
}

/// Mechanics outputs for every epoch of one lane: pairwise force and
/// potential, the node potential surface, and its negative-gradient field.
pub fn lane_field(
    config: &RunConfig,
    paths: &RunPaths,
    ctx: &LaneContext,
    bmus: &[BmuMap],
    codebooks: &[Codebook],
    scores: &[PageRankScores],
) -> Result<Vec<f64>> {
    let distances = distance_matrices(bmus, codebooks)?;
    let masses = scores
        .iter()
        .map(MassTable::from_pagerank)
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<EpochInputs> = (0..bmus.len())
        .map(|e| EpochInputs {
            epoch_index: e,
            bmus: &bmus[e],
            masses: &masses[e],
            distances: &distances[e],
            spec: &ctx.grid,
        })
        .collect();
    let series = epoch_series(&inputs, config.mechanics.epsilon.to_policy())?;

    let mut epsilons = Vec::with_capacity(series.len());
    for mech in &series {
        let e = mech.epoch_index;
        let dir = paths.epoch_dir(&ctx.lane, e);
        fs::create_dir_all(&dir).map_err(|err| Error::io(dir.clone(), err))?;
        write_to(&dir.join(DISTANCES_FILE), |w| {
            write_term_matrix_csv(&distances[e].terms, &distances[e].values, w)
        })?;
        write_to(&dir.join(FORCE_FILE), |w| {
            write_term_matrix_csv(&mech.force.terms, &mech.force.values, w)
        })?;
        write_to(&dir.join(POTENTIAL_FILE), |w| {
            write_term_matrix_csv(&mech.potential.terms, &mech.potential.values, w)
        })?;
        write_to(&dir.join(SURFACE_CSV), |w| write_surface_csv(&mech.surface, w))?;
        write_to(&dir.join(FIELD_FILE), |w| write_field_csv(&mech.field, w))?;
        epsilons.push(mech.epsilon);
    }
    write_to(&paths.lane_dir(&ctx.lane).join(EPSILON_FILE), |w| {
        let err = |e: std::io::Error| Error::io("<epsilon stream>", e);
        writeln!(w, "epoch,epsilon").map_err(err)?;
        for (e, eps) in epsilons.iter().enumerate() {
            writeln!(w, "{e},{eps}").map_err(err)?;
        }
        Ok(())
    })?;
    Ok(epsilons)
}

/// Histograms and heatmaps for one lane, rendered from persisted artifacts.
pub fn lane_render(
    paths: &RunPaths,
    ctx: &LaneContext,
    corpora: &[EpochCorpus],
    bmus: &[BmuMap],
) -> Result<()> {
    if corpora.len() != bmus.len() {
        return Err(Error::Input(format!(
            "{} epochs of corpora but {} BMU maps",
            corpora.len(),
            bmus.len()
        )));
    }
    for epoch in corpora {
        let e = epoch.epoch_index;
        let dir = paths.epoch_dir(&ctx.lane, e);
        let histogram = topical_histogram(epoch, ctx.level);
        write_to(&dir.join(HISTOGRAM_FILE), |w| write_histogram_csv(&histogram, w))?;

        let labels: Vec<(GridCoord, String)> = bmus[e]
            .terms
            .iter()
            .cloned()
            .zip(bmus[e].coords.iter().copied())
            .map(|(t, c)| (c, t))
            .collect();
        let opts = HeatmapOptions { labels, ..Default::default() };
        let heights = read_grid_csv(&dir.join(UMATRIX_CSV), &ctx.grid)?;
        render_heatmap(&heights, ctx.grid.width, ctx.grid.height, &opts, &dir.join(UMATRIX_PNG))?;
        let surface = read_grid_csv(&dir.join(SURFACE_CSV), &ctx.grid)?;
        render_heatmap(&surface, ctx.grid.width, ctx.grid.height, &opts, &dir.join(SURFACE_PNG))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneSummary {
    pub lane: String,
    pub period: String,
    pub level: IndexLevel,
    pub epochs: usize,
    pub persistent_terms: usize,
    pub unique_terms: usize,
    pub drift_events: usize,
    /// Mean drift rate over transitions, in percent.
    pub mean_drift_rate: f64,
    pub anchor_term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneOutcome {
    pub lane: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<LaneSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LaneOutcome {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub outcomes: Vec<LaneOutcome>,
    pub manifest_files: usize,
}

impl AnalyzeSummary {
    pub fn failed_lanes(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.is_ok()).count()
    }
}

fn run_full_lane(config: &RunConfig, paths: &RunPaths, ctx: &LaneContext) -> Result<LaneSummary> {
    let corpora = load_period_corpora(paths, &ctx.period)?;
    let core = lane_core(config, paths, ctx, &corpora)?;
    let drift = lane_drift(config, paths, ctx, &core.bmus, &core.scores)?;
    lane_field(config, paths, ctx, &core.bmus, &core.codebooks, &core.scores)?;
    lane_render(paths, ctx, &corpora, &core.bmus)?;
    let transitions = drift.log.rates.len();
    let mean_rate = if transitions == 0 {
        0.0
    } else {
        drift.log.rates.values().sum::<f64>() / transitions as f64
    };
    Ok(LaneSummary {
        lane: ctx.lane.clone(),
        period: ctx.period.label(),
        level: ctx.level,
        epochs: corpora.len(),
        persistent_terms: core.bmus[0].terms.len(),
        unique_terms: core.unique_terms,
        drift_events: drift.log.events.len(),
        mean_drift_rate: mean_rate,
        anchor_term: drift.anchor.term,
    })
}

/// The full analysis: every lane in parallel (train, cluster, drift,
/// mechanics, rendering), then the digest manifest over everything the
/// succeeded lanes produced. A failing lane is reported and skipped; the
/// run errors only when no lane survives.
pub fn run_analyze(config: &RunConfig) -> Result<AnalyzeSummary> {
    config.validate()?;
    let started = unix_now();
    let paths = RunPaths::new(&config.output_dir);
    fs::create_dir_all(paths.root()).map_err(|e| Error::io(paths.root().to_path_buf(), e))?;
    write_to(&paths.root().join(CONFIG_ECHO), |w| {
        write!(w, "{}", config.to_toml()?).map_err(|e| Error::io("<config stream>", e))
    })?;

    let lanes = lane_contexts(config)?;
    let outcomes: Vec<LaneOutcome> = lanes
        .par_iter()
        .map(|ctx| match run_full_lane(config, &paths, ctx) {
            Ok(summary) => {
                LaneOutcome { lane: ctx.lane.clone(), summary: Some(summary), error: None }
            }
            Err(e) => {
                LaneOutcome { lane: ctx.lane.clone(), summary: None, error: Some(e.to_string()) }
            }
        })
        .collect();

    if outcomes.iter().all(|o| !o.is_ok()) {
        let first = outcomes
            .iter()
            .filter_map(|o| o.error.as_deref())
            .next()
            .unwrap_or("no lanes configured");
        return Err(Error::Input(format!("every lane failed; first error: {first}")));
    }
    write_json(&paths.root().join(ANALYSIS_FILE), &outcomes)?;

    let ok_lanes: Vec<&LaneContext> = lanes
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o.is_ok())
        .map(|(ctx, _)| ctx)
        .collect();
    let bundle = finalize_manifest(config, &paths, &ok_lanes, started)?;
    Ok(AnalyzeSummary { outcomes, manifest_files: bundle.entries.len() })
}

/// Per-lane outcome of a standalone stage rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub lane: String,
    pub ok: bool,
    pub detail: String,
}

fn stage_over_lanes(
    config: &RunConfig,
    run: impl Fn(&LaneContext) -> Result<String> + Sync,
) -> Result<Vec<StageOutcome>> {
    config.validate()?;
    let lanes = lane_contexts(config)?;
    Ok(lanes
        .par_iter()
        .map(|ctx| match run(ctx) {
            Ok(detail) => StageOutcome { lane: ctx.lane.clone(), ok: true, detail },
            Err(e) => StageOutcome { lane: ctx.lane.clone(), ok: false, detail: e.to_string() },
        })
        .collect())
}

pub(crate) fn load_lane_bmus(paths: &RunPaths, ctx: &LaneContext) -> Result<Vec<BmuMap>> {
    let epochs = ctx.period.epoch_spec()?.epoch_count as usize;
    (0..epochs)
        .map(|e| read_json(&paths.epoch_dir(&ctx.lane, e).join(BMUS_FILE)))
        .collect()
}

fn load_lane_codebooks(paths: &RunPaths, ctx: &LaneContext) -> Result<Vec<Codebook>> {
    let epochs = ctx.period.epoch_spec()?.epoch_count as usize;
    (0..epochs)
        .map(|e| {
            let path = paths.epoch_dir(&ctx.lane, e).join(CODEBOOK_FILE);
            let file = File::open(&path).map_err(|err| Error::io(path.clone(), err))?;
            read_codebook(BufReader::new(file))
        })
        .collect()
}

fn load_lane_scores(paths: &RunPaths, ctx: &LaneContext) -> Result<Vec<PageRankScores>> {
    read_json(&paths.lane_dir(&ctx.lane).join(PAGERANK_JSON))
}

/// Recomputes drift logs, anchors, and anchored coordinates from persisted
/// BMU maps.
pub fn run_drift(config: &RunConfig) -> Result<Vec<StageOutcome>> {
    let paths = RunPaths::new(&config.output_dir);
    stage_over_lanes(config, |ctx| {
        let bmus = load_lane_bmus(&paths, ctx)?;
        let scores = load_lane_scores(&paths, ctx)?;
        let drift = lane_drift(config, &paths, ctx, &bmus, &scores)?;
        Ok(format!(
            "{} events, mean rate {:.1}%, anchor {}",
            drift.log.events.len(),
            drift.log.rates.values().sum::<f64>() / drift.log.rates.len().max(1) as f64,
            drift.anchor.term
        ))
    })
}

/// Recomputes mechanics outputs from persisted BMU maps, codebooks, and
/// PageRank masses.
pub fn run_field(config: &RunConfig) -> Result<Vec<StageOutcome>> {
    let paths = RunPaths::new(&config.output_dir);
    stage_over_lanes(config, |ctx| {
        let bmus = load_lane_bmus(&paths, ctx)?;
        let codebooks = load_lane_codebooks(&paths, ctx)?;
        let scores = load_lane_scores(&paths, ctx)?;
        let epsilons = lane_field(config, &paths, ctx, &bmus, &codebooks, &scores)?;
        let lo = epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = epsilons.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(format!("{} epochs, epsilon in [{lo:.3e}, {hi:.3e}]", epsilons.len()))
    })
}

/// Re-renders histograms and heatmaps, then rebuilds the manifest over
/// every lane whose artifact set is complete.
pub fn run_report(config: &RunConfig) -> Result<(Vec<StageOutcome>, ReportBundle)> {
    let paths = RunPaths::new(&config.output_dir);
    let started = unix_now();
    let outcomes = stage_over_lanes(config, |ctx| {
        let corpora = load_period_corpora(&paths, &ctx.period)?;
        let bmus = load_lane_bmus(&paths, ctx)?;
        lane_render(&paths, ctx, &corpora, &bmus)?;
        Ok(format!("{} epochs rendered", corpora.len()))
    })?;

    write_to(&paths.root().join(CONFIG_ECHO), |w| {
        write!(w, "{}", config.to_toml()?).map_err(|e| Error::io("<config stream>", e))
    })?;
    let lanes = lane_contexts(config)?;
    let complete: Vec<&LaneContext> = lanes
        .iter()
        .zip(&outcomes)
        .filter(|(ctx, o)| o.ok && lane_files_present(&paths, ctx))
        .map(|(ctx, _)| ctx)
        .collect();
    if complete.is_empty() {
        let first = outcomes
            .iter()
            .filter(|o| !o.ok)
            .map(|o| o.detail.as_str())
            .next()
            .unwrap_or("artifacts missing");
        return Err(Error::MissingArtifact(format!(
            "no lane has a complete artifact set ({first})"
        )));
    }
    let bundle = finalize_manifest(config, &paths, &complete, started)?;
    Ok((outcomes, bundle))
}

fn lane_files_present(paths: &RunPaths, ctx: &LaneContext) -> bool {
    expected_lane_files(ctx)
        .iter()
        .all(|rel| paths.root().join(rel).is_file())
}

fn expected_lane_files(ctx: &LaneContext) -> Vec<String> {
    let epochs = match ctx.period.epoch_spec() {
        Ok(spec) => spec.epoch_count as usize,
        Err(_) => 0,
    };
    let mut files = Vec::new();
    for name in LANE_ARTIFACTS {
        files.push(format!("lanes/{}/{}", ctx.lane, name));
    }
    for e in 0..epochs {
        for name in EPOCH_ARTIFACTS {
            files.push(format!("lanes/{}/epoch_{e:02}/{name}", ctx.lane));
        }
    }
    files
}

fn expected_ingest_files(config: &RunConfig) -> Result<Vec<String>> {
    let mut files = vec![
        format!("ingest/{STATS_JSON}"),
        format!("ingest/{STATS_TEXT}"),
    ];
    for period in &config.periods {
        let spec = period.epoch_spec()?;
        for e in 0..spec.epoch_count as usize {
            files.push(format!("ingest/{}/epoch_{e:02}.jsonl", period.label()));
        }
    }
    Ok(files)
}

/// Digest of the persisted ingest outputs: the dataset identity a run is
/// reproducible against.
pub fn dataset_digest(paths: &RunPaths) -> Result<String> {
    let dir = paths.ingest_dir();
    if !dir.is_dir() {
        return Err(Error::Input(format!(
            "missing ingest directory {}; run the ingest stage first",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(&dir)
        .into_iter()
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.file_type().is_file())
        .map(|entry| entry.into_path())
        .collect();
    files.sort();
    let mut hasher = Sha256::new();
    for path in files {
        let rel = path.strip_prefix(paths.root()).unwrap_or(&path);
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0u8]);
        hasher.update(crate::report::digest_file(&path)?.as_bytes());
        hasher.update([b'\n']);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn finalize_manifest(
    config: &RunConfig,
    paths: &RunPaths,
    lanes: &[&LaneContext],
    started: u64,
) -> Result<ReportBundle> {
    let mut expected = expected_ingest_files(config)?;
    expected.push(CONFIG_ECHO.to_string());
    for ctx in lanes {
        expected.extend(expected_lane_files(ctx));
    }
    let info = RunInfo {
        config_digest: config.digest()?,
        dataset_digest: dataset_digest(paths)?,
        started_unix: started,
        finished_unix: unix_now(),
    };
    assemble_report(paths.root(), &expected, &info)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_anchored_csv(anchored: &AnchoredCoordinates, w: impl std::io::Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(format!("writing anchored csv: {e}"));
    csv.write_record(["epoch", "term", "delta_col", "delta_row"]).map_err(err)?;
    for (epoch, coords) in anchored.per_epoch.iter().enumerate() {
        for (term, (dc, dr)) in coords {
            csv.write_record([
                epoch.to_string(),
                term.clone(),
                dc.to_string(),
                dr.to_string(),
            ])
            .map_err(err)?;
        }
    }
    csv.flush().map_err(|e| Error::io("<csv stream>", e))?;
    Ok(())
}

/// Plain grid CSV: one line per grid row.
fn write_grid_csv(values: &[f64], spec: &GridSpec, mut w: impl std::io::Write) -> Result<()> {
    if values.len() != spec.n_nodes() {
        return Err(Error::Input(format!(
            "{} values for a {}x{} grid",
            values.len(),
            spec.width,
            spec.height
        )));
    }
    let err = |e: std::io::Error| Error::io("<grid stream>", e);
    for r in 0..spec.height {
        let row: Vec<String> = (0..spec.width)
            .map(|c| format!("{}", values[r * spec.width + c]))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(err)?;
    }
    Ok(())
}

fn read_grid_csv(path: &Path, spec: &GridSpec) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    let mut values = Vec::with_capacity(spec.n_nodes());
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path.to_path_buf(), e))?;
        if line.is_empty() {
            continue;
        }
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Format(format!("bad grid value {cell:?} in {}", path.display()))
            })?;
            values.push(v);
        }
    }
    if values.len() != spec.n_nodes() {
        return Err(Error::Format(format!(
            "{} holds {} values, expected {} for a {}x{} grid",
            path.display(),
            values.len(),
            spec.n_nodes(),
            spec.width,
            spec.height
        )));
    }
    Ok(values)
}

fn write_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.to_path_buf(), e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path.to_path_buf(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_to(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)
            .map_err(|e| Error::Format(format!("encoding {}: {e}", path.display())))?;
        writeln!(w).map_err(|e| Error::io(path.to_path_buf(), e))
    })
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Format(format!("decoding {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogFormat;
    use crate::config::DatasetConfig;

    fn record_line(id: usize, year: i32, subjects: &[(&str, &str, &str)]) -> String {
        let paths: Vec<Vec<&str>> = subjects.iter().map(|&(a, b, c)| vec![a, b, c]).collect();
        serde_json::json!({"id": format!("r{id:04}"), "year": year, "subjects": paths})
            .to_string()
    }

    fn synthetic_jsonl(path: &Path, years: std::ops::RangeInclusive<i32>, per_year: usize) {
        let mut lines = Vec::new();
        let groups = [
            ("nature", "animals", "bird"),
            ("nature", "plants", "tree"),
            ("people", "adults", "man"),
            ("people", "adults", "woman"),
            ("objects", "tools", "hammer"),
            ("places", "city", "street"),
        ];
        let mut i = 0usize;
        for year in years {
            for _ in 0..per_year {
                // Two subject paths per record, cycling through the groups.
                let a = groups[i % groups.len()];
                let b = groups[(i / 2 + 1) % groups.len()];
                lines.push(record_line(i, year, &[a, b]));
                i += 1;
            }
        }
        fs::write(path, lines.join("\n")).unwrap();
    }

    fn small_config(dir: &Path) -> RunConfig {
        let mut config = RunConfig::default();
        config.dataset = DatasetConfig {
            source: dir.join("catalog.jsonl"),
            format: CatalogFormat::GenericJsonl,
        };
        config.periods = vec![PeriodConfig {
            start: 1800,
            end: 1811,
            epoch_length_years: 4,
            epoch_count: 3,
        }];
        config.levels = vec![IndexLevel::Level1];
        config.grids.level1 = crate::config::GridSize { width: 5, height: 4 };
        config.training.epochs = 3;
        config.output_dir = dir.join("run");
        config.seed = 7;
        config
    }

    fn setup(dir: &Path) -> RunConfig {
        let config = small_config(dir);
        synthetic_jsonl(&config.dataset.source, 1800..=1811, 6);
        config
    }

    #[test]
    fn ingest_writes_epoch_files_and_stats() {
        let tmp = tempfile::tempdir().unwrap();
        let config = setup(tmp.path());
        let summary = run_ingest(&config).unwrap();
        assert_eq!(summary.parsed, 72);
        assert_eq!(summary.timestamped, 72);
        assert_eq!(summary.periods.len(), 1);
        assert_eq!(summary.periods[0].records, 72);
        assert_eq!(summary.periods[0].per_epoch, vec![24, 24, 24]);

        let paths = RunPaths::new(&config.output_dir);
        for e in 0..3 {
            assert!(paths.epoch_corpus("1800-1811", e).is_file());
        }
        assert!(paths.ingest_dir().join(STATS_JSON).is_file());
        let table = fs::read_to_string(paths.ingest_dir().join(STATS_TEXT)).unwrap();
        assert!(table.contains("period 1800-1811: 72 records"), "{table}");

        // Idempotent: rerun leaves identical bytes.
        let before = dataset_digest(&paths).unwrap();
        run_ingest(&config).unwrap();
        assert_eq!(dataset_digest(&paths).unwrap(), before);
    }

    #[test]
    fn corpora_round_trip_through_ingest() {
        let tmp = tempfile::tempdir().unwrap();
        let config = setup(tmp.path());
        run_ingest(&config).unwrap();
        let paths = RunPaths::new(&config.output_dir);
        let corpora = load_period_corpora(&paths, &config.periods[0]).unwrap();
        assert_eq!(corpora.len(), 3);
        assert_eq!(corpora[1].epoch_index, 1);
        assert_eq!(corpora[1].year_range, (1804, 1807));
        assert_eq!(corpora.iter().map(|c| c.records.len()).sum::<usize>(), 72);
    }

    #[test]
    fn analyze_requires_persisted_ingest() {
        let tmp = tempfile::tempdir().unwrap();
        let config = setup(tmp.path());
        let err = run_analyze(&config).unwrap_err().to_string();
        assert!(err.contains("ingest"), "{err}");
    }

    #[test]
    fn analyze_writes_every_expected_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let config = setup(tmp.path());
        run_ingest(&config).unwrap();
        let summary = run_analyze(&config).unwrap();
        assert_eq!(summary.failed_lanes(), 0);
        assert_eq!(summary.outcomes.len(), 1);
        let lane_summary = summary.outcomes[0].summary.as_ref().unwrap();
        assert_eq!(lane_summary.epochs, 3);
        assert_eq!(lane_summary.persistent_terms, 4);
        assert!(!lane_summary.anchor_term.is_empty());

        let paths = RunPaths::new(&config.output_dir);
        let ctx = &lane_contexts(&config).unwrap()[0];
        for rel in expected_lane_files(ctx) {
            assert!(paths.root().join(&rel).is_file(), "missing {rel}");
        }
        let manifest = fs::read_to_string(paths.root().join("manifest.txt")).unwrap();
        assert_eq!(manifest.lines().count(), summary.manifest_files);
        assert!(paths.root().join(ANALYSIS_FILE).is_file());
        assert!(paths.root().join("run_info.json").is_file());
    }

    #[test]
    fn rerun_with_same_seed_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let config = setup(tmp.path());
        run_ingest(&config).unwrap();
        run_analyze(&config).unwrap();
        let paths = RunPaths::new(&config.output_dir);
        let manifest_path = paths.root().join("manifest.txt");
        let first = fs::read_to_string(&manifest_path).unwrap();
        run_analyze(&config).unwrap();
        let second = fs::read_to_string(&manifest_path).unwrap();
        assert_eq!(first, second);

        let mut reseeded = config.clone();
        reseeded.seed = 8;
        run_analyze(&reseeded).unwrap();
        let third = fs::read_to_string(&manifest_path).unwrap();
        assert_ne!(first, third);
    }

    #[test]
    fn drift_and_field_stages_rerun_from_disk() {
        let tmp = tempfile::tempdir().unwrap();
        let config = setup(tmp.path());
        run_ingest(&config).unwrap();
        run_analyze(&config).unwrap();

        let paths = RunPaths::new(&config.output_dir);
        let lane = &lane_contexts(&config).unwrap()[0];
        let drift_path = paths.lane_dir(&lane.lane).join(DRIFT_CSV);
        let field_path = paths.epoch_dir(&lane.lane, 0).join(FIELD_FILE);
        let drift_before = fs::read_to_string(&drift_path).unwrap();
        let field_before = fs::read_to_string(&field_path).unwrap();
        fs::remove_file(&drift_path).unwrap();
        fs::remove_file(&field_path).unwrap();

        let drift_outcomes = run_drift(&config).unwrap();
        assert!(drift_outcomes.iter().all(|o| o.ok), "{drift_outcomes:?}");
        let field_outcomes = run_field(&config).unwrap();
        assert!(field_outcomes.iter().all(|o| o.ok), "{field_outcomes:?}");
        assert_eq!(fs::read_to_string(&drift_path).unwrap(), drift_before);
        assert_eq!(fs::read_to_string(&field_path).unwrap(), field_before);
    }

    #[test]
    fn report_stage_rebuilds_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let config = setup(tmp.path());
        run_ingest(&config).unwrap();
        run_analyze(&config).unwrap();
        let paths = RunPaths::new(&config.output_dir);
        let manifest_path = paths.root().join("manifest.txt");
        let before = fs::read_to_string(&manifest_path).unwrap();
        fs::remove_file(&manifest_path).unwrap();
        let (outcomes, bundle) = run_report(&config).unwrap();
        assert!(outcomes.iter().all(|o| o.ok));
        assert!(!bundle.entries.is_empty());
        assert_eq!(fs::read_to_string(&manifest_path).unwrap(), before);
    }

    #[test]
    fn failing_lane_is_isolated() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = setup(tmp.path());
        // Swap one level3 term in the last epoch so level3 persistence
        // collapses to a single term while level1 keeps both of its terms.
        let lines: Vec<String> = (0..18)
            .map(|i| {
                let year = 1800 + (i as i32 / 6) * 4;
                let l3 = if year >= 1808 { "woman" } else { "man" };
                record_line(
                    i,
                    year,
                    &[("nature", "animals", "bird"), ("people", "adults", l3)],
                )
            })
            .collect();
        fs::write(&config.dataset.source, lines.join("\n")).unwrap();
        config.levels = vec![IndexLevel::Level1, IndexLevel::Level3];
        config.grids.level3 = crate::config::GridSize { width: 5, height: 4 };

        run_ingest(&config).unwrap();
        let summary = run_analyze(&config).unwrap();
        assert_eq!(summary.outcomes.len(), 2);
        assert_eq!(summary.failed_lanes(), 1);
        let failed = summary.outcomes.iter().find(|o| !o.is_ok()).unwrap();
        assert!(failed.lane.ends_with("level3"), "{failed:?}");
        assert!(failed.error.as_ref().unwrap().contains("persistent terms"));
        // The surviving lane is fully manifested.
        let paths = RunPaths::new(&config.output_dir);
        let manifest = fs::read_to_string(paths.root().join("manifest.txt")).unwrap();
        assert!(manifest.contains("level1"));
        assert!(!manifest.contains("level3"));
    }

    #[test]
    fn least_displacement_anchor_prefers_stationary_terms() {
        let spec = GridSpec::toroid(6, 4).unwrap();
        let map = |coords: Vec<(usize, usize)>| BmuMap {
            terms: vec!["a".into(), "b".into()],
            coords: coords.into_iter().map(|(c, r)| GridCoord::new(c, r)).collect(),
            quantization_error: 0.0,
        };
        let bmus = vec![
            map(vec![(0, 0), (1, 1)]),
            map(vec![(0, 0), (3, 1)]),
            map(vec![(0, 0), (3, 2)]),
        ];
        let (term, total) = least_displacement_anchor(&bmus, &spec).unwrap();
        assert_eq!(term, "a");
        assert_eq!(total, 0.0);
    }

    #[test]
    fn grid_csv_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = GridSpec::toroid(3, 2).unwrap();
        let values = vec![0.0, 1.5, -2.25, 3.0, 0.125, 9.0];
        let path = tmp.path().join("grid.csv");
        write_to(&path, |w| write_grid_csv(&values, &spec, w)).unwrap();
        assert_eq!(read_grid_csv(&path, &spec).unwrap(), values);
        let wrong = GridSpec::toroid(2, 2).unwrap();
        assert!(read_grid_csv(&path, &wrong).is_err());
    }
}
