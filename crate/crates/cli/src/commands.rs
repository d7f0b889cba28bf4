use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use camlink::clustering::{write_trace_jsonl, ClusterSummary};
use camlink::fingerprint::{load_fingerprint, save_fingerprint, CameraFingerprint};
use camlink::identity::{account_fingerprints, decide_pairs, MatchDecision, Scheme, SchemeConfig, ScoreMatrix};
use camlink::imaging::{ingest, load_image, PixelGrid};
use camlink::metrics::{
    clustering_report, labeled_scores, mean_average_precision, roc_points, MetricsReport, Partition,
    RepostTally,
};
use camlink::clustering::prepare_samples;
use camlink::synth::{write_dataset, DatasetManifest};
use camlink::Error;

use crate::config::{Crop, Settings, DEFAULT_CROP};
use crate::{Cli, Command};

/// A failed command and the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl CliError {
    /// Bad configuration or unusable input: exit code 2.
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }

    fn context(mut self, msg: impl std::fmt::Display) -> Self {
        self.error = self.error.context(msg.to_string());
        self
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Library errors already embed their source; skip causes repeated verbatim.
        let mut shown = String::new();
        for cause in self.error.chain() {
            let text = cause.to_string();
            if shown.contains(&text) {
                continue;
            }
            if !shown.is_empty() {
                shown.push_str(": ");
            }
            shown.push_str(&text);
        }
        f.write_str(&shown)
    }
}

impl From<crate::ConfigError> for CliError {
    fn from(e: crate::ConfigError) -> Self {
        Self::input(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::EmptyGroup | Error::UndefinedCorrelation | Error::DimensionMismatch { .. } => 1,
            _ => 2,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::runtime(e).context(path.display()))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::runtime(e).context(path.display()))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'static str,
    argv: &'a [String],
    /// Effective settings with defaults filled in; valid as a `--config` file.
    settings: &'a Settings,
    outputs: Vec<String>,
    elapsed_secs: f64,
}

/// Runs one parsed command line. `argv` is stored in the run record.
pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let file = match &cli.common.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let settings = file
        .overlaid(&cli.common.settings())
        .overlaid(&cli.command.settings());
    let out = settings
        .out
        .clone()
        .ok_or_else(|| CliError::input(anyhow::anyhow!("--out is required")))?;

    let work = || -> CliResult<(Settings, Vec<String>)> {
        match &cli.command {
            Command::Synth(_) => synth(&settings, &out),
            Command::Extract(a) => extract(&settings, &out, a.keep_going),
            Command::Match(_) => match_accounts(&settings, &out),
            Command::Eval(_) => eval(&settings, &out),
        }
    };
    let (resolved, outputs) = match settings.workers {
        Some(0) => return Err(CliError::input(anyhow::anyhow!("--workers must be >= 1"))),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::runtime)?
            .install(work)?,
        None => work()?,
    };

    let record = RunRecord {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        argv,
        settings: &resolved,
        outputs,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    write_file(&out.join("run.json"), json(&record))?;
    Ok(())
}

fn synth(settings: &Settings, out: &Path) -> CliResult<(Settings, Vec<String>)> {
    let params = settings.protocol_params()?;
    let manifest = params.build()?;
    info!("{}: {} accounts", manifest.protocol, manifest.accounts.len());
    create_dir(out)?;
    write_dataset(&manifest, out)?;
    let stats = manifest.pair_stats();
    info!(
        "{} positive, {} negative, {} excluded pairs",
        stats.positives, stats.negatives, stats.excluded
    );
    let mut resolved = settings.clone();
    resolved.seed = Some(settings.seed());
    resolved.protocol = Some(manifest.protocol.clone());
    let sensor = params.sensor();
    resolved.width = Some(sensor.width);
    resolved.height = Some(sensor.height);
    resolved.sigma_k = Some(sensor.sigma_k);
    resolved.sigma_eta = Some(sensor.sigma_eta);
    match &params {
        camlink::synth::ProtocolParams::Offline(p) => {
            resolved.cameras = Some(p.n_cameras);
            resolved.images_per_camera = Some(p.images_per_camera);
            resolved.reposts = Some(p.reposts_per_account);
        }
        camlink::synth::ProtocolParams::Online(p) => {
            resolved.individuals = Some(p.n_individuals);
            resolved.album_min = Some(p.album_min);
            resolved.album_max = Some(p.album_max);
            resolved.reposts = Some(p.reposts_per_account);
        }
    }
    Ok((resolved, vec!["manifest.json".into()]))
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "pgm", "ppm", "pnm", "tif", "tiff", "bmp"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let read = fs::read_dir(dir).map_err(|e| CliError::input(e).context(dir.display()))?;
    let mut paths = Vec::new();
    for entry in read {
        paths.push(entry.map_err(|e| CliError::input(e).context(dir.display()))?.path());
    }
    paths.sort();
    Ok(paths)
}

#[derive(Debug)]
struct AccountInput {
    id: String,
    files: Vec<PathBuf>,
}

/// Accounts of a dataset directory, plus its manifest when present.
fn discover(root: &Path) -> CliResult<(Vec<AccountInput>, Option<DatasetManifest>)> {
    let manifest_path = root.join("manifest.json");
    if manifest_path.is_file() {
        let manifest = DatasetManifest::load(&manifest_path)?;
        let accounts = manifest
            .accounts
            .iter()
            .map(|a| AccountInput {
                id: a.account_id.clone(),
                files: a.images.iter().map(|i| root.join(&i.file)).collect(),
            })
            .collect();
        return Ok((accounts, Some(manifest)));
    }
    let entries = sorted_entries(root)?;
    let mut accounts = Vec::new();
    for dir in entries.iter().filter(|p| p.is_dir()) {
        let files: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| is_image(p)).collect();
        if !files.is_empty() {
            let id = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            accounts.push(AccountInput { id, files });
        }
    }
    if accounts.is_empty() {
        let files: Vec<PathBuf> = entries.into_iter().filter(|p| is_image(p)).collect();
        if !files.is_empty() {
            let name = root
                .canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "account".into());
            accounts.push(AccountInput { id: name, files });
        }
    }
    if accounts.is_empty() {
        return Err(CliError::input(anyhow::anyhow!("no images found under {}", root.display())));
    }
    Ok((accounts, None))
}

#[derive(Debug, Serialize)]
struct AccountRecord {
    account: String,
    images: usize,
    fingerprints: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    kept_images: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn fingerprint_file(index: usize) -> String {
    format!("fp_{index:03}.ucif")
}

/// Clears stale outputs from an account directory of a previous run.
fn reset_account_dir(dir: &Path) -> CliResult<()> {
    if dir.is_dir() {
        for path in sorted_entries(dir)? {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let ours = name.ends_with(".ucif") || name == "clusters.json" || name == "trace.jsonl";
            if ours {
                fs::remove_file(&path).map_err(|e| CliError::runtime(e).context(path.display()))?;
            }
        }
    }
    create_dir(dir)
}

fn load_account(files: &[PathBuf], crop: Crop) -> CliResult<Vec<PixelGrid>> {
    files
        .iter()
        .map(|f| {
            load_image(f)
                .and_then(|raster| ingest(&raster, (crop.width, crop.height)))
                .map_err(|e| CliError::from(e).context(f.display()))
        })
        .collect()
}

fn process_account(
    account: &AccountInput,
    schemes: &[Scheme],
    cfg: &SchemeConfig,
    crop: Crop,
    out: &Path,
) -> CliResult<Vec<AccountRecord>> {
    let images = load_account(&account.files, crop)?;
    if images.len() < 2 {
        return Err(Error::NotEnoughImages(images.len()).into());
    }
    let samples = prepare_samples(&images, &cfg.denoiser)?;
    drop(images);
    let mut records = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let (fingerprints, cluster) = account_fingerprints(&samples, scheme, cfg)?;
        let dir = out.join(scheme.as_str()).join(&account.id);
        reset_account_dir(&dir)?;
        for (i, fp) in fingerprints.iter().enumerate() {
            save_fingerprint(fp, dir.join(fingerprint_file(i)))?;
        }
        let mut kept_images = None;
        if let Some(result) = &cluster {
            write_file(&dir.join("clusters.json"), json(&result.summary()))?;
            let mut trace = Vec::new();
            write_trace_jsonl(&result.trace, &mut trace).map_err(CliError::runtime)?;
            write_file(&dir.join("trace.jsonl"), trace)?;
            kept_images = Some(result.kept_members().len());
        }
        records.push(AccountRecord {
            account: account.id.clone(),
            images: samples.len(),
            fingerprints: fingerprints.len(),
            kept_images,
            error: None,
        });
    }
    Ok(records)
}

fn extract(settings: &Settings, out: &Path, keep_going: bool) -> CliResult<(Settings, Vec<String>)> {
    let root = settings
        .dataset
        .clone()
        .ok_or_else(|| CliError::input(anyhow::anyhow!("--dataset is required")))?;
    let schemes = settings.schemes()?;
    let (accounts, manifest) = discover(&root)?;
    // A generated dataset already has one image size; use it unless told otherwise.
    let crop = match (settings.crop()?, &manifest) {
        (Some(c), _) => c,
        (None, Some(m)) => {
            let s = m.params.sensor();
            Crop {
                width: s.width,
                height: s.height,
            }
        }
        (None, None) => DEFAULT_CROP,
    };
    let cfg = settings.scheme_config(crop)?;
    info!(
        "{} accounts, schemes {:?}, crop {crop}",
        accounts.len(),
        schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>()
    );
    for s in &schemes {
        create_dir(&out.join(s.as_str()))?;
    }

    let results: Vec<CliResult<Vec<AccountRecord>>> = accounts
        .par_iter()
        .map(|a| process_account(a, &schemes, &cfg, crop, out).map_err(|e| e.context(format!("account {}", a.id))))
        .collect();

    let mut per_scheme: Vec<Vec<AccountRecord>> = schemes.iter().map(|_| Vec::new()).collect();
    for (account, result) in accounts.iter().zip(results) {
        match result {
            Ok(records) => {
                for (k, r) in records.into_iter().enumerate() {
                    per_scheme[k].push(r);
                }
            }
            Err(e) if keep_going => {
                warn!("{e}");
                for (k, s) in schemes.iter().enumerate() {
                    reset_account_dir(&out.join(s.as_str()).join(&account.id))?;
                    per_scheme[k].push(AccountRecord {
                        account: account.id.clone(),
                        images: account.files.len(),
                        fingerprints: 0,
                        kept_images: None,
                        error: Some(e.to_string()),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }

    let mut outputs = Vec::new();
    for (s, records) in schemes.iter().zip(&per_scheme) {
        let name = format!("{}/accounts.json", s.as_str());
        write_file(&out.join(&name), json(records))?;
        outputs.push(name);
    }

    let mut resolved = settings.clone();
    resolved.scheme = Some(schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","));
    resolved.crop = Some(crop.to_string());
    resolved.alpha = Some(cfg.cluster.alpha);
    resolved.beta = Some(cfg.cluster.beta);
    resolved.lambda = Some(cfg.cluster.lambda);
    resolved.gamma = Some(cfg.gamma);
    resolved.wavelet_levels = Some(cfg.denoiser.wavelet_levels);
    resolved.noise_variance = Some(cfg.denoiser.noise_variance);
    resolved.window_sizes = Some(cfg.denoiser.window_sizes.clone());
    Ok((resolved, outputs))
}

/// Accounts of a fingerprint store: one subdirectory each, `fp_*.ucif` inside.
pub fn load_store(dir: &Path) -> CliResult<Vec<(String, Vec<CameraFingerprint>)>> {
    let mut accounts = Vec::new();
    for sub in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let id = sub.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let fingerprints = sorted_entries(&sub)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "ucif"))
            .map(|p| load_fingerprint(&p).map_err(|e| CliError::from(e).context(p.display())))
            .collect::<CliResult<Vec<_>>>()?;
        accounts.push((id, fingerprints));
    }
    if accounts.is_empty() {
        return Err(CliError::input(anyhow::anyhow!("no accounts in {}", dir.display())));
    }
    Ok(accounts)
}

#[derive(Debug, Serialize)]
struct Decisions {
    tau: f64,
    pairs: Vec<MatchDecision>,
}

fn match_accounts(settings: &Settings, out: &Path) -> CliResult<(Settings, Vec<String>)> {
    let store = settings
        .fingerprints
        .clone()
        .ok_or_else(|| CliError::input(anyhow::anyhow!("--fingerprints is required")))?;
    let tau = settings.tau()?;
    let accounts = load_store(&store)?;
    let matrix = ScoreMatrix::from_fingerprint_sets(&accounts)?;
    let decisions = Decisions {
        tau,
        pairs: decide_pairs(&matrix, tau),
    };
    info!("{} accounts, {} linked pairs at tau {tau}", matrix.len(), decisions.pairs.len());
    create_dir(out)?;
    write_file(&out.join("scores.csv"), matrix.to_csv_string()?)?;
    write_file(&out.join("scores.json"), matrix.to_json()?)?;
    write_file(&out.join("decisions.json"), json(&decisions))?;
    let mut resolved = settings.clone();
    resolved.tau = Some(tau);
    Ok((
        resolved,
        vec!["scores.csv".into(), "scores.json".into(), "decisions.json".into()],
    ))
}

fn read_scores(path: &Path) -> CliResult<ScoreMatrix> {
    let bytes = fs::read(path).map_err(|e| CliError::input(e).context(path.display()))?;
    let matrix = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        ScoreMatrix::from_csv_slice(&bytes)
    } else {
        ScoreMatrix::from_json_slice(&bytes)
    };
    matrix.map_err(|e| CliError::from(e).context(path.display()))
}

fn eval(settings: &Settings, out: &Path) -> CliResult<(Settings, Vec<String>)> {
    let dataset = settings
        .dataset
        .clone()
        .ok_or_else(|| CliError::input(anyhow::anyhow!("--dataset is required")))?;
    let scores = settings
        .scores
        .clone()
        .ok_or_else(|| CliError::input(anyhow::anyhow!("--scores is required")))?;
    let manifest_path = if dataset.is_dir() {
        dataset.join("manifest.json")
    } else {
        dataset.clone()
    };
    let manifest = DatasetManifest::load(&manifest_path)?;
    let matrix = read_scores(&scores)?;
    for id in matrix.ids() {
        if manifest.account(id).is_none() {
            return Err(Error::UnknownAccount(id.clone()).into());
        }
    }

    let labels = manifest.pair_labels();
    let map = match mean_average_precision(&matrix, &labels) {
        Ok(r) => Some(r),
        Err(Error::EmptyEvaluation) => None,
        Err(e) => return Err(e.into()),
    };
    let scored = labeled_scores(&matrix, &labels)?;
    let positives = scored.iter().filter(|s| s.1).count();
    let missing_scores = scored.iter().filter(|s| s.0.is_none()).count();
    create_dir(out)?;
    let mut outputs = vec!["metrics.json".to_string()];
    let auc = match roc_points(&scored) {
        Ok(curve) => {
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            write_file(&out.join("roc.csv"), buf)?;
            outputs.push("roc.csv".into());
            Some(curve.auc)
        }
        Err(Error::DegenerateRoc) => {
            warn!("ROC undefined: scored pairs are all of one class");
            None
        }
        Err(e) => return Err(e.into()),
    };

    let (clustering, reposts) = match &settings.fingerprints {
        Some(dir) => cluster_metrics(&manifest, dir)?,
        None => (None, None),
    };
    let report = MetricsReport {
        map,
        auc,
        positives,
        negatives: scored.len() - positives,
        missing_scores,
        clustering,
        reposts,
        repost_ratios: reposts.map(|t| t.ratios()),
    };
    write_file(&out.join("metrics.json"), json(&report))?;
    Ok((settings.clone(), outputs))
}

fn cluster_metrics(
    manifest: &DatasetManifest,
    dir: &Path,
) -> CliResult<(Option<camlink::metrics::ClusteringReport>, Option<RepostTally>)> {
    let mut partitions = Vec::new();
    let mut tally = RepostTally::default();
    for account in &manifest.accounts {
        let path = dir.join(&account.account_id).join("clusters.json");
        if !path.is_file() {
            continue;
        }
        let bytes = fs::read(&path).map_err(|e| CliError::input(e).context(path.display()))?;
        let summary = ClusterSummary::from_json_slice(&bytes).map_err(|e| CliError::from(e).context(path.display()))?;
        if summary.image_count != account.images.len() {
            return Err(CliError::input(anyhow::anyhow!(
                "{}: {} images clustered but the manifest lists {}",
                path.display(),
                summary.image_count,
                account.images.len()
            )));
        }
        tally += RepostTally::from_kept(&summary.kept_members(), &account.repost_flags());
        partitions.push((Partition::from_summary(&summary), account.camera_labels()));
    }
    if partitions.is_empty() {
        return Ok((None, None));
    }
    let report = match clustering_report(&partitions) {
        Ok(r) => Some(r),
        Err(Error::EmptyEvaluation) => None,
        Err(e) => return Err(e.into()),
    };
    Ok((report, Some(tally)))
}
