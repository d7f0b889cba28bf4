use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Component, Path};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{capture, derive_seed, make_camera, SyntheticCamera};
use crate::error::{Error, Result};
use crate::imaging::{save_gray_png, PixelGrid};
use crate::metrics::{PairLabel, PairLabels};

/// Capture settings shared by every camera of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorParams {
    pub width: usize,
    pub height: usize,
    pub sigma_k: f64,
    pub sigma_eta: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            sigma_k: 0.05,
            sigma_eta: 2.0,
        }
    }
}

impl SensorParams {
    fn validate(&self) -> Result<()> {
        if self.width < 32 || self.height < 32 {
            return Err(gen_err(format!(
                "image size must be at least 32x32, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.sigma_k > 0.0 && self.sigma_k <= 0.2) {
            return Err(gen_err(format!("sigma_k must be in (0, 0.2], got {}", self.sigma_k)));
        }
        if !(self.sigma_eta >= 0.0 && self.sigma_eta.is_finite()) {
            return Err(gen_err(format!("sigma_eta must be >= 0, got {}", self.sigma_eta)));
        }
        Ok(())
    }
}

/// Offline protocols: every individual owns a fixed combination of
/// `cameras_per_individual` cameras drawn from `n_cameras`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineParams {
    pub seed: u64,
    pub n_cameras: usize,
    pub cameras_per_individual: usize,
    /// Size of each camera's image pool.
    pub images_per_camera: usize,
    pub reposts_per_account: usize,
    /// Caps the number of individuals by sampling combinations. `None` uses
    /// every combination for k = 1, 2 and `C(n, 2)` sampled ones for k = 3.
    #[serde(default)]
    pub max_individuals: Option<usize>,
    pub sensor: SensorParams,
}

impl Default for OfflineParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n_cameras: 11,
            cameras_per_individual: 1,
            images_per_camera: 40,
            reposts_per_account: 5,
            max_individuals: None,
            sensor: SensorParams::default(),
        }
    }
}

/// Online protocol: one camera per individual, variable album size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineParams {
    pub seed: u64,
    pub n_individuals: usize,
    pub album_min: usize,
    pub album_max: usize,
    pub reposts_per_account: usize,
    pub sensor: SensorParams,
}

impl Default for OnlineParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n_individuals: 12,
            album_min: 30,
            album_max: 50,
            reposts_per_account: 5,
            sensor: SensorParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolParams {
    Offline(OfflineParams),
    Online(OnlineParams),
}

impl ProtocolParams {
    pub fn name(&self) -> String {
        match self {
            Self::Offline(p) => format!("offline{}", p.cameras_per_individual),
            Self::Online(_) => "online".to_string(),
        }
    }

    pub fn sensor(&self) -> &SensorParams {
        match self {
            Self::Offline(p) => &p.sensor,
            Self::Online(p) => &p.sensor,
        }
    }

    pub fn build(&self) -> Result<DatasetManifest> {
        match self {
            Self::Offline(p) => build_offline_dataset(p),
            Self::Online(p) => build_online_dataset(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub camera_id: u32,
    pub seed: u64,
    /// The dedicated source of reposted images.
    pub reposter: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    /// Path relative to the dataset root.
    pub file: String,
    pub camera_id: u32,
    pub repost: bool,
    pub individual_id: u32,
    pub scene_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountEntry {
    pub account_id: String,
    pub individual_id: u32,
    pub images: Vec<ImageEntry>,
}

impl AccountEntry {
    /// Cameras that contributed the account's own (non-reposted) images.
    pub fn own_cameras(&self) -> BTreeSet<u32> {
        self.images
            .iter()
            .filter(|i| !i.repost)
            .map(|i| i.camera_id)
            .collect()
    }

    pub fn camera_labels(&self) -> Vec<u32> {
        self.images.iter().map(|i| i.camera_id).collect()
    }

    pub fn repost_flags(&self) -> Vec<bool> {
        self.images.iter().map(|i| i.repost).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub users: usize,
    pub positives: usize,
    pub negatives: usize,
    pub excluded: usize,
    pub reposts: usize,
}

/// Full description of a generated dataset: enough to re-render every image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub protocol: String,
    pub params: ProtocolParams,
    /// Camera combination owned by each individual, indexed by individual id.
    pub combos: Vec<Vec<u32>>,
    pub cameras: Vec<CameraEntry>,
    pub accounts: Vec<AccountEntry>,
}

fn gen_err(msg: impl Into<String>) -> Error {
    Error::GenerationError(msg.into())
}

fn manifest_err(msg: impl Into<String>) -> Error {
    Error::CorruptManifest(msg.into())
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<u32>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in start..n {
            cur.push(c as u32);
            rec(c + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn account_id(index: usize) -> String {
    format!("user{index:04}")
}

fn camera_entries(seed: u64, own: usize) -> Vec<CameraEntry> {
    (0..=own as u32)
        .map(|id| CameraEntry {
            camera_id: id,
            seed: derive_seed(seed, "camera", &[u64::from(id)]),
            reposter: id as usize == own,
        })
        .collect()
}

struct Draft {
    camera_id: u32,
    repost: bool,
    scene_seed: u64,
}

/// Shuffles `pool`, splits it into two halves and appends the reposts to
/// each half, producing the two accounts of one individual.
fn split_individual(
    master: u64,
    individual: u32,
    mut pool: Vec<Draft>,
    reposter: u32,
    reposts_per_account: usize,
    accounts: &mut Vec<AccountEntry>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, "split", &[u64::from(individual)]));
    pool.shuffle(&mut rng);
    let second = pool.split_off(pool.len().div_ceil(2));
    for (side, mut drafts) in [pool, second].into_iter().enumerate() {
        let index = accounts.len();
        for r in 0..reposts_per_account {
            drafts.push(Draft {
                camera_id: reposter,
                repost: true,
                scene_seed: derive_seed(master, "repost", &[index as u64, r as u64]),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            master,
            "order",
            &[u64::from(individual), side as u64],
        ));
        drafts.shuffle(&mut rng);
        let id = account_id(index);
        let images = drafts
            .into_iter()
            .enumerate()
            .map(|(n, d)| ImageEntry {
                file: format!("{id}/img_{n:03}.png"),
                camera_id: d.camera_id,
                repost: d.repost,
                individual_id: individual,
                scene_seed: d.scene_seed,
            })
            .collect();
        accounts.push(AccountEntry {
            account_id: id,
            individual_id: individual,
            images,
        });
    }
}

/// Builds an offline-protocol manifest. Each camera has a fixed pool of
/// captures; an individual's album is the union of its cameras' pools,
/// randomly halved into two accounts, each topped up with reposts from one
/// extra camera shared by the whole dataset.
pub fn build_offline_dataset(p: &OfflineParams) -> Result<DatasetManifest> {
    p.sensor.validate()?;
    let k = p.cameras_per_individual;
    if !(1..=3).contains(&k) {
        return Err(gen_err(format!("cameras_per_individual must be 1, 2 or 3, got {k}")));
    }
    if p.n_cameras < k.max(2) {
        return Err(gen_err(format!(
            "{k} camera(s) per individual needs at least {} cameras, got {}",
            k.max(2),
            p.n_cameras
        )));
    }
    if p.images_per_camera * k < 4 {
        return Err(gen_err(format!(
            "{} images per camera cannot fill two accounts of at least 2 images",
            p.images_per_camera
        )));
    }
    let all = combinations(p.n_cameras, k);
    let mut target = if k == 3 {
        binomial(p.n_cameras, 2).min(all.len())
    } else {
        all.len()
    };
    if let Some(cap) = p.max_individuals {
        if cap == 0 {
            return Err(gen_err("max_individuals must be positive"));
        }
        target = target.min(cap);
    }
    let combos = if target == all.len() {
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, "combos", &[]));
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, all.len(), target).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| all[i].clone()).collect()
    };

    let cameras = camera_entries(p.seed, p.n_cameras);
    let reposter = p.n_cameras as u32;
    let mut accounts = Vec::with_capacity(2 * combos.len());
    for (individual, combo) in combos.iter().enumerate() {
        let pool = combo
            .iter()
            .flat_map(|&c| {
                (0..p.images_per_camera).map(move |n| Draft {
                    camera_id: c,
                    repost: false,
                    scene_seed: derive_seed(p.seed, "scene", &[u64::from(c), n as u64]),
                })
            })
            .collect();
        split_individual(
            p.seed,
            individual as u32,
            pool,
            reposter,
            p.reposts_per_account,
            &mut accounts,
        );
    }
    let manifest = DatasetManifest {
        protocol: ProtocolParams::Offline(p.clone()).name(),
        params: ProtocolParams::Offline(p.clone()),
        combos,
        cameras,
        accounts,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Builds an online-protocol manifest: each individual owns one camera and an
/// album of `album_min..=album_max` captures split into two accounts.
pub fn build_online_dataset(p: &OnlineParams) -> Result<DatasetManifest> {
    p.sensor.validate()?;
    if p.n_individuals < 2 {
        return Err(gen_err(format!("need at least 2 individuals, got {}", p.n_individuals)));
    }
    if p.album_min < 4 || p.album_min > p.album_max {
        return Err(gen_err(format!(
            "album size range must satisfy 4 <= min <= max, got {}..={}",
            p.album_min, p.album_max
        )));
    }
    let cameras = camera_entries(p.seed, p.n_individuals);
    let reposter = p.n_individuals as u32;
    let mut sizes = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, "album", &[]));
    let mut accounts = Vec::with_capacity(2 * p.n_individuals);
    let mut combos = Vec::with_capacity(p.n_individuals);
    for individual in 0..p.n_individuals as u32 {
        let size = sizes.random_range(p.album_min..=p.album_max);
        let pool = (0..size)
            .map(|n| Draft {
                camera_id: individual,
                repost: false,
                scene_seed: derive_seed(p.seed, "scene", &[u64::from(individual), n as u64]),
            })
            .collect();
        split_individual(p.seed, individual, pool, reposter, p.reposts_per_account, &mut accounts);
        combos.push(vec![individual]);
    }
    let manifest = DatasetManifest {
        protocol: "online".into(),
        params: ProtocolParams::Online(p.clone()),
        combos,
        cameras,
        accounts,
    };
    manifest.validate()?;
    Ok(manifest)
}

fn check_relative_path(file: &str) -> Result<()> {
    let path = Path::new(file);
    let ok = !file.is_empty()
        && !file.contains('\\')
        && path
            .components()
            .all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(manifest_err(format!("image path {file:?} must be relative and stay inside the dataset")))
    }
}

fn check_account_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(manifest_err(format!("invalid account id {id:?}")))
    }
}

impl DatasetManifest {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let manifest: DatasetManifest =
            serde_json::from_slice(bytes).map_err(|e| manifest_err(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_slice(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Structural checks: unique safe ids and paths, known cameras,
    /// consistent individual and repost labels.
    pub fn validate(&self) -> Result<()> {
        let sensor = self.params.sensor();
        sensor.validate().map_err(|e| manifest_err(e.to_string()))?;
        let mut cameras = HashMap::new();
        for cam in &self.cameras {
            if cameras.insert(cam.camera_id, cam.reposter).is_some() {
                return Err(manifest_err(format!("camera {} listed twice", cam.camera_id)));
            }
        }
        for (i, combo) in self.combos.iter().enumerate() {
            if combo.is_empty() || combo.iter().any(|c| !cameras.contains_key(c)) {
                return Err(manifest_err(format!("combination {i} names unknown cameras")));
            }
        }
        let mut ids = BTreeSet::new();
        let mut files = BTreeSet::new();
        for acct in &self.accounts {
            check_account_id(&acct.account_id)?;
            if !ids.insert(acct.account_id.as_str()) {
                return Err(manifest_err(format!("account {} listed twice", acct.account_id)));
            }
            if acct.images.len() < 2 {
                return Err(manifest_err(format!(
                    "account {} has fewer than 2 images",
                    acct.account_id
                )));
            }
            for img in &acct.images {
                check_relative_path(&img.file)?;
                if !files.insert(img.file.as_str()) {
                    return Err(manifest_err(format!("image {} listed twice", img.file)));
                }
                match cameras.get(&img.camera_id) {
                    None => {
                        return Err(manifest_err(format!(
                            "image {} uses unknown camera {}",
                            img.file, img.camera_id
                        )))
                    }
                    Some(&reposter) if reposter != img.repost => {
                        return Err(manifest_err(format!(
                            "image {} repost flag disagrees with its camera",
                            img.file
                        )))
                    }
                    _ => {}
                }
                if img.individual_id != acct.individual_id {
                    return Err(manifest_err(format!(
                        "image {} belongs to another individual",
                        img.file
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn account_ids(&self) -> Vec<String> {
        self.accounts.iter().map(|a| a.account_id.clone()).collect()
    }

    pub fn account(&self, id: &str) -> Option<&AccountEntry> {
        self.accounts.iter().find(|a| a.account_id == id)
    }

    /// Label of the account pair at positions `a` and `b`.
    pub fn pair_label(&self, a: usize, b: usize) -> PairLabel {
        let (x, y) = (&self.accounts[a], &self.accounts[b]);
        if x.individual_id == y.individual_id {
            PairLabel::Positive
        } else if x.own_cameras().is_disjoint(&y.own_cameras()) {
            PairLabel::Negative
        } else {
            PairLabel::Excluded
        }
    }

    /// Labels keyed by account id pair, each unordered pair once (`a < b`).
    pub fn pair_labels(&self) -> PairLabels {
        let cams: Vec<BTreeSet<u32>> = self.accounts.iter().map(|a| a.own_cameras()).collect();
        let mut out = PairLabels::new();
        for i in 0..self.accounts.len() {
            for j in i + 1..self.accounts.len() {
                let (x, y) = (&self.accounts[i], &self.accounts[j]);
                let label = if x.individual_id == y.individual_id {
                    PairLabel::Positive
                } else if cams[i].is_disjoint(&cams[j]) {
                    PairLabel::Negative
                } else {
                    PairLabel::Excluded
                };
                let key = if x.account_id < y.account_id {
                    (x.account_id.clone(), y.account_id.clone())
                } else {
                    (y.account_id.clone(), x.account_id.clone())
                };
                out.insert(key, label);
            }
        }
        out
    }

    pub fn pair_stats(&self) -> PairStats {
        let mut stats = PairStats {
            users: self.accounts.len(),
            positives: 0,
            negatives: 0,
            excluded: 0,
            reposts: self
                .accounts
                .iter()
                .flat_map(|a| &a.images)
                .filter(|i| i.repost)
                .count(),
        };
        for label in self.pair_labels().values() {
            match label {
                PairLabel::Positive => stats.positives += 1,
                PairLabel::Negative => stats.negatives += 1,
                PairLabel::Excluded => stats.excluded += 1,
            }
        }
        stats
    }

    /// Rebuilds the manifest from its recorded parameters.
    pub fn regenerate(&self) -> Result<DatasetManifest> {
        self.params.build()
    }
}

/// Renders manifest images from their camera and scene seeds.
pub struct Renderer {
    sensor: SensorParams,
    cameras: HashMap<u32, SyntheticCamera>,
}

impl Renderer {
    pub fn new(manifest: &DatasetManifest) -> Result<Self> {
        let sensor = *manifest.params.sensor();
        let cameras = manifest
            .cameras
            .par_iter()
            .map(|c| {
                make_camera(c.camera_id, c.seed, (sensor.width, sensor.height), sensor.sigma_k)
                    .map(|cam| (c.camera_id, cam))
            })
            .collect::<Result<_>>()?;
        Ok(Self { sensor, cameras })
    }

    pub fn camera(&self, id: u32) -> Option<&SyntheticCamera> {
        self.cameras.get(&id)
    }

    pub fn render(&self, image: &ImageEntry) -> Result<PixelGrid> {
        let camera = self
            .cameras
            .get(&image.camera_id)
            .ok_or_else(|| manifest_err(format!("unknown camera {}", image.camera_id)))?;
        capture(camera, image.scene_seed, self.sensor.sigma_eta)
    }

    pub fn render_account(&self, account: &AccountEntry) -> Result<Vec<PixelGrid>> {
        account.images.par_iter().map(|i| self.render(i)).collect()
    }
}

/// Writes `manifest.json` and every image as an 8-bit PNG under `root`.
pub fn write_dataset(manifest: &DatasetManifest, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    manifest.validate()?;
    let renderer = Renderer::new(manifest)?;
    for acct in &manifest.accounts {
        let dir = root.join(&acct.account_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    manifest
        .accounts
        .par_iter()
        .flat_map(|a| a.images.par_iter())
        .try_for_each(|img| {
            let path = root.join(&img.file);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            save_gray_png(&renderer.render(img)?, &path)
        })?;
    manifest.save(root.join("manifest.json"))
}
