//! Flat key/value run configuration.
//!
//! The same [`Settings`] shape is read from a TOML file, built from command
//! line flags, merged (flags win) and finally written back into `run.json`
//! with every default filled in, so a run record can be replayed as a config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use camlink::clustering::ClusterConfig;
use camlink::identity::{Scheme, SchemeConfig};
use camlink::imaging::DenoiserConfig;
use camlink::synth::{OfflineParams, OnlineParams, ProtocolParams, SensorParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("invalid value for {key}: {msg}")]
    Value { key: &'static str, msg: String },
}

fn bad(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key, msg: msg.into() }
}

/// `WxH` crop size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crop {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Crop {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("bad dimension {v:?} in {s:?}"))
        };
        Ok(Crop {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

impl fmt::Display for Crop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Every configurable key. All optional so files and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<usize>,
    /// One of scf, mcf, uci, a comma list of them, or `all`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelet_levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_sizes: Option<Vec<usize>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cameras: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images_per_camera: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_individuals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub individuals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub album_min: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub album_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reposts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_eta: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fingerprints: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat settings always serialize")
    }

    /// `self` with every key that `top` sets replaced.
    pub fn overlaid(mut self, top: &Settings) -> Settings {
        overlay!(self, top;
            seed, alpha, beta, lambda, gamma, scheme, crop, workers, tau,
            wavelet_levels, noise_variance, window_sizes,
            protocol, cameras, images_per_camera, max_individuals, individuals,
            album_min, album_max, reposts, width, height, sigma_k, sigma_eta,
            dataset, fingerprints, scores, out,
        );
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn tau(&self) -> Result<f64, ConfigError> {
        let tau = self.tau.unwrap_or(DEFAULT_TAU);
        if !(-1.0..=1.0).contains(&tau) {
            return Err(bad("tau", format!("must lie in [-1, 1], got {tau}")));
        }
        Ok(tau)
    }

    pub fn crop(&self) -> Result<Option<Crop>, ConfigError> {
        self.crop
            .as_deref()
            .map(|s| s.parse::<Crop>().map_err(|m| bad("crop", m)))
            .transpose()
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, ConfigError> {
        parse_schemes(self.scheme.as_deref().unwrap_or("uci"))
    }

    /// Denoiser, clustering and MCF settings. `crop` is the already resolved
    /// crop size.
    pub fn scheme_config(&self, crop: Crop) -> Result<SchemeConfig, ConfigError> {
        let d = DenoiserConfig::default();
        let c = ClusterConfig::default();
        let cfg = SchemeConfig {
            denoiser: DenoiserConfig {
                wavelet_levels: self.wavelet_levels.unwrap_or(d.wavelet_levels),
                noise_variance: self.noise_variance.unwrap_or(d.noise_variance),
                window_sizes: self.window_sizes.clone().unwrap_or(d.window_sizes),
                crop: (crop.width, crop.height),
            },
            cluster: ClusterConfig {
                alpha: self.alpha.unwrap_or(c.alpha),
                beta: self.beta.unwrap_or(c.beta),
                lambda: self.lambda.unwrap_or(c.lambda),
            },
            gamma: self.gamma.unwrap_or(SchemeConfig::default().gamma),
        };
        cfg.validate().map_err(|e| bad("thresholds", e.to_string()))?;
        Ok(cfg)
    }

    /// Dataset generation parameters for `synth`.
    pub fn protocol_params(&self) -> Result<ProtocolParams, ConfigError> {
        let s = SensorParams::default();
        let sensor = SensorParams {
            width: self.width.unwrap_or(s.width),
            height: self.height.unwrap_or(s.height),
            sigma_k: self.sigma_k.unwrap_or(s.sigma_k),
            sigma_eta: self.sigma_eta.unwrap_or(s.sigma_eta),
        };
        let protocol = self.protocol.as_deref().unwrap_or("offline1").to_ascii_lowercase();
        if protocol == "online" {
            let d = OnlineParams::default();
            return Ok(ProtocolParams::Online(OnlineParams {
                seed: self.seed(),
                n_individuals: self.individuals.unwrap_or(d.n_individuals),
                album_min: self.album_min.unwrap_or(d.album_min),
                album_max: self.album_max.unwrap_or(d.album_max),
                reposts_per_account: self.reposts.unwrap_or(d.reposts_per_account),
                sensor,
            }));
        }
        let k = protocol
            .strip_prefix("offline")
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| bad("protocol", format!("expected offline<k> or online, got {protocol:?}")))?;
        let d = OfflineParams::default();
        Ok(ProtocolParams::Offline(OfflineParams {
            seed: self.seed(),
            n_cameras: self.cameras.unwrap_or(d.n_cameras),
            cameras_per_individual: k,
            images_per_camera: self.images_per_camera.unwrap_or(d.images_per_camera),
            reposts_per_account: self.reposts.unwrap_or(d.reposts_per_account),
            max_individuals: self.max_individuals,
            sensor,
        }))
    }
}

pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_CROP: Crop = Crop {
    width: 256,
    height: 256,
};

pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>, ConfigError> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Scheme::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in text.split(',') {
        let s: Scheme = part.trim().parse().map_err(|e: camlink::Error| bad("scheme", e.to_string()))?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_parsing() {
        assert_eq!("128x96".parse::<Crop>().unwrap(), Crop { width: 128, height: 96 });
        assert_eq!("64X64".parse::<Crop>().unwrap().to_string(), "64x64");
        for bad in ["", "128", "0x5", "ax5", "5x-1"] {
            assert!(bad.parse::<Crop>().is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_override_file() {
        let file = Settings::from_toml_str("alpha = 0.2\nbeta = 0.1\nseed = 7\n").unwrap();
        let flags = Settings {
            alpha: Some(0.3),
            ..Settings::default()
        };
        let merged = file.overlaid(&flags);
        assert_eq!(merged.alpha, Some(0.3));
        assert_eq!(merged.beta, Some(0.1));
        assert_eq!(merged.seed(), 7);
    }

    #[test]
    fn unknown_or_nested_keys_are_rejected() {
        assert!(Settings::from_toml_str("alpah = 0.2").is_err());
        assert!(Settings::from_toml_str("[cluster]\nalpha = 0.2").is_err());
        assert!(Settings::from_toml_str("alpha = \"high\"").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = Settings {
            seed: Some(3),
            scheme: Some("scf,uci".into()),
            crop: Some("64x64".into()),
            window_sizes: Some(vec![3, 5]),
            dataset: Some("data".into()),
            ..Settings::default()
        };
        assert_eq!(Settings::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }

    #[test]
    fn scheme_lists() {
        assert_eq!(parse_schemes("all").unwrap(), Scheme::ALL.to_vec());
        assert_eq!(parse_schemes("uci, SCF,uci").unwrap(), vec![Scheme::Uci, Scheme::Scf]);
        assert!(parse_schemes("uci,foo").is_err());
    }

    #[test]
    fn threshold_validation() {
        let s = Settings {
            alpha: Some(0.05),
            beta: Some(0.1),
            ..Settings::default()
        };
        assert!(s.scheme_config(DEFAULT_CROP).is_err());
        let s = Settings {
            tau: Some(1.5),
            ..Settings::default()
        };
        assert!(s.tau().is_err());
    }

    #[test]
    fn protocol_names() {
        let s = Settings {
            protocol: Some("offline3".into()),
            cameras: Some(5),
            ..Settings::default()
        };
        match s.protocol_params().unwrap() {
            ProtocolParams::Offline(p) => {
                assert_eq!((p.cameras_per_individual, p.n_cameras), (3, 5));
            }
            other => panic!("{other:?}"),
        }
        let s = Settings {
            protocol: Some("offlineX".into()),
            ..Settings::default()
        };
        assert!(s.protocol_params().is_err());
    }
}
