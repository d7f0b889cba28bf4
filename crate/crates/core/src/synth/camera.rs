use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imaging::PixelGrid;

/// SplitMix64 finalizer; turns structured inputs into independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stream seed from a master seed and a tuple of identifiers.
pub fn derive_seed(master: u64, stream: &str, ids: &[u64]) -> u64 {
    let mut h = mix(master);
    for b in stream.bytes() {
        h = mix(h ^ u64::from(b));
    }
    for &id in ids {
        h = mix(h ^ id);
    }
    h
}

/// A simulated sensor with a fixed multiplicative noise pattern `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCamera {
    pub camera_id: u32,
    pub seed: u64,
    pub sigma_k: f64,
    prnu: PixelGrid,
}

impl SyntheticCamera {
    pub fn prnu(&self) -> &PixelGrid {
        &self.prnu
    }

    pub fn dims(&self) -> (usize, usize) {
        self.prnu.dims()
    }
}

/// Draws an i.i.d. Gaussian PRNU field of standard deviation `sigma_k`,
/// shifted to exactly zero mean.
pub fn make_camera(
    camera_id: u32,
    seed: u64,
    dims: (usize, usize),
    sigma_k: f64,
) -> Result<SyntheticCamera> {
    if !(sigma_k > 0.0 && sigma_k <= 0.2) {
        return Err(Error::GenerationError(format!(
            "sigma_k must be in (0, 0.2], got {sigma_k}"
        )));
    }
    if dims.0 == 0 || dims.1 == 0 {
        return Err(Error::GenerationError("camera dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_k).expect("sigma_k is positive and finite");
    let mut values: Vec<f64> = (0..dims.0 * dims.1).map(|_| normal.sample(&mut rng)).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    Ok(SyntheticCamera {
        camera_id,
        seed,
        sigma_k,
        prnu: PixelGrid::new(dims.0, dims.1, values)?,
    })
}

/// Smooth procedural scene in [32, 224]: two octaves of value noise plus a
/// linear gradient, all driven by `scene_seed`.
pub fn render_scene(scene_seed: u64, dims: (usize, usize)) -> PixelGrid {
    let (w, h) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene_seed, "scene", &[]));
    let coarse = ValueNoise::new(&mut rng, w, h, 32);
    let fine = ValueNoise::new(&mut rng, w, h, 8);
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    let (dx, dy) = (angle.cos(), angle.sin());
    let diag = ((w * w + h * h) as f64).sqrt().max(1.0);
    PixelGrid::from_fn(w, h, |x, y| {
        let gx = x as f64 - w as f64 / 2.0;
        let gy = y as f64 - h as f64 / 2.0;
        let gradient = 0.5 + (gx * dx + gy * dy) / diag;
        let s = 0.6 * coarse.at(x, y) + 0.25 * fine.at(x, y) + 0.15 * gradient;
        (32.0 + 192.0 * s).clamp(32.0, 224.0)
    })
}

/// `clamp(scene * (1 + K) + noise, 0, 255)`, with Gaussian read noise of
/// standard deviation `sigma_eta`. Both scene and noise derive from `scene_seed`.
pub fn capture(camera: &SyntheticCamera, scene_seed: u64, sigma_eta: f64) -> Result<PixelGrid> {
    if !(sigma_eta >= 0.0 && sigma_eta.is_finite()) {
        return Err(Error::GenerationError(format!(
            "sigma_eta must be >= 0, got {sigma_eta}"
        )));
    }
    let scene = render_scene(scene_seed, camera.dims());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene_seed, "read-noise", &[]));
    let noise = Normal::new(0.0, sigma_eta.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let values = scene
        .values()
        .iter()
        .zip(camera.prnu.values())
        .map(|(&s, &k)| {
            let eta = if sigma_eta > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (s * (1.0 + k) + eta).clamp(0.0, 255.0)
        })
        .collect();
    PixelGrid::new(scene.width(), scene.height(), values)
}

struct ValueNoise {
    cell: usize,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut impl Rng, w: usize, h: usize, cell: usize) -> Self {
        let cols = w / cell + 2;
        let rows = h / cell + 2;
        let lattice = (0..cols * rows).map(|_| rng.random::<f64>()).collect();
        Self { cell, cols, lattice }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let (cx, cy) = (x / self.cell, y / self.cell);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let tx = smooth((x % self.cell) as f64 / self.cell as f64);
        let ty = smooth((y % self.cell) as f64 / self.cell as f64);
        let v = |i: usize, j: usize| self.lattice[j * self.cols + i];
        let top = v(cx, cy) * (1.0 - tx) + v(cx + 1, cy) * tx;
        let bottom = v(cx, cy + 1) * (1.0 - tx) + v(cx + 1, cy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}
