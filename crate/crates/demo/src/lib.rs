//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Everything crosses the boundary as numbers, byte vectors or strings, so
//! the same functions run natively in tests.

use pointmask::metrics::iou;
use pointmask::pmu;
use pointmask::synth::{self, CorpusParams, CorruptionSpec, Scene};
use pointmask::{point_to_box, point_to_mask, BinaryMask, PmgConfig, PointLabel, UpdateConfig};
use wasm_bindgen::prelude::*;

const SIDE: usize = 128;

fn corpus(targets: u32, noise_fraction: f64, blob_probability: f64) -> CorpusParams {
    CorpusParams {
        count: 1,
        width: SIDE,
        height: SIDE,
        noise_fraction,
        targets_per_scene: [targets as usize, targets as usize],
        blob_probability,
        margin: 16,
        min_separation: 28,
        ..CorpusParams::default()
    }
}

fn pmg_config(l_ep: u32, l_dp: u32, alpha: f64) -> Result<PmgConfig, String> {
    let cfg = PmgConfig {
        l_ep: l_ep as usize,
        l_dp: l_dp as usize,
        alpha,
        invert: false,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn mask_from(bits: &[u8], width: usize, height: usize) -> Result<BinaryMask, String> {
    BinaryMask::from_bits(width, height, bits.iter().map(|&b| (b != 0) as u8).collect())
        .map_err(|e| e.to_string())
}

/// A generated scene with its ground truth.
#[wasm_bindgen]
pub struct DemoScene {
    scene: Scene,
}

#[wasm_bindgen]
impl DemoScene {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, targets: u32, noise_fraction: f64, blob_probability: f64) -> Result<DemoScene, String> {
        let params = corpus(targets.clamp(1, 8), noise_fraction, blob_probability);
        let spec = synth::random_scenes(&params, seed).map_err(|e| e.to_string())?;
        let scene = synth::generate_scene(&spec[0]).map_err(|e| e.to_string())?;
        Ok(DemoScene { scene })
    }

    pub fn width(&self) -> usize {
        self.scene.image.width()
    }

    pub fn height(&self) -> usize {
        self.scene.image.height()
    }

    /// Image stretched to 0..255 as opaque RGBA.
    pub fn image_rgba(&self) -> Vec<u8> {
        let data = self.scene.image.data();
        let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1.0);
        let mut out = Vec::with_capacity(data.len() * 4);
        for &v in data {
            let g = ((v - lo) / span * 255.0).round() as u8;
            out.extend_from_slice(&[g, g, g, 255]);
        }
        out
    }

    /// Ground-truth mask, one byte per pixel.
    pub fn gt(&self) -> Vec<u8> {
        self.scene.gt.bits().to_vec()
    }

    /// Centroid labels as `[x0, y0, x1, y1, ...]`.
    pub fn labels(&self) -> Vec<u32> {
        self.scene
            .labels
            .iter()
            .flat_map(|p| [p.x as u32, p.y as u32])
            .collect()
    }

    fn points(&self, flat: &[u32]) -> Result<Vec<PointLabel>, String> {
        flat.chunks_exact(2)
            .map(|c| {
                let p = PointLabel::new(c[0] as usize, c[1] as usize);
                self.scene.image.check_point(p).map(|_| p).map_err(|e| e.to_string())
            })
            .collect()
    }

    /// Runs mask generation for the given points.
    pub fn generate(&self, points: Vec<u32>, l_ep: u32, l_dp: u32, alpha: f64) -> Result<PmgResult, String> {
        let cfg = pmg_config(l_ep, l_dp, alpha)?;
        let points = self.points(&points)?;
        let mask = point_to_mask(&self.scene.image, &points, &cfg).map_err(|e| e.to_string())?;
        let mut boxes = Vec::with_capacity(points.len() * 4);
        for &p in &points {
            let b = point_to_box(&self.scene.image, p, &cfg).map_err(|e| e.to_string())?;
            boxes.extend([b.left as i32, b.top as i32, b.right as i32, b.bottom as i32]);
        }
        Ok(PmgResult {
            iou: iou(&mask, &self.scene.gt).map_err(|e| e.to_string())?,
            mask: mask.bits().to_vec(),
            boxes,
        })
    }

    /// Degrades the ground truth into a mock network prediction (dropped
    /// targets, dilation and distant false alarms), then filters it with
    /// radius `r` and merges it into `initial`.
    pub fn update(
        &self,
        initial: Vec<u8>,
        points: Vec<u32>,
        r: f64,
        false_components: u32,
        seed: u64,
    ) -> Result<UpdateResult, String> {
        let (w, h) = self.scene.gt.dims();
        let initial = mask_from(&initial, w, h)?;
        let points = self.points(&points)?;
        let corruption = CorruptionSpec {
            drop_probability: 0.3,
            false_component_count: false_components as usize,
            false_component_distance: 40.0,
            dilation: 1,
            false_component_half_extent: 1,
            seed,
        };
        let prediction = synth::corrupt_prediction(&self.scene.gt, &self.scene.labels, &corruption)
            .map_err(|e| e.to_string())?
            .mask;
        let cfg = UpdateConfig {
            r,
            ..UpdateConfig::default()
        };
        cfg.validate().map_err(|e| e.to_string())?;
        let sample = pmu::UpdateSample {
            initial,
            prediction: prediction.clone(),
            points,
        };
        let outcome = pmu::update_sample(&sample, &cfg).map_err(|e| e.to_string())?;
        let score = |m: &BinaryMask| iou(m, &self.scene.gt).map_err(|e| e.to_string());
        Ok(UpdateResult {
            iou_prediction: score(&prediction)?,
            iou_hybrid: score(&outcome.hybrid)?,
            erased: outcome.erased_components as u32,
            retrieved: outcome.retrieved_pixels as u32,
            prediction: prediction.bits().to_vec(),
            hybrid: outcome.hybrid.bits().to_vec(),
        })
    }
}

#[wasm_bindgen]
pub struct PmgResult {
    mask: Vec<u8>,
    boxes: Vec<i32>,
    iou: f64,
}

#[wasm_bindgen]
impl PmgResult {
    #[wasm_bindgen(getter)]
    pub fn mask(&self) -> Vec<u8> {
        self.mask.clone()
    }

    /// `[left, top, right, bottom]` per point, inclusive.
    #[wasm_bindgen(getter)]
    pub fn boxes(&self) -> Vec<i32> {
        self.boxes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn iou(&self) -> f64 {
        self.iou
    }
}

#[wasm_bindgen]
pub struct UpdateResult {
    prediction: Vec<u8>,
    hybrid: Vec<u8>,
    erased: u32,
    retrieved: u32,
    iou_prediction: f64,
    iou_hybrid: f64,
}

#[wasm_bindgen]
impl UpdateResult {
    #[wasm_bindgen(getter)]
    pub fn prediction(&self) -> Vec<u8> {
        self.prediction.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn hybrid(&self) -> Vec<u8> {
        self.hybrid.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn erased(&self) -> u32 {
        self.erased
    }

    #[wasm_bindgen(getter)]
    pub fn retrieved(&self) -> u32 {
        self.retrieved
    }

    #[wasm_bindgen(getter)]
    pub fn iou_prediction(&self) -> f64 {
        self.iou_prediction
    }

    #[wasm_bindgen(getter)]
    pub fn iou_hybrid(&self) -> f64 {
        self.iou_hybrid
    }
}

/// Mean IoU of generated masks over `scenes` random scenes for each `l_ep`.
#[wasm_bindgen]
pub fn sweep_l_ep(seed: u64, scenes: u32, noise_fraction: f64, values: Vec<u32>) -> Result<Vec<f64>, String> {
    let params = CorpusParams {
        count: scenes.max(1) as usize,
        blob_probability: 0.5,
        ..corpus(2, noise_fraction, 0.5)
    };
    let scenes: Vec<Scene> = synth::random_scenes(&params, seed)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|s| synth::generate_scene(s).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    values
        .iter()
        .map(|&l_ep| {
            let cfg = pmg_config(l_ep, 4, 0.15)?;
            let mut total = 0.0;
            for s in &scenes {
                let mask = point_to_mask(&s.image, &s.labels, &cfg).map_err(|e| e.to_string())?;
                total += iou(&mask, &s.gt).map_err(|e| e.to_string())?;
            }
            Ok(total / scenes.len() as f64)
        })
        .collect()
}
