//! Active pixel masks and active-pixel local optical flow (APLOF).
//!
//! A pixel of a Labits layer is active when `|L| < beta`, i.e. it saw an event
//! close to the probe time. The low-resolution mask pools the high-resolution
//! one over 8x8 blocks. Ground-truth APLOF is the displacement over the 20 ms
//! around a probe, scattered to where each pixel sits at the probe time. The
//! analytic estimator reads local speed off the spatial gradient of a single
//! layer: normalized time grows by `1 / (speed * range)` per pixel along the
//! motion direction.

use thiserror::Error;

use crate::flow::FlowField;
use crate::tensor::DenseTensor;

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_GAMMA: f64 = 0.125;
/// Side of the pooling block between the high- and low-resolution masks.
pub const POOL: usize = 8;
/// Gradients with a smaller norm carry no usable speed.
pub const MIN_GRADIENT: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum AplofError {
    #[error("threshold {0} outside its allowed range")]
    BadThreshold(f64),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("no jointly valid pixels")]
    NoValidPixels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivePixelMask {
    height: usize,
    width: usize,
    resolution: Resolution,
    active: Vec<bool>,
}

impl ActivePixelMask {
    pub fn new(height: usize, width: usize, resolution: Resolution, active: Vec<bool>) -> Self {
        assert_eq!(active.len(), height * width);
        Self { height, width, resolution, active }
    }

    /// High-resolution mask with every pixel active.
    pub fn full(height: usize, width: usize) -> Self {
        Self::new(height, width, Resolution::High, vec![true; height * width])
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    #[inline]
    pub fn is_active(&self, x: usize, y: usize) -> bool {
        self.active[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// True if every pixel active here is also active in `other`.
    pub fn is_subset_of(&self, other: &ActivePixelMask) -> bool {
        self.active.len() == other.active.len()
            && self.active.iter().zip(&other.active).all(|(&a, &b)| !a || b)
    }

    /// Zeroes and invalidates every inactive pixel of `flow`.
    pub fn apply(&self, flow: &FlowField) -> Result<FlowField, AplofError> {
        if flow.dims() != (self.height, self.width) {
            return Err(AplofError::DimMismatch(format!(
                "flow {:?} vs mask {:?}",
                flow.dims(),
                (self.height, self.width)
            )));
        }
        let mut out = flow.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.is_active(x, y) {
                    out.clear(x, y);
                }
            }
        }
        Ok(out)
    }
}

/// `(ceil(H / 8), ceil(W / 8))`.
pub fn low_res_dims(height: usize, width: usize) -> (usize, usize) {
    (height.div_ceil(POOL), width.div_ceil(POOL))
}

fn single_layer(layer: &DenseTensor) -> Result<&[f32], AplofError> {
    if layer.channels() != 1 {
        return Err(AplofError::DimMismatch(format!(
            "expected a single layer, got {} channels",
            layer.channels()
        )));
    }
    Ok(layer.plane(0))
}

/// `|L| < beta`, with `0 < beta <= 1`. Fill values (`-1`) are never active.
pub fn apm_high(layer: &DenseTensor, beta: f64) -> Result<ActivePixelMask, AplofError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(AplofError::BadThreshold(beta));
    }
    let values = single_layer(layer)?;
    let active = values.iter().map(|&v| (v.abs() as f64) < beta).collect();
    Ok(ActivePixelMask::new(layer.height(), layer.width(), Resolution::High, active))
}

/// 8x8 average pooling of a high-resolution mask; a block is active when its
/// active fraction is at least `gamma`. Edge blocks average over in-bounds
/// pixels only.
pub fn apm_low(hr: &ActivePixelMask, gamma: f64) -> Result<ActivePixelMask, AplofError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(AplofError::BadThreshold(gamma));
    }
    if hr.resolution != Resolution::High {
        return Err(AplofError::BadConfig("apm_low expects a high-resolution mask".into()));
    }
    let (lh, lw) = low_res_dims(hr.height, hr.width);
    let mut active = Vec::with_capacity(lh * lw);
    for by in 0..lh {
        for bx in 0..lw {
            let ys = by * POOL..((by + 1) * POOL).min(hr.height);
            let xs = bx * POOL..((bx + 1) * POOL).min(hr.width);
            let total = ys.len() * xs.len();
            let hits = ys
                .flat_map(|y| xs.clone().map(move |x| (x, y)))
                .filter(|&(x, y)| hr.is_active(x, y))
                .count();
            active.push(hits as f64 / total as f64 >= gamma);
        }
    }
    Ok(ActivePixelMask::new(lh, lw, Resolution::Low, active))
}

/// Ground-truth APLOF from cumulative flows at `tau - 10 ms`, `tau + 10 ms`
/// and `tau`.
///
/// Each start pixel `x` valid in all three flows contributes
/// `flow_plus(x) - flow_minus(x)` at `round(x + flow_tau(x))`. Targets outside
/// the frame or outside the mask (which describes activity at `tau`) are
/// dropped and collisions are averaged. Units are pixels per 20 ms.
pub fn aplof_ground_truth(
    flow_minus: &FlowField,
    flow_plus: &FlowField,
    flow_tau: &FlowField,
    hr_mask: &ActivePixelMask,
) -> Result<FlowField, AplofError> {
    let dims = flow_tau.dims();
    if flow_minus.dims() != dims || flow_plus.dims() != dims || (hr_mask.height, hr_mask.width) != dims {
        return Err(AplofError::DimMismatch("flows and mask must share dimensions".into()));
    }
    let (h, w) = dims;
    let mut sum = vec![[0.0f64; 2]; h * w];
    let mut count = vec![0u32; h * w];
    for y in 0..h {
        for x in 0..w {
            let (Some(minus), Some(plus), Some(at)) =
                (flow_minus.get(x, y), flow_plus.get(x, y), flow_tau.get(x, y))
            else {
                continue;
            };
            let tx = (x as f64 + at[0]).round();
            let ty = (y as f64 + at[1]).round();
            if tx < 0.0 || ty < 0.0 || tx >= w as f64 || ty >= h as f64 || !hr_mask.is_active(tx as usize, ty as usize) {
                continue;
            }
            let i = ty as usize * w + tx as usize;
            sum[i][0] += plus[0] - minus[0];
            sum[i][1] += plus[1] - minus[1];
            count[i] += 1;
        }
    }
    Ok(FlowField::from_fn(h, w, |x, y| {
        let i = y * w + x;
        (count[i] > 0).then(|| [sum[i][0] / count[i] as f64, sum[i][1] / count[i] as f64])
    }))
}

/// Settings of the plane-fit speed estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFitConfig {
    pub beta: f64,
    /// Odd patch side, at least 3.
    pub patch: usize,
    /// Minimum number of active pixels in the patch, at least 3.
    pub min_support: usize,
}

impl Default for PlaneFitConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            patch: 5,
            min_support: 6,
        }
    }
}

impl PlaneFitConfig {
    fn validate(&self) -> Result<(), AplofError> {
        if self.patch < 3 || self.patch.is_multiple_of(2) {
            return Err(AplofError::BadConfig(format!("patch must be odd and >= 3, got {}", self.patch)));
        }
        if self.min_support < 3 {
            return Err(AplofError::BadConfig(format!(
                "min_support must be >= 3, got {}",
                self.min_support
            )));
        }
        Ok(())
    }
}

/// Local velocity (px/s) at active pixels of one Labits layer.
///
/// Fits `L(x, y) = a x + b y + c` by least squares over the active pixels of
/// each patch. With `g = (a, b)` in normalized time per pixel, the velocity
/// is `g / (|g|^2 * tau_range)`. Pixels with too little support, collinear
/// support or `|g| < 1e-6` are invalid.
pub fn aplof_from_labits(
    layer: &DenseTensor,
    tau_range: f64,
    config: &PlaneFitConfig,
) -> Result<FlowField, AplofError> {
    config.validate()?;
    if !(tau_range > 0.0 && tau_range.is_finite()) {
        return Err(AplofError::BadConfig(format!("tau_range must be positive, got {tau_range}")));
    }
    let mask = apm_high(layer, config.beta)?;
    let values = layer.plane(0);
    let (h, w) = (layer.height(), layer.width());
    let half = (config.patch / 2) as isize;

    let mut out = FlowField::invalid(h, w);
    for y in 0..h {
        for x in 0..w {
            if !mask.is_active(x, y) {
                continue;
            }
            let mut samples = Vec::with_capacity(config.patch * config.patch);
            for dy in -half..=half {
                for dx in -half..=half {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.is_active(nx, ny) {
                        samples.push((dx as f64, dy as f64, values[ny * w + nx] as f64));
                    }
                }
            }
            if samples.len() < config.min_support {
                continue;
            }
            let Some([a, b]) = fit_plane_gradient(&samples) else {
                continue;
            };
            let norm2 = a * a + b * b;
            if norm2.sqrt() < MIN_GRADIENT {
                continue;
            }
            let scale = 1.0 / (norm2 * tau_range);
            out.set(x, y, [a * scale, b * scale]);
        }
    }
    Ok(out)
}

/// Least-squares gradient `(a, b)` of `z = a x + b y + c`; `None` when the
/// sample positions are collinear.
pub fn fit_plane_gradient(samples: &[(f64, f64, f64)]) -> Option<[f64; 2]> {
    let n = samples.len() as f64;
    if samples.len() < 3 {
        return None;
    }
    let (mx, my, mz) = samples.iter().fold((0.0, 0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2));
    let (mx, my, mz) = (mx / n, my / n, mz / n);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, z) in samples {
        let (dx, dy, dz) = (x - mx, y - my, z - mz);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if det <= 1e-9 * (sxx * syy).max(1.0) {
        return None;
    }
    Some([(sxz * syy - syz * sxy) / det, (syz * sxx - sxz * sxy) / det])
}

/// High- and low-resolution APLOF for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AplofPair {
    pub hr: FlowField,
    pub lr: FlowField,
}

impl AplofPair {
    pub fn new(hr: FlowField, lr: FlowField) -> Result<Self, AplofError> {
        if lr.dims() != low_res_dims(hr.height(), hr.width()) {
            return Err(AplofError::DimMismatch(format!(
                "low-resolution field {:?} does not match {:?}",
                lr.dims(),
                low_res_dims(hr.height(), hr.width())
            )));
        }
        Ok(Self { hr, lr })
    }

    /// Masks a high-resolution field and derives the low-resolution one by
    /// block-averaging valid vectors, each under its own mask.
    pub fn from_high_res(hr: &FlowField, hr_mask: &ActivePixelMask, lr_mask: &ActivePixelMask) -> Result<Self, AplofError> {
        let hr = hr_mask.apply(hr)?;
        let lr = lr_mask.apply(&downsample(&hr))?;
        Self::new(hr, lr)
    }
}

/// 8x8 block mean of the valid vectors; blocks with none are invalid.
pub fn downsample(flow: &FlowField) -> FlowField {
    let (h, w) = flow.dims();
    let (lh, lw) = low_res_dims(h, w);
    FlowField::from_fn(lh, lw, |bx, by| {
        let mut acc = [0.0, 0.0];
        let mut n = 0usize;
        for y in by * POOL..((by + 1) * POOL).min(h) {
            for x in bx * POOL..((bx + 1) * POOL).min(w) {
                if let Some(uv) = flow.get(x, y) {
                    acc[0] += uv[0];
                    acc[1] += uv[1];
                    n += 1;
                }
            }
        }
        (n > 0).then(|| [acc[0] / n as f64, acc[1] / n as f64])
    })
}

/// Mean of `|du| + |dv|` over pixels valid in both fields, with the count.
pub fn mean_l1(pred: &FlowField, gt: &FlowField) -> Result<(f64, usize), AplofError> {
    if pred.dims() != gt.dims() {
        return Err(AplofError::DimMismatch(format!("{:?} vs {:?}", pred.dims(), gt.dims())));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (x, y, g) in gt.iter_valid() {
        if let Some(p) = pred.get(x, y) {
            total += (p[0] - g[0]).abs() + (p[1] - g[1]).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { (0.0, 0) } else { (total / n as f64, n) })
}

/// Sum of the high- and low-resolution mean L1 errors.
///
/// A resolution without jointly valid pixels contributes zero; if neither
/// has any, the loss is undefined.
pub fn aplof_loss(pred: &AplofPair, gt: &AplofPair) -> Result<f64, AplofError> {
    let (hr, n_hr) = mean_l1(&pred.hr, &gt.hr)?;
    let (lr, n_lr) = mean_l1(&pred.lr, &gt.lr)?;
    if n_hr + n_lr == 0 {
        return Err(AplofError::NoValidPixels);
    }
    Ok(hr + lr)
}

/// `(f(t) - f(t - dt)) / dt`, first-order accurate.
pub fn backward_difference(f: impl Fn(f64) -> f64, t: f64, dt: f64) -> f64 {
    (f(t) - f(t - dt)) / dt
}

/// `(f(t + dt) - f(t - dt)) / (2 dt)`, second-order accurate.
pub fn central_difference(f: impl Fn(f64) -> f64, t: f64, dt: f64) -> f64 {
    (f(t + dt) - f(t - dt)) / (2.0 * dt)
}
