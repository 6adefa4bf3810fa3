//! Per-pixel Bézier displacement curves, their supervision loss and the
//! trajectory / two-view flow metrics.
//!
//! A curve of degree `n` has control points `P_0 = 0, P_1, ..., P_n`, so every
//! trajectory starts at its reference pixel. Time is normalized to `[0, 1]`
//! between the reference and target timestamps.

use nalgebra::{DMatrix, SVD};
use thiserror::Error;

use crate::codec::{Cursor, FormatError};
use crate::flow::FlowField;

pub const BEZIER_MAGIC: &[u8; 4] = b"BZF1";
/// Discount of earlier refinement iterates in [`trajectory_loss`].
pub const DEFAULT_DISCOUNT: f64 = 0.8;
pub const DEFAULT_DEGREE: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("normalized time {0} outside [0, 1]")]
    TauOutOfRange(f64),
    #[error("no iterates given")]
    EmptyIterates,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("no jointly valid pixels")]
    NoValidPixels,
    #[error("{samples} samples cannot determine a degree-{degree} curve")]
    Underdetermined { samples: usize, degree: usize },
    #[error("invalid ground truth: {0}")]
    BadGroundTruth(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BezierTrajectoryField {
    height: usize,
    width: usize,
    degree: usize,
    /// Reference and target timestamps, microseconds.
    pub t_ref: u64,
    pub t_target: u64,
    /// Pixel-major: pixel `i` owns `control[i * degree..(i + 1) * degree]`.
    control: Vec<[f64; 2]>,
}

impl BezierTrajectoryField {
    /// All control points zero: every pixel stays put.
    pub fn zeros(height: usize, width: usize, degree: usize, t_ref: u64, t_target: u64) -> Self {
        assert!(degree >= 1, "degree must be positive");
        Self {
            height,
            width,
            degree,
            t_ref,
            t_target,
            control: vec![[0.0; 2]; height * width * degree],
        }
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
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `P_1..P_n` of one pixel.
    pub fn control_points(&self, x: usize, y: usize) -> &[[f64; 2]] {
        let i = (y * self.width + x) * self.degree;
        &self.control[i..i + self.degree]
    }

    pub fn control_points_mut(&mut self, x: usize, y: usize) -> &mut [[f64; 2]] {
        let i = (y * self.width + x) * self.degree;
        &mut self.control[i..i + self.degree]
    }

    /// Normalized time of an absolute timestamp.
    pub fn normalized_time(&self, t: u64) -> f64 {
        (t as f64 - self.t_ref as f64) / (self.t_target as f64 - self.t_ref as f64)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.control {
            p[0] *= s;
            p[1] *= s;
        }
        out
    }

    /// Displacement of one pixel at `tau` by de Casteljau's recursion.
    pub fn displacement(&self, x: usize, y: usize, tau: f64) -> [f64; 2] {
        de_casteljau(self.control_points(x, y), tau)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.control.len());
        out.extend_from_slice(BEZIER_MAGIC);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.degree as u32).to_le_bytes());
        out.extend_from_slice(&self.t_ref.to_le_bytes());
        out.extend_from_slice(&self.t_target.to_le_bytes());
        for p in &self.control {
            out.extend_from_slice(&(p[0] as f32).to_le_bytes());
            out.extend_from_slice(&(p[1] as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut cur = Cursor::with_magic(bytes, BEZIER_MAGIC)?;
        let height = cur.u32()? as usize;
        let width = cur.u32()? as usize;
        let degree = cur.u32()? as usize;
        if degree == 0 {
            return Err(FormatError::BadHeader("degree 0".into()));
        }
        let t_ref = cur.u64()?;
        let t_target = cur.u64()?;
        let n = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(degree))
            .ok_or_else(|| FormatError::BadHeader("dimensions overflow".into()))?;
        if cur.remaining() < n * 8 {
            return Err(FormatError::Truncated);
        }
        let mut control = Vec::with_capacity(n);
        for _ in 0..n {
            control.push([cur.f32()? as f64, cur.f32()? as f64]);
        }
        cur.finish()?;
        Ok(Self { height, width, degree, t_ref, t_target, control })
    }
}

fn de_casteljau(points: &[[f64; 2]], tau: f64) -> [f64; 2] {
    let mut work = Vec::with_capacity(points.len() + 1);
    work.push([0.0, 0.0]);
    work.extend_from_slice(points);
    let s = 1.0 - tau;
    for level in (1..work.len()).rev() {
        for i in 0..level {
            work[i] = [s * work[i][0] + tau * work[i + 1][0], s * work[i][1] + tau * work[i + 1][1]];
        }
    }
    work[0]
}

/// Bernstein basis `C(n, i) (1 - tau)^(n - i) tau^i`.
pub fn bernstein(n: usize, i: usize, tau: f64) -> f64 {
    let mut binom = 1.0;
    for k in 0..i {
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    binom * (1.0 - tau).powi((n - i) as i32) * tau.powi(i as i32)
}

/// Displacement field at normalized time `tau`; every pixel is valid.
pub fn bezier_eval(field: &BezierTrajectoryField, tau: f64) -> Result<FlowField, TrajectoryError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(TrajectoryError::TauOutOfRange(tau));
    }
    Ok(FlowField::from_fn(field.height, field.width, |x, y| {
        Some(field.displacement(x, y, tau))
    }))
}

/// Ground-truth displacements at normalized times `T_1 < ... < T_Nk`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGroundTruth {
    times: Vec<f64>,
    flows: Vec<FlowField>,
}

impl TrajectoryGroundTruth {
    pub fn new(times: Vec<f64>, flows: Vec<FlowField>) -> Result<Self, TrajectoryError> {
        if times.is_empty() {
            return Err(TrajectoryError::BadGroundTruth("at least one sample required".into()));
        }
        if times.len() != flows.len() {
            return Err(TrajectoryError::BadGroundTruth(format!(
                "{} times but {} flows",
                times.len(),
                flows.len()
            )));
        }
        if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(TrajectoryError::BadGroundTruth("times must lie in [0, 1]".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TrajectoryError::BadGroundTruth("times must be strictly increasing".into()));
        }
        let dims = flows[0].dims();
        if flows.iter().any(|f| f.dims() != dims) {
            return Err(TrajectoryError::DimMismatch("ground-truth flows differ in size".into()));
        }
        Ok(Self { times, flows })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn flows(&self) -> &[FlowField] {
        &self.flows
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.flows[0].dims()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            times: self.times.clone(),
            flows: self.flows.iter().map(|f| f.scaled(s)).collect(),
        }
    }

    /// Samples `field` at the ground-truth times; validity follows the
    /// ground truth.
    pub fn sample(field: &BezierTrajectoryField, like: &TrajectoryGroundTruth) -> Result<Self, TrajectoryError> {
        let flows = like
            .times
            .iter()
            .zip(&like.flows)
            .map(|(&t, gt)| {
                let full = bezier_eval(field, t)?;
                Ok(FlowField::from_fn(gt.height(), gt.width(), |x, y| {
                    gt.is_valid(x, y).then(|| full.raw(x, y))
                }))
            })
            .collect::<Result<Vec<_>, TrajectoryError>>()?;
        Self::new(like.times.clone(), flows)
    }
}

fn check_dims(field: &BezierTrajectoryField, gt: &TrajectoryGroundTruth) -> Result<(), TrajectoryError> {
    if field.dims() != gt.dims() {
        return Err(TrajectoryError::DimMismatch(format!(
            "trajectory field {:?} vs ground truth {:?}",
            field.dims(),
            gt.dims()
        )));
    }
    Ok(())
}

/// Mean over ground-truth-valid pixels of `|du| + |dv|`.
fn mean_l1_at(field: &BezierTrajectoryField, tau: f64, gt: &FlowField) -> Result<f64, TrajectoryError> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (x, y, g) in gt.iter_valid() {
        let b = field.displacement(x, y, tau);
        total += (g[0] - b[0]).abs() + (g[1] - b[1]).abs();
        n += 1;
    }
    if n == 0 {
        return Err(TrajectoryError::NoValidPixels);
    }
    Ok(total / n as f64)
}

/// Discounted multi-iterate L1 loss.
///
/// `(1 / Nk) * sum_i discount^(Ni - i) * sum_k meanL1(f_gt(T_k) - B_i(T_k))`,
/// with iterates ordered from first (`i = 1`) to final (`i = Ni`).
pub fn trajectory_loss(
    iterates: &[BezierTrajectoryField],
    gt: &TrajectoryGroundTruth,
    discount: f64,
) -> Result<f64, TrajectoryError> {
    if iterates.is_empty() {
        return Err(TrajectoryError::EmptyIterates);
    }
    if !(discount > 0.0 && discount <= 1.0) {
        return Err(TrajectoryError::BadParameter(format!("discount {discount} outside (0, 1]")));
    }
    let n_iter = iterates.len();
    let mut loss = 0.0;
    for (i, field) in iterates.iter().enumerate() {
        check_dims(field, gt)?;
        let weight = discount.powi((n_iter - 1 - i) as i32);
        let mut per_iterate = 0.0;
        for (&tau, flow) in gt.times.iter().zip(&gt.flows) {
            per_iterate += mean_l1_at(field, tau, flow)?;
        }
        loss += weight * per_iterate;
    }
    Ok(loss / gt.len() as f64)
}

/// Endpoint error and angular error (degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowErrors {
    pub epe: f64,
    pub ae: f64,
}

/// Angle between `(u1, v1, 1)` and `(u2, v2, 1)` in degrees.
pub fn angular_error(pred: [f64; 2], gt: [f64; 2]) -> f64 {
    let dot = pred[0] * gt[0] + pred[1] * gt[1] + 1.0;
    let norm = (pred[0] * pred[0] + pred[1] * pred[1] + 1.0).sqrt() * (gt[0] * gt[0] + gt[1] * gt[1] + 1.0).sqrt();
    (dot / norm).clamp(-1.0, 1.0).acos().to_degrees()
}

/// EPE and space-time AE averaged over pixels valid in both fields.
pub fn two_view_metrics(pred: &FlowField, gt: &FlowField) -> Result<FlowErrors, TrajectoryError> {
    if pred.dims() != gt.dims() {
        return Err(TrajectoryError::DimMismatch(format!("{:?} vs {:?}", pred.dims(), gt.dims())));
    }
    let (mut epe, mut ae, mut n) = (0.0, 0.0, 0usize);
    for (x, y, g) in gt.iter_valid() {
        let Some(p) = pred.get(x, y) else { continue };
        epe += ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt();
        ae += angular_error(p, g);
        n += 1;
    }
    if n == 0 {
        return Err(TrajectoryError::NoValidPixels);
    }
    Ok(FlowErrors {
        epe: epe / n as f64,
        ae: ae / n as f64,
    })
}

/// TEPE / TAE: two-view errors averaged uniformly over the ground-truth times.
pub fn trajectory_metrics(pred: &BezierTrajectoryField, gt: &TrajectoryGroundTruth) -> Result<FlowErrors, TrajectoryError> {
    check_dims(pred, gt)?;
    let mut sum = FlowErrors { epe: 0.0, ae: 0.0 };
    for (&tau, flow) in gt.times.iter().zip(&gt.flows) {
        let e = two_view_metrics(&bezier_eval(pred, tau)?, flow)?;
        sum.epe += e.epe;
        sum.ae += e.ae;
    }
    let k = gt.len() as f64;
    Ok(FlowErrors {
        epe: sum.epe / k,
        ae: sum.ae / k,
    })
}

/// Least-squares Bézier fit per pixel with `P_0 = 0`.
///
/// Pixels valid at every sample share one pseudo-inverse; pixels with some
/// invalid samples are fitted on their valid subset when it has at least
/// `degree` samples and are left at zero otherwise.
pub fn fit_bezier(
    gt: &TrajectoryGroundTruth,
    degree: usize,
    t_ref: u64,
    t_target: u64,
) -> Result<BezierTrajectoryField, TrajectoryError> {
    if degree == 0 {
        return Err(TrajectoryError::BadParameter("degree must be positive".into()));
    }
    if gt.len() < degree {
        return Err(TrajectoryError::Underdetermined { samples: gt.len(), degree });
    }
    let (h, w) = gt.dims();
    let mut field = BezierTrajectoryField::zeros(h, w, degree, t_ref, t_target);
    let all: Vec<usize> = (0..gt.len()).collect();
    let full_solver = pseudo_inverse(&gt.times, &all, degree);

    for y in 0..h {
        for x in 0..w {
            let rows: Vec<usize> = (0..gt.len()).filter(|&k| gt.flows[k].is_valid(x, y)).collect();
            if rows.len() < degree {
                continue;
            }
            let local;
            let solver = if rows.len() == gt.len() {
                &full_solver
            } else {
                local = pseudo_inverse(&gt.times, &rows, degree);
                &local
            };
            let rhs = DMatrix::from_fn(rows.len(), 2, |r, c| gt.flows[rows[r]].raw(x, y)[c]);
            let sol = solver * rhs;
            for (i, p) in field.control_points_mut(x, y).iter_mut().enumerate() {
                *p = [sol[(i, 0)], sol[(i, 1)]];
            }
        }
    }
    Ok(field)
}

fn pseudo_inverse(times: &[f64], rows: &[usize], degree: usize) -> DMatrix<f64> {
    let basis = DMatrix::from_fn(rows.len(), degree, |r, c| bernstein(degree, c + 1, times[rows[r]]));
    SVD::new(basis, true, true)
        .pseudo_inverse(1e-12)
        .expect("SVD with both factors requested")
}
