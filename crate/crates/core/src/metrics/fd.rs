//! Fréchet distance between Gaussian fits of hand-crafted layout features.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::layout::{Layout, N_MAX};
use crate::rules::{alignment_score, hue_saturation, RuleConfig};

pub const FEATURE_DIM: usize = 22;
/// Smallest set size accepted by [`layout_fd`] (one more than the feature dimension).
pub const MIN_FD_SET: usize = FEATURE_DIM + 1;
pub const COVARIANCE_RIDGE: f64 = 1e-6;

const OCC_SIDE: usize = 4;

/// `[count, mean area, std area, alignment, mean hue, mean saturation, 4×4 occupancy]`.
pub fn layout_features(layout: &Layout, rules: &RuleConfig) -> [f64; FEATURE_DIM] {
    let mut f = [0.0; FEATURE_DIM];
    let visible: Vec<_> = layout.visible().collect();
    f[0] = visible.len() as f64 / N_MAX as f64;

    let boxes: Vec<_> = visible.iter().filter(|c| !c.is_background()).collect();
    if !boxes.is_empty() {
        let areas: Vec<f64> = boxes.iter().map(|c| c.area()).collect();
        let mean = areas.iter().sum::<f64>() / areas.len() as f64;
        let var = areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / areas.len() as f64;
        f[1] = mean;
        f[2] = var.sqrt();
    }
    f[3] = alignment_score(layout, rules);

    let hs: Vec<(f64, f64)> = visible.iter().map(|c| hue_saturation(c.color)).collect();
    let chromatic: Vec<f64> = hs.iter().filter(|(_, s)| *s > 0.1).map(|(h, _)| *h).collect();
    if !chromatic.is_empty() {
        let (s, c) = chromatic.iter().fold((0.0, 0.0), |(s, c), h| {
            let r = h.to_radians();
            (s + r.sin(), c + r.cos())
        });
        f[4] = s.atan2(c).to_degrees().rem_euclid(360.0) / 360.0;
    }
    if !hs.is_empty() {
        f[5] = hs.iter().map(|(_, s)| s).sum::<f64>() / hs.len() as f64;
    }

    let cell = 1.0 / OCC_SIDE as f64;
    for row in 0..OCC_SIDE {
        for col in 0..OCC_SIDE {
            let (x0, y0) = (col as f64 * cell, row as f64 * cell);
            let covered: f64 = boxes
                .iter()
                .map(|c| {
                    let ox = (c.right().min(x0 + cell) - c.left().max(x0)).max(0.0);
                    let oy = (c.bottom().min(y0 + cell) - c.top().max(y0)).max(0.0);
                    ox * oy
                })
                .sum();
            if covered / (cell * cell) >= 0.5 {
                f[6 + row * OCC_SIDE + col] = 1.0;
            }
        }
    }
    f
}

/// Mean and sample covariance (plus ridge) of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianFit {
    pub fn of(features: &[[f64; FEATURE_DIM]]) -> Result<Self> {
        let n = features.len();
        if n < MIN_FD_SET {
            return Err(Error::InvalidArgument(format!(
                "layout-FD needs at least {MIN_FD_SET} layouts per set, got {n}"
            )));
        }
        let data = DMatrix::from_fn(n, FEATURE_DIM, |i, j| features[i][j]);
        let mean = DVector::from_fn(FEATURE_DIM, |j, _| data.column(j).sum() / n as f64);
        let mut centered = data;
        for j in 0..FEATURE_DIM {
            let m = mean[j];
            centered.column_mut(j).add_scalar_mut(-m);
        }
        let mut cov = centered.transpose() * &centered / (n - 1) as f64;
        for j in 0..FEATURE_DIM {
            cov[(j, j)] += COVARIANCE_RIDGE;
        }
        Ok(Self { mean, cov })
    }
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `√(‖μa − μb‖² + tr(Σa + Σb − 2(ΣaΣb)^{1/2}))`. The trace of `(ΣaΣb)^{1/2}` is taken as the
/// sum of singular values of `Σa^{1/2} Σb^{1/2}`, which keeps the ridge-sized directions accurate
/// enough for identical sets to score below `1e-6`.
pub fn frechet_distance(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> f64 {
    let diff = mean_a - mean_b;
    let cross: f64 = (symmetric_sqrt(cov_a) * symmetric_sqrt(cov_b))
        .singular_values()
        .sum();
    let fd2 = diff.norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    fd2.max(0.0).sqrt()
}

pub fn layout_fd(set_a: &[Layout], set_b: &[Layout], rules: &RuleConfig) -> Result<f64> {
    let fa: Vec<_> = set_a.iter().map(|l| layout_features(l, rules)).collect();
    let fb: Vec<_> = set_b.iter().map(|l| layout_features(l, rules)).collect();
    let (a, b) = (GaussianFit::of(&fa)?, GaussianFit::of(&fb)?);
    Ok(frechet_distance(&a.mean, &a.cov, &b.mean, &b.cov))
}
