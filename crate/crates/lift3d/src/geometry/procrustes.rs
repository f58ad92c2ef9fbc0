//! Reconstruction error as mean landmark distance after similarity alignment.
//!
//! Both shapes are centered; the ground truth is normalized so the mean
//! Euclidean norm of its centered landmarks is 1, which fixes the unit the
//! error is reported in. The reconstruction is then aligned onto the
//! normalized truth with the rotation + uniform positive scale minimizing the
//! summed squared distance (SVD of the 3×3 cross-covariance, determinant sign
//! corrected so reflections are never used). The reported figure is the mean
//! per-landmark distance after that alignment.

use nalgebra::{DVector, Matrix3, Matrix3xX};

use crate::error::{Error, Result};
use crate::geometry::Shape3D;

#[derive(Debug, Clone)]
pub struct ProcrustesAlignment {
    /// Mean per-landmark distance after alignment (in normalized-truth units).
    pub mean_error: f64,
    /// Distance per landmark after alignment; `mean_error` is its mean.
    pub residuals: DVector<f64>,
    /// Rotation applied to the centered reconstruction.
    pub rotation: Matrix3<f64>,
    /// Uniform scale applied to the centered reconstruction.
    pub scale: f64,
}

fn centered(shape: &Shape3D) -> Matrix3xX<f64> {
    let mut c = shape.coords().clone();
    for i in 0..3 {
        let m = c.row(i).mean();
        for j in 0..c.ncols() {
            c[(i, j)] -= m;
        }
    }
    c
}

fn max_abs(m: &Matrix3xX<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
}

pub fn procrustes_align(recon: &Shape3D, truth: &Shape3D) -> Result<ProcrustesAlignment> {
    if recon.n() != truth.n() {
        return Err(Error::LengthMismatch {
            context: "procrustes landmark count",
            expected: truth.n(),
            got: recon.n(),
        });
    }
    let n = truth.n();
    let p = centered(recon);
    let mut q = centered(truth);

    let q_scale = q.column_iter().map(|c| c.norm()).sum::<f64>() / n as f64;
    if q_scale <= 1e-12 * max_abs(&q) || q_scale == 0.0 {
        return Err(Error::DegenerateShape(
            "ground truth has zero spread".into(),
        ));
    }
    q /= q_scale;

    let p_sq = p.iter().map(|v| v * v).sum::<f64>();
    if p_sq.sqrt() <= 1e-12 * max_abs(&p) || p_sq == 0.0 {
        return Err(Error::DegenerateShape(
            "reconstruction has zero spread".into(),
        ));
    }

    // Cross-covariance of normalized truth with reconstruction; the optimal
    // rotation maximizes tr(R·Mᵀ) over proper rotations.
    let m = &q * p.transpose();
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 svd with u");
    let v_t = svd.v_t.expect("3x3 svd with v_t");
    let sv = svd.singular_values;
    let det = (u * v_t).determinant();
    let d = if det < 0.0 { -1.0 } else { 1.0 };
    let mut flip = Matrix3::identity();
    flip[(2, 2)] = d;
    let rotation = u * flip * v_t;
    let scale = (sv[0] + sv[1] + d * sv[2]) / p_sq;

    let aligned = (&rotation * &p) * scale;
    let residuals =
        DVector::from_iterator(n, (0..n).map(|j| (aligned.column(j) - q.column(j)).norm()));
    let mean_error = residuals.mean();

    Ok(ProcrustesAlignment {
        mean_error,
        residuals,
        rotation,
        scale,
    })
}

/// Mean per-landmark distance after similarity alignment; see module docs.
pub fn procrustes_error(recon: &Shape3D, truth: &Shape3D) -> Result<f64> {
    Ok(procrustes_align(recon, truth)?.mean_error)
}
