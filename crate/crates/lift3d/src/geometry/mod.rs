//! Shapes, cameras, standardization, and the alignment-based error metric.
//!
//! Coordinates live in 3×n / 2×n matrices (rows x,y,z / u,v; one column per
//! landmark). Standardization removes per-row means and divides every row by
//! the pooled population spread s = (σ(x)+σ(y))/2 — the same pooled scale for
//! all rows, which is what makes a weak-perspective camera factor cancel:
//! standardized image coordinates equal the standardized x,y of the shape.

mod procrustes;

pub use procrustes::{procrustes_align, procrustes_error, ProcrustesAlignment};

use nalgebra::{Matrix2xX, Matrix3, Matrix3xX, Vector3};

use crate::error::{Error, Result};

/// Relative threshold under which the pooled spread counts as degenerate.
const DEGENERACY_REL_TOL: f64 = 1e-12;

/// A 3D shape as an ordered set of landmark coordinates (rows x, y, z).
#[derive(Debug, Clone, PartialEq)]
pub struct Shape3D {
    coords: Matrix3xX<f64>,
}

impl Shape3D {
    /// At least 3 landmarks, all coordinates finite.
    pub fn new(coords: Matrix3xX<f64>) -> Result<Self> {
        if coords.ncols() < 3 {
            return Err(Error::InvariantViolation(format!(
                "a shape needs at least 3 landmarks, got {}",
                coords.ncols()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvariantViolation(
                "shape contains a non-finite coordinate".into(),
            ));
        }
        Ok(Self { coords })
    }

    pub fn from_rows(x: &[f64], y: &[f64], z: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() != z.len() {
            return Err(Error::LengthMismatch {
                context: "Shape3D rows",
                expected: x.len(),
                got: if y.len() != x.len() { y.len() } else { z.len() },
            });
        }
        let cols: Vec<Vector3<f64>> = (0..x.len())
            .map(|i| Vector3::new(x[i], y[i], z[i]))
            .collect();
        Self::new(Matrix3xX::from_columns(&cols))
    }

    pub fn n(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &Matrix3xX<f64> {
        &self.coords
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    pub fn landmark(&self, j: usize) -> Vector3<f64> {
        self.coords.column(j).into()
    }
}

/// 2D landmarks with a per-landmark visibility mask. Unobserved slots are
/// canonically zero so downstream code never reads stale values.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmarks2D {
    coords: Matrix2xX<f64>,
    mask: Vec<bool>,
}

impl Landmarks2D {
    /// All landmarks observed.
    pub fn new(coords: Matrix2xX<f64>) -> Result<Self> {
        let mask = vec![true; coords.ncols()];
        Self::with_mask(coords, mask)
    }

    /// `mask[j]` is true when landmark j was observed. Needs at least 3
    /// observed landmarks; observed coordinates must be finite. Coordinates
    /// at unobserved slots are zeroed.
    pub fn with_mask(mut coords: Matrix2xX<f64>, mask: Vec<bool>) -> Result<Self> {
        let n = coords.ncols();
        if n < 3 {
            return Err(Error::InvariantViolation(format!(
                "2D landmarks need at least 3 points, got {n}"
            )));
        }
        if mask.len() != n {
            return Err(Error::LengthMismatch {
                context: "Landmarks2D mask",
                expected: n,
                got: mask.len(),
            });
        }
        let observed = mask.iter().filter(|&&m| m).count();
        if observed < 3 {
            return Err(Error::InvariantViolation(format!(
                "at least 3 landmarks must be observed, got {observed}"
            )));
        }
        for (j, &m) in mask.iter().enumerate() {
            if m {
                if !coords[(0, j)].is_finite() || !coords[(1, j)].is_finite() {
                    return Err(Error::InvariantViolation(format!(
                        "observed landmark {j} has a non-finite coordinate"
                    )));
                }
            } else {
                coords[(0, j)] = 0.0;
                coords[(1, j)] = 0.0;
            }
        }
        Ok(Self { coords, mask })
    }

    pub fn from_rows(u: &[f64], v: &[f64]) -> Result<Self> {
        Self::from_rows_masked(u, v, &vec![true; u.len()])
    }

    pub fn from_rows_masked(u: &[f64], v: &[f64], mask: &[bool]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::LengthMismatch {
                context: "Landmarks2D rows",
                expected: u.len(),
                got: v.len(),
            });
        }
        let coords = Matrix2xX::from_iterator(
            u.len(),
            (0..u.len()).flat_map(|j| [u[j], v[j]]),
        );
        Self::with_mask(coords, mask.to_vec())
    }

    pub fn n(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &Matrix2xX<f64> {
        &self.coords
    }

    /// Mutable coordinate access for in-place perturbation. Slots of missing
    /// landmarks are zero by construction and must stay that way.
    pub fn coords_mut(&mut self) -> &mut Matrix2xX<f64> {
        &mut self.coords
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }
}

/// Row means and pooled scale removed by standardization, kept so callers
/// can relate standardized output back to the input frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizationStats {
    pub mean_u: f64,
    pub mean_v: f64,
    /// Pooled population spread (σ(u)+σ(v))/2; always > 0.
    pub scale: f64,
}

/// Weak-perspective camera: u = λ·x, v = λ·y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPerspectiveCamera {
    lambda: f64,
}

impl WeakPerspectiveCamera {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "camera scale must be finite and positive, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Rotation as extrinsic Euler angles in degrees, applied as
/// R = Rz(rz)·Ry(ry)·Rx(rx).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl EulerAngles {
    pub fn new(rx: f64, ry: f64, rz: f64) -> Self {
        Self { rx, ry, rz }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let (sx, cx) = self.rx.to_radians().sin_cos();
        let (sy, cy) = self.ry.to_radians().sin_cos();
        let (sz, cz) = self.rz.to_radians().sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
        let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
        let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
        rz * ry * rx
    }
}

fn population_std(values: impl Iterator<Item = f64> + Clone, mean: f64, count: usize) -> f64 {
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / count as f64).sqrt()
}

/// Center each row on its own mean and divide all three rows by the pooled
/// 2D spread s = (σ(x)+σ(y))/2. Depth is scaled by the same s, so the
/// standardized shape is the one a standardized image determines up to scale.
pub fn standardize_3d(shape: &Shape3D) -> Result<(Shape3D, StandardizationStats)> {
    let c = shape.coords();
    let n = c.ncols();
    let mx = c.row(0).mean();
    let my = c.row(1).mean();
    let mz = c.row(2).mean();
    let sx = population_std(c.row(0).iter().copied(), mx, n);
    let sy = population_std(c.row(1).iter().copied(), my, n);
    let s = (sx + sy) / 2.0;
    let max_abs = c.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if s <= DEGENERACY_REL_TOL * max_abs || s == 0.0 {
        return Err(Error::DegenerateShape(format!(
            "pooled 2D spread {s:.3e} is negligible relative to coordinate magnitude {max_abs:.3e}"
        )));
    }
    let mut out = c.clone();
    for j in 0..n {
        out[(0, j)] = (out[(0, j)] - mx) / s;
        out[(1, j)] = (out[(1, j)] - my) / s;
        out[(2, j)] = (out[(2, j)] - mz) / s;
    }
    Ok((
        Shape3D::new(out)?,
        StandardizationStats {
            mean_u: mx,
            mean_v: my,
            scale: s,
        },
    ))
}

/// 2D counterpart of [`standardize_3d`]. Statistics come from observed
/// landmarks only; unobserved slots stay zero and keep their mask for the
/// imputer.
pub fn standardize_2d(lm: &Landmarks2D) -> Result<(Landmarks2D, StandardizationStats)> {
    let c = lm.coords();
    let obs: Vec<usize> = (0..lm.n()).filter(|&j| lm.mask()[j]).collect();
    let k = obs.len();
    let mu = obs.iter().map(|&j| c[(0, j)]).sum::<f64>() / k as f64;
    let mv = obs.iter().map(|&j| c[(1, j)]).sum::<f64>() / k as f64;
    let su = population_std(obs.iter().map(|&j| c[(0, j)]), mu, k);
    let sv = population_std(obs.iter().map(|&j| c[(1, j)]), mv, k);
    let s = (su + sv) / 2.0;
    let max_abs = obs
        .iter()
        .flat_map(|&j| [c[(0, j)].abs(), c[(1, j)].abs()])
        .fold(0.0_f64, f64::max);
    if s <= DEGENERACY_REL_TOL * max_abs || s == 0.0 {
        return Err(Error::DegenerateShape(format!(
            "pooled 2D spread {s:.3e} is negligible relative to coordinate magnitude {max_abs:.3e}"
        )));
    }
    let mut out = c.clone();
    for &j in &obs {
        out[(0, j)] = (out[(0, j)] - mu) / s;
        out[(1, j)] = (out[(1, j)] - mv) / s;
    }
    Ok((
        Landmarks2D::with_mask(out, lm.mask().to_vec())?,
        StandardizationStats {
            mean_u: mu,
            mean_v: mv,
            scale: s,
        },
    ))
}

/// u = λ·x, v = λ·y; every landmark observed.
pub fn project_weak_perspective(shape: &Shape3D, cam: &WeakPerspectiveCamera) -> Landmarks2D {
    let c = shape.coords();
    let coords = Matrix2xX::from_iterator(
        c.ncols(),
        (0..c.ncols()).flat_map(|j| [cam.lambda * c[(0, j)], cam.lambda * c[(1, j)]]),
    );
    Landmarks2D::new(coords).expect("projection of a valid shape is valid")
}

pub fn rotate_shape(shape: &Shape3D, angles: &EulerAngles) -> Shape3D {
    let r = angles.rotation_matrix();
    Shape3D {
        coords: &r * shape.coords(),
    }
}

/// Stack standardized image coordinates on top of predicted depths. The
/// landmarks must all be present (imputation happens before this step).
pub fn assemble_reconstruction(uv: &Landmarks2D, depth: &[f64]) -> Result<Shape3D> {
    if !uv.is_complete() {
        return Err(Error::InvariantViolation(
            "cannot assemble a reconstruction from incomplete landmarks".into(),
        ));
    }
    if depth.len() != uv.n() {
        return Err(Error::LengthMismatch {
            context: "assemble_reconstruction depth",
            expected: uv.n(),
            got: depth.len(),
        });
    }
    let c = uv.coords();
    let cols: Vec<Vector3<f64>> = (0..uv.n())
        .map(|j| Vector3::new(c[(0, j)], c[(1, j)], depth[j]))
        .collect();
    Shape3D::new(Matrix3xX::from_columns(&cols))
}
