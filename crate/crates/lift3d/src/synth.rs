//! Synthetic 3D landmark dataset generators.
//!
//! Three shape families provide desk-scale stand-ins for the motion-capture,
//! deformable-surface, and rigid-object data the method is normally trained
//! on:
//!
//! - **chain** — an articulated kinematic tree. With the default `n = 15` it
//!   is a stylized human skeleton (pelvis, neck, head, and left/right
//!   shoulder–elbow–wrist and hip–knee–ankle limbs) whose joints bend by
//!   random angles; for other `n` it degenerates to a serial chain of equal
//!   links with random bends at every internal joint. Bone lengths are
//!   invariant under articulation.
//! - **sheet** — an `n`-landmark grid displaced by a smooth additive
//!   sinusoidal depth field `z = a_x sin(2π f_x x + φ_x) + a_y sin(2π f_y y
//!   + φ_y)`, with a gradient-coupled in-plane warp so the grid stretches
//!   where the surface bends (cloth/flag analog) and a single 2D view
//!   carries an imprint of the depth field. Samples are generated in a
//!   canonical attitude; pose variation is the job of training-time
//!   rotation augmentation.
//! - **box** — a fixed cuboid wireframe template (corners, then edge
//!   midpoints, then face centers) with per-sample axis scaling and small
//!   vertex jitter (rigid-object analog).
//!
//! All generators are deterministic functions of the spec: the same
//! [`SyntheticFamilySpec`] always yields a byte-identical dataset.

use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetFile;
use crate::error::{Error, Result};
use crate::geometry::Shape3D;
use crate::rng::{self, TAG_SYNTH};

/// Which synthetic shape family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Articulated kinematic tree (human-skeleton analog).
    Chain,
    /// Grid displaced by smooth sinusoidal depth fields (flag analog).
    Sheet,
    /// Fixed cuboid template with per-sample jitter (rigid-object analog).
    Box,
}

impl FamilyKind {
    /// Lower-case name used in sample ids and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Chain => "chain",
            FamilyKind::Sheet => "sheet",
            FamilyKind::Box => "box",
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(FamilyKind::Chain),
            "sheet" => Ok(FamilyKind::Sheet),
            "box" => Ok(FamilyKind::Box),
            other => Err(Error::InvalidSpec(format!(
                "unknown family kind '{other}'; expected one of chain, sheet, box"
            ))),
        }
    }
}

/// Deformation parameters for the chain family, in degrees.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainParams {
    /// Maximum flexion magnitude for limb joints (elbows, knees, shoulders,
    /// hips). Zero freezes every sample at the rest pose. Range [0, 90].
    pub bend_range: f64,
    /// Maximum sway magnitude for the spine and neck. Range [0, 90].
    pub sway_range: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self { bend_range: 40.0, sway_range: 15.0 }
    }
}

/// Deformation parameters for the sheet family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SheetParams {
    /// Wave amplitude range `[lo, hi]` for each of the two sinusoids, as a
    /// fraction of the unit grid extent. Zero amplitude gives planar sheets.
    pub amplitude: (f64, f64),
    /// Spatial frequency range `[lo, hi]` in cycles across the grid extent.
    pub frequency: (f64, f64),
    /// In-plane gradient coupling: landmarks shift along the surface slope
    /// by `warp` times the local depth gradient, imitating how a bending
    /// sheet drags its material points. Range [-0.5, 0.5].
    pub warp: f64,
}

/// The defaults keep depth recoverable from a single 2D view: amplitudes sit
/// near the top of the range the depth standardization can express through a
/// tanh output layer (so each sample carries as much depth signal as the
/// model can target), the frequency band is narrow (so the depth field is a
/// mildly modulated combination of two fixed spatial waves rather than an
/// arbitrary chirp), and the warp is strong enough that the in-plane imprint
/// of the depth field stands clear of the default 3% landmark noise.
impl Default for SheetParams {
    fn default() -> Self {
        Self { amplitude: (0.12, 0.16), frequency: (0.35, 0.45), warp: -0.35 }
    }
}

/// Deformation parameters for the box family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxParams {
    /// Per-axis scale is drawn from `[1 - aspect_jitter, 1 + aspect_jitter]`.
    /// Range [0, 0.9].
    pub aspect_jitter: f64,
    /// Standard deviation of per-vertex Gaussian jitter. Range [0, 0.2].
    pub vertex_jitter: f64,
}

impl Default for BoxParams {
    fn default() -> Self {
        Self { aspect_jitter: 0.2, vertex_jitter: 0.02 }
    }
}

/// Full description of a synthetic dataset: family, landmark count, sample
/// count, per-family deformation parameters, and the seed that makes
/// generation deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFamilySpec {
    /// Shape family to generate.
    pub kind: FamilyKind,
    /// Landmarks per sample (chain defaults to the 15-landmark skeleton).
    pub n: usize,
    /// Number of samples.
    pub sample_count: usize,
    /// Generation seed.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Chain deformation parameters (used when `kind == Chain`).
    #[serde(default)]
    pub chain: ChainParams,
    /// Sheet deformation parameters (used when `kind == Sheet`).
    #[serde(default)]
    pub sheet: SheetParams,
    /// Box deformation parameters (used when `kind == Box`).
    #[serde(default, rename = "box")]
    pub box_: BoxParams,
}

fn default_seed() -> u64 {
    7
}

impl SyntheticFamilySpec {
    /// A spec with default deformation parameters for the given family.
    pub fn new(kind: FamilyKind, n: usize, sample_count: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            sample_count,
            seed,
            chain: ChainParams::default(),
            sheet: SheetParams::default(),
            box_: BoxParams::default(),
        }
    }

    /// The default sheet dataset: 20 landmarks, 460 samples (sized for a
    /// 300 train / 60 validation / 100 test split), seed 7.
    pub fn sheet_default() -> Self {
        Self::new(FamilyKind::Sheet, 20, 460, default_seed())
    }

    /// The default chain dataset: the 15-landmark skeleton, 460 samples,
    /// seed 7.
    pub fn chain_default() -> Self {
        Self::new(FamilyKind::Chain, 15, 460, default_seed())
    }

    /// The default box dataset: the 8-corner cuboid, 460 samples, seed 7.
    pub fn box_default() -> Self {
        Self::new(FamilyKind::Box, 8, 460, default_seed())
    }

    /// Checks every parameter against its documented range.
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidSpec(format!(
                "landmark count must be at least 3, got {}",
                self.n
            )));
        }
        if self.sample_count == 0 {
            return Err(Error::InvalidSpec("sample_count must be at least 1".to_string()));
        }
        match self.kind {
            FamilyKind::Chain => {
                let ChainParams { bend_range, sway_range } = self.chain;
                for (name, value) in [("bend_range", bend_range), ("sway_range", sway_range)] {
                    if !value.is_finite() || !(0.0..=90.0).contains(&value) {
                        return Err(Error::InvalidSpec(format!(
                            "chain {name} must lie in [0, 90] degrees, got {value}"
                        )));
                    }
                }
            }
            FamilyKind::Sheet => {
                let SheetParams { amplitude, frequency, warp } = self.sheet;
                validate_interval("sheet amplitude", amplitude, 0.0, 1.0)?;
                validate_interval("sheet frequency", frequency, 1e-6, 10.0)?;
                if !warp.is_finite() || warp.abs() > 0.5 {
                    return Err(Error::InvalidSpec(format!(
                        "sheet warp must lie in [-0.5, 0.5], got {warp}"
                    )));
                }
            }
            FamilyKind::Box => {
                let BoxParams { aspect_jitter, vertex_jitter } = self.box_;
                if !aspect_jitter.is_finite() || !(0.0..=0.9).contains(&aspect_jitter) {
                    return Err(Error::InvalidSpec(format!(
                        "box aspect_jitter must lie in [0, 0.9], got {aspect_jitter}"
                    )));
                }
                if !vertex_jitter.is_finite() || !(0.0..=0.2).contains(&vertex_jitter) {
                    return Err(Error::InvalidSpec(format!(
                        "box vertex_jitter must lie in [0, 0.2], got {vertex_jitter}"
                    )));
                }
                if self.n > BOX_TEMPLATE_CAPACITY {
                    return Err(Error::InvalidSpec(format!(
                        "box supports at most {BOX_TEMPLATE_CAPACITY} landmarks \
                         (8 corners + 12 edge midpoints + 6 face centers), got {}",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_interval(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi || lo < min || hi > max {
        return Err(Error::InvalidSpec(format!(
            "{name} must be an ordered interval within [{min}, {max}], got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Generates a deterministic synthetic dataset from a validated spec.
///
/// Sample ids are `<kind>-<index>` with zero-padded indices; the unit label
/// is `arbitrary`. Calling this twice with the same spec yields datasets
/// whose serialized text is byte-identical.
pub fn generate_synthetic(spec: &SyntheticFamilySpec) -> Result<DatasetFile> {
    spec.validate()?;
    let mut rng = rng::derive(spec.seed, &[TAG_SYNTH]);
    let mut dataset = DatasetFile::new(spec.n, "arbitrary")?;
    for i in 0..spec.sample_count {
        let shape = match spec.kind {
            FamilyKind::Chain => generate_chain(spec, &mut rng)?,
            FamilyKind::Sheet => generate_sheet(spec, &mut rng)?,
            FamilyKind::Box => generate_box(spec, &mut rng)?,
        };
        dataset.push(format!("{}-{i:04}", spec.kind.name()), shape)?;
    }
    Ok(dataset)
}

/// Draws uniformly from `[lo, hi]` (degenerate intervals return `lo`).
fn draw(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi { lo } else { rng.random_range(lo..=hi) }
}

// ---------------------------------------------------------------------------
// Chain family
// ---------------------------------------------------------------------------

/// Skeleton rest pose: landmark index -> (x, y, z).
const SKELETON_REST: [[f64; 3]; 15] = [
    [0.0, 0.0, 0.0],     // 0  pelvis
    [0.0, 0.55, 0.0],    // 1  neck
    [0.0, 0.8, 0.0],     // 2  head
    [0.2, 0.5, 0.0],     // 3  left shoulder
    [0.45, 0.3, 0.0],    // 4  left elbow
    [0.65, 0.05, 0.0],   // 5  left wrist
    [-0.2, 0.5, 0.0],    // 6  right shoulder
    [-0.45, 0.3, 0.0],   // 7  right elbow
    [-0.65, 0.05, 0.0],  // 8  right wrist
    [0.12, -0.05, 0.0],  // 9  left hip
    [0.15, -0.5, 0.0],   // 10 left knee
    [0.18, -0.95, 0.0],  // 11 left ankle
    [-0.12, -0.05, 0.0], // 12 right hip
    [-0.15, -0.5, 0.0],  // 13 right knee
    [-0.18, -0.95, 0.0], // 14 right ankle
];

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
    Z,
}

/// One articulated joint: rotate `subtree` around the `pivot` landmark by a
/// random angle about `axis`, drawn from `[lo, hi]` scaled by either the
/// bend range (`uses_bend`) or the sway range.
struct Joint {
    pivot: usize,
    subtree: &'static [usize],
    axis: Axis,
    lo: f64,
    hi: f64,
    uses_bend: bool,
}

/// Skeleton articulation, applied in order. Fractions are of the configured
/// bend/sway range; one-sided intervals give elbows and knees a natural
/// single bending direction.
const SKELETON_JOINTS: [Joint; 13] = [
    // Spine twist and side bend move everything above the pelvis.
    Joint { pivot: 0, subtree: &[1, 2, 3, 4, 5, 6, 7, 8], axis: Axis::Y, lo: -1.0, hi: 1.0, uses_bend: false },
    Joint { pivot: 0, subtree: &[1, 2, 3, 4, 5, 6, 7, 8], axis: Axis::Z, lo: -1.0, hi: 1.0, uses_bend: false },
    // Neck nods and tilts the head.
    Joint { pivot: 1, subtree: &[2], axis: Axis::X, lo: -1.0, hi: 1.0, uses_bend: false },
    Joint { pivot: 1, subtree: &[2], axis: Axis::Z, lo: -1.0, hi: 1.0, uses_bend: false },
    // Shoulders swing the whole arm; elbows bend one-sidedly.
    Joint { pivot: 3, subtree: &[4, 5], axis: Axis::Z, lo: -1.0, hi: 0.4, uses_bend: true },
    Joint { pivot: 3, subtree: &[4, 5], axis: Axis::X, lo: -0.5, hi: 0.5, uses_bend: true },
    Joint { pivot: 4, subtree: &[5], axis: Axis::Z, lo: 0.0, hi: 1.0, uses_bend: true },
    Joint { pivot: 6, subtree: &[7, 8], axis: Axis::Z, lo: -0.4, hi: 1.0, uses_bend: true },
    Joint { pivot: 6, subtree: &[7, 8], axis: Axis::X, lo: -0.5, hi: 0.5, uses_bend: true },
    Joint { pivot: 7, subtree: &[8], axis: Axis::Z, lo: -1.0, hi: 0.0, uses_bend: true },
    // Hips swing the legs forward/backward; knees bend one-sidedly.
    Joint { pivot: 9, subtree: &[10, 11], axis: Axis::X, lo: -0.6, hi: 0.6, uses_bend: true },
    Joint { pivot: 10, subtree: &[11], axis: Axis::X, lo: 0.0, hi: 1.0, uses_bend: true },
    Joint { pivot: 12, subtree: &[13, 14], axis: Axis::X, lo: -0.6, hi: 0.6, uses_bend: true },
];
// The right knee is articulated separately below because `Joint` arrays must
// be const-sized; see `generate_chain`.
const RIGHT_KNEE: Joint =
    Joint { pivot: 13, subtree: &[14], axis: Axis::X, lo: 0.0, hi: 1.0, uses_bend: true };

/// Rotates `points[subtree]` around `points[pivot]` by `angle_deg` about a
/// coordinate axis. An exactly-zero angle is a no-op so that zero-range
/// specs reproduce the rest pose bit-for-bit.
fn articulate(points: &mut [[f64; 3]], pivot: usize, subtree: &[usize], axis: Axis, angle_deg: f64) {
    if angle_deg == 0.0 {
        return;
    }
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let p = points[pivot];
    for &j in subtree {
        let d = [points[j][0] - p[0], points[j][1] - p[1], points[j][2] - p[2]];
        let r = match axis {
            Axis::X => [d[0], cos * d[1] - sin * d[2], sin * d[1] + cos * d[2]],
            Axis::Y => [cos * d[0] + sin * d[2], d[1], -sin * d[0] + cos * d[2]],
            Axis::Z => [cos * d[0] - sin * d[1], sin * d[0] + cos * d[1], d[2]],
        };
        points[j] = [p[0] + r[0], p[1] + r[1], p[2] + r[2]];
    }
}

fn generate_chain(spec: &SyntheticFamilySpec, rng: &mut impl rand::Rng) -> Result<Shape3D> {
    let ChainParams { bend_range, sway_range } = spec.chain;
    let mut points: Vec<[f64; 3]>;
    if spec.n == SKELETON_REST.len() {
        points = SKELETON_REST.to_vec();
        for joint in SKELETON_JOINTS.iter().chain(std::iter::once(&RIGHT_KNEE)) {
            let range = if joint.uses_bend { bend_range } else { sway_range };
            let angle = draw(rng, joint.lo * range, joint.hi * range);
            articulate(&mut points, joint.pivot, joint.subtree, joint.axis, angle);
        }
    } else {
        // Serial chain of n - 1 equal links rising along +y, with a random
        // two-axis bend at every internal joint.
        let link = 1.0 / (spec.n - 1) as f64;
        points = (0..spec.n).map(|j| [0.0, j as f64 * link, 0.0]).collect();
        let subtree_of = |j: usize| (j + 1..spec.n).collect::<Vec<_>>();
        for j in 1..spec.n - 1 {
            let subtree = subtree_of(j);
            let ax = draw(rng, -bend_range, bend_range);
            let az = draw(rng, -bend_range, bend_range);
            articulate(&mut points, j, &subtree, Axis::X, ax);
            articulate(&mut points, j, &subtree, Axis::Z, az);
        }
    }
    shape_from_points(&points)
}

// ---------------------------------------------------------------------------
// Sheet family
// ---------------------------------------------------------------------------

/// Splits `n` into `(rows, cols)` with `rows <= cols`, as close to square as
/// the divisors of `n` allow (primes fall back to a single row).
fn grid_dims(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    (rows.max(1), n / rows.max(1))
}

/// Evenly spaced coordinates spanning [-0.5, 0.5] (a single point sits at 0).
fn grid_axis(count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    (0..count).map(|i| i as f64 / (count - 1) as f64 - 0.5).collect()
}

fn generate_sheet(spec: &SyntheticFamilySpec, rng: &mut impl rand::Rng) -> Result<Shape3D> {
    let SheetParams { amplitude, frequency, warp } = spec.sheet;
    let (rows, cols) = grid_dims(spec.n);
    let xs = grid_axis(cols);
    let ys = grid_axis(rows);

    // Per-sample field parameters, drawn in a fixed order.
    let ax = draw(rng, amplitude.0, amplitude.1);
    let ay = draw(rng, amplitude.0, amplitude.1);
    let fx = draw(rng, frequency.0, frequency.1);
    let fy = draw(rng, frequency.0, frequency.1);
    let phase_x = draw(rng, 0.0, std::f64::consts::TAU);
    let phase_y = draw(rng, 0.0, std::f64::consts::TAU);

    let mut points = Vec::with_capacity(spec.n);
    for &y in &ys {
        for &x in &xs {
            let tx = std::f64::consts::TAU * fx * x + phase_x;
            let ty = std::f64::consts::TAU * fy * y + phase_y;
            let z = ax * tx.sin() + ay * ty.sin();
            // Material points drag along the local slope as the sheet bends.
            let x_w = x + warp * ax * std::f64::consts::TAU * fx * tx.cos();
            let y_w = y + warp * ay * std::f64::consts::TAU * fy * ty.cos();
            points.push([x_w, y_w, z]);
        }
    }
    shape_from_points(&points)
}

// ---------------------------------------------------------------------------
// Box family
// ---------------------------------------------------------------------------

/// Maximum landmarks the box template provides.
pub const BOX_TEMPLATE_CAPACITY: usize = 26;

/// Cuboid wireframe template: 8 corners, then 12 edge midpoints, then 6 face
/// centers, all on the unit cube [-0.5, 0.5]^3. A box spec with `n`
/// landmarks uses the first `n` entries.
fn box_template() -> Vec<[f64; 3]> {
    let h = 0.5;
    let mut t = Vec::with_capacity(BOX_TEMPLATE_CAPACITY);
    // Corners in x-fastest binary order.
    for &z in &[-h, h] {
        for &y in &[-h, h] {
            for &x in &[-h, h] {
                t.push([x, y, z]);
            }
        }
    }
    // Edge midpoints: one coordinate 0, the other two at +/- h.
    for axis in 0..3 {
        for &a in &[-h, h] {
            for &b in &[-h, h] {
                let mut p = [0.0; 3];
                p[(axis + 1) % 3] = a;
                p[(axis + 2) % 3] = b;
                t.push(p);
            }
        }
    }
    // Face centers: one coordinate at +/- h, the others 0.
    for axis in 0..3 {
        for &a in &[-h, h] {
            let mut p = [0.0; 3];
            p[axis] = a;
            t.push(p);
        }
    }
    t
}

fn generate_box(spec: &SyntheticFamilySpec, rng: &mut impl rand::Rng) -> Result<Shape3D> {
    let BoxParams { aspect_jitter, vertex_jitter } = spec.box_;
    let template = box_template();
    let sx = draw(rng, 1.0 - aspect_jitter, 1.0 + aspect_jitter);
    let sy = draw(rng, 1.0 - aspect_jitter, 1.0 + aspect_jitter);
    let sz = draw(rng, 1.0 - aspect_jitter, 1.0 + aspect_jitter);

    let mut points: Vec<[f64; 3]> = template[..spec.n]
        .iter()
        .map(|p| [p[0] * sx, p[1] * sy, p[2] * sz])
        .collect();
    if vertex_jitter > 0.0 {
        let normal = Normal::new(0.0, vertex_jitter).map_err(|e| {
            Error::InvalidSpec(format!("box vertex_jitter yields an invalid distribution: {e}"))
        })?;
        for p in &mut points {
            for c in p.iter_mut() {
                *c += normal.sample(rng);
            }
        }
    }
    shape_from_points(&points)
}

fn shape_from_points(points: &[[f64; 3]]) -> Result<Shape3D> {
    let x: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let y: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let z: Vec<f64> = points.iter().map(|p| p[2]).collect();
    Shape3D::from_rows(&x, &y, &z)
}
