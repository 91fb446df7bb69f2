//! Synthetic datasets with known structure.
//!
//! * `four-class`: 30-dimensional mixture whose class structure lives in two
//!   low-variance blocks, hidden under a high-variance block that the
//!   background shares.
//! * `haystack`: exact covariances with a weak foreground-only direction `c`
//!   next to a strong shared direction `a`.
//! * `textured-digits`: 28×28 ring/bar glyphs over smooth high-variance
//!   texture; the background set is texture alone.
//! * `spliced-image`: a donor region pasted into a host scene.
//!
//! Every generator is a pure function of its [`SyntheticSpec`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::stats::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    FourClass,
    Haystack,
    TexturedDigits,
    SplicedImage,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::FourClass => "four-class",
            Kind::Haystack => "haystack",
            Kind::TexturedDigits => "textured-digits",
            Kind::SplicedImage => "spliced-image",
        })
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four-class" => Ok(Kind::FourClass),
            "haystack" => Ok(Kind::Haystack),
            "textured-digits" => Ok(Kind::TexturedDigits),
            "spliced-image" => Ok(Kind::SplicedImage),
            other => Err(Error::arg(format!("unknown dataset kind {other:?}"))),
        }
    }
}

/// Generator parameters. `params` holds kind-specific scalars; absent keys
/// take the documented defaults of each generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: Kind,
    pub seed: u64,
    pub n_fg: usize,
    pub n_bg: usize,
    pub params: BTreeMap<String, f64>,
}

impl SyntheticSpec {
    /// Spec with the default sample counts for `kind`.
    pub fn new(kind: Kind, seed: u64) -> Self {
        let (n_fg, n_bg) = match kind {
            Kind::FourClass => (400, 400),
            Kind::Haystack => (10_000, 10_000),
            Kind::TexturedDigits => (5000, 5000),
            Kind::SplicedImage => (1, 1),
        };
        Self {
            kind,
            seed,
            n_fg,
            n_bg,
            params: BTreeMap::new(),
        }
    }

    pub fn with_counts(mut self, n_fg: usize, n_bg: usize) -> Self {
        self.n_fg = n_fg;
        self.n_bg = n_bg;
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn expect(&self, kind: Kind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::arg(format!("expected a {kind} spec, got {}", self.kind)));
        }
        if self.n_fg == 0 || self.n_bg == 0 {
            return Err(Error::arg("sample counts must be at least 1"));
        }
        Ok(())
    }
}

/// Samples with per-sample class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Four-class mixture

/// Dimension of the four-class data: three blocks of ten.
pub const FOUR_CLASS_DIM: usize = 30;
const BLOCK: usize = 10;

/// Four-class foreground (labels 1..=4) and background.
///
/// Foreground sample `i` of class `k` stacks `h1, h2, h3`:
/// `h1 ~ N(0, I)` for `k ∈ {1,2}` and `N(6·1, I)` for `k ∈ {3,4}`;
/// `h2 ~ N(0, I)` for `k ∈ {1,3}` and `N(3·1, I)` for `k ∈ {2,4}`;
/// `h3 ~ N(0, 10·I)`. Background blocks are zero-mean with variances
/// 3, 1 and 10. Classes are equally likely.
pub fn gen_four_class(spec: &SyntheticSpec) -> Result<(LabeledDataset, DataMatrix)> {
    spec.expect(Kind::FourClass)?;
    let mut rng = Rng::new(spec.seed);
    let mut labels = Vec::with_capacity(spec.n_fg);
    let mut fg = Vec::with_capacity(spec.n_fg);
    for _ in 0..spec.n_fg {
        let k = rng.below(4) + 1;
        let m1 = if k >= 3 { 6.0 } else { 0.0 };
        let m2 = if k.is_multiple_of(2) { 3.0 } else { 0.0 };
        let mut x = Vec::with_capacity(FOUR_CLASS_DIM);
        x.extend((0..BLOCK).map(|_| m1 + rng.gaussian()));
        x.extend((0..BLOCK).map(|_| m2 + rng.gaussian()));
        x.extend((0..BLOCK).map(|_| 10f64.sqrt() * rng.gaussian()));
        labels.push(k);
        fg.push(x);
    }
    let sd = [3f64.sqrt(), 1.0, 10f64.sqrt()];
    let bg: Vec<Vec<f64>> = (0..spec.n_bg)
        .map(|_| {
            (0..FOUR_CLASS_DIM)
                .map(|i| sd[i / BLOCK] * rng.gaussian())
                .collect()
        })
        .collect();
    Ok((
        LabeledDataset {
            data: DataMatrix::from_samples(&fg)?,
            labels,
        },
        DataMatrix::from_samples(&bg)?,
    ))
}

/// Closed-form cPCA++ filters of the four-class model: the normalized
/// all-ones vector on block 1, then on block 2.
pub fn oracle_four_class_filters() -> Matrix {
    let v = 1.0 / (BLOCK as f64).sqrt();
    Matrix::from_fn(FOUR_CLASS_DIM, 2, |i, j| if i / BLOCK == j { v } else { 0.0 })
}

/// Population covariances `(R_b, R_f)` of the four-class model.
///
/// `R_b = diag(3, 1, 10) ⊗ I`; `R_f = diag(9, 2.25, 0) ⊗ 11ᵀ + diag(1, 1, 10) ⊗ I`
/// (the mean offsets 6 and 3 are each present half the time, contributing
/// variances 9 and 2.25 along the block's all-ones direction).
pub fn four_class_covariances() -> (Matrix, Matrix) {
    let bg_var = [3.0, 1.0, 10.0];
    let fg_var = [1.0, 1.0, 10.0];
    let mean_var = [9.0, 2.25, 0.0];
    let r_b = Matrix::from_diag(
        &(0..FOUR_CLASS_DIM).map(|i| bg_var[i / BLOCK]).collect::<Vec<_>>(),
    );
    let r_f = Matrix::from_fn(FOUR_CLASS_DIM, FOUR_CLASS_DIM, |i, j| {
        let b = i / BLOCK;
        if b != j / BLOCK {
            0.0
        } else {
            mean_var[b] + if i == j { fg_var[b] } else { 0.0 }
        }
    });
    (r_b, r_f)
}

/// Population `Q = R_b⁻¹R_f` of the four-class model:
/// `blockdiag(3·11ᵀ + I/3, 2.25·11ᵀ + I, I)`.
pub fn four_class_q() -> Matrix {
    let (r_b, r_f) = four_class_covariances();
    Matrix::from_fn(FOUR_CLASS_DIM, FOUR_CLASS_DIM, |i, j| r_f[(i, j)] / r_b[(i, i)])
}

// ---------------------------------------------------------------------------
// Needle in a haystack

/// Ratio bound used for "much smaller than" in the haystack constraints.
pub const MUCH_SMALLER: f64 = 0.1;

/// Exact haystack covariances
/// `R_b = γ·aaᵀ + ρ·I` and `R_f = β·aaᵀ + ε·ccᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Haystack {
    pub r_b: Matrix,
    pub r_f: Matrix,
    /// Foreground-only direction.
    pub c: Vec<f64>,
    /// Shared high-variance direction.
    pub a: Vec<f64>,
    pub gamma: f64,
    pub rho: f64,
    pub beta: f64,
    pub eps: f64,
}

/// Builds the haystack pair from params `gamma` (10), `rho` (0.01), `beta`
/// (5), `eps` (0.1) and `m` (4), with `a = e₁`, `c = e₂`.
///
/// Requires `ε ≤ 0.1·β`, `β·ρ/γ < ε` and `ρ ≤ 0.1·γ`.
pub fn gen_haystack(spec: &SyntheticSpec) -> Result<Haystack> {
    spec.expect(Kind::Haystack)?;
    let gamma = spec.param("gamma", 10.0);
    let rho = spec.param("rho", 0.01);
    let beta = spec.param("beta", 5.0);
    let eps = spec.param("eps", 0.1);
    let m = spec.param("m", 4.0);
    if !(m >= 2.0) || m.fract() != 0.0 {
        return Err(Error::arg(format!("m must be an integer >= 2, got {m}")));
    }
    if [gamma, rho, beta, eps].iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::arg("gamma, rho, beta and eps must be positive"));
    }
    if eps > MUCH_SMALLER * beta {
        return Err(Error::arg(format!("need eps << beta, got eps={eps}, beta={beta}")));
    }
    if beta * rho / gamma >= eps {
        return Err(Error::arg(format!(
            "need beta*rho/gamma < eps, got {} >= {eps}",
            beta * rho / gamma
        )));
    }
    if rho > MUCH_SMALLER * gamma {
        return Err(Error::arg(format!("need rho << gamma, got rho={rho}, gamma={gamma}")));
    }
    let m = m as usize;
    let mut a = vec![0.0; m];
    let mut c = vec![0.0; m];
    a[0] = 1.0;
    c[1] = 1.0;
    let outer = |u: &[f64], s: f64| Matrix::from_fn(m, m, |i, j| s * u[i] * u[j]);
    let r_b = outer(&a, gamma).add_diag(rho);
    let r_f = outer(&a, beta).add(&outer(&c, eps))?;
    Ok(Haystack {
        r_b,
        r_f,
        c,
        a,
        gamma,
        rho,
        beta,
        eps,
    })
}

impl Haystack {
    pub fn features(&self) -> usize {
        self.a.len()
    }

    /// Draws `(foreground, background)` samples whose population
    /// covariances are `r_f` and `r_b`.
    pub fn sample(&self, n_fg: usize, n_bg: usize, seed: u64) -> Result<(DataMatrix, DataMatrix)> {
        let mut rng = Rng::new(seed);
        let m = self.features();
        let fg: Vec<Vec<f64>> = (0..n_fg)
            .map(|_| {
                let (s, t) = (self.beta.sqrt() * rng.gaussian(), self.eps.sqrt() * rng.gaussian());
                (0..m).map(|i| s * self.a[i] + t * self.c[i]).collect()
            })
            .collect();
        let bg: Vec<Vec<f64>> = (0..n_bg)
            .map(|_| {
                let s = self.gamma.sqrt() * rng.gaussian();
                (0..m)
                    .map(|i| s * self.a[i] + self.rho.sqrt() * rng.gaussian())
                    .collect()
            })
            .collect();
        Ok((DataMatrix::from_samples(&fg)?, DataMatrix::from_samples(&bg)?))
    }
}

// ---------------------------------------------------------------------------
// Textured digits

/// Side length of a textured-digit image.
pub const DIGIT_SIDE: usize = 28;

/// Separable Gaussian blur of a row-major field with clamped borders.
fn gaussian_blur(field: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-r..=r)
                .map(|d| kernel[(d + r) as usize] * field[y * w + clamp(x as isize + d, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (-r..=r)
                .map(|d| kernel[(d + r) as usize] * tmp[clamp(y as isize + d, h) * w + x])
                .sum();
        }
    }
    out
}

/// Stationary smooth texture with unit per-pixel standard deviation.
///
/// White noise is convolved (valid region only, so every pixel sees the full
/// kernel) with a Gaussian whose squared weights sum to one.
fn smooth_texture(rng: &mut Rng, side: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * r)
        .map(|i| {
            let d = i as f64 - r as f64;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    // Separable 2-D kernel k(x)k(y) has squared sum (Σk²)².
    let norm: f64 = kernel.iter().map(|k| k * k).sum::<f64>();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm.sqrt()).collect();
    let big = side + 2 * r;
    let noise: Vec<f64> = (0..big * big).map(|_| rng.gaussian()).collect();
    let mut rows = vec![0.0; big * side];
    for y in 0..big {
        for x in 0..side {
            rows[y * side + x] = (0..=2 * r).map(|d| kernel[d] * noise[y * big + x + d]).sum();
        }
    }
    let mut out = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            out[y * side + x] = (0..=2 * r).map(|d| kernel[d] * rows[(y + d) * side + x]).sum();
        }
    }
    out
}

/// Antialiased glyph intensity in `[0, 1]`: class 0 is a ring, class 1 a
/// vertical bar, centered at `(cx, cy)`.
fn glyph(class: usize, cx: f64, cy: f64) -> Vec<f64> {
    let mut g = vec![0.0; DIGIT_SIDE * DIGIT_SIDE];
    for y in 0..DIGIT_SIDE {
        for x in 0..DIGIT_SIDE {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let v = if class == 0 {
                let d = (dx * dx + dy * dy).sqrt();
                1.5 - (d - 7.0).abs()
            } else {
                (2.0 - dx.abs()).min(10.0 - dy.abs())
            };
            g[y * DIGIT_SIDE + x] = v.clamp(0.0, 1.0);
        }
    }
    g
}

/// Textured-digit foreground (labels 0 = ring, 1 = bar), texture-only
/// background and the clean glyph images (`contrast·g`, no texture).
///
/// Params: `contrast` (1), `texture_std` (3, relative to contrast),
/// `texture_sigma` (2, smoothing length in pixels), `floor_std` (0.05,
/// white noise keeping the background covariance well conditioned).
pub fn gen_textured_digits(
    spec: &SyntheticSpec,
) -> Result<(LabeledDataset, DataMatrix, DataMatrix)> {
    spec.expect(Kind::TexturedDigits)?;
    let contrast = spec.param("contrast", 1.0);
    let tex_std = spec.param("texture_std", 3.0) * contrast;
    let sigma = spec.param("texture_sigma", 2.0);
    let floor = spec.param("floor_std", 0.05) * contrast;
    if !(sigma > 0.0) || !(tex_std >= 0.0) || !(floor >= 0.0) {
        return Err(Error::arg("texture parameters must be positive"));
    }
    let mut rng = Rng::new(spec.seed);
    let texture = |rng: &mut Rng| -> Vec<f64> {
        let t = smooth_texture(rng, DIGIT_SIDE, sigma);
        t.iter().map(|v| tex_std * v + floor * rng.gaussian()).collect()
    };
    let centre = (DIGIT_SIDE as f64 - 1.0) / 2.0;
    let mut fg = Vec::with_capacity(spec.n_fg);
    let mut clean = Vec::with_capacity(spec.n_fg);
    let mut labels = Vec::with_capacity(spec.n_fg);
    for _ in 0..spec.n_fg {
        let class = rng.below(2);
        let jx = rng.below(3) as f64 - 1.0;
        let jy = rng.below(3) as f64 - 1.0;
        let g: Vec<f64> = glyph(class, centre + jx, centre + jy)
            .iter()
            .map(|v| contrast * v)
            .collect();
        let t = texture(&mut rng);
        fg.push(t.iter().zip(&g).map(|(a, b)| a + b).collect::<Vec<f64>>());
        clean.push(g);
        labels.push(class);
    }
    let bg: Vec<Vec<f64>> = (0..spec.n_bg).map(|_| texture(&mut rng)).collect();
    Ok((
        LabeledDataset {
            data: DataMatrix::from_samples(&fg)?,
            labels,
        },
        DataMatrix::from_samples(&bg)?,
        DataMatrix::from_samples(&clean)?,
    ))
}

// ---------------------------------------------------------------------------
// Spliced images

/// Side length of generated spliced images.
pub const SPLICE_SIDE: usize = 96;

/// One generated forgery.
#[derive(Debug, Clone, PartialEq)]
pub struct SplicedImage {
    /// RGB composite.
    pub probe: Image,
    /// 255 on donor pixels, 0 elsewhere.
    pub surface_mask: Image,
    /// Boundary of the donor region dilated by one pixel (0/255).
    pub edge_truth: Image,
}

/// A synthetic scene: flat base colour plus random rectangles and discs,
/// blurred by a camera-like point spread function, plus sensor noise.
/// Shapes whose footprint touches `keep_out` are redrawn (up to a retry cap,
/// then dropped).
fn render_scene(
    rng: &mut Rng,
    base: [f64; 3],
    shapes: usize,
    offset: (f64, f64),
    psf: f64,
    noise: f64,
    keep_out: Option<&[bool]>,
) -> Vec<[f64; 3]> {
    let n = SPLICE_SIDE;
    let mut chans = vec![vec![0.0; n * n]; 3];
    for (c, ch) in chans.iter_mut().enumerate() {
        ch.iter_mut().for_each(|v| *v = base[c]);
    }
    for _ in 0..shapes {
        let delta: Vec<f64> = (0..3)
            .map(|_| {
                let mag = rng.uniform_range(offset.0, offset.1);
                if rng.below(2) == 0 { mag } else { -mag }
            })
            .collect();
        for _ in 0..20 {
            let cx = rng.uniform_range(0.0, n as f64);
            let cy = rng.uniform_range(0.0, n as f64);
            let size = rng.uniform_range(4.0, 16.0);
            let disc = rng.below(2) == 0;
            let (sin, cos) = rng.uniform_range(0.0, std::f64::consts::PI).sin_cos();
            let footprint: Vec<usize> = (0..n * n)
                .filter(|&i| {
                    let (dx, dy) = ((i % n) as f64 - cx, (i / n) as f64 - cy);
                    if disc {
                        dx * dx + dy * dy <= size * size
                    } else {
                        let (u, v) = (cos * dx + sin * dy, -sin * dx + cos * dy);
                        u.abs() <= size && v.abs() <= 0.6 * size
                    }
                })
                .collect();
            if keep_out.is_some_and(|k| footprint.iter().any(|&i| k[i])) {
                continue;
            }
            for &i in &footprint {
                for c in 0..3 {
                    chans[c][i] = base[c] + delta[c];
                }
            }
            break;
        }
    }
    let blurred: Vec<Vec<f64>> = chans.iter().map(|ch| gaussian_blur(ch, n, n, psf)).collect();
    (0..n * n)
        .map(|i| {
            let mut px = [0.0; 3];
            for c in 0..3 {
                px[c] = blurred[c][i] + noise * rng.gaussian();
            }
            px
        })
        .collect()
}

fn luma(c: &[f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

/// Random star-shaped polygon with area fraction in `[lo, hi]`, returned as
/// per-pixel coverage in `[0, 1]` (4×4 supersampling).
fn star_polygon(rng: &mut Rng, lo: f64, hi: f64) -> Vec<f64> {
    const SS: usize = 4;
    let n = SPLICE_SIDE;
    loop {
        let verts = 5 + rng.below(6);
        let target = rng.uniform_range(lo, hi);
        // Mean radius for a disc of the target area, jittered per vertex.
        let r0 = (target * (n * n) as f64 / std::f64::consts::PI).sqrt();
        let margin = r0 * 0.8;
        let cx = rng.uniform_range(margin + 4.0, n as f64 - margin - 4.0);
        let cy = rng.uniform_range(margin + 4.0, n as f64 - margin - 4.0);
        let phase = rng.uniform_range(0.0, std::f64::consts::TAU);
        let pts: Vec<(f64, f64)> = (0..verts)
            .map(|i| {
                let t = phase + std::f64::consts::TAU * i as f64 / verts as f64;
                let r = r0 * rng.uniform_range(0.7, 1.3);
                (cx + r * t.cos(), cy + r * t.sin())
            })
            .collect();
        let coverage: Vec<f64> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64, (i / n) as f64);
                let hits = (0..SS * SS)
                    .filter(|s| {
                        let sx = x + ((s % SS) as f64 + 0.5) / SS as f64;
                        let sy = y + ((s / SS) as f64 + 0.5) / SS as f64;
                        point_in_polygon(sx, sy, &pts)
                    })
                    .count();
                hits as f64 / (SS * SS) as f64
            })
            .collect();
        let frac = coverage.iter().filter(|&&c| c >= 0.5).count() as f64 / (n * n) as f64;
        if (lo..=hi).contains(&frac) {
            return coverage;
        }
    }
}

/// Axis-aligned rectangle with area fraction in `[lo, hi]`.
fn rectangle_region(rng: &mut Rng, lo: f64, hi: f64) -> Vec<f64> {
    let n = SPLICE_SIDE;
    let area = rng.uniform_range(lo, hi) * (n * n) as f64;
    let aspect = rng.uniform_range(0.6, 1.6);
    let w = ((area * aspect).sqrt().round() as usize).clamp(8, n - 8);
    let h = ((area / w as f64).round() as usize).clamp(8, n - 8);
    let x0 = 2 + rng.below(n - w - 3);
    let y0 = 2 + rng.below(n - h - 3);
    (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            f64::from(u8::from((x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y)))
        })
        .collect()
}

fn point_in_polygon(x: f64, y: f64, pts: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = pts.len() - 1;
    for i in 0..pts.len() {
        let (xi, yi) = pts[i];
        let (xj, yj) = pts[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Pixels of `mask` with a 4-neighbour outside it, dilated by one pixel
/// (3×3).
pub fn boundary_band(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let at = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask[y as usize * w + x as usize]
    };
    let mut edge = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            if at(x, y) && !(at(x - 1, y) && at(x + 1, y) && at(x, y - 1) && at(x, y + 1)) {
                edge[y as usize * w + x as usize] = true;
            }
        }
    }
    dilate(&edge, w, h)
}

/// 3×3 binary dilation.
pub fn dilate(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if mask[y * w + x] {
                for yy in y.saturating_sub(1)..(y + 2).min(h) {
                    for xx in x.saturating_sub(1)..(x + 2).min(w) {
                        out[yy * w + xx] = true;
                    }
                }
            }
        }
    }
    out
}

fn mask_image(mask: &[bool]) -> Image {
    let data = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    Image::gray(SPLICE_SIDE, SPLICE_SIDE, data).expect("square mask")
}

/// A `96×96` RGB forgery.
///
/// A donor scene is pasted into a busy host scene through an axis-aligned
/// rectangle (`region` = 0) or a star-shaped polygon (`region` = 1). Both
/// scenes pass through the same camera PSF; the paste is antialiased but not
/// blurred, so the splice boundary is sharper than authentic edges. The donor
/// has stronger sensor noise and a base luma at least `donor_gap` levels
/// away from the host's. Host objects are kept `keep_out` pixels clear of
/// the boundary band.
///
/// Params and defaults: `area_min` 0.02, `area_max` 0.05, `psf` 1.2,
/// `host_noise` 2, `donor_noise` 4, `donor_gap` 60, `host_shapes` 40,
/// `host_contrast_lo`/`_hi` 40/90, `donor_shapes` 0,
/// `donor_contrast_lo`/`_hi` 10/20, `keep_out` 4, `region` 0.
pub fn gen_spliced_image(spec: &SyntheticSpec) -> Result<SplicedImage> {
    if spec.kind != Kind::SplicedImage {
        return Err(Error::arg(format!("expected a spliced-image spec, got {}", spec.kind)));
    }
    let lo = spec.param("area_min", 0.02);
    let hi = spec.param("area_max", 0.05);
    if !(0.0 < lo && lo <= hi && hi < 0.6) {
        return Err(Error::arg(format!("invalid area bounds [{lo}, {hi}]")));
    }
    let psf = spec.param("psf", 1.2);
    let host_noise = spec.param("host_noise", 2.0);
    let donor_noise = spec.param("donor_noise", 4.0);
    let gap = spec.param("donor_gap", 60.0);
    let mut rng = Rng::new(spec.seed);

    let host_base = loop {
        let c = [0, 1, 2].map(|_| rng.uniform_range(50.0, 205.0));
        if (80.0..=175.0).contains(&luma(&c)) {
            break c;
        }
    };
    let donor_base = loop {
        let c = [0, 1, 2].map(|_| rng.uniform_range(20.0, 235.0));
        if (luma(&c) - luma(&host_base)).abs() >= gap {
            break c;
        }
    };
    let host_shapes = spec.param("host_shapes", 40.0) as usize;
    let host_contrast = (spec.param("host_contrast_lo", 40.0), spec.param("host_contrast_hi", 90.0));
    let donor_shapes = spec.param("donor_shapes", 0.0) as usize;
    let donor_contrast = (spec.param("donor_contrast_lo", 10.0), spec.param("donor_contrast_hi", 20.0));
    let coverage = match spec.param("region", 0.0) as u32 {
        0 => rectangle_region(&mut rng, lo, hi),
        _ => star_polygon(&mut rng, lo, hi),
    };
    let mask: Vec<bool> = coverage.iter().map(|&c| c >= 0.5).collect();
    let mut band = boundary_band(&mask, SPLICE_SIDE, SPLICE_SIDE);
    for _ in 0..spec.param("keep_out", 4.0) as usize {
        band = dilate(&band, SPLICE_SIDE, SPLICE_SIDE);
    }
    let host = render_scene(&mut rng, host_base, host_shapes, host_contrast, psf, host_noise, Some(&band));
    let donor = render_scene(&mut rng, donor_base, donor_shapes, donor_contrast, psf, donor_noise, Some(&band));

    let mut data = Vec::with_capacity(SPLICE_SIDE * SPLICE_SIDE * 3);
    for (i, &a) in coverage.iter().enumerate() {
        let px = (0..3).map(|c| a * donor[i][c] + (1.0 - a) * host[i][c]);
        data.extend(px.map(|v| v.round().clamp(0.0, 255.0) as u8));
    }
    let edge = boundary_band(&mask, SPLICE_SIDE, SPLICE_SIDE);
    Ok(SplicedImage {
        probe: Image::new(SPLICE_SIDE, SPLICE_SIDE, 3, data)?,
        surface_mask: mask_image(&mask),
        edge_truth: mask_image(&edge),
    })
}

/// `count` forgeries from independent streams derived from `seed`.
pub fn gen_splice_set(seed: u64, count: usize, params: &BTreeMap<String, f64>) -> Result<Vec<SplicedImage>> {
    let mut rng = Rng::new(seed);
    (0..count)
        .map(|_| {
            let mut spec = SyntheticSpec::new(Kind::SplicedImage, rng.next_u64());
            spec.params = params.clone();
            gen_spliced_image(&spec)
        })
        .collect()
}
