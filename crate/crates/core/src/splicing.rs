//! Patch-based splicing localization.
//!
//! Training patches straddling the splice boundary form the foreground;
//! authentic patches containing edges form the background. A cPCA++ filter
//! bank then scores each test patch by its projected energy, the scores are
//! averaged back onto pixels and gated by an edge mask.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::Matrix;
use crate::reducers::{fit_cpcapp, Centering, FilterBank};
use crate::stats::{build_covariance_pair, DataMatrix};

// ---------------------------------------------------------------------------
// Edge mask

/// Binary edge map: 3×3 binomial smoothing of luma, Sobel gradient
/// magnitude, then Otsu's threshold. Output pixels are 0 or 255.
pub fn edge_mask(image: &Image) -> Result<Image> {
    if image.is_empty() {
        return Err(Error::arg("empty image"));
    }
    let (w, h) = (image.width(), image.height());
    let smooth = binomial3(&image.luma(), w, h);
    let mag = sobel_magnitude(&smooth, w, h);
    let max = mag.iter().copied().fold(0.0, f64::max);
    let data = if max <= 0.0 {
        vec![0; w * h]
    } else {
        let t = otsu_threshold(&mag, max);
        mag.iter().map(|&m| if m > t { 255 } else { 0 }).collect()
    };
    Image::gray(w, h, data)
}

fn clamped(v: &[f64], w: usize, h: usize, x: isize, y: isize) -> f64 {
    let x = x.clamp(0, w as isize - 1) as usize;
    let y = y.clamp(0, h as isize - 1) as usize;
    v[y * w + x]
}

fn binomial3(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    const K: [f64; 3] = [0.25, 0.5, 0.25];
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut s = 0.0;
            for (j, ky) in K.iter().enumerate() {
                for (i, kx) in K.iter().enumerate() {
                    s += ky * kx * clamped(v, w, h, x + i as isize - 1, y + j as isize - 1);
                }
            }
            out[y as usize * w + x as usize] = s;
        }
    }
    out
}

fn sobel_magnitude(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| clamped(v, w, h, x + dx, y + dy);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            out[y as usize * w + x as usize] = gx.hypot(gy);
        }
    }
    out
}

/// Otsu's threshold over a 256-bin histogram of `values` in `[0, max]`.
fn otsu_threshold(values: &[f64], max: f64) -> f64 {
    const BINS: usize = 256;
    let bin = |v: f64| ((v / max * (BINS - 1) as f64).round() as usize).min(BINS - 1);
    let mut hist = [0usize; BINS];
    for &v in values {
        hist[bin(v)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (sum_all - sum0) / w1);
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    // Upper edge of the winning bin, back in magnitude units.
    (best_t as f64 + 0.5) / (BINS - 1) as f64 * max
}

// ---------------------------------------------------------------------------
// Patches

/// Overlapping `n×n` windows of an image, flattened channel-major, then by
/// row, then by column.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub image_w: usize,
    pub image_h: usize,
    pub n: usize,
    pub stride: usize,
    pub channels: usize,
    /// `c·n²` features × one column per patch.
    pub patches: DataMatrix,
    /// Top-left `(x, y)` of each patch, row-major over the grid.
    pub origins: Vec<(usize, usize)>,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Rebuilds the pixel window of patch `p` (interleaved like [`Image`]).
    pub fn unflatten(&self, p: usize) -> Vec<f64> {
        let (n, c) = (self.n, self.channels);
        let col = self.patches.sample(p);
        let mut out = vec![0.0; n * n * c];
        for ch in 0..c {
            for r in 0..n {
                for q in 0..n {
                    out[(r * n + q) * c + ch] = col[ch * n * n + r * n + q];
                }
            }
        }
        out
    }
}

fn grid_origins(extent: usize, n: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..=extent - n).step_by(stride)
}

/// All `n×n` windows at multiples of `stride` that fit inside the image.
pub fn extract_patches(image: &Image, n: usize, stride: usize) -> Result<PatchGrid> {
    let (w, h, c) = (image.width(), image.height(), image.channels());
    if n == 0 || stride == 0 {
        return Err(Error::arg("patch size and stride must be at least 1"));
    }
    if n > w.min(h) {
        return Err(Error::arg(format!("patch size {n} exceeds the {w}x{h} image")));
    }
    let origins: Vec<(usize, usize)> = grid_origins(h, n, stride)
        .flat_map(|y| grid_origins(w, n, stride).map(move |x| (x, y)))
        .collect();
    let m = c * n * n;
    let mut values = Matrix::zeros(m, origins.len());
    for (p, &(x0, y0)) in origins.iter().enumerate() {
        for ch in 0..c {
            for r in 0..n {
                for q in 0..n {
                    values[(ch * n * n + r * n + q, p)] = f64::from(image.get(x0 + q, y0 + r, ch));
                }
            }
        }
    }
    Ok(PatchGrid {
        image_w: w,
        image_h: h,
        n,
        stride,
        channels: c,
        patches: DataMatrix::new(values)?,
        origins,
    })
}

fn window_fraction(mask: &Image, x0: usize, y0: usize, n: usize) -> f64 {
    let mut on = 0;
    for y in y0..y0 + n {
        for x in x0..x0 + n {
            if mask.is_on(x, y) {
                on += 1;
            }
        }
    }
    on as f64 / (n * n) as f64
}

/// Splits patches into foreground (spliced fraction in `fg_range`) and
/// background (nothing spliced, edge fraction at least `bg_edge_min`).
/// Everything else is left unlabeled.
pub fn label_patches(
    grid: &PatchGrid,
    surface_mask: &Image,
    edge: &Image,
    fg_range: (f64, f64),
    bg_edge_min: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (lo, hi) = fg_range;
    if !(lo <= hi) {
        return Err(Error::arg(format!("invalid foreground range ({lo}, {hi})")));
    }
    for m in [surface_mask, edge] {
        if m.width() != grid.image_w || m.height() != grid.image_h || m.channels() != 1 {
            return Err(Error::shape("mask dimensions do not match the image"));
        }
    }
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for (p, &(x, y)) in grid.origins.iter().enumerate() {
        let spliced = window_fraction(surface_mask, x, y, grid.n);
        if (lo..=hi).contains(&spliced) {
            fg.push(p);
        } else if spliced == 0.0 && window_fraction(edge, x, y, grid.n) >= bg_edge_min {
            bg.push(p);
        }
    }
    Ok((fg, bg))
}

// ---------------------------------------------------------------------------
// Scoring and maps

/// Projected energy of each test column, normalized by its maximum.
///
/// The batch is centered with its own mean, `v_i = ‖Fᵀz_i‖²` and
/// `w = v / max(v)`; an all-zero `v` yields all-zero scores.
pub fn score_patches(bank: &FilterBank, test: &DataMatrix) -> Result<Vec<f64>> {
    score_patches_with(bank, test, Centering::Batch)
}

/// [`score_patches`] with a selectable centering of uncentered input.
pub fn score_patches_with(
    bank: &FilterBank,
    test: &DataMatrix,
    centering: Centering,
) -> Result<Vec<f64>> {
    let y = crate::reducers::transform_with(bank, test, centering)?.y;
    let v: Vec<f64> = (0..y.cols())
        .map(|j| (0..y.rows()).map(|i| y[(i, j)] * y[(i, j)]).sum())
        .collect();
    let max = v.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    Ok(v.iter().map(|x| x / max).collect())
}

/// Per-pixel probabilities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape("map size does not match its dimensions"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::arg("probabilities must lie in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// 8-bit rendering, `round(255·p)`.
    pub fn to_image(&self) -> Image {
        let data = self.values.iter().map(|p| (255.0 * p).round() as u8).collect();
        Image::gray(self.width, self.height, data).expect("dimensions checked")
    }

    /// Inverse of [`to_image`](Self::to_image) (up to quantization).
    pub fn from_image(image: &Image) -> Result<Self> {
        if image.channels() != 1 {
            return Err(Error::shape("probability maps are single-channel"));
        }
        let values = image.data().iter().map(|&v| f64::from(v) / 255.0).collect();
        Self::new(image.width(), image.height(), values)
    }
}

/// Averages overlapping patch scores onto pixels (uncovered pixels get 0),
/// then zeroes every pixel outside the edge mask. Contributions are
/// accumulated in patch order.
pub fn reconstruct_map(scores: &[f64], grid: &PatchGrid, edge: &Image) -> Result<ProbabilityMap> {
    if scores.len() != grid.len() {
        return Err(Error::arg(format!(
            "{} scores for {} patches",
            scores.len(),
            grid.len()
        )));
    }
    let (w, h) = (grid.image_w, grid.image_h);
    if edge.width() != w || edge.height() != h || edge.channels() != 1 {
        return Err(Error::shape("edge mask dimensions do not match the image"));
    }
    let mut sum = vec![0.0; w * h];
    let mut count = vec![0u32; w * h];
    for (&s, &(x0, y0)) in scores.iter().zip(&grid.origins) {
        for y in y0..y0 + grid.n {
            for x in x0..x0 + grid.n {
                sum[y * w + x] += s;
                count[y * w + x] += 1;
            }
        }
    }
    let values = (0..w * h)
        .map(|i| {
            if count[i] == 0 || edge.data()[i] == 0 {
                0.0
            } else {
                (sum[i] / f64::from(count[i])).clamp(0.0, 1.0)
            }
        })
        .collect();
    ProbabilityMap::new(w, h, values)
}

// ---------------------------------------------------------------------------
// Metrics

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, true_neg: u64, false_pos: u64, false_neg: u64) -> Self {
        Self {
            true_pos,
            true_neg,
            false_pos,
            false_neg,
        }
    }
}

/// `2TP / (2TP + FN + FP)`, or 0 when the denominator vanishes.
pub fn f1_score(c: &ConfusionCounts) -> f64 {
    let tp = c.true_pos as f64;
    let den = 2.0 * tp + c.false_neg as f64 + c.false_pos as f64;
    if den == 0.0 {
        0.0
    } else {
        2.0 * tp / den
    }
}

/// Matthews correlation coefficient, or 0 when any marginal vanishes.
pub fn mcc_score(c: &ConfusionCounts) -> f64 {
    let [tp, tn, fp, fneg] =
        [c.true_pos, c.true_neg, c.false_pos, c.false_neg].map(|v| v as f64);
    let factors = [tp + fp, tp + fneg, tn + fp, tn + fneg];
    if factors.contains(&0.0) {
        return 0.0;
    }
    let den = factors.iter().product::<f64>().sqrt();
    (tp * tn - fp * fneg) / den
}

/// Tallies pixels predicted positive (`map ≥ threshold`) against a binary
/// truth mask.
pub fn binarize_and_score(
    map: &ProbabilityMap,
    truth: &Image,
    threshold: f64,
) -> Result<ConfusionCounts> {
    if truth.width() != map.width || truth.height() != map.height || truth.channels() != 1 {
        return Err(Error::shape("truth mask dimensions do not match the map"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::arg(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in map.values.iter().zip(truth.data()) {
        match (p >= threshold, t != 0) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

/// F1 of a scorer that marks each edge-mask pixel positive with probability
/// one half, evaluated on expected counts:
/// `|E∩T| / (|E|/2 + |T|)`.
pub fn random_scorer_f1(edge: &Image, truth: &Image) -> Result<f64> {
    if !edge.same_dims(truth) {
        return Err(Error::shape("edge mask and truth differ in size"));
    }
    let (mut e, mut t, mut both) = (0.0, 0.0, 0.0);
    for (&a, &b) in edge.data().iter().zip(truth.data()) {
        e += f64::from(u8::from(a != 0));
        t += f64::from(u8::from(b != 0));
        both += f64::from(u8::from(a != 0 && b != 0));
    }
    let den = 0.5 * e + t;
    Ok(if den == 0.0 { 0.0 } else { both / den })
}

// ---------------------------------------------------------------------------
// Pipeline

/// Localization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpliceConfig {
    /// Patch side in pixels.
    pub n: usize,
    pub stride: usize,
    /// Spliced-pixel fraction range of foreground patches.
    pub fg_range: (f64, f64),
    /// Minimum edge-pixel fraction of background patches.
    pub bg_edge_min: f64,
    /// Number of filters.
    pub k: usize,
    pub threshold: f64,
    pub centering: Centering,
}

impl Default for SpliceConfig {
    fn default() -> Self {
        Self {
            n: 8,
            stride: 4,
            fg_range: (0.3, 0.7),
            bg_edge_min: 0.05,
            k: 6,
            threshold: 0.5,
            centering: Centering::Batch,
        }
    }
}

/// Collects labeled patches from `(probe, surface_mask)` pairs and fits a
/// cPCA++ bank.
pub fn train_splice(images: &[(Image, Image)], cfg: &SpliceConfig) -> Result<FilterBank> {
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for (probe, mask) in images {
        let edge = edge_mask(probe)?;
        let grid = extract_patches(probe, cfg.n, cfg.stride)?;
        let (f, b) = label_patches(&grid, mask, &edge, cfg.fg_range, cfg.bg_edge_min)?;
        fg.extend(f.iter().map(|&p| grid.patches.sample(p)));
        bg.extend(b.iter().map(|&p| grid.patches.sample(p)));
    }
    if fg.is_empty() || bg.is_empty() {
        return Err(Error::Rank(format!(
            "training produced {} foreground and {} background patches",
            fg.len(),
            bg.len()
        )));
    }
    let pair = build_covariance_pair(&DataMatrix::from_samples(&bg)?, &DataMatrix::from_samples(&fg)?)?;
    fit_cpcapp(&pair, cfg.k)
}

/// Probability map of spliced edges in `probe`.
pub fn localize(bank: &FilterBank, probe: &Image, cfg: &SpliceConfig) -> Result<ProbabilityMap> {
    let grid = extract_patches(probe, cfg.n, cfg.stride)?;
    if grid.patches.features() != bank.features() {
        return Err(Error::shape(format!(
            "patches have {} features, model expects {}",
            grid.patches.features(),
            bank.features()
        )));
    }
    let edge = edge_mask(probe)?;
    let scores = score_patches_with(bank, &grid.patches, cfg.centering)?;
    reconstruct_map(&scores, &grid, &edge)
}
