//! Wall-clock and decomposition-count comparison of the three reducers.

use std::fmt::Write as _;
use std::time::Instant;

use crate::datagen::{gen_four_class, gen_haystack, gen_textured_digits, Kind, SyntheticSpec};
use crate::error::{Error, Result};
use crate::linalg::count_decompositions;
use crate::reducers::{fit_cpcapp, fit_pca, sweep_cpca, Method};
use crate::stats::{build_covariance_pair, DataMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchEntry {
    pub method: Method,
    /// Median wall-clock seconds over the repeats.
    pub seconds: f64,
    /// Eigendecompositions performed by one fit.
    pub decompositions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub dataset: String,
    pub features: usize,
    pub n_fg: usize,
    pub n_bg: usize,
    pub k: usize,
    pub grid_len: usize,
    pub repeats: usize,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn entry(&self, method: Method) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.method == method)
    }

    /// `time(num) / time(den)`, when both were run.
    pub fn ratio(&self, num: Method, den: Method) -> Option<f64> {
        Some(self.entry(num)?.seconds / self.entry(den)?.seconds)
    }

    /// `time_cpca / time_cpcapp`.
    pub fn speedup(&self) -> Option<f64> {
        self.ratio(Method::Cpca, Method::CpcaPlusPlus)
    }

    /// Plain-text table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset {} (M={}, N_fg={}, N_bg={}), k={}, alpha grid {} points, {} repeats",
            self.dataset, self.features, self.n_fg, self.n_bg, self.k, self.grid_len, self.repeats
        );
        let _ = writeln!(s, "{:<8} {:>14} {:>8}", "method", "seconds", "eigs");
        for e in &self.entries {
            let _ = writeln!(s, "{:<8} {:>14.6e} {:>8}", e.method.to_string(), e.seconds, e.decompositions);
        }
        if let Some(x) = self.speedup() {
            let _ = writeln!(s, "speedup cpca/cpca++ {x:.2}");
        }
        s
    }
}

/// Foreground and background data for the non-image generators.
pub fn contrast_dataset(spec: &SyntheticSpec) -> Result<(DataMatrix, DataMatrix)> {
    match spec.kind {
        Kind::FourClass => gen_four_class(spec).map(|(fg, bg)| (fg.data, bg)),
        Kind::Haystack => gen_haystack(spec)?.sample(spec.n_fg, spec.n_bg, spec.seed),
        Kind::TexturedDigits => gen_textured_digits(spec).map(|(fg, bg, _)| (fg.data, bg)),
        Kind::SplicedImage => Err(Error::arg("spliced-image specs do not yield a data pair")),
    }
}

/// Fits every method in `methods` on the same data and times it.
///
/// Each timed fit starts from the raw data, so covariance estimation is
/// included for every method. cPCA runs the whole `alphas` sweep. The sweep
/// runs in the current rayon pool; install a one-thread pool for a
/// like-for-like comparison.
pub fn run_bench(
    spec: &SyntheticSpec,
    methods: &[&str],
    alphas: &[f64],
    k: usize,
    repeats: usize,
) -> Result<BenchReport> {
    let methods: Vec<Method> = methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::arg("no methods to benchmark"));
    }
    if repeats == 0 {
        return Err(Error::arg("repeats must be at least 1"));
    }
    if methods.contains(&Method::Cpca) && alphas.is_empty() {
        return Err(Error::arg("cpca needs a non-empty alpha grid"));
    }
    let (fg, bg) = contrast_dataset(spec)?;
    let fit = |method: Method| -> Result<()> {
        match method {
            Method::Pca => fit_pca(&fg, k).map(drop),
            Method::Cpca => sweep_cpca(&build_covariance_pair(&bg, &fg)?, k, alphas).map(drop),
            Method::CpcaPlusPlus => fit_cpcapp(&build_covariance_pair(&bg, &fg)?, k).map(drop),
        }
    };
    let mut entries = Vec::with_capacity(methods.len());
    for &method in &methods {
        let (res, decompositions) = count_decompositions(|| fit(method));
        res?;
        let mut times: Vec<f64> = (0..repeats)
            .map(|_| {
                let t = Instant::now();
                let _ = fit(method);
                t.elapsed().as_secs_f64().max(1e-9)
            })
            .collect();
        times.sort_by(f64::total_cmp);
        entries.push(BenchEntry {
            method,
            seconds: times[times.len() / 2],
            decompositions,
        });
    }
    Ok(BenchReport {
        dataset: spec.kind.to_string(),
        features: fg.features(),
        n_fg: fg.samples(),
        n_bg: bg.samples(),
        k,
        grid_len: alphas.len(),
        repeats,
        entries,
    })
}
