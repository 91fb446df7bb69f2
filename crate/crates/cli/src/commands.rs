use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cpcapp::bench::run_bench;
use cpcapp::datagen::{
    gen_four_class, gen_haystack, gen_splice_set, gen_textured_digits, Kind, SyntheticSpec,
    DIGIT_SIDE,
};
use cpcapp::factor::{denoise, recover_w, FactorModel};
use cpcapp::image::Image;
use cpcapp::io::{read_csv, write_csv, CsvTable, ModelFile};
use cpcapp::linalg::Matrix;
use cpcapp::reducers::{
    fit_cpca, fit_cpcapp, fit_pca, parse_alpha_grid, sweep_cpca, transform_with, Centering,
    FilterBank, Method,
};
use cpcapp::splicing::{
    binarize_and_score, f1_score, localize, mcc_score, score_patches_with, train_splice,
    ProbabilityMap, SpliceConfig,
};
use cpcapp::stats::{build_covariance_pair, CovariancePair, DataMatrix};
use cpcapp::{Error, Result};

use crate::{
    BenchArgs, Command, DenoiseArgs, EvalArgs, FitArgs, GenerateArgs, LocalizeArgs, ScoreArgs,
    TrainSpliceArgs, TransformArgs,
};

/// Affine byte encoding of the textured-digit sample images.
const DIGIT_OFFSET: f64 = 128.0;
const DIGIT_GAIN: f64 = 16.0;
const DIGIT_IMAGES: usize = 8;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Transform(a) => transform(a),
        Command::Score(a) => score(a),
        Command::Denoise(a) => denoise_image(a),
        Command::Localize(a) => localize_image(a),
        Command::TrainSplice(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Fails early, naming the path, when an input file is missing.
fn require(paths: &[&Path]) -> Result<()> {
    match paths.iter().find(|p| !p.is_file()) {
        Some(p) => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file", p.display()),
        ))),
        None => Ok(()),
    }
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, f64>> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("expected KEY=VALUE, got {kv:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| usage(format!("parameter {k} is not a number: {v:?}")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

fn build_spec(
    kind: &str,
    seed: u64,
    n_fg: Option<usize>,
    n_bg: Option<usize>,
    params: &[String],
) -> Result<SyntheticSpec> {
    let mut spec = SyntheticSpec::new(kind.parse()?, seed);
    spec.n_fg = n_fg.unwrap_or(spec.n_fg);
    spec.n_bg = n_bg.unwrap_or(spec.n_bg);
    spec.params = parse_params(params)?;
    Ok(spec)
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn write_data(path: PathBuf, data: &DataMatrix) -> Result<()> {
    write_csv(path, data.values(), Some(names("x", data.features())))
}

fn write_labels(path: PathBuf, labels: &[usize]) -> Result<()> {
    let rows = labels.iter().map(|&l| vec![l as f64]).collect();
    CsvTable { header: Some(vec!["label".into()]), rows }.write(path)
}

fn digit_image(values: &[f64]) -> Result<Image> {
    let data = values
        .iter()
        .map(|v| (DIGIT_OFFSET + DIGIT_GAIN * v).round().clamp(0.0, 255.0) as u8)
        .collect();
    Image::gray(DIGIT_SIDE, DIGIT_SIDE, data)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = build_spec(&a.kind, a.seed, a.n_fg, a.n_bg, &a.params)?;
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    fs::create_dir_all(&a.out)?;
    let out = |name: &str| a.out.join(name);
    match spec.kind {
        Kind::FourClass => {
            let (fg, bg) = gen_four_class(&spec)?;
            write_data(out("fg.csv"), &fg.data)?;
            write_data(out("bg.csv"), &bg)?;
            write_labels(out("labels.csv"), &fg.labels)?;
        }
        Kind::Haystack => {
            let h = gen_haystack(&spec)?;
            let (fg, bg) = h.sample(spec.n_fg, spec.n_bg, spec.seed)?;
            write_data(out("fg.csv"), &fg)?;
            write_data(out("bg.csv"), &bg)?;
            let dirs = Matrix::from_rows(&[h.c.clone(), h.a.clone()])?;
            write_csv(out("directions.csv"), &dirs, Some(vec!["c".into(), "a".into()]))?;
        }
        Kind::TexturedDigits => {
            let (fg, bg, clean) = gen_textured_digits(&spec)?;
            write_data(out("fg.csv"), &fg.data)?;
            write_data(out("bg.csv"), &bg)?;
            write_data(out("clean.csv"), &clean)?;
            write_labels(out("labels.csv"), &fg.labels)?;
            for j in 0..DIGIT_IMAGES.min(fg.data.samples()) {
                digit_image(&fg.data.sample(j))?.write(out(&format!("digit_{j:03}.pgm")))?;
                digit_image(&clean.sample(j))?.write(out(&format!("clean_{j:03}.pgm")))?;
            }
        }
        Kind::SplicedImage => {
            for (j, s) in gen_splice_set(spec.seed, a.count, &spec.params)?.iter().enumerate() {
                s.probe.write(out(&format!("probe_{j:03}.ppm")))?;
                s.surface_mask.write(out(&format!("mask_{j:03}.pgm")))?;
                s.edge_truth.write(out(&format!("edge_{j:03}.pgm")))?;
            }
        }
    }
    Ok(())
}

/// `W` for a freshly fitted bank. PCA filters are orthonormal, so `W = F`.
fn factor_for(bank: &FilterBank, pair: Option<&CovariancePair>) -> Option<FactorModel> {
    match (bank.method, pair) {
        (Method::Pca, _) => Some(FactorModel {
            w: bank.f.clone(),
            f: bank.f.clone(),
            lambda_diag: bank.eigenvalues.clone(),
        }),
        (_, Some(p)) => recover_w(p, bank).ok(),
        (_, None) => None,
    }
}

/// `<stem>_aNN.<ext>` next to `out`.
fn grid_path(out: &Path, index: usize, width: usize) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}_a{index:0width$}.{}", ext.to_string_lossy()),
        None => format!("{stem}_a{index:0width$}"),
    };
    out.with_file_name(name)
}

fn fit(a: FitArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    if method != Method::Cpca && (a.alpha.is_some() || a.alpha_grid.is_some()) {
        return Err(usage("--alpha and --alpha-grid apply to cpca only"));
    }
    let grid = match (&a.alpha, &a.alpha_grid) {
        (Some(_), _) => None,
        (None, Some(spec)) => Some(parse_alpha_grid(spec)?),
        (None, None) => Some(parse_alpha_grid("default")?),
    };
    require(&[&a.fg])?;
    if let Some(bg) = &a.bg {
        require(&[bg])?;
    }
    let fg = read_csv(&a.fg, a.transpose)?;
    if method == Method::Pca {
        let bank = fit_pca(&fg, a.k)?;
        let factor = factor_for(&bank, None);
        return ModelFile { bank, factor }.save(&a.out);
    }
    let bg_path = a.bg.as_ref().ok_or_else(|| usage(format!("--bg is required for {method}")))?;
    let bg = read_csv(bg_path, a.transpose)?;
    let pair = build_covariance_pair(&bg, &fg)?;
    match method {
        Method::CpcaPlusPlus => {
            let bank = fit_cpcapp(&pair, a.k)?;
            let factor = factor_for(&bank, Some(&pair));
            ModelFile { bank, factor }.save(&a.out)
        }
        _ => match (a.alpha, grid) {
            (Some(alpha), _) => {
                let bank = fit_cpca(&pair, a.k, alpha)?;
                let factor = factor_for(&bank, Some(&pair));
                ModelFile { bank, factor }.save(&a.out)
            }
            (None, grid) => {
                let grid = grid.unwrap_or_default();
                let banks = sweep_cpca(&pair, a.k, &grid)?;
                let width = grid.len().saturating_sub(1).to_string().len().max(2);
                let mut table = format!("{:>4} {:>24} file\n", "i", "alpha");
                for (i, bank) in banks.into_iter().enumerate() {
                    let path = grid_path(&a.out, i, width);
                    let factor = factor_for(&bank, Some(&pair));
                    ModelFile { bank, factor }.save(&path)?;
                    let _ = writeln!(table, "{i:>4} {:>24} {}", grid[i], path.display());
                }
                emit(&table)
            }
        },
    }
}

fn centering(train_mean: bool) -> Centering {
    if train_mean {
        Centering::TrainingForeground
    } else {
        Centering::Batch
    }
}

fn load_for_data(model: &Path, input: &Path, transpose: bool) -> Result<(ModelFile, DataMatrix)> {
    require(&[model, input])?;
    let model = ModelFile::load(model)?;
    let data = read_csv(input, transpose)?;
    if data.features() != model.bank.features() {
        return Err(Error::Shape(format!(
            "data has {} features, model expects {}",
            data.features(),
            model.bank.features()
        )));
    }
    Ok((model, data))
}

fn transform(a: TransformArgs) -> Result<()> {
    let (model, data) = load_for_data(&a.model, &a.input, a.transpose)?;
    let p = transform_with(&model.bank, &data, centering(a.train_mean))?;
    write_csv(&a.out, &p.y, Some(names("y", p.y.rows())))
}

fn score(a: ScoreArgs) -> Result<()> {
    let (model, data) = load_for_data(&a.model, &a.input, a.transpose)?;
    let w = score_patches_with(&model.bank, &data, centering(a.train_mean))?;
    let rows = w.into_iter().map(|v| vec![v]).collect();
    CsvTable { header: Some(vec!["w".into()]), rows }.write(&a.out)
}

fn denoise_image(a: DenoiseArgs) -> Result<()> {
    if !(a.gain.is_finite() && a.gain != 0.0) || !a.offset.is_finite() {
        return Err(usage("--gain must be finite and non-zero, --offset finite"));
    }
    require(&[&a.model, &a.input])?;
    let model = ModelFile::load(&a.model)?;
    let factor = model
        .factor
        .as_ref()
        .ok_or_else(|| Error::State("model file has no W block".into()))?;
    let factor = match a.k {
        Some(k) => factor.truncate(k)?,
        None => factor.clone(),
    };
    let img = Image::read(&a.input)?;
    if img.channels() != 1 || img.width() * img.height() != factor.features() {
        return Err(Error::Shape(format!(
            "{}x{}x{} image for a model with {} features",
            img.width(),
            img.height(),
            img.channels(),
            factor.features()
        )));
    }
    let mean = &model.bank.train_mean_fg;
    let z: Vec<f64> = img
        .data()
        .iter()
        .zip(mean)
        .map(|(&p, m)| (f64::from(p) - a.offset) / a.gain - m)
        .collect();
    let data = denoise(&factor, &z)?
        .iter()
        .zip(mean)
        .map(|(v, m)| (a.offset + a.gain * (v + m)).round().clamp(0.0, 255.0) as u8)
        .collect();
    Image::gray(img.width(), img.height(), data)?.write(&a.out)
}

fn localize_image(a: LocalizeArgs) -> Result<()> {
    require(&[&a.model, &a.image])?;
    let model = ModelFile::load(&a.model)?;
    let probe = Image::read(&a.image)?;
    let m = probe.channels() * a.n * a.n;
    if m != model.bank.features() {
        return Err(Error::Shape(format!(
            "patch size {} with {} channels gives {m} features, model expects {}",
            a.n,
            probe.channels(),
            model.bank.features()
        )));
    }
    let cfg = SpliceConfig {
        n: a.n,
        stride: a.stride,
        centering: centering(a.train_mean),
        ..SpliceConfig::default()
    };
    localize(&model.bank, &probe, &cfg)?.to_image().write(&a.out)
}

/// `(probe, mask)` pairs named `probe_*.ppm` / `mask_*.pgm`, in name order.
fn training_pairs(dir: &Path) -> Result<Vec<(Image, Image)>> {
    let mut probes: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("probe_") && n.ends_with(".ppm"))
        .collect();
    probes.sort();
    if probes.is_empty() {
        return Err(Error::State(format!("no probe_*.ppm files in {}", dir.display())));
    }
    probes
        .iter()
        .map(|p| {
            let id = &p["probe_".len()..p.len() - ".ppm".len()];
            let probe = Image::read(dir.join(p))?;
            let mask_path = dir.join(format!("mask_{id}.pgm"));
            require(&[&mask_path])?;
            let mask = Image::read(mask_path)?;
            if !probe.same_dims(&mask) || mask.channels() != 1 {
                return Err(Error::Shape(format!("mask_{id}.pgm does not match {p}")));
            }
            Ok((probe, mask))
        })
        .collect()
}

fn train(a: TrainSpliceArgs) -> Result<()> {
    let cfg = SpliceConfig {
        n: a.n,
        stride: a.stride,
        k: a.k,
        fg_range: (a.fg_lo, a.fg_hi),
        bg_edge_min: a.bg_edge_min,
        ..SpliceConfig::default()
    };
    if cfg.n == 0 || cfg.stride == 0 || cfg.k == 0 || cfg.k > 3 * cfg.n * cfg.n {
        return Err(usage("n, stride and k must be positive, with k ≤ 3·n²"));
    }
    let pairs = training_pairs(&a.train_dir)?;
    let bank = train_splice(&pairs, &cfg)?;
    ModelFile { bank, factor: None }.save(&a.out)
}

fn eval(a: EvalArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(usage("--threshold must lie in [0, 1]"));
    }
    require(&[&a.pred, &a.truth])?;
    let pred = ProbabilityMap::from_image(&Image::read(&a.pred)?)?;
    let truth = Image::read(&a.truth)?;
    let c = binarize_and_score(&pred, &truth, a.threshold)?;
    emit(&format!("F1={:?} MCC={:?}\n", f1_score(&c), mcc_score(&c)))
}

fn bench(a: BenchArgs) -> Result<()> {
    let spec = build_spec(&a.kind, a.seed, a.n_fg, a.n_bg, &a.params)?;
    let methods: Vec<&str> = a.methods.split(',').map(str::trim).collect();
    let grid = parse_alpha_grid(&a.alpha_grid)?;
    let report = run_bench(&spec, &methods, &grid, a.k, a.repeats)?;
    emit(&report.to_table())
}
