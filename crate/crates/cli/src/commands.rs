//! Subcommand implementations.

use corrcov::bounds::{self, BoundForm, BoundQuery, FitCell, SampleField};
use corrcov::montecarlo::{self, ExperimentKind, ExperimentSpec};
use corrcov::patterns::{self, PatternKind};
use corrcov::report::{self, Series};
use corrcov::verify::{self, IdentityReport};
use corrcov::{linalg, Distribution, Matrix};
use num_complex::Complex64;

use crate::input;
use crate::output::{num, write_file, Table};
use crate::{BoundArgs, Common, Failure, FitArgs, Form, Kind, SimulateArgs, VerifyArgs};

type Outcome = Result<(), Failure>;

fn cnum(z: Complex64) -> String {
    if z.im == 0.0 {
        num(z.re)
    } else if z.im < 0.0 {
        format!("{}-{}j", num(z.re), num(-z.im))
    } else {
        format!("{}+{}j", num(z.re), num(z.im))
    }
}

/// Writes the CSV to `--out` when given and prints the text table.
fn emit(common: &Common, table: &Table, config: &str) -> Outcome {
    if let Some(path) = &common.out {
        write_file(path, &table.to_csv(config)).map_err(Failure::Usage)?;
    }
    print!("{}", table.to_text());
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn pattern(common: &Common, spec: &str, m: usize) -> Outcome {
    let parsed = input::parse_patterns(spec)?;
    let [spec_parsed] = parsed.as_slice() else {
        return Err(Failure::Usage("give exactly one pattern".into()));
    };
    let p = spec_parsed.instantiate(m, common.seed)?;
    let norms = p.norms();
    let mut t = Table::new(&["quantity", "value"]);
    let mut row = |k: &str, v: String| t.push(vec![k.to_string(), v]);
    row("m", m.to_string());
    row("trace", cnum(norms.trace));
    row("frobenius", num(norms.frobenius));
    row("frobenius_sq", num(norms.frobenius * norms.frobenius));
    row("spectral", num(norms.spectral));
    match p.kind() {
        PatternKind::Identity => {
            row("frobenius_closed", num((m as f64).sqrt()));
            row("spectral_closed", num(1.0));
        }
        PatternKind::Toeplitz { omega: w } => {
            row("frobenius_sq_closed", num(patterns::toeplitz_frobenius_sq(*w, m)?));
            row("spectral_bound", num(patterns::toeplitz_spectral_bound(*w)?));
        }
        PatternKind::Phase { c, .. } => {
            let w = Complex64::new(*c, 0.0);
            row("frobenius_sq_closed", num(patterns::toeplitz_frobenius_sq(w, m)?));
            row("spectral_bound", num(patterns::toeplitz_spectral_bound(w)?));
        }
        PatternKind::Custom(_) => {}
    }
    row("hermitian", linalg::is_hermitian(&p.materialize_complex()).to_string());
    let config = format!("corrcov pattern {spec} --m {m} --seed {}", common.seed);
    emit(common, &t, &config)
}

pub fn bound(common: &Common, a: &BoundArgs) -> Outcome {
    let specs = input::parse_patterns(&a.pattern)?;
    let [spec] = specs.as_slice() else {
        return Err(Failure::Usage("give exactly one pattern".into()));
    };
    let p = spec.instantiate(a.m, common.seed)?;
    let sigma_spectral = match (&a.sigma, a.sigma_norm) {
        (Some(path), _) => {
            let s = input::load_real(path)?;
            if s.nrows() != a.n || s.ncols() != a.n {
                return Err(Failure::Usage(format!("sigma is {}x{}, expected n = {}", s.nrows(), s.ncols(), a.n)));
            }
            linalg::spectral_norm(&s)?
        }
        (None, Some(v)) => v,
        (None, None) => 1.0,
    };
    let mut q = BoundQuery::for_pattern(a.n, &p, a.dist, sigma_spectral);
    q.delta = a.delta;
    q.c = a.c;
    if let Some(k) = a.k {
        q.k = k;
    }
    q.validate()?;
    let form = match a.form {
        Form::Tail => BoundForm::Tail,
        Form::Expectation => BoundForm::Expectation,
    };
    let field = if a.complex || !spec.is_real() { SampleField::Complex } else { SampleField::Real };
    let b = bounds::breakdown(&q, form, field)?;
    let mut t = Table::new(&["quantity", "value"]);
    let mut row = |k: &str, v: String| t.push(vec![k.to_string(), v]);
    row("n", q.n.to_string());
    row("m", q.m.to_string());
    row("delta", num(q.delta));
    row("K", num(q.k));
    row("C", num(q.c));
    row("trace_B", cnum(q.b_trace));
    row("frobenius_B", num(q.b_frobenius));
    row("spectral_B", num(q.b_spectral));
    row("sigma_norm", num(q.sigma_spectral));
    row("form", if form == BoundForm::Tail { "tail" } else { "expectation" }.into());
    row("bias", num(b.bias));
    row("concentration", num(b.concentration));
    row("total", num(b.total));
    row("confidence", b.confidence.to_string());
    let mut config = format!(
        "corrcov bound --n {} --m {} --pattern {} --dist {} --K {} --C {} --delta {} --sigma-norm {} --form {}",
        a.n,
        a.m,
        a.pattern,
        a.dist,
        num(q.k),
        num(q.c),
        num(q.delta),
        num(q.sigma_spectral),
        if form == BoundForm::Tail { "tail" } else { "expectation" },
    );
    if field == SampleField::Complex {
        config.push_str(" --complex");
    }
    config.push_str(&format!(" --seed {}", common.seed));
    emit(common, &t, &config)
}

pub fn simulate(common: &Common, a: &SimulateArgs) -> Outcome {
    let kind = match a.kind {
        Kind::SampleSize => ExperimentKind::SampleSize,
        Kind::Convergence => ExperimentKind::Convergence,
        Kind::Complex => ExperimentKind::Complex,
    };
    let mut spec = ExperimentSpec::new(kind, common.seed);
    spec.distribution = a.dist;
    if let Some(p) = &a.patterns {
        spec.patterns = input::parse_patterns(p)?;
    }
    if let Some(n) = &a.n {
        spec.n_values = input::parse_range(n)?;
    }
    if let Some(m) = &a.m {
        if kind != ExperimentKind::Convergence {
            return Err(Failure::Usage("--m only applies to the convergence protocol".into()));
        }
        spec.m_values = input::parse_range(m)?;
    }
    if let Some(eta) = a.eta {
        if kind == ExperimentKind::Convergence {
            return Err(Failure::Usage("--eta does not apply to the convergence protocol".into()));
        }
        spec.eta = eta;
    }
    if let Some(trials) = a.trials {
        spec.trials = trials;
    }
    spec.m_cap = a.m_cap;
    if let Some(path) = &a.sigma {
        spec.sigma = Some(input::load_real(path)?);
    }
    spec.validate()?;

    let patterns_text = a
        .patterns
        .clone()
        .unwrap_or_else(|| join(&spec.patterns));
    let mut config = format!(
        "corrcov simulate {} --dist {} --patterns {} --n {}",
        kind.name(),
        spec.distribution,
        patterns_text,
        join(&spec.n_values)
    );
    if kind == ExperimentKind::Convergence {
        config.push_str(&format!(" --m {}", join(&spec.m_values)));
    } else {
        config.push_str(&format!(" --eta {}", num(spec.eta)));
        if let Some(cap) = spec.m_cap {
            config.push_str(&format!(" --m-cap {cap}"));
        }
    }
    config.push_str(&format!(" --trials {} --seed {}", spec.trials, spec.seed));
    if let Some(path) = &a.sigma {
        config.push_str(&format!(" --sigma {}", path.display()));
    }

    let (table, series, x_label, y_label, censored) = if kind == ExperimentKind::Convergence {
        let res = montecarlo::run_convergence_experiment(&spec, common.workers)?;
        let mut t = Table::new(&[
            "experiment",
            "distribution",
            "pattern",
            "n",
            "m",
            "trials",
            "mean_spec_err",
            "std_spec_err",
            "seed",
        ]);
        let mut series: Vec<Series> = Vec::new();
        for r in &res.rows {
            t.push(vec![
                r.experiment.into(),
                r.distribution.to_string(),
                r.pattern.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.trials.to_string(),
                num(r.mean_spec_err),
                num(r.std_spec_err),
                r.seed.to_string(),
            ]);
            let name = if spec.n_values.len() > 1 { format!("{} n={}", r.pattern, r.n) } else { r.pattern.clone() };
            push_point(&mut series, name, (r.m as f64, r.mean_spec_err));
        }
        (t, series, "m", "mean spectral error", 0)
    } else {
        let res = montecarlo::run_sample_size_experiment(&spec, common.workers)?;
        let mut t = Table::new(&[
            "experiment",
            "distribution",
            "pattern",
            "n",
            "trials",
            "mean_min_m",
            "std_min_m",
            "censored",
            "seed",
        ]);
        let mut series: Vec<Series> = Vec::new();
        for r in &res.rows {
            t.push(vec![
                r.experiment.into(),
                r.distribution.to_string(),
                r.pattern.clone(),
                r.n.to_string(),
                r.trials.to_string(),
                num(r.mean_min_m),
                num(r.std_min_m),
                r.censored.to_string(),
                r.seed.to_string(),
            ]);
            push_point(&mut series, r.pattern.clone(), (r.n as f64, r.mean_min_m));
        }
        (t, series, "n", "mean minimal m", res.censored())
    };

    let csv = table.to_csv(&config);
    match &common.out {
        Some(path) => write_file(path, &csv).map_err(Failure::Usage)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &a.svg {
        let title = format!("{} ({})", kind.name(), spec.distribution);
        write_file(path, &report::line_chart(&title, x_label, y_label, &series)).map_err(Failure::Usage)?;
    }
    eprintln!("{} rows, {censored} censored trials", table.rows.len());
    if censored > 0 {
        return Err(Failure::Check(format!("{censored} trials hit the m cap")));
    }
    Ok(())
}

fn push_point(series: &mut Vec<Series>, name: String, p: (f64, f64)) {
    match series.iter_mut().find(|s| s.name == name) {
        Some(s) => s.points.push(p),
        None => series.push(Series { name, points: vec![p] }),
    }
}

const HANSON_WRIGHT: &str = "hanson-wright";
const HW_M: usize = 50;
const HW_MIN_R2: f64 = 0.9;
const HW_MEAN_SE: f64 = 5.0;

pub fn verify(common: &Common, a: &VerifyArgs) -> Outcome {
    if let Some(only) = a.only.as_deref() {
        if only != HANSON_WRIGHT && !verify::BATTERY.contains(&only) {
            return Err(Failure::Usage(format!(
                "unknown check `{only}` (expected one of {}, {HANSON_WRIGHT})",
                verify::BATTERY.join(", ")
            )));
        }
    }
    let wanted = |name: &str| a.only.as_deref().is_none_or(|o| o == name);
    let mut t = Table::new(&["check", "instances", "max_deviation", "tolerance", "passed", "detail"]);
    let mut push = |r: &IdentityReport, detail: String| {
        t.push(vec![
            r.name.clone(),
            r.instances.to_string(),
            num(r.max_deviation),
            num(r.tolerance),
            r.passed.to_string(),
            detail,
        ])
    };
    let mut config = format!("corrcov verify --seed {}", common.seed);
    if let Some(only) = &a.only {
        config.push_str(&format!(" --only {only}"));
    }

    if let Some(path) = &a.matrix {
        let b = input::load_complex(path, a.matrix_imag.as_deref())?;
        config.push_str(&format!(" --matrix {}", path.display()));
        if let Some(im) = &a.matrix_imag {
            config.push_str(&format!(" --matrix-imag {}", im.display()));
        }
        config.push_str(&format!(" --epsilon {}", num(a.epsilon)));
        let mut ran = 0;
        for (name, r) in matrix_checks(&b, a.epsilon, common.seed)? {
            if wanted(name) {
                ran += 1;
                match r {
                    Ok((report, detail)) => push(&report, detail),
                    Err(why) if a.only.is_some() => return Err(Failure::Usage(why)),
                    Err(why) => eprintln!("skipped {name}: {why}"),
                }
            }
        }
        if ran == 0 {
            return Err(Failure::Usage("no selected check applies to a given matrix".into()));
        }
    } else {
        config.push_str(&format!(" --instances {}", a.instances));
        if a.only.as_deref() != Some(HANSON_WRIGHT) {
            for r in verify::run_battery(common.seed, a.instances, a.only.as_deref())? {
                push(&r, String::new());
            }
        }
        if wanted(HANSON_WRIGHT) {
            config.push_str(&format!(" --hw-trials {}", a.hw_trials));
            let b = corrcov::CorrelationPattern::toeplitz(Complex64::new(0.5, 0.0), HW_M)?.materialize_complex();
            for (k, d) in [Distribution::Gaussian, Distribution::Rademacher].into_iter().enumerate() {
                let seed = corrcov::seed::derive(common.seed, &[0x6877, k as u64]);
                let r = verify::check_hanson_wright_empirical(d, &b, false, a.hw_trials, None, seed, common.workers)?;
                let passed = r.r_squared >= HW_MIN_R2 && r.mean_within(HW_MEAN_SE);
                let mut detail = format!(
                    "B=toeplitz:0.5 m={HW_M} slope={} intercept={} r2={} mean={} trace={}",
                    num(r.slope),
                    num(r.intercept),
                    num(r.r_squared),
                    cnum(r.mean),
                    cnum(r.expected_mean)
                );
                for note in &r.notes {
                    detail.push_str(&format!("; {note}"));
                }
                let report = IdentityReport {
                    name: format!("{HANSON_WRIGHT}-{d}"),
                    max_deviation: 1.0 - r.r_squared,
                    instances: r.trials,
                    tolerance: 1.0 - HW_MIN_R2,
                    passed,
                };
                push(&report, detail);
            }
        }
    }
    emit(common, &t, &config)?;
    let failed: Vec<&str> = t
        .rows
        .iter()
        .filter(|r| r[4] != "true")
        .map(|r| r[0].as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

type Check = std::result::Result<(IdentityReport, String), String>;

/// Checks that apply to a user matrix, each either a report or the reason it
/// does not apply.
fn matrix_checks(b: &Matrix<Complex64>, epsilon: f64, seed: u64) -> Result<Vec<(&'static str, Check)>, Failure> {
    let real = b.iter().all(|z| z.im == 0.0);
    let split = if linalg::is_hermitian(b) {
        Ok((verify::check_hermitian_split(b)?, String::new()))
    } else {
        Err("matrix is not Hermitian".to_string())
    };
    let embedding = if b.is_square() {
        Ok((verify::check_complex_embedding(b, seed)?, String::new()))
    } else {
        Err("matrix is not square".to_string())
    };
    let net = if !real {
        Err("net check needs a real matrix".to_string())
    } else if b.nrows() > verify::MAX_NET_DIM || b.ncols() > verify::MAX_NET_DIM {
        Err(format!("net check needs dimensions up to {}", verify::MAX_NET_DIM))
    } else {
        let (r, c) = verify::check_epsilon_net_bound(&b.map(|z| z.re), epsilon)?;
        Ok((r, format!("spectral={} net_bound={} net_sizes={}x{}", num(c.spectral), num(c.net_bound), c.net_sizes.0, c.net_sizes.1)))
    };
    Ok(vec![
        (verify::HERMITIAN_SPLIT, split),
        (verify::COMPLEX_EMBEDDING, embedding),
        (verify::EPSILON_NET, net),
    ])
}

pub fn fit_constant(common: &Common, a: &FitArgs) -> Outcome {
    let dists: Vec<Distribution> = a
        .dists
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let patterns = input::parse_patterns(&a.patterns)?;
    let ns = input::parse_range(&a.n)?;
    let ms = input::parse_range(&a.m)?;
    let mut grid = Vec::new();
    for &d in &dists {
        for p in &patterns {
            for &n in &ns {
                for &m in &ms {
                    grid.push(FitCell::new(n, m, p.clone(), d));
                }
            }
        }
    }
    let fit = bounds::fit_constant(&grid, a.trials, common.seed, common.workers)?;
    let mut t = Table::new(&["n", "m", "pattern", "distribution", "mean_error", "rate", "ratio", "fitted_c"]);
    for c in &fit.cells {
        t.push(vec![
            c.cell.n.to_string(),
            c.cell.m.to_string(),
            c.cell.pattern.to_string(),
            c.cell.distribution.to_string(),
            num(c.mean_error),
            num(c.rate),
            num(c.ratio),
            num(fit.c),
        ]);
    }
    let config = format!(
        "corrcov fit-constant --dists {} --patterns {} --n {} --m {} --trials {} --seed {}",
        a.dists,
        a.patterns,
        join(&ns),
        join(&ms),
        a.trials,
        common.seed
    );
    emit(common, &t, &config)?;
    let (lo, hi) = fit
        .cells
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.ratio), hi.max(c.ratio)));
    println!("fitted C = {}", num(fit.c));
    println!("geometric mean ratio = {}, ratio spread = {}", num(fit.geometric_mean_ratio()), num(hi / lo));
    Ok(())
}
