use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use addsel::pipeline::Prepared;
use addsel::selection::{
    fit_path, fit_prepared, kfold_cv, make_grid, marginal_screen, select_lambda,
};
use addsel::simgen::{derive_seed, generate, run_replications};
use addsel::solver::lambda_max;
use addsel::{Criterion, Example, GenConfig};
use serde::Serialize;

use crate::args::{Cli, Command, CvArgs, FitArgs, PathArgs, ScreenArgs, SimulateArgs};
use crate::data::{load_csv, write_csv, Loaded};
use crate::error::CliError;
use crate::report::{
    CvReport, FitReport, PathEntry, PathReport, ProfilePoint, ScreenEntry, ScreenReport,
    SimulationReport,
};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load(input: &crate::args::InputArgs, warn: &mut dyn Write) -> Result<Loaded, CliError> {
    let loaded = load_csv(&input.input, &input.response)?;
    for name in &loaded.excluded {
        let _ = writeln!(warn, "warning: column {name} is constant and was excluded");
    }
    Ok(loaded)
}

pub fn run_fit(args: &FitArgs, warn: &mut dyn Write) -> Result<FitReport, CliError> {
    let config = args.tune.config(args.criterion)?;
    let Loaded { dataset, excluded } = load(&args.input, warn)?;
    let width = dataset.p();
    let (data, kept, screened) = match args.screen_top_k {
        Some(k) => {
            let ranking = marginal_screen(&dataset.x, &dataset.y, k)?;
            let screened: Vec<ScreenEntry> = ranking
                .iter()
                .map(|&(index, correlation)| ScreenEntry {
                    index,
                    name: dataset.name(index),
                    correlation,
                })
                .collect();
            let mut kept: Vec<usize> = ranking.iter().map(|r| r.0).collect();
            kept.sort_unstable();
            (dataset.select_covariates(&kept)?, kept, Some(screened))
        }
        None => {
            let kept = (0..dataset.p()).collect();
            (dataset, kept, None)
        }
    };
    let prep = Prepared::new(&data, &config.basis()?)?;
    let tuned = fit_prepared(&prep, args.method, &config)?;
    let mut report = FitReport::build(
        &tuned,
        &data,
        args.method.label(),
        &args.criterion.to_string(),
        excluded,
        screened,
    )?;
    // indices refer to covariates of the input file
    report.p = width;
    for j in report.selected.iter_mut() {
        *j = kept[*j];
    }
    for c in report.components.iter_mut() {
        c.index = kept[c.index];
    }
    Ok(report)
}

pub fn run_path(args: &PathArgs, warn: &mut dyn Write) -> Result<PathReport, CliError> {
    let config = args.tune.config(Criterion::Bic)?;
    let data = load(&args.input, warn)?.dataset;
    let prep = Prepared::new(&data, &config.basis()?)?;
    let design = &prep.orthonormal;
    let unit = vec![1.0; design.num_groups()];
    let lmax = lambda_max(design, &prep.y, &unit)?;
    if lmax == 0.0 {
        return Err(CliError::Usage(
            "the response is constant; there is no path to trace".into(),
        ));
    }
    let grid = make_grid(lmax, config.grid_count, config.grid_ratio)?;
    let path = fit_path(
        design,
        &prep.y,
        &unit,
        &grid,
        &config.solver,
        config.nu,
        config.max_fit,
    )?;
    let profile: Vec<_> = path.iter().map(|p| p.criterion.clone()).collect();
    let pick = |c| select_lambda(&profile, c).expect("path is nonempty");
    Ok(PathReport {
        n: data.n(),
        p: data.p(),
        names: (0..data.p()).map(|j| data.name(j)).collect(),
        lambda_max: lmax,
        bic_index: pick(Criterion::Bic),
        ebic_index: pick(Criterion::Ebic),
        points: path
            .iter()
            .map(|p| PathEntry {
                point: ProfilePoint::from(&p.criterion),
                selected: p.coefficients.nonzero_groups(),
            })
            .collect(),
    })
}

pub fn run_simulate(args: &SimulateArgs) -> Result<SimulationReport, CliError> {
    let example = match args.example {
        1 => Example::One,
        2 => Example::Two,
        other => {
            return Err(CliError::Usage(format!(
                "--example must be 1 or 2, got {other}"
            )))
        }
    };
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let mut gen = GenConfig::new(example, args.n, args.p, args.t, args.seed);
    if let Some(sigma) = args.sigma {
        gen.sigma = sigma;
    }
    gen.validate()?;
    if let Some(path) = &args.write_data {
        let data = generate(&gen.with_seed(derive_seed(args.seed, 0)))?;
        write_csv(path, &data.dataset, "y")?;
    }
    let tables = args
        .criterion
        .iter()
        .map(|&c| {
            Ok(run_replications(
                &gen,
                &args.methods,
                &args.tune.config(c)?,
                args.reps,
            )?)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(SimulationReport { tables })
}

pub fn run_screen(args: &ScreenArgs, warn: &mut dyn Write) -> Result<ScreenReport, CliError> {
    let data = load(&args.input, warn)?.dataset;
    let k = args.screen_top_k.unwrap_or(data.p());
    let ranking = marginal_screen(&data.x, &data.y, k)?
        .into_iter()
        .map(|(index, correlation)| ScreenEntry {
            index,
            name: data.name(index),
            correlation,
        })
        .collect();
    Ok(ScreenReport {
        n: data.n(),
        p: data.p(),
        ranking,
    })
}

pub fn run_cv(args: &CvArgs, warn: &mut dyn Write) -> Result<CvReport, CliError> {
    let config = args.tune.config(args.criterion)?;
    if args.folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let data = load(&args.input, warn)?.dataset;
    let repetitions = (0..args.reps)
        .map(|r| {
            kfold_cv(
                &data,
                args.folds,
                args.method,
                &config,
                derive_seed(args.seed, r as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pes: Vec<f64> = repetitions.iter().map(|r| r.mean_pe).collect();
    let stat = addsel::Stat::of(&pes);
    let mean_selected = repetitions.iter().map(|r| r.mean_selected).sum::<f64>() / args.reps as f64;
    Ok(CvReport {
        method: args.method.label().to_string(),
        folds: args.folds,
        repetitions,
        mean_pe: stat.mean,
        sd_pe: stat.sd,
        mean_selected,
    })
}

pub fn render_fit(r: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "method {} tuned by {}, n = {}, p = {}",
        r.method, r.criterion, r.n, r.p
    );
    match r.lambda2 {
        Some(l2) => {
            let _ = writeln!(s, "lambda1 = {:.6e}, lambda2 = {:.6e}", r.lambda1, l2);
        }
        None => {
            let _ = writeln!(s, "lambda = {:.6e}", r.lambda1);
        }
    }
    let _ = writeln!(
        s,
        "selected {} component(s): {}",
        r.selected.len(),
        r.selected_names.join(", ")
    );
    let _ = writeln!(s, "{:>6}  {:<16} {:>12}", "index", "component", "norm");
    for c in r.components.iter().filter(|c| c.selected) {
        let _ = writeln!(s, "{:>6}  {:<16} {:>12.5}", c.index, c.name, c.norm);
    }
    let _ = writeln!(
        s,
        "intercept {:.6}, rss {:.6}, df {}",
        r.mu_hat, r.rss, r.df
    );
    s
}

pub fn render_path(r: &PathReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4} {:>12} {:>10} {:>10} {:>6} {:>4}",
        "i", "lambda", "BIC", "EBIC", "df", "q"
    );
    let show = |v: Option<f64>| v.map_or("-inf".to_string(), |v| format!("{v:.4}"));
    for (i, e) in r.points.iter().enumerate() {
        let mark = match (i == r.bic_index, i == r.ebic_index) {
            (true, true) => " <- BIC, EBIC",
            (true, false) => " <- BIC",
            (false, true) => " <- EBIC",
            _ => "",
        };
        let _ = writeln!(
            s,
            "{:>4} {:>12.5e} {:>10} {:>10} {:>6} {:>4}{mark}",
            i,
            e.point.lambda,
            show(e.point.bic),
            show(e.point.ebic),
            e.point.df,
            e.point.num_selected
        );
    }
    s
}

pub fn render_simulation(r: &SimulationReport) -> String {
    let mut s = String::new();
    for t in &r.tables {
        let c = &t.config;
        let _ = writeln!(
            s,
            "example {}, n = {}, p = {}, t = {}, sigma = {}, {} replications, {}",
            if c.example == Example::One { 1 } else { 2 },
            c.n,
            c.p,
            c.t,
            c.sigma,
            t.reps,
            t.criterion
        );
        let _ = writeln!(
            s,
            "{:<12} {:>15} {:>17} {:>16} {:>16} {:>6}",
            "method", "NV (se)", "ME (se)", "IN% (se)", "CS% (se)", "failed"
        );
        for row in &t.rows {
            let _ = writeln!(
                s,
                "{:<12} {:>7.2} ({:>5.2}) {:>8.3} ({:>6.3}) {:>7.2} ({:>5.2}) {:>7.2} ({:>5.2}) {:>6}",
                row.method.label(),
                row.nv.mean,
                row.nv.se,
                row.me.mean,
                row.me.se,
                row.inc.mean,
                row.inc.se,
                row.cs.mean,
                row.cs.se,
                row.failed
            );
        }
    }
    s
}

pub fn render_screen(r: &ScreenReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4} {:>6}  {:<16} {:>10}",
        "rank", "index", "covariate", "corr"
    );
    for (k, e) in r.ranking.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>4} {:>6}  {:<16} {:>10.5}",
            k + 1,
            e.index,
            e.name,
            e.correlation
        );
    }
    s
}

pub fn render_cv(r: &CvReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} with {}-fold cross-validation, {} repetition(s)",
        r.method,
        r.folds,
        r.repetitions.len()
    );
    for (i, rep) in r.repetitions.iter().enumerate() {
        let folds: Vec<String> = rep.per_fold_pe.iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(
            s,
            "rep {:>3}: mean PE {:.5} [{}]",
            i + 1,
            rep.mean_pe,
            folds.join(", ")
        );
    }
    let _ = writeln!(
        s,
        "mean PE {:.5} (sd {:.5}), mean selected {:.2}",
        r.mean_pe, r.sd_pe, r.mean_selected
    );
    s
}

fn finish<T: Serialize>(
    value: &T,
    text: String,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if let Some(path) = out {
        write_json(path, value)?;
    }
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))
}

/// Runs one parsed command line, writing the summary to `stdout` and warnings to `stderr`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => {
            let r = run_fit(a, stderr)?;
            finish(&r, render_fit(&r), a.out.as_deref(), stdout)
        }
        Command::Path(a) => {
            let r = run_path(a, stderr)?;
            finish(&r, render_path(&r), a.out.as_deref(), stdout)
        }
        Command::Simulate(a) => {
            let r = run_simulate(a)?;
            finish(&r, render_simulation(&r), a.out.as_deref(), stdout)
        }
        Command::Screen(a) => {
            let r = run_screen(a, stderr)?;
            finish(&r, render_screen(&r), a.out.as_deref(), stdout)
        }
        Command::Cv(a) => {
            let r = run_cv(a, stderr)?;
            finish(&r, render_cv(&r), a.out.as_deref(), stdout)
        }
    }
}
