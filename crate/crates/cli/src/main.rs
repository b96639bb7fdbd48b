mod args;
mod svg;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{CommandFactory, Parser};
use serde::Serialize;

use args::{
    BoxSource, Cli, Command, DistillArgs, EvalArgs, Format, Mode, OptimizeArgs, SimulateArgs,
};
use nlbox_core::boxes::PAIR_LABELS;
use nlbox_core::optimize::{grid_points, SearchSettings};
use nlbox_core::quantum::visibility_for_chsh;
use nlbox_core::{
    consistency_report, iterate_distill, planar_frame, report_table, run_experiment, singlet_box,
    tlm_slack, xor_wire, BoundaryOptimum, BoxClass, CondProbTable, DistillStep, EtaGammaParams,
    GridOptimum, Marginals, NoiseModel, PlanarAngle, Visibility,
};

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::fmt::Error> for Failure {
    fn from(e: std::fmt::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<nlbox_core::Error> for Failure {
    fn from(e: nlbox_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let result = match &cli.command {
        Command::Eval(a) => eval(&cli, &mut out, a),
        Command::Distill(a) => distill(&cli, &mut out, a),
        Command::Optimize(a) => optimize(&cli, &mut out, a),
        Command::Simulate(a) => simulate(&cli, &mut out, a),
    };
    flush(&out);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => Cli::command()
            .error(clap::error::ErrorKind::ArgumentConflict, msg)
            .exit(),
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Writes buffered output; a closed pipe on the reading side is not an error.
fn flush(out: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout
        .write_all(out.as_bytes())
        .and_then(|_| stdout.flush())
    {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
        }
    }
}

fn read_box(path: &Path, tol: f64) -> anyhow::Result<CondProbTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: CondProbTable = serde_json::from_str(&text)
        .with_context(|| format!("parsing box JSON in {}", path.display()))?;
    table
        .validate(tol)
        .with_context(|| format!("invalid table in {}", path.display()))?;
    Ok(table)
}

/// Boxes named by the source flags: one for a file given twice, otherwise
/// the same box repeated.
fn resolve_boxes(
    src: &BoxSource,
    tol: f64,
    max_files: usize,
) -> Result<Vec<CondProbTable>, Failure> {
    if src.box_file.len() > max_files {
        return Err(Failure::Usage(format!(
            "--box may be given at most {max_files} time(s)"
        )));
    }
    if !src.box_file.is_empty() {
        return src
            .box_file
            .iter()
            .map(|p| read_box(p, tol).map_err(Failure::Data))
            .collect();
    }
    let table = if let (Some(eta), Some(gamma)) = (src.eta, src.gamma) {
        CondProbTable::from_eta_gamma(EtaGammaParams::new(eta, gamma)?)
            .with_label(format!("eta={eta} gamma={gamma}"))
    } else if let Some(deg) = src.phi {
        let phi = PlanarAngle::from_degrees(deg)?;
        let vis = Visibility::new(src.visibility)?;
        singlet_box(&planar_frame(phi)?, vis)?
            .with_label(format!("phi={deg} visibility={}", src.visibility))
    } else if src.pr {
        CondProbTable::pr_box()
    } else if src.white_noise {
        CondProbTable::white_noise_box()
    } else {
        return Err(Failure::Usage("no box source given".into()));
    };
    Ok(vec![table])
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: Serialize>(out: &mut String, value: &T) -> anyhow::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    label: Option<String>,
    p: [[f64; 4]; 4],
    chsh: f64,
    class: BoxClass,
    correlators: [f64; 4],
    marginals: Marginals,
    signalling_residual: f64,
    arcsine_slack: f64,
    eta_gamma: Option<EtaGammaParams>,
}

fn eval_report(table: &CondProbTable, tol: f64) -> anyhow::Result<EvalReport> {
    let corr = table.correlators()?;
    Ok(EvalReport {
        label: table.label().map(str::to_owned),
        p: *table.rows(),
        chsh: table.chsh()?,
        class: table.classify(tol),
        correlators: corr.as_array(),
        marginals: table.marginals()?,
        signalling_residual: table.signalling_residual(),
        arcsine_slack: tlm_slack(&corr),
        eta_gamma: table.eta_gamma_of(1e-12),
    })
}

fn eval(cli: &Cli, out: &mut String, a: &EvalArgs) -> CmdResult {
    let table = resolve_boxes(&a.source, a.tol, 1)?.remove(0);
    let r = eval_report(&table, a.tol)?;
    match cli.format {
        Format::Json => print_json(out, &r)?,
        Format::Csv => write!(out, "{}", table.to_csv()?)?,
        Format::Text => {
            if let Some(l) = &r.label {
                writeln!(out, "box: {l}")?;
            }
            writeln!(out, "N = {:.6}", r.chsh)?;
            writeln!(out, "class = {}", r.class)?;
            writeln!(
                out,
                "correlators: C00={:.6} C01={:.6} C10={:.6} C11={:.6}",
                r.correlators[0], r.correlators[1], r.correlators[2], r.correlators[3]
            )?;
            for s in 0..4 {
                writeln!(
                    out,
                    "marginals xy={}: alice=({:.6}, {:.6}) bob=({:.6}, {:.6})",
                    PAIR_LABELS[s],
                    r.marginals.alice[s][0],
                    r.marginals.alice[s][1],
                    r.marginals.bob[s][0],
                    r.marginals.bob[s][1]
                )?;
            }
            writeln!(out, "signalling residual = {:.3e}", r.signalling_residual)?;
            writeln!(out, "arcsine slack = {:.6e}", r.arcsine_slack)?;
            if let Some(p) = r.eta_gamma {
                writeln!(out, "eta = {:.6}, gamma = {:.6}", p.eta(), p.gamma())?;
            }
        }
    }
    if let Some(path) = &cli.out {
        write_json(path, &table)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DistillReport {
    before: Vec<f64>,
    after: f64,
    gain: f64,
    distilled: CondProbTable,
    trajectory: Option<Vec<DistillStep>>,
}

fn distill(cli: &Cli, out: &mut String, a: &DistillArgs) -> CmdResult {
    let boxes = resolve_boxes(&a.source, a.tol, 2)?;
    let (first, second) = (&boxes[0], boxes.get(1).unwrap_or(&boxes[0]));
    let distilled = xor_wire(first, second)?.with_label("distilled");
    let before: Vec<f64> = boxes.iter().map(|b| b.chsh()).collect::<Result<_, _>>()?;
    let after = distilled.chsh()?;
    let best = before.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let trajectory = match a.iterations {
        None => None,
        Some(n) => {
            if boxes.len() > 1 && first != second {
                return Err(Failure::Data(anyhow!(
                    "--iterations needs a single box wired with itself"
                )));
            }
            let params = first
                .eta_gamma_of(1e-12)
                .ok_or_else(|| anyhow!("--iterations needs a box from the (eta, gamma) family"))?;
            Some(iterate_distill(params, n))
        }
    };
    let r = DistillReport {
        before,
        after,
        gain: after - best,
        distilled,
        trajectory,
    };
    match cli.format {
        Format::Json => print_json(out, &r)?,
        Format::Csv => write!(out, "{}", r.distilled.to_csv()?)?,
        Format::Text => {
            for (i, n) in r.before.iter().enumerate() {
                writeln!(out, "N(P{}) = {:.6}", i + 1, n)?;
            }
            writeln!(out, "N(Pd) = {:.6}", r.after)?;
            writeln!(out, "gain = {:.6}", r.gain)?;
            if let Some(p) = r.distilled.eta_gamma_of(1e-12) {
                writeln!(
                    out,
                    "distilled eta = {:.6}, gamma = {:.6}",
                    p.eta(),
                    p.gamma()
                )?;
            }
            if let Some(steps) = &r.trajectory {
                writeln!(out, "step        eta      gamma          N")?;
                for (k, s) in steps.iter().enumerate() {
                    writeln!(
                        out,
                        "{:>4} {:>10.6} {:>10.6} {:>10.6}",
                        k,
                        s.params.eta(),
                        s.params.gamma(),
                        s.nonlocality
                    )?;
                }
            }
        }
    }
    if let Some(path) = &cli.out {
        write_json(path, &r.distilled)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Agreement {
    eta_difference: f64,
    gamma_difference: f64,
    gain_difference: f64,
}

#[derive(Serialize)]
struct OptimizeReport {
    mode: &'static str,
    settings: SearchSettings,
    grid: Option<GridOptimum>,
    boundary: Option<BoundaryOptimum>,
    agreement: Option<Agreement>,
}

fn optimize(cli: &Cli, out: &mut String, a: &OptimizeArgs) -> CmdResult {
    let settings = SearchSettings {
        resolution: a.resolution,
        feasibility_tol: a.tol,
        phi_lo_degrees: a.phi_lo,
        phi_hi_degrees: a.phi_hi,
        golden_tol: a.golden_tol,
    };
    let report = match a.mode {
        Mode::Grid => OptimizeReport {
            mode: "grid",
            settings,
            grid: Some(settings.grid()?),
            boundary: None,
            agreement: None,
        },
        Mode::Boundary => OptimizeReport {
            mode: "boundary",
            settings,
            grid: None,
            boundary: Some(settings.boundary()?),
            agreement: None,
        },
        Mode::Both => {
            let c = consistency_report(settings)?;
            OptimizeReport {
                mode: "both",
                settings,
                grid: Some(c.grid),
                boundary: Some(c.boundary),
                agreement: Some(Agreement {
                    eta_difference: c.eta_difference,
                    gamma_difference: c.gamma_difference,
                    gain_difference: c.gain_difference,
                }),
            }
        }
    };

    match cli.format {
        Format::Json => print_json(out, &report)?,
        Format::Csv => {
            writeln!(out, "strategy,eta,gamma,gain,arcsine_slack,phi_degrees")?;
            if let Some(g) = &report.grid {
                writeln!(
                    out,
                    "grid,{},{},{},{},",
                    g.params.eta(),
                    g.params.gamma(),
                    g.gain,
                    g.slack
                )?;
            }
            if let Some(b) = &report.boundary {
                writeln!(
                    out,
                    "boundary,{},{},{},{},{}",
                    b.params.eta(),
                    b.params.gamma(),
                    b.gain,
                    b.slack,
                    b.phi_degrees
                )?;
            }
        }
        Format::Text => {
            if let Some(g) = &report.grid {
                writeln!(out,
                    "grid:     eta = {:.6}  gamma = {:.6}  gain = {:.6}  slack = {:.3e}  ({} feasible points)",
                    g.params.eta(),
                    g.params.gamma(),
                    g.gain,
                    g.slack,
                    g.feasible_points
                )?;
            }
            if let Some(b) = &report.boundary {
                writeln!(out,
                    "boundary: eta = {:.6}  gamma = {:.6}  gain = {:.6}  slack = {:.3e}  phi = {:.4} deg",
                    b.params.eta(),
                    b.params.gamma(),
                    b.gain,
                    b.slack,
                    b.phi_degrees
                )?;
            }
            if let Some(d) = &report.agreement {
                writeln!(
                    out,
                    "agreement: |d eta| = {:.2e}  |d gamma| = {:.2e}  |d gain| = {:.2e}",
                    d.eta_difference, d.gamma_difference, d.gain_difference
                )?;
            }
        }
    }
    if let Some(path) = &cli.out {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.grid_csv {
        let mut text = String::from("eta,gamma,gain,feasible\n");
        for p in grid_points(a.resolution, a.tol)? {
            text.push_str(&format!(
                "{},{},{},{}\n",
                p.eta, p.gamma, p.gain, p.feasible
            ));
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.svg {
        let res = a.resolution.min(svg::MAX_CELLS);
        let points = grid_points(res, a.tol)?;
        let optimum = report
            .boundary
            .map(|b| b.params)
            .or(report.grid.map(|g| g.params));
        fs::write(path, svg::heatmap(&points, res, optimum))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn simulate(cli: &Cli, out: &mut String, a: &SimulateArgs) -> CmdResult {
    let phi = PlanarAngle::from_degrees(a.phi)?;
    let visibility = match (a.visibility, a.target_chsh) {
        (Some(v), _) => Visibility::new(v)?,
        (None, Some(target)) => visibility_for_chsh(phi, target)?,
        (None, None) => Visibility::PERFECT,
    };
    let noise = NoiseModel::new(visibility, a.jitter.to_radians(), a.background)?;
    let report = run_experiment(phi, noise, a.shots_pair, a.shots_fourfold, cli.seed)
        .context("degenerate statistics")?;
    let tables = report_table(&report)?;
    match cli.format {
        Format::Json => print_json(out, &report)?,
        Format::Csv => write!(out, "{}", tables.cells_csv)?,
        Format::Text => {
            let e = &report.estimates;
            writeln!(out, "N(P1) = {:.4} ± {:.4}", e.p1.value, e.p1.stderr)?;
            writeln!(out, "N(P2) = {:.4} ± {:.4}", e.p2.value, e.p2.stderr)?;
            writeln!(out, "N(Pd) = {:.4} ± {:.4}", e.pd.value, e.pd.stderr)?;
            let g = &report.gaps.pd_over_best_single;
            writeln!(
                out,
                "distillation gap = {:+.4} ± {:.4} ({:.2} sigma)",
                g.difference, g.combined_stderr, g.significance
            )?;
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(stem) = &cli.out {
        write_json(&with_suffix(stem, ".json"), &report)?;
        let csv_path = with_suffix(stem, ".csv");
        fs::write(&csv_path, &tables.cells_csv)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        let est_path = with_suffix(stem, "-estimates.csv");
        fs::write(&est_path, &tables.estimates_csv)
            .with_context(|| format!("writing {}", est_path.display()))?;
    }
    Ok(())
}
