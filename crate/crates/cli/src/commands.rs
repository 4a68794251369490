use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use mosum_core::factor::eigenvalue_ratio_count;
use mosum_core::mosum::{run_pipeline_with_r, PipelineOutput, RStrategy};
use mosum_core::simlab::monte_carlo_with_threads;
use mosum_core::{
    bai_ng_ic, load_panel, run_pipeline, spectrum as panel_spectrum, stable_factor_count, DetectorConfig, DgpKind,
    DgpSpec, EvalSummary, Layout, Panel, StandardizationMode,
};
use serde::Serialize;

use crate::volatility::{log_range_volatility, read_ohlc};
use crate::{DetectArgs, PanelInput, SimulateArgs, SpectrumArgs, StrategyArg, TuningArgs, VolatilityArgs};

const GRID_T: [usize; 4] = [400, 600, 800, 1000];
const GRID_N: [usize; 3] = [100, 200, 500];
const MODES: [StandardizationMode; 2] = [StandardizationMode::Diagonal, StandardizationMode::Full];

/// Parse an inclusive range `a..b`.
pub fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad lower bound in {s:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad upper bound in {s:?}"))?;
    if a == 0 || a > b {
        return Err(format!("range {s:?} must satisfy 1 <= A <= B"));
    }
    Ok((a, b))
}

pub fn parse_model(s: &str) -> Result<DgpKind, String> {
    s.parse().map_err(|e: mosum_core::Error| e.to_string())
}

/// Start from `--config` (or the defaults) and apply the flags on top.
fn build_config(t: &TuningArgs) -> Result<DetectorConfig> {
    let mut cfg = match &t.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        }
        None => DetectorConfig::default(),
    };
    if let Some(r) = t.r {
        cfg.r = Some(r);
        if t.r_strategy.is_none() {
            cfg.r_strategy = Some(RStrategy::Fixed);
        }
    }
    if let Some(s) = t.r_strategy {
        cfg.r_strategy = Some(s.into());
        if !matches!(s, StrategyArg::Fixed) && t.r.is_none() {
            cfg.r = None;
        }
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = t.$field {
                cfg.$field = v.into();
            }
        )*};
    }
    set!(r_max, varrho, alpha, eta, kappa, mode, stable_reps, seed);
    if t.gamma.is_some() {
        cfg.gamma = t.gamma;
    }
    if t.m.is_some() {
        cfg.m = t.m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_input(input: &PanelInput) -> Result<Panel> {
    Ok(load_panel(&input.panel, input.layout.into(), !input.no_demean)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn save_run(out: &PipelineOutput, dir: &Path, suffix: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut w = create(&dir.join(format!("report{suffix}.json")))?;
    w.write_all(to_json(&out.report)?.as_bytes())?;
    w.flush()?;
    let mut w = create(&dir.join(format!("profile{suffix}.csv")))?;
    out.profile.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn detect(args: DetectArgs) -> Result<()> {
    let cfg = build_config(&args.tuning)?;
    let panel = read_input(&args.input)?;
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    match args.r_sweep {
        Some((a, b)) => {
            let dir = args.out_dir.as_deref().expect("clap requires --out-dir");
            let mut reports = Vec::with_capacity(b - a + 1);
            for r in a..=b {
                let out = run_pipeline_with_r(&panel, &cfg, r).with_context(|| format!("r = {r}"))?;
                save_run(&out, dir, &format!("_r{r}"))?;
                reports.push(out.report);
            }
            stdout.write_all(to_json(&reports)?.as_bytes())?;
        }
        None => {
            let out = run_pipeline(&panel, &cfg)?;
            if let Some(dir) = &args.out_dir {
                save_run(&out, dir, "")?;
            }
            stdout.write_all(to_json(&out.report)?.as_bytes())?;
        }
    }
    stdout.flush()?;
    Ok(())
}

fn paper_table(table: u8, modes: &[StandardizationMode]) -> Vec<(DgpSpec, StandardizationMode)> {
    let mut runs = Vec::new();
    let mut grid = |kind: DgpKind, rho_f: f64, rho_e: f64| {
        for t in GRID_T {
            for n in GRID_N {
                for &mode in modes {
                    let spec = DgpSpec { kind, t, n, rho_f, rho_e, seed: 0 };
                    runs.push((spec, mode));
                }
            }
        }
    };
    match table {
        2 => grid(DgpKind::M2, 0.0, 0.0),
        3 => grid(DgpKind::M2, 0.7, 0.3),
        4 => {
            grid(DgpKind::M3, 0.0, 0.0);
            grid(DgpKind::M3, 0.7, 0.3);
        }
        _ => {
            runs.extend(modes.iter().map(|&mode| (DgpSpec::m1(0), mode)));
        }
    }
    runs
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = build_config(&args.tuning)?;
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let runs = match (args.paper_table, args.model) {
        (Some(table), _) => {
            let modes = match args.tuning.mode {
                Some(m) => vec![m.into()],
                None => MODES.to_vec(),
            };
            paper_table(table, &modes)
        }
        (None, Some(kind)) => {
            let (t_default, n_default) = match kind {
                DgpKind::M1 => (DgpSpec::M1_T, DgpSpec::M1_N),
                _ => (400, 100),
            };
            let spec = DgpSpec {
                kind,
                t: args.t.unwrap_or(t_default),
                n: args.n.unwrap_or(n_default),
                rho_f: args.rho_f,
                rho_e: args.rho_e,
                seed: 0,
            };
            vec![(spec, cfg.mode)]
        }
        (None, None) => bail!("a model or --paper-table is required"),
    };
    for (spec, _) in &runs {
        spec.validate()?;
    }

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let n_true = runs[0].0.true_changepoints().len();
    w.write_record(EvalSummary::csv_header(n_true))?;
    for (spec, mode) in runs {
        let run_cfg = DetectorConfig { mode, ..cfg.clone() };
        let summary = monte_carlo_with_threads(&spec, &run_cfg, args.reps, cfg.seed, args.threads)?;
        w.write_record(summary.csv_row())?;
        w.flush()?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumReport {
    n: usize,
    t: usize,
    r_max: usize,
    eigenvalues: Vec<f64>,
    information_criteria: mosum_core::FactorCountReport,
    stable: mosum_core::FactorCountReport,
    eigen_ratio: mosum_core::FactorCountReport,
}

pub fn spectrum(args: SpectrumArgs) -> Result<()> {
    let panel = read_input(&args.input)?;
    let (n, t) = (panel.n(), panel.t());
    let r_max = args.r_max.unwrap_or_else(|| 8.min(n.min(t).saturating_sub(1)));
    let defaults = DetectorConfig::default();
    let report = SpectrumReport {
        n,
        t,
        r_max,
        information_criteria: bai_ng_ic(&panel, r_max)?,
        stable: stable_factor_count(&panel, r_max, &defaults.stable_grid, args.stable_reps, args.seed)?,
        eigen_ratio: eigenvalue_ratio_count(&panel, r_max)?,
        eigenvalues: panel_spectrum(&panel),
    };
    let mut stdout = io::stdout().lock();
    stdout.write_all(to_json(&report)?.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

pub fn volatility(args: VolatilityArgs) -> Result<()> {
    let file = File::open(&args.input).with_context(|| format!("cannot read {}", args.input.display()))?;
    let ohlc = read_ohlc(io::BufReader::new(file)).with_context(|| format!("in {}", args.input.display()))?;
    let panel = log_range_volatility(&ohlc, !args.no_demean)?;
    let layout: Layout = args.layout.into();
    match &args.out {
        Some(path) => panel.save_csv(path, layout)?,
        None => {
            let mut stdout = io::stdout().lock();
            panel.write_csv(&mut stdout, layout)?;
            stdout.flush()?;
        }
    }
    Ok(())
}
