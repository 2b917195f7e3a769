//! Subcommand implementations.

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use caffeine::dynamics::TrajectoryRow;
use caffeine::protocols::{
    ising_cells, reference_exact_cd, run_agp_learning, run_ising_anneal, run_landscape,
    run_state_prep, Arm, ArmReport, AxisSpec, ExperimentConfig, IsingRow, LandscapeKind,
    LearningReport, REPORT_SCHEMA_VERSION,
};
use caffeine::Error;

use crate::output::{header, num, opt_num, sha256_hex, OutputDir, RunManifest};
use crate::Common;

const DEFAULT_OUT_DIR: &str = "caffeine-out";

pub enum Failure {
    /// Unreadable or inconsistent configuration, unusable output directory.
    Config(String),
    /// The numerics failed (propagation, optimization, degeneracy).
    Numerical(String),
    Interrupted,
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Interrupted => 130,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Interrupted => write!(f, "interrupted; partial results were kept"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::SizeLimit { .. }
            | Error::OutOfDomain { .. }
            | Error::IndexOutOfRange { .. }
            | Error::DimensionMismatch { .. }
            | Error::UncalibratedHarmonic { .. }
            | Error::DegenerateGroundState { .. } => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io(e: anyhow::Error) -> Failure {
    Failure::Config(format!("{e:#}"))
}

type Outcome = Result<(), Failure>;

/// Loaded configuration plus what the manifest needs about it.
struct Loaded {
    cfg: ExperimentConfig,
    path: PathBuf,
    sha256: String,
    started: String,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let started = chrono::Utc::now().to_rfc3339();
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("reading {}: {e}", common.config.display())))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", common.config.display())))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.omega_mult {
        cfg.drive.omega_multiple = m;
    }
    if let Some(d) = &common.out_dir {
        cfg.output.dir = Some(d.clone());
    }
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        // a pool already exists when several commands run in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
    Ok(Loaded {
        cfg,
        path: common.config.clone(),
        sha256: sha256_hex(text.as_bytes()),
        started,
    })
}

fn validate(cfg: &ExperimentConfig) -> Outcome {
    cfg.validate().map_err(Failure::from)
}

fn open_output(cfg: &ExperimentConfig) -> Result<OutputDir, Failure> {
    let dir = cfg
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    OutputDir::create(&dir).map_err(io)
}

fn finish(out: OutputDir, loaded: &Loaded, command: &str, complete: bool) -> Outcome {
    let dir = out.path().to_path_buf();
    out.finish(RunManifest {
        schema_version: REPORT_SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_path: loaded.path.display().to_string(),
        config_sha256: loaded.sha256.clone(),
        seed: loaded.cfg.seed,
        started_at: loaded.started.clone(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        complete,
        files: Vec::new(),
    })
    .map_err(io)?;
    println!("outputs written to {}", dir.display());
    Ok(())
}

/// Flag set by Ctrl-C; optimizers stop at the next evaluation.
fn interrupt_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    let _ = ctrlc::set_handler(move || f.store(true, Ordering::SeqCst));
    flag
}

fn trajectory_csv(out: &mut OutputDir, name: &str, rows: &[TrajectoryRow]) -> Outcome {
    let h = header(&[
        "t",
        "lambda",
        "fidelity_target",
        "fidelity_instantaneous",
        "energy",
        "norm_drift",
    ]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.t),
                num(r.lambda),
                num(r.fidelity_target),
                num(r.fidelity_instantaneous),
                num(r.energy),
                num(r.norm_drift),
            ]
        })
        .collect();
    out.write_csv(name, &h, &body).map_err(io)
}

fn arm_outputs(out: &mut OutputDir, a: &ArmReport) -> Outcome {
    trajectory_csv(out, &format!("trajectory_{}.csv", a.arm), &a.trajectory)?;
    if let Some(opt) = &a.optimization {
        let mut best = f64::INFINITY;
        let body: Vec<Vec<String>> = opt
            .cost_trace
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                best = best.min(c);
                vec![(i + 1).to_string(), num(c), num(best)]
            })
            .collect();
        out.write_csv(
            &format!("cost_trace_{}.csv", a.arm),
            &header(&["evaluation", "cost", "best_cost"]),
            &body,
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn state_prep(common: &Common, arms: &[String]) -> Outcome {
    let mut loaded = load(common)?;
    if !arms.is_empty() {
        loaded.cfg.arms = arms
            .iter()
            .map(|a| Arm::parse(a))
            .collect::<Result<_, _>>()?;
    }
    validate(&loaded.cfg)?;
    let mut out = open_output(&loaded.cfg)?;
    let flag = interrupt_flag();
    let report = run_state_prep(&loaded.cfg, Some(&flag))?;
    out.write_json("report.json", &report).map_err(io)?;
    let mut summary = Vec::new();
    for a in &report.arms {
        arm_outputs(&mut out, a)?;
        summary.push(vec![
            a.arm.to_string(),
            num(a.infidelity),
            num(a.min_instantaneous_fidelity),
            a.parameters
                .iter()
                .map(|&p| num(p))
                .collect::<Vec<_>>()
                .join(" "),
        ]);
        println!("{:<20} 1-F = {:.6e}", a.arm.name(), a.infidelity);
    }
    out.write_csv(
        "summary.csv",
        &header(&[
            "arm",
            "infidelity",
            "min_instantaneous_fidelity",
            "parameters",
        ]),
        &summary,
    )
    .map_err(io)?;
    let interrupted = flag.load(Ordering::SeqCst);
    finish(out, &loaded, "state-prep", !interrupted)?;
    if interrupted {
        return Err(Failure::Interrupted);
    }
    Ok(())
}

pub fn exact_cd(common: &Common) -> Outcome {
    let loaded = load(common)?;
    validate(&loaded.cfg)?;
    let mut out = open_output(&loaded.cfg)?;
    let report = reference_exact_cd(&loaded.cfg)?;
    #[derive(serde::Serialize)]
    struct Report<'a> {
        schema_version: u32,
        config: &'a ExperimentConfig,
        arm: &'a ArmReport,
    }
    out.write_json(
        "report.json",
        &Report {
            schema_version: REPORT_SCHEMA_VERSION,
            config: &loaded.cfg,
            arm: &report,
        },
    )
    .map_err(io)?;
    trajectory_csv(&mut out, "trajectory_exact_cd.csv", &report.trajectory)?;
    println!(
        "exact_cd 1-F = {:.6e}, min instantaneous fidelity = {:.12}",
        report.infidelity, report.min_instantaneous_fidelity
    );
    finish(out, &loaded, "exact-cd", true)
}

fn anneal_rows(rows: &[IsingRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.sites.to_string(),
                r.harmonics.map(|v| v.to_string()).unwrap_or_default(),
                r.segments.map(|v| v.to_string()).unwrap_or_default(),
                r.arm.to_string(),
                num(r.final_energy),
                num(r.ground_energy),
                num(r.energy_gap),
                r.evaluations.to_string(),
                r.termination.map(|t| format!("{t:?}")).unwrap_or_default(),
            ]
        })
        .collect()
}

/// Grid order: by chain length, baseline first, then `(N_k, N_τ)`.
fn sort_rows(rows: &mut [IsingRow]) {
    rows.sort_by_key(|r| (r.sites, r.arm != Arm::Unassisted, r.harmonics, r.segments));
}

pub fn anneal(common: &Common) -> Outcome {
    let loaded = load(common)?;
    validate(&loaded.cfg)?;
    loaded.cfg.ising_for(2)?;
    let out = Mutex::new(open_output(&loaded.cfg)?);
    let h = header(&[
        "sites",
        "harmonics",
        "segments",
        "arm",
        "final_energy",
        "ground_energy",
        "energy_gap",
        "evaluations",
        "termination",
    ]);
    let done: Mutex<Vec<IsingRow>> = Mutex::new(Vec::new());
    let flag = interrupt_flag();
    // rows reach disk as soon as they finish, so an interrupted run keeps them
    let on_row = |row: &IsingRow| {
        let mut d = done.lock().unwrap();
        d.push(row.clone());
        sort_rows(&mut d);
        let rows = anneal_rows(&d);
        if let Err(e) = out.lock().unwrap().write_csv("anneal.csv", &h, &rows) {
            eprintln!("warning: could not update anneal.csv: {e:#}");
        }
    };
    println!(
        "{} chain lengths x {} cells",
        loaded.cfg.anneal.sites.len(),
        ising_cells(&loaded.cfg).len()
    );
    let result = run_ising_anneal(&loaded.cfg, Some(&flag), &on_row);
    let mut out = out.into_inner().unwrap();
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = finish(out, &loaded, "anneal", false);
            return Err(e.into());
        }
    };
    let mut rows = report.rows.clone();
    sort_rows(&mut rows);
    out.write_csv("anneal.csv", &h, &anneal_rows(&rows))
        .map_err(io)?;
    out.write_json("report.json", &report).map_err(io)?;
    for r in &rows {
        println!(
            "N={} {:<10} N_k={:<2} N_tau={:<3} E-E_T = {:.6}",
            r.sites,
            r.arm.name(),
            opt_num(r.harmonics.map(|v| v as f64)),
            opt_num(r.segments.map(|v| v as f64)),
            r.energy_gap
        );
    }
    finish(out, &loaded, "anneal", report.complete)?;
    if !report.complete {
        return Err(Failure::Interrupted);
    }
    Ok(())
}

fn learning_csv(report: &LearningReport) -> (Vec<String>, Vec<Vec<String>>) {
    let nk = report.config.drive.harmonics;
    let oracle = report.config.model.two_qubit().is_some();
    let mut h = header(&["segment", "t_start", "t_end", "lambda_start", "lambda_end"]);
    h.extend((1..=nk).map(|k| format!("learned_beta{k}")));
    if oracle {
        h.extend(header(&["analytical_beta1", "analytical_beta1_midpoint"]));
    }
    h.extend(header(&["energy", "tail"]));
    let rows = report
        .comparison
        .iter()
        .zip(&report.segments)
        .map(|(c, s)| {
            let mut r = vec![
                c.segment.to_string(),
                num(c.t_start),
                num(c.t_end),
                num(c.lambda_start),
                num(c.lambda_end),
            ];
            r.extend(s.betas.iter().map(|&b| num(b)));
            if oracle {
                r.push(opt_num(c.analytical_beta1));
                r.push(opt_num(c.analytical_beta1_midpoint));
            }
            r.push(num(s.energy));
            r.push(c.tail.to_string());
            r
        })
        .collect();
    (h, rows)
}

pub fn learn_agp(common: &Common) -> Outcome {
    let loaded = load(common)?;
    validate(&loaded.cfg)?;
    let mut out = open_output(&loaded.cfg)?;
    let flag = interrupt_flag();
    let report = run_agp_learning(&loaded.cfg, Some(&flag))?;
    out.write_json("report.json", &report).map_err(io)?;
    let (h, rows) = learning_csv(&report);
    out.write_csv("learned_beta.csv", &h, &rows).map_err(io)?;
    for c in &report.comparison {
        println!(
            "segment {:>3} t/tau [{:.4}, {:.4}] beta1 = {:+.6}{}{}",
            c.segment,
            c.t_start / loaded.cfg.schedule.tau,
            c.t_end / loaded.cfg.schedule.tau,
            c.learned_beta1,
            c.analytical_beta1
                .map(|a| format!("  closed form {a:+.6}"))
                .unwrap_or_default(),
            if c.tail { "  (tail)" } else { "" }
        );
    }
    if let Some(rms) = report.rms_deviation {
        println!(
            "RMS deviation over {} scored segments: {rms:.4} (threshold {})",
            report.scored_segments, loaded.cfg.learning.rms_threshold
        );
    }
    let interrupted = flag.load(Ordering::SeqCst);
    finish(out, &loaded, "learn-agp", report.complete)?;
    if interrupted {
        return Err(Failure::Interrupted);
    }
    if let Some(e) = &report.error {
        return Err(Failure::Numerical(e.clone()));
    }
    Ok(())
}

pub fn landscape(common: &Common, kind: Option<&str>, axes: &[String]) -> Outcome {
    let mut loaded = load(common)?;
    if let Some(k) = kind {
        loaded.cfg.landscape.kind = match k.to_ascii_lowercase().as_str() {
            "gamma" => LandscapeKind::Gamma,
            "beta" => LandscapeKind::Beta,
            other => return Err(Failure::Config(format!("unknown landscape kind '{other}'"))),
        };
    }
    if !axes.is_empty() {
        loaded.cfg.landscape.axes = axes
            .iter()
            .map(|a| AxisSpec::parse(a))
            .collect::<Result<_, _>>()?;
    }
    validate(&loaded.cfg)?;
    let mut out = open_output(&loaded.cfg)?;
    let report = run_landscape(&loaded.cfg)?;
    let nt = loaded.cfg.drive.segments;
    let mut h: Vec<String> = report
        .indices
        .iter()
        .map(|&i| match report.kind {
            LandscapeKind::Gamma => format!("gamma{}", i + 1),
            LandscapeKind::Beta => format!("beta_k{}_s{}", i / nt + 1, i % nt + 1),
        })
        .collect();
    h.extend(header(&["cost", "error"]));
    let rows: Vec<Vec<String>> = report
        .landscape
        .rows
        .iter()
        .map(|r| {
            let mut v: Vec<String> = r.params.iter().map(|&p| num(p)).collect();
            v.push(num(r.cost));
            v.push(r.error.clone().unwrap_or_default());
            v
        })
        .collect();
    out.write_csv("landscape.csv", &h, &rows).map_err(io)?;
    out.write_json("report.json", &report).map_err(io)?;
    if let Some(m) = report.landscape.min_row() {
        println!("minimum cost {:.6e} at {:?}", m.cost, m.params);
    }
    finish(out, &loaded, "landscape", true)
}
