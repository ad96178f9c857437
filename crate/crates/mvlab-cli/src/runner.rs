//! Experiment orchestration.
//!
//! A run is a pure function of its config: every random draw is addressed
//! by `(seed, replicate, particle, step)` through the keyed generator, grid
//! cells are dispatched to a worker pool, and the collected rows are
//! emitted in grid-coordinate order (particles ascending, then step, then
//! ε) rather than completion order.  Aggregation over replicates happens
//! sequentially after collection, so the CSV bytes are identical for any
//! `--threads` setting.
//!
//! Reference law priority: the exact Gaussian marginal flow when the model
//! is affine and one-dimensional (where the cloud↔law distance is exact),
//! otherwise a surrogate system 10× the largest simulated size; the choice
//! is recorded in the manifest.  Theoretical tail curves are solved from
//! the model constants at documented defaults; a model outside a curve's
//! regime yields a flagged-invalid column, not an error — only assumptions
//! the experiment itself relies on cause a refusal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use mvlab_core::numerics::fit_line;
use mvlab_core::{
    chaos_statistic, derived_constants, exact_law_stationary, picard_fixed_point,
    propagate_reference, simulate, solve_exch_exp_constants, solve_iid_exp_constants,
    solve_poly_constants, tail_estimator, validate, w1_cloud, w1_cloud_gaussian_1d, Cloud,
    Error as CoreError, ExchExpConstants, IidExpConstants, InitialLawSpec, KeyFrame, Model,
    PicardOptions, PolyUniformConstants, ReferenceTrack, ValidationReport,
};

use crate::config::{ConfigError, ExperimentConfig, Kind};
use crate::output::{
    config_hash, load_manifest, persist, Cell, Manifest, ReferenceNote, ResultTable, RunOutput,
};

/// Documented defaults for the back-solved tail constants: the
/// exponential-moment anchor and the covering prefactor.
pub const ALPHA0_DEFAULT: f64 = 1.0;
pub const C_D_DEFAULT: f64 = 1.0;
/// Wilson-interval width for empirical tail rows.
const TAIL_Z: f64 = 1.96;
/// Surrogate reference size relative to the largest simulated system.
const SURROGATE_FACTOR: u64 = 10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The model document itself is unusable — a configuration problem.
    #[error("config: {0}")]
    BadModel(String),
    /// The model is fine but outside the regime the experiment asserts.
    #[error("refusing {kind}: {detail}")]
    Refusal { kind: Kind, detail: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 2 config, 3 regime refusal, 4 numeric/runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::BadModel(_) => 2,
            RunError::Refusal { .. } => 3,
            RunError::Numeric(_) | RunError::Io { .. } => 4,
        }
    }
}

/// Core errors escaping a running experiment: regime violations become
/// refusals, everything else is a numeric failure.
fn core_fail(kind: Kind, e: CoreError) -> RunError {
    match e {
        CoreError::Regime(msg) => RunError::Refusal { kind, detail: msg },
        other => RunError::Numeric(other.to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; 0 picks the machine default.  Output bytes do not
    /// depend on this.
    pub threads: usize,
    pub quiet: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: 0,
            quiet: true,
        }
    }
}

struct KindOutput {
    table: ResultTable,
    constants: BTreeMap<String, Value>,
    reference: ReferenceNote,
}

/// Execute a config and persist its table.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput, RunError> {
    cfg.validate_grids().map_err(|msg| {
        RunError::Config(ConfigError::Schema {
            origin: "config".into(),
            msg,
        })
    })?;
    let spec: Model = cfg.model.to_spec().map_err(|e| RunError::BadModel(e.to_string()))?;
    let report = validate(&spec);
    refusal_gate(cfg.kind, &report)?;

    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| RunError::Numeric(e.to_string()))?;
    let KindOutput {
        table,
        mut constants,
        reference,
    } = pool.install(|| dispatch(cfg, &spec, &report))?;
    constants.insert(
        "derived".into(),
        serde_json::to_value(derived_constants(&spec)).expect("constants serialize"),
    );

    let manifest = Manifest {
        tool: "mvlab".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.kind,
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        reference,
        constants,
        columns: table.columns.iter().map(|s| s.to_string()).collect(),
        rows: table.rows.len(),
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    let out = persist(table, manifest).map_err(|(path, source)| RunError::Io { path, source })?;
    if !opts.quiet {
        announce(&out);
    }
    Ok(out)
}

/// Re-run a persisted manifest; the embedded config is authoritative.
pub fn rerun(
    manifest_path: &Path,
    out_override: Option<&Path>,
    opts: &RunOptions,
) -> Result<RunOutput, RunError> {
    let manifest = load_manifest(manifest_path).map_err(|msg| {
        RunError::Config(ConfigError::Schema {
            origin: manifest_path.display().to_string(),
            msg,
        })
    })?;
    let mut cfg = manifest.config;
    if let Some(dir) = out_override {
        cfg.outdir = dir.display().to_string();
    }
    run(&cfg, opts)
}

fn announce(out: &RunOutput) {
    println!(
        "{}: {} rows -> {}",
        out.manifest.kind,
        out.manifest.rows,
        out.dir.display()
    );
    if out.manifest.kind == Kind::Validate {
        for row in &out.table.rows {
            println!("  {} = {} ok={}", row[0], row[1], row[2]);
        }
    }
}

/// Assumptions each kind relies on; failing ones are listed in the refusal.
fn refusal_gate(kind: Kind, r: &ValidationReport) -> Result<(), RunError> {
    let mut required: Vec<(&str, bool)> = vec![
        ("sigma_finite", r.sigma_finite),
        ("c0_finite", r.c0_finite),
        ("matrix_contractive", r.matrix_contractive),
        ("moment_1alpha", r.moment_1alpha),
        ("unique_invariant", r.unique_invariant),
    ];
    match kind {
        Kind::Validate => required.clear(),
        Kind::FixedPoint => required.push(("fixed_point_regime", r.fixed_point_regime)),
        Kind::UniformSweep => required.push(("uniform_l1_regime", r.uniform_l1_regime)),
        _ => {}
    }
    let failed: Vec<&str> = required
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| *name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::Refusal {
            kind,
            detail: format!("failed assumptions: {}", failed.join(", ")),
        })
    }
}

fn dispatch(cfg: &ExperimentConfig, spec: &Model, report: &ValidationReport) -> Result<KindOutput, RunError> {
    match cfg.kind {
        Kind::Validate => run_validate(report),
        Kind::Simulate => run_sweep(cfg, spec, SweepShape::Observables),
        Kind::PocSweep => run_sweep(cfg, spec, SweepShape::Distances),
        Kind::UniformSweep => run_sweep(cfg, spec, SweepShape::Supremum),
        Kind::FixedPoint => run_fixed_point(cfg, spec),
        Kind::Tails => run_tails(cfg, spec),
        Kind::Chaos => run_chaos(cfg, spec),
        Kind::Bounds => run_bounds(cfg, spec),
    }
}

// ---------------------------------------------------------------------------
// Shared pieces.

fn sorted_dedup_u64(xs: &[u64]) -> Vec<u64> {
    let mut v = xs.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn sorted_dedup_f64(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Reference flow for distances: exact marginals when the model is affine
/// and the distance to them is exact (d = 1), else a surrogate system.
fn make_reference(
    kind: Kind,
    spec: &Model,
    horizon: u64,
    max_n: u64,
    seed: u64,
) -> Result<(ReferenceTrack<f64>, ReferenceNote), RunError> {
    let n_ref = SURROGATE_FACTOR * max_n;
    if spec.dim == 1 {
        let track = propagate_reference(spec, horizon, n_ref as usize, seed)
            .map_err(|e| core_fail(kind, e))?;
        let note = if track.is_exact() {
            ReferenceNote::Exact
        } else {
            ReferenceNote::Surrogate {
                particles: n_ref,
                seed,
            }
        };
        Ok((track, note))
    } else {
        // Exact marginals exist for the affine family in any dimension, but
        // the cloud↔law distance is only exact on the line.
        let frame = KeyFrame::auxiliary(seed, u64::MAX);
        let traj =
            simulate(spec, n_ref as usize, horizon, frame, 1).map_err(|e| core_fail(kind, e))?;
        Ok((
            ReferenceTrack::Surrogate(traj),
            ReferenceNote::Surrogate {
                particles: n_ref,
                seed,
            },
        ))
    }
}

fn w1_to_reference(cloud: &Cloud, step: u64, track: &ReferenceTrack<f64>) -> Result<f64, CoreError> {
    match track {
        ReferenceTrack::Exact(_) => {
            let law = track
                .law_at(step)
                .ok_or_else(|| CoreError::invalid("step", "beyond the reference horizon"))?;
            w1_cloud_gaussian_1d(cloud, law)
        }
        ReferenceTrack::Surrogate(traj) => {
            let reference = traj
                .at_step(step)
                .ok_or_else(|| CoreError::invalid("step", "beyond the reference horizon"))?;
            Ok(w1_cloud(cloud, reference)?.value)
        }
    }
}

/// Exact zero initial-term detection: i.i.d. point-mass initial data makes
/// the empirical initial measure equal the limit law surely.
fn initial_is_point_mass(spec: &Model) -> bool {
    match &spec.initial {
        InitialLawSpec::Iid(law) => law.cov().rows().iter().all(|&v| v == 0.0),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// simulate / poc-sweep / uniform-sweep: one trajectory sweep, three shapes.

#[derive(Clone, Copy, PartialEq)]
enum SweepShape {
    /// Per-cell observables plus reference distance.
    Observables,
    /// Distance to the limit flow per (N, n).
    Distances,
    /// Sup over n of the mean distance, per N.
    Supremum,
}

struct StepSample {
    w1: f64,
    mean_abs: f64,
    second: f64,
}

fn run_sweep(cfg: &ExperimentConfig, spec: &Model, shape: SweepShape) -> Result<KindOutput, RunError> {
    let kind = cfg.kind;
    let particles = sorted_dedup_u64(&cfg.particles);
    let steps = sorted_dedup_u64(&cfg.steps);
    let horizon = *steps.last().expect("validated nonempty");
    let max_n = *particles.last().expect("validated nonempty");
    let replicates = cfg.replicates;
    let (track, reference) = make_reference(kind, spec, horizon, max_n, cfg.seed)?;

    // One task per (N, replicate); each returns per-listed-step samples.
    let cells: Vec<(usize, u64)> = particles
        .iter()
        .enumerate()
        .flat_map(|(ni, _)| (0..replicates).map(move |rep| (ni, rep)))
        .collect();
    let samples: Vec<Vec<StepSample>> = cells
        .par_iter()
        .map(|&(ni, rep)| -> Result<Vec<StepSample>, CoreError> {
            let frame = KeyFrame::system(cfg.seed, rep);
            let traj = simulate(spec, particles[ni] as usize, horizon, frame, 1)?;
            steps
                .iter()
                .map(|&s| {
                    let cloud = traj
                        .at_step(s)
                        .ok_or_else(|| CoreError::invalid("step", "not recorded"))?;
                    Ok(StepSample {
                        w1: w1_to_reference(cloud, s, &track)?,
                        mean_abs: cloud.mean_abs(),
                        second: cloud.mean_abs_pow(2.0),
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| core_fail(kind, e))?;

    // cell (ni, rep) sits at index ni·replicates + rep.
    let cell = |ni: usize, rep: u64| &samples[ni * replicates as usize + rep as usize];
    let mut constants = BTreeMap::new();
    let table = match shape {
        SweepShape::Observables => {
            let mut t = ResultTable::new(
                kind,
                vec![
                    "particles",
                    "step",
                    "mean_abs",
                    "mean_abs_se",
                    "second_moment",
                    "second_moment_se",
                    "w1_ref",
                    "w1_ref_se",
                    "reference",
                    "ok",
                ],
            );
            for (ni, &n) in particles.iter().enumerate() {
                for (si, &s) in steps.iter().enumerate() {
                    let pull = |f: fn(&StepSample) -> f64| -> Vec<f64> {
                        (0..replicates).map(|rep| f(&cell(ni, rep)[si])).collect()
                    };
                    let (ma, ma_se) = mean_se(&pull(|x| x.mean_abs));
                    let (m2, m2_se) = mean_se(&pull(|x| x.second));
                    let (w1, w1_se) = mean_se(&pull(|x| x.w1));
                    let ok = [ma, ma_se, m2, m2_se, w1, w1_se].iter().all(|v| v.is_finite());
                    t.push(vec![
                        Cell::UInt(n),
                        Cell::UInt(s),
                        Cell::Float(ma),
                        Cell::Float(ma_se),
                        Cell::Float(m2),
                        Cell::Float(m2_se),
                        Cell::Float(w1),
                        Cell::Float(w1_se),
                        Cell::Text(reference.label().into()),
                        Cell::Bool(ok),
                    ]);
                }
            }
            t
        }
        SweepShape::Distances => {
            let mut t = ResultTable::new(
                kind,
                vec!["particles", "step", "w1_mean", "w1_stderr", "reference", "ok"],
            );
            for (ni, &n) in particles.iter().enumerate() {
                for (si, &s) in steps.iter().enumerate() {
                    let w1s: Vec<f64> =
                        (0..replicates).map(|rep| cell(ni, rep)[si].w1).collect();
                    let (mean, se) = mean_se(&w1s);
                    t.push(vec![
                        Cell::UInt(n),
                        Cell::UInt(s),
                        Cell::Float(mean),
                        Cell::Float(se),
                        Cell::Text(reference.label().into()),
                        Cell::Bool(mean.is_finite() && se.is_finite()),
                    ]);
                }
            }
            t
        }
        SweepShape::Supremum => {
            let mut t = ResultTable::new(
                kind,
                vec!["particles", "sup_step", "w1_sup", "w1_sup_se", "reference", "ok"],
            );
            let mut sups = Vec::new();
            for (ni, &n) in particles.iter().enumerate() {
                let mut sup = f64::NEG_INFINITY;
                let mut sup_se = f64::NAN;
                let mut sup_step = steps[0];
                for (si, &s) in steps.iter().enumerate() {
                    let w1s: Vec<f64> =
                        (0..replicates).map(|rep| cell(ni, rep)[si].w1).collect();
                    let (mean, se) = mean_se(&w1s);
                    if mean > sup {
                        sup = mean;
                        sup_se = se;
                        sup_step = s;
                    }
                }
                sups.push((n, sup));
                t.push(vec![
                    Cell::UInt(n),
                    Cell::UInt(sup_step),
                    Cell::Float(sup),
                    Cell::Float(sup_se),
                    Cell::Text(reference.label().into()),
                    Cell::Bool(sup.is_finite() && sup_se.is_finite()),
                ]);
            }
            // Empirical decay rate of the sup, for the manifest.
            if sups.len() >= 2 && sups.iter().all(|&(_, s)| s > 0.0) {
                let xs: Vec<f64> = sups.iter().map(|&(n, _)| (n as f64).ln()).collect();
                let ys: Vec<f64> = sups.iter().map(|&(_, s)| s.ln()).collect();
                let fit = fit_line(&xs, &ys);
                constants.insert(
                    "sup_decay_fit".into(),
                    json!({"slope": fit.slope, "slope_stderr": fit.slope_stderr}),
                );
            }
            t
        }
    };
    constants.insert(
        "sweep".into(),
        json!({"replicates": replicates, "horizon": horizon}),
    );
    Ok(KindOutput {
        table,
        constants,
        reference,
    })
}

// ---------------------------------------------------------------------------
// fixed-point.

fn run_fixed_point(cfg: &ExperimentConfig, spec: &Model) -> Result<KindOutput, RunError> {
    let n = *sorted_dedup_u64(&cfg.particles).last().expect("validated");
    let mut opts = PicardOptions::default();
    if let Some(&cap) = cfg.steps.iter().max() {
        opts.max_iters = cap.max(1);
    }
    let report =
        picard_fixed_point(spec, n as usize, cfg.seed, opts).map_err(|e| core_fail(cfg.kind, e))?;

    let mut table = ResultTable::new(cfg.kind, vec!["iter", "gap", "ok"]);
    for (k, &gap) in report.gaps.iter().enumerate() {
        table.push(vec![
            Cell::UInt(k as u64),
            Cell::Float(gap),
            Cell::Bool(gap.is_finite()),
        ]);
    }

    let mut constants = BTreeMap::new();
    constants.insert(
        "picard".into(),
        json!({
            "particles": n,
            "iterations": report.iterations,
            "final_gap": report.final_gap,
            "floor": report.floor,
            "contraction_estimate": report.contraction_estimate,
            "converged": report.converged,
        }),
    );
    // Distance to the closed-form invariant law where one exists.
    let reference = match exact_law_stationary(spec) {
        Ok(law) if spec.dim == 1 => {
            let w1 = w1_cloud_gaussian_1d(&report.cloud, &law)
                .map_err(|e| core_fail(cfg.kind, e))?;
            constants.insert(
                "stationary_oracle".into(),
                json!({"w1": w1, "mean": law.mean_1d(), "sd": law.std_1d()}),
            );
            ReferenceNote::Exact
        }
        Ok(_) => {
            constants.insert(
                "stationary_oracle".into(),
                json!("exact law exists but the cloud distance is only exact on the line"),
            );
            ReferenceNote::None
        }
        Err(e) => {
            constants.insert("stationary_oracle".into(), json!(e.to_string()));
            ReferenceNote::None
        }
    };
    Ok(KindOutput {
        table,
        constants,
        reference,
    })
}

// ---------------------------------------------------------------------------
// tails.

/// The three back-solved tail-curve families, each independently optional:
/// a model outside one regime still gets the others.
struct Curves {
    poly: Result<PolyUniformConstants, String>,
    exch: Result<ExchExpConstants, String>,
    iid: Result<IidExpConstants, String>,
    initial_exact: bool,
}

fn solve_curves(spec: &Model) -> Curves {
    Curves {
        poly: solve_poly_constants(spec).map_err(|e| e.to_string()),
        exch: solve_exch_exp_constants(spec, ALPHA0_DEFAULT).map_err(|e| e.to_string()),
        iid: solve_iid_exp_constants(spec, ALPHA0_DEFAULT, C_D_DEFAULT).map_err(|e| e.to_string()),
        initial_exact: initial_is_point_mass(spec),
    }
}

impl Curves {
    fn to_constants(&self, constants: &mut BTreeMap<String, Value>) {
        fn slot<C: serde::Serialize>(r: &Result<C, String>) -> Value {
            match r {
                Ok(c) => serde_json::to_value(c).expect("constants serialize"),
                Err(msg) => json!({ "rejected": msg }),
            }
        }
        constants.insert("poly_uniform".into(), slot(&self.poly));
        constants.insert("exp_exchangeable".into(), slot(&self.exch));
        constants.insert("exp_independent".into(), slot(&self.iid));
        constants.insert(
            "solver_defaults".into(),
            json!({"alpha0": ALPHA0_DEFAULT, "c_d": C_D_DEFAULT,
                   "initial_term_exact_zero": self.initial_exact}),
        );
    }

    /// (value, valid) for each curve at particle count `n` and level `eps`.
    /// The uniform curves carry an initial-measure term; it is exactly zero
    /// for i.i.d. point-mass initial data and otherwise unknown, in which
    /// case the curve is reported at zero initial term but flagged invalid.
    fn at(&self, n: f64, eps: f64) -> [(f64, bool); 3] {
        let poly = match &self.poly {
            Ok(c) => match c.bound(n, eps, 0.0) {
                Ok(b) => (b.value, b.valid && self.initial_exact),
                Err(_) => (f64::NAN, false),
            },
            Err(_) => (f64::NAN, false),
        };
        let exch = match &self.exch {
            Ok(c) => match c.bound(n, eps, 0.0) {
                Ok(b) => (b.value, b.valid && self.initial_exact),
                Err(_) => (f64::NAN, false),
            },
            Err(_) => (f64::NAN, false),
        };
        let iid = match &self.iid {
            Ok(c) => match c.bound(n, eps) {
                Ok(b) => (b.value, b.valid),
                Err(_) => (f64::NAN, false),
            },
            Err(_) => (f64::NAN, false),
        };
        [poly, exch, iid]
    }
}

fn run_tails(cfg: &ExperimentConfig, spec: &Model) -> Result<KindOutput, RunError> {
    let kind = cfg.kind;
    let n = *sorted_dedup_u64(&cfg.particles).last().expect("validated");
    let step = *sorted_dedup_u64(&cfg.steps).last().expect("validated");
    let eps = sorted_dedup_f64(&cfg.eps);
    let (track, reference) = make_reference(kind, spec, step, n, cfg.seed)?;

    let distances: Vec<f64> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| -> Result<f64, CoreError> {
            let frame = KeyFrame::system(cfg.seed, rep);
            let traj = simulate(spec, n as usize, step, frame, step.max(1))?;
            let cloud = traj
                .at_step(step)
                .ok_or_else(|| CoreError::invalid("step", "not recorded"))?;
            w1_to_reference(cloud, step, &track)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| core_fail(kind, e))?;
    let tails = tail_estimator(&distances, &eps, TAIL_Z).map_err(|e| core_fail(kind, e))?;

    let curves = solve_curves(spec);
    let mut table = ResultTable::new(
        kind,
        vec![
            "eps",
            "p_hat",
            "wilson_high",
            "poly_uniform",
            "poly_uniform_valid",
            "exp_exchangeable",
            "exp_exchangeable_valid",
            "exp_independent",
            "exp_independent_valid",
            "ok",
        ],
    );
    for (i, &e) in eps.iter().enumerate() {
        let [(pv, pok), (ev, eok), (iv, iok)] = curves.at(n as f64, e);
        table.push(vec![
            Cell::Float(e),
            Cell::Float(tails.p_hat[i]),
            Cell::Float(tails.wilson_high[i]),
            Cell::Float(pv),
            Cell::Bool(pok),
            Cell::Float(ev),
            Cell::Bool(eok),
            Cell::Float(iv),
            Cell::Bool(iok),
            Cell::Bool(tails.p_hat[i].is_finite()),
        ]);
    }
    let mut constants = BTreeMap::new();
    curves.to_constants(&mut constants);
    constants.insert(
        "tails".into(),
        json!({"particles": n, "step": step, "replicates": cfg.replicates,
               "trials": tails.trials, "wilson_z": TAIL_Z}),
    );
    Ok(KindOutput {
        table,
        constants,
        reference,
    })
}

// ---------------------------------------------------------------------------
// chaos.

fn run_chaos(cfg: &ExperimentConfig, spec: &Model) -> Result<KindOutput, RunError> {
    let particles = sorted_dedup_u64(&cfg.particles);
    let horizon = *sorted_dedup_u64(&cfg.steps).last().expect("validated");
    let burn_in = horizon / 5;
    let tuple_size = 2usize;

    let reports: Vec<_> = particles
        .par_iter()
        .map(|&n| chaos_statistic(spec, n as usize, tuple_size, burn_in, horizon, cfg.seed))
        .collect::<Result<_, _>>()
        .map_err(|e| core_fail(cfg.kind, e))?;

    let mut table = ResultTable::new(
        cfg.kind,
        vec![
            "particles",
            "statistic",
            "noise_scale",
            "windows",
            "steps_used",
            "ok",
        ],
    );
    for (&n, r) in particles.iter().zip(&reports) {
        table.push(vec![
            Cell::UInt(n),
            Cell::Float(r.statistic),
            Cell::Float(r.noise_scale),
            Cell::UInt(r.windows as u64),
            Cell::UInt(r.steps_used),
            Cell::Bool(r.statistic.is_finite() && r.noise_scale.is_finite()),
        ]);
    }
    let mut constants = BTreeMap::new();
    constants.insert(
        "chaos".into(),
        json!({"tuple_size": tuple_size, "burn_in": burn_in, "horizon": horizon,
               "replicates_note": "time-averaged; replicates config field unused"}),
    );
    Ok(KindOutput {
        table,
        constants,
        reference: ReferenceNote::None,
    })
}

// ---------------------------------------------------------------------------
// bounds.

fn run_bounds(cfg: &ExperimentConfig, spec: &Model) -> Result<KindOutput, RunError> {
    let particles = sorted_dedup_u64(&cfg.particles);
    let eps = sorted_dedup_f64(&cfg.eps);
    let curves = solve_curves(spec);

    let mut table = ResultTable::new(
        cfg.kind,
        vec!["particles", "eps", "curve", "value", "valid", "ok"],
    );
    let names = ["poly_uniform", "exp_exchangeable", "exp_independent"];
    for &n in &particles {
        for &e in &eps {
            let vals = curves.at(n as f64, e);
            for (name, (value, valid)) in names.iter().zip(vals) {
                table.push(vec![
                    Cell::UInt(n),
                    Cell::Float(e),
                    Cell::Text((*name).into()),
                    Cell::Float(value),
                    Cell::Bool(valid),
                    Cell::Bool(value.is_finite()),
                ]);
            }
        }
    }
    let mut constants = BTreeMap::new();
    curves.to_constants(&mut constants);
    Ok(KindOutput {
        table,
        constants,
        reference: ReferenceNote::None,
    })
}

// ---------------------------------------------------------------------------
// validate.

fn run_validate(report: &ValidationReport) -> Result<KindOutput, RunError> {
    let mut table = ResultTable::new(Kind::Validate, vec!["check", "value", "ok"]);
    let flags: [(&str, bool); 12] = [
        ("sigma_finite", report.sigma_finite),
        ("c0_finite", report.c0_finite),
        ("matrix_contractive", report.matrix_contractive),
        ("moment_1alpha", report.moment_1alpha),
        ("unique_invariant", report.unique_invariant),
        ("bounded_d", report.bounded_d),
        ("exp_moments", report.exp_moments),
        ("fixed_point_regime", report.fixed_point_regime),
        ("uniform_l1_regime", report.uniform_l1_regime),
        ("poly_conc_regime", report.poly_conc_regime),
        ("exp_conc_exch_regime", report.exp_conc_exch_regime),
        ("exp_conc_iid_regime", report.exp_conc_iid_regime),
    ];
    for (name, ok) in flags {
        table.push(vec![
            Cell::Text(name.into()),
            Cell::Text(ok.to_string()),
            Cell::Bool(ok),
        ]);
    }
    table.push(vec![
        Cell::Text("lipschitz_ratio_probe".into()),
        Cell::Text(format!("{}", report.lipschitz_ratio_probe)),
        Cell::Bool(report.lipschitz_audit_ok),
    ]);

    let mut constants = BTreeMap::new();
    constants.insert(
        "report".into(),
        serde_json::to_value(report).expect("report serializes"),
    );
    Ok(KindOutput {
        table,
        constants,
        reference: ReferenceNote::None,
    })
}
