use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use reachdec::approx::{ApproxScheme, BlockStructure};
use reachdec::discretize::{discretize, DiscreteSystem, StepInputs};
use reachdec::linalg::{format_matrix_market, LinearOperator};
use reachdec::oracle::{
    decomposed_map_error_bound, decomposition_error_upper, hausdorff_estimate, hausdorff_from_samples,
    reach_nondecomposed, recurrence_error_bound, sample_directions, DecompositionErrorReport,
};
use reachdec::par;
use reachdec::reach::{
    check_property, reach, BlockApprox, CheckOptions, ReachOptions, ReachTube, SafetyProperty, Verdict,
};
use reachdec::sets::{LazySet, Norm};

use crate::emit::{emit_tube, write_file, Format};
use crate::error::{exit, CliError};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Write Φ and the box hulls of X(0) and V.
    Discretize,
    /// Compute the decomposed tube and write it as CSV and/or SVG.
    Reach,
    /// Check the scenario's property; exit 1 when it is not certified.
    Check,
    /// Compare the decomposed tube with the exact reach sets.
    Compare,
    /// Print the analytic decomposition error bounds beside measured gaps.
    Bounds,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub format: Format,
    /// Overrides the scenario's scheme.
    pub scheme: Option<ApproxScheme>,
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: PathBuf::from("."),
            format: Format::Csv,
            scheme: None,
            seed: None,
        }
    }
}

/// Number of sampled directions used by `compare` and `bounds`.
pub const COMPARE_DIRECTIONS: usize = 256;

/// Runs `cmd`, printing a report to `log`, and returns the exit status.
pub fn run(cmd: Command, sc: &Scenario, opts: &RunOptions, log: &mut dyn Write) -> Result<i32, CliError> {
    let disc = discretize(&sc.system, sc.delta, sc.model, sc.exp, sc.steps)?;
    let scheme = opts.scheme.unwrap_or(sc.scheme);
    let seed = opts.seed.unwrap_or(sc.seed);
    let mut out = String::new();
    let status = match cmd {
        Command::Discretize => run_discretize(&disc, sc, opts, &mut out)?,
        Command::Reach => run_reach(&disc, sc, scheme, opts, &mut out)?,
        Command::Check => run_check(&disc, sc, scheme, &mut out)?,
        Command::Compare => run_compare(&disc, sc, scheme, seed, opts, &mut out)?,
        Command::Bounds => run_bounds(&disc, sc, seed, opts, &mut out)?,
    };
    log.write_all(out.as_bytes()).map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        message: e.to_string(),
    })?;
    Ok(status)
}

fn create_out(opts: &RunOptions) -> Result<(), CliError> {
    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))
}

fn box_rows(out: &mut String, k: usize, set: &LazySet) -> Result<(), CliError> {
    let h = set.interval_hull()?;
    for (i, (lo, hi)) in h.low().iter().zip(h.high()).enumerate() {
        let _ = writeln!(out, "{k},{},{lo:.16e},{hi:.16e}", i + 1);
    }
    Ok(())
}

fn run_discretize(disc: &DiscreteSystem, sc: &Scenario, opts: &RunOptions, out: &mut String) -> Result<i32, CliError> {
    create_out(opts)?;
    let phi = disc.phi.materialize()?;
    let p = opts.out.join("phi.mtx");
    write_file(&p, &format_matrix_market(&phi))?;
    let _ = writeln!(out, "wrote {} ({}×{} transition matrix)", p.display(), phi.nrows(), phi.ncols());

    let mut x0 = String::from("k,var,lo,hi\n");
    box_rows(&mut x0, 0, &disc.x_init)?;
    let p = opts.out.join("x0.csv");
    write_file(&p, &x0)?;
    let _ = writeln!(out, "wrote {} (box hull of X(0))", p.display());

    let mut v = String::from("k,var,lo,hi\n");
    let count = match &disc.inputs {
        StepInputs::Constant(set) => {
            box_rows(&mut v, 0, set)?;
            1
        }
        StepInputs::Sequence(sets) => {
            let n = sets.len().min(sc.steps);
            for (k, set) in sets.iter().take(n).enumerate() {
                box_rows(&mut v, k, set)?;
            }
            n
        }
    };
    let p = opts.out.join("inputs.csv");
    write_file(&p, &v)?;
    let _ = writeln!(out, "wrote {} (box hulls of {count} input set(s) V)", p.display());
    Ok(exit::OK)
}

fn reach_options(sc: &Scenario, approx: BlockApprox) -> ReachOptions {
    let mut opts = ReachOptions::new(sc.steps);
    opts.approx = approx;
    if let Some(b) = &sc.blocks {
        opts = opts.with_blocks(b.clone());
    }
    opts
}

fn run_reach(
    disc: &DiscreteSystem,
    sc: &Scenario,
    scheme: ApproxScheme,
    opts: &RunOptions,
    out: &mut String,
) -> Result<i32, CliError> {
    let tube = reach(disc, &reach_options(sc, BlockApprox::Scheme(scheme)))?;
    let files = emit_tube(&tube, &opts.out, opts.format)?;
    let _ = writeln!(
        out,
        "reach: N={} blocks={:?} scheme={scheme} model={}",
        tube.len(),
        tube.tracked,
        tube.model
    );
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    Ok(exit::OK)
}

fn run_check(disc: &DiscreteSystem, sc: &Scenario, scheme: ApproxScheme, out: &mut String) -> Result<i32, CliError> {
    let formula = sc
        .property
        .clone()
        .ok_or_else(|| CliError::Usage("`check` needs a `property` in the scenario".into()))?;
    let mut copts = CheckOptions::new(sc.steps);
    copts.scheme = scheme;
    match check_property(disc, &SafetyProperty::on_states(formula), &copts)? {
        Verdict::Verified { steps } => {
            let _ = writeln!(out, "verified N={steps}");
            Ok(exit::OK)
        }
        Verdict::Violated { step, atom, support, bound } => {
            let _ = writeln!(
                out,
                "not certified at k={step}: atom {atom} has support {support:.16e} against bound {bound:.16e}"
            );
            Ok(exit::NOT_CERTIFIED)
        }
    }
}

/// Unit directions supported on the coordinates of `blocks`.
fn tracked_directions(bs: &BlockStructure, blocks: &[usize], norm: Norm, seed: u64) -> Vec<Vec<f64>> {
    let coords: Vec<usize> = blocks.iter().flat_map(|&b| bs.range(b)).collect();
    sample_directions(coords.len(), COMPARE_DIRECTIONS, norm, seed)
        .into_iter()
        .map(|d| {
            let mut full = vec![0.0; bs.dim()];
            for (c, v) in coords.iter().zip(d) {
                full[*c] = v;
            }
            full
        })
        .collect()
}

fn tube_supports(tube: &ReachTube, dirs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CliError> {
    let rows = par::try_map_range(tube.len(), |k| {
        dirs.iter().map(|d| tube.support(k, d)).collect::<Result<Vec<f64>, _>>()
    })?;
    Ok(rows)
}

fn run_compare(
    disc: &DiscreteSystem,
    sc: &Scenario,
    scheme: ApproxScheme,
    seed: u64,
    opts: &RunOptions,
    out: &mut String,
) -> Result<i32, CliError> {
    let bs = BlockStructure::new(sc.dim());
    let tracked = sc.tracked();
    let dirs = tracked_directions(&bs, &tracked, Norm::Two, seed);
    let exact = reach_nondecomposed(disc, sc.steps, &dirs)?;
    let lazy = tube_supports(&reach(disc, &reach_options(sc, BlockApprox::Lazy))?, &dirs)?;
    let boxed = tube_supports(&reach(disc, &reach_options(sc, BlockApprox::Scheme(scheme)))?, &dirs)?;

    let mut table = String::from("k,decomposition_gap,tube_hausdorff\n");
    let (mut max_dec, mut max_tube) = (0.0f64, 0.0f64);
    for k in 0..sc.steps {
        let dec = hausdorff_from_samples(&exact[k], &lazy[k])?;
        let tube = hausdorff_from_samples(&exact[k], &boxed[k])?;
        max_dec = max_dec.max(dec);
        max_tube = max_tube.max(tube);
        let _ = writeln!(table, "{k},{dec:.16e},{tube:.16e}");
    }
    create_out(opts)?;
    let p = opts.out.join("compare.csv");
    write_file(&p, &table)?;
    let _ = writeln!(
        out,
        "compare: N={} blocks={tracked:?} directions={} seed={seed}",
        sc.steps, COMPARE_DIRECTIONS
    );
    let _ = writeln!(out, "max decomposition gap {max_dec:.6e}");
    let _ = writeln!(out, "max {scheme} tube Hausdorff distance {max_tube:.6e}");
    let _ = writeln!(out, "wrote {}", p.display());
    Ok(exit::OK)
}

fn run_bounds(disc: &DiscreteSystem, sc: &Scenario, seed: u64, opts: &RunOptions, out: &mut String) -> Result<i32, CliError> {
    let norm = Norm::Inf;
    let n = sc.dim();
    let bs = BlockStructure::new(n);
    let report = DecompositionErrorReport::new(disc, BlockApprox::Lazy, norm)?;
    let dirs = sample_directions(n, COMPARE_DIRECTIONS, norm.dual(), seed);

    // Single map: ΦX(0) against the decomposed image of the decomposed X(0).
    let phi = disc.phi.materialize()?;
    let blocks = BlockApprox::Lazy.decompose(&disc.x_init, &bs)?;
    let eps_x = decomposition_error_upper(&disc.x_init, &bs, BlockApprox::Lazy, norm)?;
    let map_bound = decomposed_map_error_bound(&phi, &blocks, eps_x, norm)?;
    let no_input = DiscreteSystem::from_recurrence(phi.clone(), disc.x_init.clone(), StepInputs::Constant(LazySet::zero(n)))?;
    let image = reach(&no_input, &ReachOptions::new(2).lazy())?.full_set(1)?;
    let op: Arc<dyn LinearOperator> = Arc::new(phi);
    let exact_image = LazySet::linear_map(op, disc.x_init.clone())?;
    let map_gap = hausdorff_estimate(&exact_image, &image, norm, &dirs)?;

    let exact = reach_nondecomposed(disc, sc.steps, &dirs)?;
    let lazy = tube_supports(&reach(disc, &ReachOptions::new(sc.steps).lazy())?, &dirs)?;
    let mut table = String::from("k,bound,empirical_gap\n");
    let mut worst = 0.0f64;
    for k in 0..sc.steps {
        let unit = |row: &[f64]| -> Vec<f64> {
            row.iter().zip(&dirs).map(|(r, d)| r / norm.dual().of(d)).collect()
        };
        let gap = hausdorff_from_samples(&unit(&exact[k]), &unit(&lazy[k]))?;
        let bound = recurrence_error_bound(&report, k);
        worst = worst.max(gap / bound.max(f64::MIN_POSITIVE));
        let _ = writeln!(table, "{k},{bound:.16e},{gap:.16e}");
    }
    create_out(opts)?;
    let p = opts.out.join("bounds.csv");
    write_file(&p, &table)?;
    let _ = writeln!(out, "bounds in the ∞-norm, K={} α={:.6e}", report.k_phi, report.alpha_phi);
    let _ = writeln!(out, "single map: bound {map_bound:.6e}, empirical {map_gap:.6e}");
    match report.uniform_bound() {
        Some(u) => {
            let _ = writeln!(out, "recurrence: uniform bound {u:.6e}");
        }
        None => {
            let _ = writeln!(out, "recurrence: no uniform bound (α ≥ 1)");
        }
    }
    let _ = writeln!(out, "max empirical/bound ratio {worst:.3e} over N={}", sc.steps);
    let _ = writeln!(out, "wrote {}", p.display());
    Ok(exit::OK)
}
