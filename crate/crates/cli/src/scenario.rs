//! JSON scenario files.
//!
//! ```json
//! {
//!   "A": "a.mtx",
//!   "B": [[1.0], [0.0]],
//!   "X0": { "box": { "low": [0.9, -0.1], "high": [1.1, 0.1] } },
//!   "U": { "intervals": [[-0.1, 0.1]] },
//!   "delta": 0.01,
//!   "N": 100,
//!   "model": "dense",
//!   "property": "x1 <= 2"
//! }
//! ```
//!
//! Matrices are MatrixMarket paths (relative to the scenario file) or inline
//! row lists. Sets are `box` (`low`/`high` or `center`/`radius`),
//! `intervals`, `ball` (`center`, `radius`, `norm` ∈ {1, 2, "inf"}) or
//! `point`. `U` is one such set, `{"sequence": [...]}` or
//! `{"sequence_file": "u.json"}` holding a JSON list of sets; it defaults to
//! `{0}`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use reachdec::approx::{ApproxScheme, BlockStructure};
use reachdec::discretize::{ContinuousSystem, ExpMode, Inputs, Model};
use reachdec::linalg::{read_matrix_market, BlockMatrix};
use reachdec::reach::Formula;
use reachdec::sets::{Ball, Hyperrectangle, LazySet, Norm};

use crate::error::CliError;
use crate::formula::{parse_formula, variables};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Path(String),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxSpec {
    low: Option<Vec<f64>>,
    high: Option<Vec<f64>>,
    center: Option<Vec<f64>>,
    radius: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NormSpec {
    P(f64),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BallSpec {
    center: Vec<f64>,
    radius: f64,
    #[serde(default)]
    norm: Option<NormSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum SetSpec {
    Box(BoxSpec),
    Intervals(Vec<[f64; 2]>),
    Ball(BallSpec),
    Point(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum InputSpec {
    Sequence(Vec<SetSpec>),
    SequenceFile(String),
    #[serde(untagged)]
    Constant(SetSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(rename = "A")]
    a: MatrixSpec,
    #[serde(rename = "B", default)]
    b: Option<MatrixSpec>,
    #[serde(rename = "X0")]
    x0: SetSpec,
    #[serde(rename = "U", default)]
    u: Option<InputSpec>,
    delta: f64,
    #[serde(rename = "N")]
    steps: usize,
    model: String,
    #[serde(default)]
    exp: Option<String>,
    /// 0-based block indices.
    #[serde(default)]
    blocks: Option<Vec<usize>>,
    /// 1-based state variables whose blocks are tracked.
    #[serde(default)]
    outputs: Option<Vec<usize>>,
    #[serde(default)]
    property: Option<String>,
    #[serde(default)]
    scheme: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub path: PathBuf,
    pub system: ContinuousSystem,
    pub delta: f64,
    pub steps: usize,
    pub model: Model,
    pub exp: ExpMode,
    /// Blocks to track; `None` tracks all.
    pub blocks: Option<Vec<usize>>,
    pub property: Option<Formula>,
    pub scheme: ApproxScheme,
    pub seed: u64,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Tracked blocks, all of them when none were selected.
    pub fn tracked(&self) -> Vec<usize> {
        self.blocks
            .clone()
            .unwrap_or_else(|| (0..BlockStructure::new(self.dim()).count()).collect())
    }
}

/// Reads and validates a scenario file. Every dimension is checked before the
/// scenario is returned.
pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario_str(&text, path)
}

fn from_json<'de, T: Deserialize<'de>>(text: &'de str, path: &Path) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let at = if field == "." { String::new() } else { format!("at `{field}`: ") };
        CliError::scenario(path, format!("{at}{inner}"))
    })
}

/// Like [`parse_scenario`] for text already in memory; relative paths are
/// resolved against the directory of `path`.
pub fn parse_scenario_str(text: &str, path: &Path) -> Result<Scenario, CliError> {
    let raw: RawScenario = from_json(text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let fail = |m: String| CliError::scenario(path, m);

    let a = load_matrix(&raw.a, base, "A", path)?;
    if !a.is_square() {
        return Err(fail(format!("`A` must be square, got {}×{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(fail("`A` is empty".into()));
    }
    let b = raw.b.as_ref().map(|b| load_matrix(b, base, "B", path)).transpose()?;
    if let Some(b) = &b {
        if b.nrows() != n {
            return Err(fail(format!("`B` has {} rows but `A` is {n}×{n}", b.nrows())));
        }
    }
    let m = b.as_ref().map_or(n, |b| b.ncols());

    let x0 = build_set(&raw.x0, "X0").map_err(fail)?;
    if x0.dim() != n {
        return Err(fail(format!("`X0` has dimension {} but `A` is {n}×{n}", x0.dim())));
    }

    if !(raw.delta > 0.0 && raw.delta.is_finite()) {
        return Err(fail(format!("`delta` must be positive and finite, got {}", raw.delta)));
    }
    if raw.steps == 0 {
        return Err(fail("`N` must be at least 1".into()));
    }
    let model: Model = raw.model.parse().map_err(|e| fail(format!("`model`: {e}")))?;
    let exp: ExpMode = match &raw.exp {
        Some(s) => s.parse().map_err(|e| fail(format!("`exp`: {e}")))?,
        None => ExpMode::Auto,
    };

    let inputs = match &raw.u {
        None => Inputs::Constant(LazySet::zero(m)),
        Some(InputSpec::Constant(s)) => Inputs::Constant(build_set(s, "U").map_err(fail)?),
        Some(InputSpec::Sequence(list)) => Inputs::Sequence(build_sequence(list, "U.sequence").map_err(fail)?),
        Some(InputSpec::SequenceFile(file)) => {
            let p = base.join(file);
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            let list: Vec<SetSpec> = from_json(&text, &p)?;
            Inputs::Sequence(build_sequence(&list, "").map_err(|m| CliError::scenario(&p, m))?)
        }
    };
    let check_input = |u: &Arc<LazySet>, what: String| {
        if u.dim() == m {
            Ok(())
        } else {
            let source = if b.is_some() { format!("`B` has {m} columns") } else { format!("`A` is {n}×{n} and there is no `B`") };
            Err(fail(format!("{what} has dimension {} but {source}", u.dim())))
        }
    };
    match &inputs {
        Inputs::Constant(u) => check_input(u, "`U`".into())?,
        Inputs::Sequence(us) => {
            for (k, u) in us.iter().enumerate() {
                check_input(u, format!("`U` entry {k}"))?;
            }
            let needed = match model {
                Model::Dense => raw.steps,
                Model::Discrete => raw.steps.saturating_sub(1).max(1),
            };
            if us.len() < needed {
                return Err(fail(format!(
                    "`U` has {} sets but the {model} model with N = {} needs {needed}",
                    us.len(),
                    raw.steps
                )));
            }
        }
    }

    let property = raw
        .property
        .as_deref()
        .map(|p| parse_formula(p, n).map_err(|e| fail(format!("`property`: {e}"))))
        .transpose()?;

    let bs = BlockStructure::new(n);
    let blocks = if let Some(blocks) = &raw.blocks {
        if raw.outputs.is_some() {
            return Err(fail("give either `blocks` or `outputs`, not both".into()));
        }
        if let Some(&bad) = blocks.iter().find(|&&i| i >= bs.count()) {
            return Err(fail(format!("`blocks` entry {bad} out of range; n = {n} has {} blocks", bs.count())));
        }
        Some(dedup(blocks.clone()))
    } else if let Some(outputs) = &raw.outputs {
        if let Some(&bad) = outputs.iter().find(|&&v| v == 0 || v > n) {
            return Err(fail(format!("`outputs` entry {bad} is not a variable in 1..={n}")));
        }
        Some(dedup(outputs.iter().map(|v| bs.block_of(v - 1)).collect()))
    } else {
        property
            .as_ref()
            .map(|f| dedup(variables(f).into_iter().map(|v| bs.block_of(v)).collect()))
    };

    let scheme = match &raw.scheme {
        Some(s) => s.parse().map_err(|e| fail(format!("`scheme`: {e}")))?,
        None => ApproxScheme::BoxDirections,
    };

    let system = ContinuousSystem::new(a, b, x0, inputs)?;
    Ok(Scenario {
        path: path.to_path_buf(),
        system,
        delta: raw.delta,
        steps: raw.steps,
        model,
        exp,
        blocks,
        property,
        scheme,
        seed: raw.seed.unwrap_or(0),
    })
}

fn dedup(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

fn load_matrix(spec: &MatrixSpec, base: &Path, field: &str, path: &Path) -> Result<BlockMatrix, CliError> {
    match spec {
        MatrixSpec::Path(p) => Ok(read_matrix_market(base.join(p))?),
        MatrixSpec::Rows(rows) => {
            let cols = rows.first().map_or(0, Vec::len);
            if let Some(i) = rows.iter().position(|r| r.len() != cols) {
                return Err(CliError::scenario(
                    path,
                    format!("at `{field}[{i}]`: row has {} entries, expected {cols}", rows[i].len()),
                ));
            }
            let data: Vec<f64> = rows.iter().flatten().copied().collect();
            Ok(BlockMatrix::from_row_slice(rows.len(), cols, &data))
        }
    }
}

fn build_sequence(list: &[SetSpec], field: &str) -> Result<Vec<Arc<LazySet>>, String> {
    if list.is_empty() {
        return Err(format!("`{field}` is empty"));
    }
    list.iter()
        .enumerate()
        .map(|(k, s)| build_set(s, &format!("{field}[{k}]")))
        .collect()
}

fn build_set(spec: &SetSpec, field: &str) -> Result<Arc<LazySet>, String> {
    let at = |m: String| format!("at `{field}`: {m}");
    let set: LazySet = match spec {
        SetSpec::Box(b) => {
            let h = match (&b.low, &b.high, &b.center, &b.radius) {
                (Some(lo), Some(hi), None, None) => Hyperrectangle::from_bounds(lo, hi),
                (None, None, Some(c), Some(r)) => Hyperrectangle::new(c.clone(), r.clone()),
                _ => return Err(at("a box needs either `low` and `high` or `center` and `radius`".into())),
            };
            h.map_err(|e| at(e.to_string()))?.into()
        }
        SetSpec::Intervals(iv) => {
            let (lo, hi): (Vec<f64>, Vec<f64>) = iv.iter().map(|[a, b]| (*a, *b)).unzip();
            Hyperrectangle::from_bounds(&lo, &hi).map_err(|e| at(e.to_string()))?.into()
        }
        SetSpec::Ball(b) => {
            let norm = match &b.norm {
                None => Norm::Two,
                Some(NormSpec::P(p)) => Norm::from_p(*p).ok_or_else(|| at(format!("unsupported norm {p}")))?,
                Some(NormSpec::Name(s)) if s.eq_ignore_ascii_case("inf") => Norm::Inf,
                Some(NormSpec::Name(s)) => return Err(at(format!("unsupported norm {s:?}"))),
            };
            Ball::new(b.center.clone(), b.radius, norm).map_err(|e| at(e.to_string()))?.into()
        }
        SetSpec::Point(p) => return LazySet::singleton(p.clone()).map_err(|e| at(e.to_string())),
    };
    if set.dim() == 0 {
        return Err(at("set has dimension 0".into()));
    }
    Ok(Arc::new(set))
}
