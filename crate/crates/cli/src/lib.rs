//! File formats and command logic behind the `lyapbounds` binary.

use std::fmt;
use std::fs;
use std::path::Path;

use lyapbounds::bounds::{
    alpha_eval, alpha_optimize, alpha_tilde_eval, alpha_tilde_optimize, beta_eval, beta_optimize,
    beta_tilde_eval, beta_tilde_optimize, default_beta_support, euclidean_upper, BoundReport,
};
use lyapbounds::lifting::{gamma_sdp_settings, gamma_sdp_upper};
use lyapbounds::nalgebra::{DMatrix, DVector};
use lyapbounds::optim::OptimizerSettings;
use lyapbounds::structure::{
    analyze, positive_product_or_partition, Positivity, PositivityStatus, StructureReport,
};
use lyapbounds::{MatrixFamily, McEstimate};
use serde::{Deserialize, Serialize};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNDEFINED: i32 = 3;

/// Pattern-state budget for the positivity search.
pub const DEFAULT_BUDGET: usize = lyapbounds::structure::DEFAULT_PATTERN_BUDGET;

#[derive(Debug)]
pub enum CliError {
    /// Bad file, flags or parameters.
    Invalid(String),
    /// A requested bound is `-inf`.
    Undefined(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Undefined(_) => EXIT_UNDEFINED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Undefined(m) => f.write_str(m),
        }
    }
}

impl From<lyapbounds::Error> for CliError {
    fn from(e: lyapbounds::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// One matrix: a flat row-major list, or a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntries {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

/// `{"dim": d, "matrices": [[row-major]...], "probs": [...]}`; omitted
/// probabilities mean uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyFile {
    pub dim: usize,
    pub matrices: Vec<MatrixEntries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

impl FamilyFile {
    pub fn from_family(family: &MatrixFamily) -> Self {
        let matrices = family
            .matrices()
            .iter()
            .map(|m| MatrixEntries::Flat(m.transpose().iter().copied().collect()))
            .collect();
        Self {
            dim: family.dim(),
            matrices,
            probs: Some(family.probs().to_vec()),
        }
    }

    pub fn to_family(&self) -> CliResult<MatrixFamily> {
        let d = self.dim;
        if d == 0 {
            return Err(CliError::Invalid("dim must be at least 1".into()));
        }
        let mut mats = Vec::with_capacity(self.matrices.len());
        for (idx, entries) in self.matrices.iter().enumerate() {
            let flat: Vec<f64> = match entries {
                MatrixEntries::Flat(v) => {
                    if v.len() != d * d {
                        return Err(CliError::Invalid(format!(
                            "matrix {idx} has {} entries, expected {}",
                            v.len(),
                            d * d
                        )));
                    }
                    v.clone()
                }
                MatrixEntries::Rows(rows) => {
                    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                        return Err(CliError::Invalid(format!(
                            "matrix {idx} is ragged or not {d}x{d}"
                        )));
                    }
                    rows.concat()
                }
            };
            mats.push(DMatrix::from_row_slice(d, d, &flat));
        }
        Ok(MatrixFamily::new(mats, self.probs.clone())?)
    }
}

pub fn read_family(path: &Path) -> CliResult<MatrixFamily> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    parse_family(&text)
}

pub fn parse_family(text: &str) -> CliResult<MatrixFamily> {
    let file: FamilyFile = serde_json::from_str(text)
        .map_err(|e| CliError::Invalid(format!("bad family file: {e}")))?;
    file.to_family()
}

/// Shortest round-trip decimal, so files reload bit-exactly.
pub fn family_json(family: &MatrixFamily) -> String {
    serde_json::to_string_pretty(&FamilyFile::from_family(family))
        .expect("finite numbers serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub dim: usize,
    pub matrices: usize,
    pub nonnegative: bool,
    /// Absent for signed families.
    pub structure: Option<StructureReport>,
    pub recommendation: String,
}

pub fn classify(family: &MatrixFamily, budget: usize) -> CliResult<Classification> {
    let nonnegative = family.is_nonnegative();
    let (structure, recommendation) = if nonnegative {
        let s = analyze(family, budget)?;
        let rec = recommend(&s);
        (Some(s), rec)
    } else {
        (
            None,
            "gamma-sdp upper bound only: no lower bound with guaranteed accuracy exists for signed families".to_string(),
        )
    };
    Ok(Classification {
        dim: family.dim(),
        matrices: family.len(),
        nonnegative,
        structure,
        recommendation,
    })
}

fn recommend(s: &StructureReport) -> String {
    if s.reducible {
        return "reducible: solve each diagonal block, take max".into();
    }
    if s.has_zero_col.iter().any(|&z| z) {
        return "beta is -inf (zero columns): use beta-tilde or the transposed family; alpha upper bound".into();
    }
    if !s.condition_b {
        return "beta finite; convergence not guaranteed (condition (b) fails)".into();
    }
    match &s.positivity {
        Some(PositivityStatus::PositiveProduct { .. }) => "alpha / beta: both converge".into(),
        Some(PositivityStatus::Partition(_)) => {
            "alpha-tilde / beta: class partition present".into()
        }
        Some(PositivityStatus::Undecided { .. }) | None => {
            "alpha / beta; convergence undecided within the pattern budget".into()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerKind {
    Beta,
    BetaTilde,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperKind {
    Alpha,
    AlphaTilde,
    Euclid,
    GammaSdp,
}

impl LowerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LowerKind::Beta => "beta",
            LowerKind::BetaTilde => "beta_tilde",
            LowerKind::None => "none",
        }
    }
}

impl UpperKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            UpperKind::Alpha => "alpha",
            UpperKind::AlphaTilde => "alpha_tilde",
            UpperKind::Euclid => "euclid",
            UpperKind::GammaSdp => "gamma_sdp",
        }
    }

    fn needs_nonnegative(&self) -> bool {
        matches!(self, UpperKind::Alpha | UpperKind::AlphaTilde)
    }
}

#[derive(Debug, Clone)]
pub struct BoundsRequest {
    pub ks: Vec<usize>,
    pub lower: LowerKind,
    pub upper: UpperKind,
    pub optimize: bool,
    pub settings: OptimizerSettings,
    /// `(length, trajectories, seed)`.
    pub mc: Option<(usize, usize, u64)>,
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub k: usize,
    pub lower: Option<BoundReport>,
    pub upper: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub lower_kind: String,
    pub upper_kind: String,
    pub rows: Vec<TableRow>,
    pub mc: Option<McEstimate>,
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str =
    "k,lower_kind,lower,upper_kind,upper,gap,rel_gap,mc_mean,mc_stderr,wall_ms";

/// Floor on `|upper|` in the relative gap.
pub const REL_GAP_EPS: f64 = 1e-12;

fn num(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let upper = row.upper.value_f64();
            let (lower, gap, rel) = match &row.lower {
                Some(l) => {
                    let lv = l.value_f64();
                    let gap = upper - lv;
                    (num(lv), num(gap), num(gap / upper.abs().max(REL_GAP_EPS)))
                }
                None => (String::new(), String::new(), String::new()),
            };
            let (mc_mean, mc_se) = match &self.mc {
                Some(m) => (num(m.mean), num(m.stderr)),
                None => (String::new(), String::new()),
            };
            let wall = row.upper.wall_time_ms + row.lower.as_ref().map_or(0, |l| l.wall_time_ms);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.k,
                self.lower_kind,
                lower,
                self.upper_kind,
                num(upper),
                gap,
                rel,
                mc_mean,
                mc_se,
                wall
            ));
        }
        out
    }

    /// Rows whose lower bound is `-inf`.
    pub fn undefined_lower(&self) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.lower.as_ref().is_some_and(|l| !l.value.is_finite()))
            .map(|r| r.k)
            .collect()
    }
}

pub fn parse_k_list(s: &str) -> Result<Vec<usize>, String> {
    let mut ks = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let k: usize = part
            .parse()
            .map_err(|_| format!("bad product length '{part}'"))?;
        if k == 0 {
            return Err("product lengths must be >= 1".into());
        }
        ks.push(k);
    }
    if ks.is_empty() {
        return Err("empty list of product lengths".into());
    }
    Ok(ks)
}

/// A decimal or a fraction `p/q`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            p / q
        }
        None => s.trim().parse().map_err(|_| format!("bad number '{s}'"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("bad number '{s}'"))
    }
}

pub fn compute_bounds(family: &MatrixFamily, req: &BoundsRequest) -> CliResult<ConvergenceTable> {
    let d = family.dim();
    let nonneg = family.is_nonnegative();
    if !nonneg && (req.upper.needs_nonnegative() || req.lower != LowerKind::None) {
        return Err(CliError::Invalid(
            "family has negative entries: use --lower none with --upper euclid or gamma-sdp \
             (no lower bound with guaranteed accuracy exists for signed families)"
                .into(),
        ));
    }
    req.settings.validate()?;
    let mut notes = Vec::new();
    if !nonneg {
        notes.push("signed family: no lower bound with guaranteed accuracy exists".into());
    }
    let partition = if req.upper == UpperKind::AlphaTilde {
        match positive_product_or_partition(family, DEFAULT_BUDGET) {
            Ok(Positivity::Partition(p)) => Some(p),
            Ok(Positivity::PositiveProduct { .. }) => {
                notes.push("positive product exists: alpha_tilde coincides with alpha".into());
                Some(lyapbounds::structure::PartitionStructure::trivial(
                    d,
                    family.len(),
                ))
            }
            Err(e) => {
                return Err(CliError::Invalid(format!(
                    "alpha-tilde needs a class partition: {e}"
                )))
            }
        }
    } else {
        None
    };
    let ones = DVector::from_element(d, 1.0);
    let mut rows = Vec::with_capacity(req.ks.len());
    for &k in &req.ks {
        let upper = match req.upper {
            UpperKind::Alpha if req.optimize => alpha_optimize(family, k, None, &req.settings)?,
            UpperKind::Alpha => alpha_eval(family, k, &ones)?,
            UpperKind::AlphaTilde => {
                let p = partition.as_ref().expect("computed above");
                if req.optimize {
                    alpha_tilde_optimize(family, p, k, None, &req.settings)?
                } else {
                    alpha_tilde_eval(family, p, k, &ones)?
                }
            }
            UpperKind::Euclid => euclidean_upper(family, k)?,
            UpperKind::GammaSdp => {
                gamma_sdp_upper(family, k, &DMatrix::identity(d, d), &gamma_sdp_settings())?
            }
        };
        let lower = match req.lower {
            LowerKind::None => None,
            LowerKind::Beta if req.optimize => Some(beta_optimize(family, k, None, &req.settings)?),
            LowerKind::Beta => Some(beta_eval(family, k, &ones)?),
            LowerKind::BetaTilde => {
                if req.optimize {
                    Some(beta_tilde_optimize(family, k, None, &req.settings)?)
                } else {
                    let support = default_beta_support(family, k)?.ok_or_else(|| {
                        CliError::Undefined(format!(
                            "beta_tilde is -inf for every support at k = {k}"
                        ))
                    })?;
                    let mut v = DVector::zeros(d);
                    support.iter().for_each(|&j| v[j] = 1.0);
                    Some(beta_tilde_eval(family, k, &v)?)
                }
            }
        };
        rows.push(TableRow { k, lower, upper });
    }
    let mc = match req.mc {
        Some((length, trajectories, seed)) => Some(lyapbounds::monte_carlo_lambda(
            family,
            length,
            trajectories,
            seed,
            None,
        )?),
        None => None,
    };
    Ok(ConvergenceTable {
        lower_kind: req.lower.as_str().into(),
        upper_kind: req.upper.as_str().into(),
        rows,
        mc,
        notes,
    })
}
