//! Data grids behind the command-line tool: V-versus-μ curves and bias curves, as
//! rows plus deterministic CSV writers.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes_engine::{b_chi_gaussian, epv_from_vrf, vrf_noisy, GaussianPrior};
use crate::chebyshev_reference::{clf_vrf, ClfSpec};
use crate::elf_optimizer::{optimize, OptProblem};
use crate::error::{invalid, Result};
use crate::logical_circuit::{bias_direct, bias_noisy, check_fidelity, Scheme, TunableParams};
use crate::series_expansion::{fourier_with, CoefficientPath};

/// σ values used when none are given.
pub const DEFAULT_SIGMAS: [f64; 4] = [0.5, 0.2, 0.1, 0.05];
pub const DEFAULT_MU_POINTS: usize = 201;
pub const DEFAULT_THETA_POINTS: usize = 257;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Clf,
    Elf,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Clf => "clf",
            Variant::Elf => "elf",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = crate::ElfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clf" => Ok(Variant::Clf),
            "elf" => Ok(Variant::Elf),
            _ => Err(invalid(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrfCurveConfig {
    pub schemes: Vec<Scheme>,
    pub layers: usize,
    pub sigmas: Vec<f64>,
    pub mu_points: usize,
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    pub fidelity: Option<f64>,
    pub path: CoefficientPath,
}

impl VrfCurveConfig {
    pub fn new(layers: usize) -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            layers,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            mu_points: DEFAULT_MU_POINTS,
            restarts: 8,
            max_sweeps: 200,
            seed: 0,
            fidelity: None,
            path: CoefficientPath::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(invalid("no scheme selected"));
        }
        if self.layers == 0 {
            return Err(invalid("layer count must be positive"));
        }
        if self.sigmas.is_empty() {
            return Err(invalid("σ list is empty"));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(invalid(format!("σ must be positive and finite, got {s}")));
        }
        if self.mu_points == 0 {
            return Err(invalid("μ grid is empty"));
        }
        if let Some(f) = self.fidelity {
            check_fidelity(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub scheme: Scheme,
    pub variant: Variant,
    pub layers: usize,
    pub sigma: f64,
    pub mu: f64,
    pub v: f64,
    pub epv: f64,
    /// Optimized angles; empty for CLF rows.
    pub x_star: Vec<f64>,
}

/// μ_i = (i + 1)π/(N + 1), i = 0..N: N interior points of (0, π).
pub fn mu_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| (i + 1) as f64 * PI / (points + 1) as f64).collect()
}

/// Per-point seed, independent of evaluation order.
pub fn point_seed(seed: u64, scheme: Scheme, sigma_index: usize, mu_index: usize) -> u64 {
    let scheme_index = Scheme::ALL.iter().position(|s| *s == scheme).unwrap_or(0) as u64;
    let mut z = seed
        ^ scheme_index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (sigma_index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (mu_index as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// CLF and ELF rows at one grid point.
pub fn vrf_point(
    config: &VrfCurveConfig,
    scheme: Scheme,
    sigma_index: usize,
    mu_index: usize,
) -> Result<[CurveRow; 2]> {
    let sigma = config.sigmas[sigma_index];
    let mu = mu_grid(config.mu_points)[mu_index];
    let prior = GaussianPrior::new(mu, sigma)?;
    let spec = ClfSpec::new(scheme, config.layers)?;
    let v_clf = match config.fidelity {
        None => clf_vrf(&spec, mu, sigma)?,
        Some(f) => {
            let r = b_chi_gaussian(&spec.poly(), &prior);
            vrf_noisy(r.b, r.chi, f)?
        }
    };
    let problem = OptProblem::new(scheme, config.layers, prior)?
        .with_restarts(config.restarts)
        .with_max_sweeps(config.max_sweeps)
        .with_seed(point_seed(config.seed, scheme, sigma_index, mu_index))
        .with_fidelity(config.fidelity)?
        .with_path(config.path);
    let elf = optimize(&problem)?;
    let row = |variant, v, x_star| CurveRow {
        scheme,
        variant,
        layers: config.layers,
        sigma,
        mu,
        v,
        epv: epv_from_vrf(sigma, v),
        x_star,
    };
    Ok([row(Variant::Clf, v_clf, Vec::new()), row(Variant::Elf, elf.v_star, elf.x_star.angles().to_vec())])
}

fn row_order(a: &CurveRow, b: &CurveRow) -> Ordering {
    a.scheme
        .tag()
        .cmp(b.scheme.tag())
        .then(a.variant.tag().cmp(b.variant.tag()))
        .then(a.sigma.total_cmp(&b.sigma))
        .then(a.mu.total_cmp(&b.mu))
}

/// Every (scheme, σ, μ) point of the grid, sorted by (scheme, variant, σ, μ).
pub fn vrf_curve(config: &VrfCurveConfig) -> Result<Vec<CurveRow>> {
    config.validate()?;
    let mut tasks = Vec::new();
    for &scheme in &config.schemes {
        for si in 0..config.sigmas.len() {
            for mi in 0..config.mu_points {
                tasks.push((scheme, si, mi));
            }
        }
    }
    let run = |&(scheme, si, mi): &(Scheme, usize, usize)| vrf_point(config, scheme, si, mi);
    #[cfg(feature = "parallel")]
    let points: Vec<Result<[CurveRow; 2]>> = {
        use rayon::prelude::*;
        tasks.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<Result<[CurveRow; 2]>> = tasks.iter().map(run).collect();
    let mut rows = Vec::with_capacity(2 * points.len());
    for p in points {
        rows.extend(p?);
    }
    rows.sort_by(row_order);
    Ok(rows)
}

pub const VRF_CSV_HEADER: [&str; 8] = ["scheme", "variant", "L", "sigma", "mu", "V", "epv", "x_star"];

/// Writes rows with `{}` float formatting and LF line endings.
pub fn write_vrf_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(VRF_CSV_HEADER)?;
    for r in rows {
        let x_star = r.x_star.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([
            r.scheme.tag().to_string(),
            r.variant.tag().to_string(),
            r.layers.to_string(),
            r.sigma.to_string(),
            r.mu.to_string(),
            r.v.to_string(),
            r.epv.to_string(),
            x_star,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurveConfig {
    pub params: TunableParams,
    pub theta_points: usize,
    pub fidelity: Option<f64>,
    pub path: CoefficientPath,
}

impl BiasCurveConfig {
    /// CLF angles with the default θ grid.
    pub fn chebyshev(scheme: Scheme, layers: usize) -> Result<Self> {
        Ok(Self {
            params: TunableParams::chebyshev(scheme, layers)?,
            theta_points: DEFAULT_THETA_POINTS,
            fidelity: None,
            path: CoefficientPath::Auto,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub theta: f64,
    pub direct: f64,
    pub series: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub rows: Vec<BiasRow>,
    pub max_discrepancy: f64,
}

/// θ_i = iπ/(N − 1), i = 0..N: N points of [0, π] including both ends.
pub fn theta_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(invalid(format!("θ grid needs at least 2 points, got {points}")));
    }
    Ok((0..points).map(|i| i as f64 * PI / (points - 1) as f64).collect())
}

/// Circuit bias and cosine-series bias side by side; fidelity scales both.
pub fn bias_curve(config: &BiasCurveConfig) -> Result<BiasCurve> {
    let x = &config.params;
    let scale = match config.fidelity {
        Some(f) => {
            check_fidelity(f)?;
            f
        }
        None => 1.0,
    };
    let poly = fourier_with(x, config.path)?;
    let mut rows = Vec::with_capacity(config.theta_points);
    let mut max_discrepancy = 0.0_f64;
    for theta in theta_grid(config.theta_points)? {
        let direct = match config.fidelity {
            Some(f) => bias_noisy(x.scheme(), theta, x, f)?,
            None => bias_direct(x.scheme(), theta, x)?,
        };
        let series = scale * poly.eval(theta);
        max_discrepancy = max_discrepancy.max((direct - series).abs());
        rows.push(BiasRow { theta, direct, series });
    }
    Ok(BiasCurve { rows, max_discrepancy })
}

pub const BIAS_CSV_HEADER: [&str; 3] = ["theta", "lambda_direct", "lambda_series"];

/// Writes the rows followed by a `max_discrepancy,,<value>` summary row.
pub fn write_bias_csv<W: Write>(curve: &BiasCurve, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(BIAS_CSV_HEADER)?;
    for r in &curve.rows {
        w.write_record([r.theta.to_string(), r.direct.to_string(), r.series.to_string()])?;
    }
    w.write_record(["max_discrepancy".to_string(), String::new(), curve.max_discrepancy.to_string()])?;
    w.flush()?;
    Ok(())
}
