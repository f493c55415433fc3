//! Identity and oracle checks run by `elfkit validate` and the acceptance suite.
//!
//! Each `measure_*` function returns the raw discrepancy (or violation count) so
//! callers can apply their own tolerance; [`validate`] bundles them per level.

use std::f64::consts::{E, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes_engine::{
    b_chi_gaussian, b_chi_quadrature, vrf, vrf_limit_sigma0, vrf_noisy, vrf_report, GaussianPrior,
};
use crate::chebyshev_reference::{clf_properties_check, clf_vrf, clf_vrf_limit, clf_vrf_max, ClfSpec};
use crate::elf_optimizer::{optimize, OptProblem};
use crate::error::{invalid, Result};
use crate::harness::{mu_grid, DEFAULT_SIGMAS};
use crate::logical_circuit::{bias_direct, Scheme, TunableParams};
use crate::pq_combinatorics::{
    enumerate_theta, reversal_closure_check, theta_cardinality, xi_cardinality, BitString,
};
use crate::series_expansion::{
    fourier, fourier_ab_with_nu, fourier_af, fourier_numeric, nu, CosinePoly, AF_COMBINATORIAL_MAX_LAYERS,
};

pub type NuFn = fn(i64) -> i8;

/// ν with its sign flipped, for checking that the suite catches a broken series.
pub fn flipped_nu(s: i64) -> i8 {
    -nu(s)
}

fn random_params(rng: &mut ChaCha8Rng, scheme: Scheme, layers: usize) -> TunableParams {
    let a = (0..2 * layers).map(|_| rng.gen_range(-PI..PI)).collect();
    TunableParams::new(scheme, a).expect("finite angles of even length")
}

fn series(x: &TunableParams, nu_fn: NuFn) -> Result<CosinePoly> {
    match x.scheme() {
        Scheme::AncillaBased => fourier_ab_with_nu(x, nu_fn),
        Scheme::AncillaFree if x.layers() <= AF_COMBINATORIAL_MAX_LAYERS => fourier_af(x),
        Scheme::AncillaFree => fourier_numeric(Scheme::AncillaFree, x),
    }
}

/// Max |series − circuit| over random angles and an evenly spaced θ grid on [0, π].
pub fn measure_series_circuit(
    scheme: Scheme,
    layers: &[usize],
    samples: usize,
    theta_points: usize,
    seed: u64,
    nu_fn: NuFn,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for &l in layers {
        for _ in 0..samples {
            let x = random_params(&mut rng, scheme, l);
            let poly = series(&x, nu_fn)?;
            for i in 0..theta_points {
                let theta = i as f64 * PI / (theta_points.max(2) - 1) as f64;
                worst = worst.max((poly.eval(theta) - bias_direct(scheme, theta, &x)?).abs());
            }
        }
    }
    Ok(worst)
}

/// Max deviation of the CLF coefficients from δ_{l,2L+1} (AF) or (−1)^L δ_{l,L} (AB).
pub fn measure_chebyshev_delta(scheme: Scheme, max_layers: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for layers in 1..=max_layers {
        let spec = ClfSpec::new(scheme, layers)?;
        worst = worst.max(fourier(&spec.params())?.max_abs_diff(&spec.poly()));
    }
    Ok(worst)
}

/// Number of (n, u, k, v) classes whose enumeration disagrees with the count formula.
pub fn count_theta_mismatches(max_len: usize) -> Result<usize> {
    let mut bad = 0;
    for n in 1..=max_len {
        let mut total = 0u64;
        for u in 0..=1u8 {
            for v in 0..=1u8 {
                for k in 0..=n {
                    let got = enumerate_theta(n, u, k, v)?.len() as u64;
                    total += got;
                    if got != theta_cardinality(n, u, k, v) {
                        bad += 1;
                    }
                }
            }
        }
        if total != 1u64 << n {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Number of α whose class counts do not sum to 2^α.
pub fn count_xi_partition_mismatches(max_alpha: usize) -> usize {
    (1..=max_alpha)
        .filter(|&a| (0..=a).map(|l| xi_cardinality(a, l)).sum::<u64>() != 1u64 << a)
        .count()
}

/// Violations of class equality between a·1·c^R and c·1·a^R over all pairs of length 2L.
pub fn count_reversal_violations(max_layers: usize) -> Result<usize> {
    let mut bad = 0;
    for l in 1..=max_layers {
        let n = 2 * l;
        for a in 0..1u64 << n {
            let a = BitString::from_mask(a, n);
            for c in 0..1u64 << n {
                if !reversal_closure_check(&a, &BitString::from_mask(c, n))? {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}

/// Single-layer coefficients written out by hand, AF then AB.
pub fn single_layer_coefficients(scheme: Scheme, x1: f64, x2: f64) -> Vec<f64> {
    let (s1, c1) = x1.sin_cos();
    let (s2, c2) = x2.sin_cos();
    match scheme {
        Scheme::AncillaFree => vec![
            2.0 * c1 * s1 * c2 * s2,
            c1 * c1 * c2 * c2 + c1 * c1 * s2 * s2 + s1 * s1 * c2 * c2,
            -2.0 * c1 * c2 * s1 * s2,
            s1 * s1 * s2 * s2,
        ],
        Scheme::AncillaBased => vec![c1 * c2, -s1 * s2],
    }
}

/// Max coefficient difference between the expansion and the hand-written single-layer forms.
pub fn measure_single_layer_forms(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        for scheme in Scheme::ALL {
            let x = random_params(&mut rng, scheme, 1);
            let want = CosinePoly::new(single_layer_coefficients(scheme, x.angles()[0], x.angles()[1]));
            worst = worst.max(fourier(&x)?.max_abs_diff(&want));
        }
    }
    Ok(worst)
}

/// Max |quadrature − closed form| for b and χ, integrating the circuit bias directly.
pub fn measure_gaussian_closed_forms(scheme: Scheme, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let x = random_params(&mut rng, scheme, 1 + i % 3);
        let prior = GaussianPrior::new(rng.gen_range(0.0..PI), rng.gen_range(0.01..=1.0))?;
        let quad = b_chi_quadrature(&|t| bias_direct(scheme, t, &x).unwrap_or(f64::NAN), &prior)?;
        let closed = b_chi_gaussian(&fourier(&x)?, &prior);
        let err = (quad.b - closed.b).abs().max((quad.chi - closed.chi).abs());
        if err.is_nan() {
            return Err(invalid("circuit bias failed inside quadrature"));
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Failed CLF property checks for L ≤ `max_layers` and the given σ values; also
/// checks that 1/(eσ²) is reached at q = 1/σ.
pub fn count_clf_property_failures(max_layers: usize, sigmas: &[f64]) -> Result<Vec<String>> {
    let mut failed = Vec::new();
    for scheme in Scheme::ALL {
        for layers in 1..=max_layers {
            let spec = ClfSpec::new(scheme, layers)?;
            let grid: Vec<f64> = (0..97).map(|i| -PI + i as f64 * 2.0 * PI / 96.0 + 0.013).collect();
            for &sigma in sigmas {
                for c in clf_properties_check(&spec, sigma, &grid)?.checks.into_iter().filter(|c| !c.passed) {
                    failed.push(format!("{scheme} L={layers} σ={sigma}: {} ({})", c.name, c.detail));
                }
            }
            let sigma = 1.0 / spec.q as f64;
            let bound = 1.0 / (E * sigma * sigma);
            if (clf_vrf_max(&spec, sigma) - bound).abs() > 1e-12 * bound {
                failed.push(format!("{scheme} L={layers}: bound not saturated at σ = 1/q"));
            }
        }
    }
    Ok(failed)
}

/// Max relative gap between V at σ = 1e−3 and the σ → 0 limit over random biases with
/// |Λ(μ)| ≤ 0.9, plus the CLF limits at and away from dead spots.
pub fn measure_sigma0_limit(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut found = 0;
    while found < samples {
        let scheme = if found % 2 == 0 { Scheme::AncillaFree } else { Scheme::AncillaBased };
        let x = random_params(&mut rng, scheme, 1 + found % 3);
        let poly = fourier(&x)?;
        let mu = rng.gen_range(0.0..PI);
        if poly.eval(mu).abs() > 0.9 {
            continue;
        }
        found += 1;
        let limit = vrf_limit_sigma0(&poly, mu)?;
        let v = vrf_report(&poly, &GaussianPrior::new(mu, 1e-3)?, None)?.v;
        worst = worst.max((v - limit).abs() / limit.max(1e-6));
    }
    for scheme in Scheme::ALL {
        for layers in 1..=3 {
            let spec = ClfSpec::new(scheme, layers)?;
            let q = spec.q as f64;
            for mu in [PI / q, 0.3 / q, FRAC_PI_2 / q] {
                let got = vrf_limit_sigma0(&spec.poly(), mu)?;
                let want = clf_vrf_limit(&spec, mu);
                if got != want && (got - want).abs() > 1e-9 * want.max(1.0) {
                    worst = f64::INFINITY;
                }
            }
        }
    }
    Ok(worst)
}

/// Max |noisy V − f²χ²/(1 − f²b²)| and whether V is nonincreasing in f on [0, 1).
pub fn measure_noise_scaling(samples: usize, seed: u64) -> Result<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut monotone = true;
    for i in 0..samples {
        let scheme = if i % 2 == 0 { Scheme::AncillaFree } else { Scheme::AncillaBased };
        let x = random_params(&mut rng, scheme, 1 + i % 3);
        let poly = fourier(&x)?;
        let prior = GaussianPrior::new(rng.gen_range(0.0..PI), rng.gen_range(0.05..1.0))?;
        let r = b_chi_gaussian(&poly, &prior);
        let f = rng.gen_range(0.0..1.0);
        let want = f * f * r.chi * r.chi / (1.0 - f * f * r.b * r.b);
        worst = worst.max((vrf_report(&poly, &prior, Some(f))?.v - want).abs());
        let mut prev = 0.0;
        for k in 0..100 {
            let v = vrf_noisy(r.b, r.chi, k as f64 / 100.0)?;
            monotone &= v >= prev - 1e-15;
            prev = v;
        }
        monotone &= vrf(r.b, r.chi)? >= prev - 1e-15;
    }
    Ok((worst, monotone))
}

/// Max deviation of single-layer AB optima from the CLF value and the t²/(1 − s²) ceiling.
pub fn measure_ab_single_layer_optimality(mu_points: usize, sigmas: &[f64], restarts: usize) -> Result<f64> {
    let spec = ClfSpec::new(Scheme::AncillaBased, 1)?;
    let mut worst = 0.0_f64;
    for &sigma in sigmas {
        for mu in mu_grid(mu_points) {
            let problem = OptProblem::new(Scheme::AncillaBased, 1, GaussianPrior::new(mu, sigma)?)?
                .with_restarts(restarts);
            let r = optimize(&problem)?;
            let e = (-0.5 * sigma * sigma).exp();
            let (s, t) = (e * mu.cos(), e * mu.sin());
            let ceiling = t * t / (1.0 - s * s);
            worst = worst.max((r.v_star - clf_vrf(&spec, mu, sigma)?).abs()).max((r.v_star - ceiling).abs());
        }
    }
    Ok(worst)
}

/// Best single-layer AF V over an n×n grid of (x1, x2), from the hand-written coefficients.
pub fn af_single_layer_grid_max(mu: f64, sigma: f64, n: usize) -> f64 {
    let mut best = 0.0_f64;
    let prior = GaussianPrior::new(mu, sigma).expect("valid prior");
    for i in 0..n {
        let x1 = -PI + 2.0 * PI * (i + 1) as f64 / n as f64;
        for k in 0..n {
            let x2 = -PI + 2.0 * PI * (k + 1) as f64 / n as f64;
            let c = single_layer_coefficients(Scheme::AncillaFree, x1, x2);
            let r = b_chi_gaussian(&CosinePoly::new(c), &prior);
            if r.b.abs() < 1.0 - 1e-12 {
                best = best.max(r.chi * r.chi / (1.0 - r.b * r.b));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationLevel {
    Fast,
    Full,
}

impl fmt::Display for ValidationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationLevel::Fast => "fast",
            ValidationLevel::Full => "full",
        })
    }
}

impl FromStr for ValidationLevel {
    type Err = crate::ElfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(ValidationLevel::Fast),
            "full" => Ok(ValidationLevel::Full),
            _ => Err(invalid(format!("unknown validation level {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub level: ValidationLevel,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark} {:<34} {:>8.3}s  {}", c.name, c.seconds, c.detail)?;
        }
        let failed = self.failed().count();
        write!(f, "{} checks, {} failed ({} level)", self.checks.len(), failed, self.level)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub level: ValidationLevel,
    pub seed: u64,
    /// ν used by the AB series check; [`flipped_nu`] injects a fault.
    pub nu: NuFn,
}

impl ValidationOptions {
    pub fn new(level: ValidationLevel) -> Self {
        Self { level, seed: 2024, nu }
    }
}

fn run_check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
    CheckOutcome { name: name.to_string(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn below(value: f64, tol: f64) -> (bool, String) {
    (value < tol, format!("max discrepancy {value:e} (tolerance {tol:e})"))
}

fn none_of(count: usize, what: &str) -> (bool, String) {
    (count == 0, format!("{count} {what}"))
}

/// Runs the suite for the level; never panics on a failed check.
pub fn validate(options: &ValidationOptions) -> ValidationReport {
    let full = options.level == ValidationLevel::Full;
    let seed = options.seed;
    let (af_layers, ab_layers, max_len, samples, thetas) =
        if full { (3, 4, 13, 50, 257) } else { (2, 2, 10, 10, 65) };
    let mut checks = vec![
        run_check("af_series_matches_circuit", || {
            let l: Vec<usize> = (1..=af_layers).collect();
            Ok(below(measure_series_circuit(Scheme::AncillaFree, &l, samples, thetas, seed, nu)?, 1e-10))
        }),
        run_check("ab_series_matches_circuit", || {
            let l: Vec<usize> = (1..=ab_layers).collect();
            Ok(below(measure_series_circuit(Scheme::AncillaBased, &l, samples, thetas, seed, options.nu)?, 1e-10))
        }),
        run_check("chebyshev_delta_coefficients", || {
            let af = measure_chebyshev_delta(Scheme::AncillaFree, af_layers)?;
            let ab = measure_chebyshev_delta(Scheme::AncillaBased, ab_layers)?;
            Ok(below(af.max(ab), 1e-12))
        }),
        run_check("theta_cardinality", || Ok(none_of(count_theta_mismatches(max_len)?, "mismatched classes"))),
        run_check("xi_partition", || {
            Ok(none_of(count_xi_partition_mismatches(if full { 16 } else { max_len }), "bad partitions"))
        }),
        run_check("reversal_closure", || {
            Ok(none_of(count_reversal_violations(if full { 3 } else { 2 })?, "violations"))
        }),
        run_check("single_layer_coefficients", || Ok(below(measure_single_layer_forms(samples, seed)?, 1e-12))),
        run_check("gaussian_closed_forms", || {
            let n = if full { 50 } else { 6 };
            let af = measure_gaussian_closed_forms(Scheme::AncillaFree, n, seed)?;
            let ab = measure_gaussian_closed_forms(Scheme::AncillaBased, n, seed + 1)?;
            Ok(below(af.max(ab), 1e-8))
        }),
        run_check("clf_properties", || {
            let failed = count_clf_property_failures(if full { 4 } else { 2 }, &DEFAULT_SIGMAS)?;
            Ok((failed.is_empty(), if failed.is_empty() { "all hold".into() } else { failed.join("; ") }))
        }),
        run_check("small_sigma_limit", || Ok(below(measure_sigma0_limit(if full { 20 } else { 6 }, seed)?, 5e-3))),
        run_check("noise_scaling", || {
            let (err, monotone) = measure_noise_scaling(if full { 100 } else { 20 }, seed)?;
            let (ok, detail) = below(err, 1e-12);
            Ok((ok && monotone, format!("{detail}, monotone in f: {monotone}")))
        }),
    ];
    if full {
        checks.push(run_check("ab_single_layer_optimality", || {
            Ok(below(measure_ab_single_layer_optimality(21, &DEFAULT_SIGMAS, 4)?, 1e-9))
        }));
        checks.push(run_check("af_single_layer_beats_clf", || {
            let (mu, sigma) = (PI / 3.0, 0.2);
            let r = optimize(&OptProblem::new(Scheme::AncillaFree, 1, GaussianPrior::new(mu, sigma)?)?)?;
            let grid = af_single_layer_grid_max(mu, sigma, 400);
            let ok = r.v_star > r.v_clf && grid > r.v_clf && r.v_star >= grid - 1e-9;
            Ok((ok, format!("V* = {}, CLF = {}, grid max = {grid}", r.v_star, r.v_clf)))
        }));
    }
    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { level: options.level, passed, checks }
}
