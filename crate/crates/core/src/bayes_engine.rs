//! Expected posterior variance and the variance reduction factor V.
//!
//! For a two-outcome likelihood ½(1 ± Λ) and a Gaussian prior N(μ, σ²), the expected
//! posterior variance is σ²(1 − σ²V) with V = χ²/(1 − b²), b the prior-averaged bias
//! and χ = ∂b/∂μ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ElfError, Result};
use crate::quadrature::integrate;
use crate::series_expansion::CosinePoly;

/// Half-width of the Gaussian integration window in units of σ.
pub const GAUSSIAN_WINDOW: f64 = 10.0;
/// Absolute quadrature tolerance for the moments I_k.
pub const QUAD_TOL: f64 = 1e-12;
/// |b| (or |Λ|) within this distance of 1 counts as 1.
pub const UNIT_BIAS_TOL: f64 = 1e-12;
/// Outcomes whose I_0 falls below this are treated as impossible.
pub const NEGLIGIBLE_OUTCOME: f64 = 1e-14;

pub trait Prior {
    fn pdf(&self, theta: f64) -> f64;
    /// Finite interval carrying the mass used for integration.
    fn support(&self) -> (f64, f64);
    fn mean(&self) -> Result<f64> {
        let (a, b) = self.support();
        integrate(&|t| t * self.pdf(t), a, b, QUAD_TOL)
    }
    fn variance(&self) -> Result<f64> {
        let (a, b) = self.support();
        let m = self.mean()?;
        integrate(&|t| (t - m).powi(2) * self.pdf(t), a, b, QUAD_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    mu: f64,
    sigma: f64,
}

impl GaussianPrior {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid(format!("prior mean must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("prior sigma must be positive, got {sigma}")));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Prior for GaussianPrior {
    fn pdf(&self, theta: f64) -> f64 {
        let z = (theta - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * PI).sqrt())
    }

    fn support(&self) -> (f64, f64) {
        let h = GAUSSIAN_WINDOW * self.sigma;
        (self.mu - h, self.mu + h)
    }

    fn mean(&self) -> Result<f64> {
        Ok(self.mu)
    }

    fn variance(&self) -> Result<f64> {
        Ok(self.sigma * self.sigma)
    }
}

type LikelihoodFn<'a> = Box<dyn Fn(f64, usize) -> f64 + Send + Sync + 'a>;

/// Outcome probabilities P(d | θ) over a finite outcome set.
pub struct DiscreteLikelihood<'a> {
    outcomes: Vec<usize>,
    eval: LikelihoodFn<'a>,
}

impl std::fmt::Debug for DiscreteLikelihood<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteLikelihood").field("outcomes", &self.outcomes).finish()
    }
}

impl<'a> DiscreteLikelihood<'a> {
    pub fn new(
        outcomes: Vec<usize>,
        eval: impl Fn(f64, usize) -> f64 + Send + Sync + 'a,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(invalid("likelihood needs at least one outcome"));
        }
        Ok(Self { outcomes, eval: Box::new(eval) })
    }

    /// Two outcomes with P(d | θ) = ½(1 + (−1)^d Λ(θ)).
    pub fn from_bias(bias: impl Fn(f64) -> f64 + Send + Sync + 'a) -> Self {
        Self {
            outcomes: vec![0, 1],
            eval: Box::new(move |t, d| {
                let l = bias(t);
                if d == 0 {
                    0.5 * (1.0 + l)
                } else {
                    0.5 * (1.0 - l)
                }
            }),
        }
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn prob(&self, theta: f64, d: usize) -> f64 {
        (self.eval)(theta, d)
    }

    /// Largest |Σ_d P(d | θ) − 1| over `thetas`; errors when it exceeds `tol`.
    pub fn check_normalization(&self, thetas: &[f64], tol: f64) -> Result<f64> {
        let worst = thetas
            .iter()
            .map(|&t| (self.outcomes.iter().map(|&d| self.prob(t, d)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        if worst > tol {
            return Err(ElfError::InvariantViolation(format!(
                "likelihood sums to 1 ± {worst:e}"
            )));
        }
        Ok(worst)
    }
}

/// I_k(d) = ∫ θ^k P(d | θ) p(θ) dθ for k ∈ {0, 1}.
pub fn moment_ik(prior: &dyn Prior, lik: &DiscreteLikelihood<'_>, k: u32, d: usize) -> Result<f64> {
    let (a, b) = prior.support();
    match k {
        0 => integrate(&|t| lik.prob(t, d) * prior.pdf(t), a, b, QUAD_TOL),
        1 => integrate(&|t| t * lik.prob(t, d) * prior.pdf(t), a, b, QUAD_TOL),
        _ => Err(invalid(format!("moment order must be 0 or 1, got {k}"))),
    }
}

/// E_d Var(θ | d) = E[θ²] − Σ_d I_1(d)²/I_0(d).
///
/// Evaluated in the centred form Var(θ) − Σ_d (I_1(d) − m I_0(d))²/I_0(d), which is
/// the same quantity with less cancellation. Outcomes with I_0 < 1e−14 are skipped.
pub fn epv_general(prior: &dyn Prior, lik: &DiscreteLikelihood<'_>) -> Result<f64> {
    let (a, b) = prior.support();
    let m = prior.mean()?;
    let var = prior.variance()?;
    let mut gain = 0.0;
    for &d in lik.outcomes() {
        let i0 = integrate(&|t| lik.prob(t, d) * prior.pdf(t), a, b, QUAD_TOL)?;
        if i0 < NEGLIGIBLE_OUTCOME {
            continue;
        }
        let j1 = integrate(&|t| (t - m) * lik.prob(t, d) * prior.pdf(t), a, b, QUAD_TOL)?;
        gain += j1 * j1 / i0;
    }
    let epv = var - gain;
    if epv < -1e-10 || epv > var + 1e-10 {
        return Err(ElfError::InvariantViolation(format!(
            "expected posterior variance {epv} outside [0, {var}]"
        )));
    }
    Ok(epv.clamp(0.0, var))
}

/// Two-outcome form σ² − (I_1 − μI_0)²/(I_0(1 − I_0)).
pub fn epv_two_outcome(i0: f64, i1: f64, mu: f64, sigma: f64) -> f64 {
    let var = sigma * sigma;
    if i0 <= NEGLIGIBLE_OUTCOME || i0 >= 1.0 - NEGLIGIBLE_OUTCOME {
        return var;
    }
    var - (i1 - mu * i0).powi(2) / (i0 * (1.0 - i0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BChi {
    pub b: f64,
    pub chi: f64,
}

/// Closed-form b and χ for a pure cosine bias under a Gaussian prior.
pub fn b_chi_gaussian(poly: &CosinePoly, prior: &GaussianPrior) -> BChi {
    b_chi_gaussian_fourier(poly.coeffs(), &[], prior)
}

/// b and χ for Λ = Σ c_l cos(lθ) + d_l sin(lθ); missing d_l are zero.
pub fn b_chi_gaussian_fourier(c: &[f64], d: &[f64], prior: &GaussianPrior) -> BChi {
    let (mu, s2) = (prior.mu(), prior.sigma().powi(2));
    let n = c.len().max(d.len());
    let mut b = 0.0;
    let mut chi = 0.0;
    for l in 0..n {
        let cl = c.get(l).copied().unwrap_or(0.0);
        let dl = d.get(l).copied().unwrap_or(0.0);
        let lf = l as f64;
        let damp = (-0.5 * lf * lf * s2).exp();
        let (sn, cs) = (lf * mu).sin_cos();
        b += damp * (cl * cs + dl * sn);
        chi += lf * damp * (dl * cs - cl * sn);
    }
    BChi { b, chi }
}

/// b = E[Λ(θ)] and χ = E[Λ(θ)(θ − μ)]/σ² by quadrature, for any bias function.
pub fn b_chi_quadrature(bias: &dyn Fn(f64) -> f64, prior: &GaussianPrior) -> Result<BChi> {
    let (mu, s2) = (prior.mu(), prior.sigma().powi(2));
    let (a, z) = prior.support();
    let b = integrate(&|t| bias(t) * prior.pdf(t), a, z, QUAD_TOL)?;
    let chi = integrate(&|t| bias(t) * prior.pdf(t) * (t - mu) / s2, a, z, QUAD_TOL)?;
    Ok(BChi { b, chi })
}

/// V = χ²/(1 − b²), and 0 when |b| = 1.
pub fn vrf(b: f64, chi: f64) -> Result<f64> {
    if !(b.is_finite() && chi.is_finite()) || b.abs() > 1.0 + UNIT_BIAS_TOL {
        return Err(ElfError::InvariantViolation(format!("expected bias {b} outside [-1, 1]")));
    }
    if b.abs() >= 1.0 - UNIT_BIAS_TOL {
        return Ok(0.0);
    }
    Ok(chi * chi / (1.0 - b * b))
}

/// V under fidelity f: f²χ²/(1 − f²b²).
pub fn vrf_noisy(b: f64, chi: f64, f: f64) -> Result<f64> {
    crate::logical_circuit::check_fidelity(f)?;
    vrf(f * b, f * chi)
}

/// Expected posterior variance from V: σ²(1 − σ²V).
pub fn epv_from_vrf(sigma: f64, v: f64) -> f64 {
    let s2 = sigma * sigma;
    s2 * (1.0 - s2 * v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VrfReport {
    pub b: f64,
    pub chi: f64,
    pub v: f64,
    pub epv: f64,
}

/// b, χ, V and expected posterior variance for a cosine bias, optionally with fidelity f.
pub fn vrf_report(poly: &CosinePoly, prior: &GaussianPrior, fidelity: Option<f64>) -> Result<VrfReport> {
    let BChi { mut b, mut chi } = b_chi_gaussian(poly, prior);
    if let Some(f) = fidelity {
        crate::logical_circuit::check_fidelity(f)?;
        b *= f;
        chi *= f;
    }
    let v = vrf(b, chi)?;
    Ok(VrfReport { b, chi, v, epv: epv_from_vrf(prior.sigma(), v) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorBChi {
    pub b: f64,
    pub chi: f64,
    /// First omitted term of the b series.
    pub b_next: f64,
    /// First omitted term of the χ series.
    pub chi_next: f64,
}

fn double_factorial_even(two_j: usize) -> f64 {
    (1..=two_j / 2).map(|i| 2.0 * i as f64).product()
}

/// Truncated small-σ series
/// b = Σ_{j<order} Λ^{(2j)} σ^{2j}/(2j)!!, χ = Σ_{j<order} Λ^{(2j+1)} σ^{2j}/(2j)!!.
/// `derivs[k]` is Λ^{(k)}(μ) and must reach k = 2·order + 1.
pub fn b_chi_taylor(derivs: &[f64], sigma: f64, order: usize) -> Result<TaylorBChi> {
    if order == 0 {
        return Err(invalid("Taylor order must be at least 1"));
    }
    if derivs.len() < 2 * order + 2 {
        return Err(invalid(format!(
            "order {order} needs derivatives up to {}, got {}",
            2 * order + 1,
            derivs.len().saturating_sub(1)
        )));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    let term = |j: usize, odd: usize| {
        derivs[2 * j + odd] * sigma.powi(2 * j as i32) / double_factorial_even(2 * j)
    };
    Ok(TaylorBChi {
        b: (0..order).map(|j| term(j, 0)).sum(),
        chi: (0..order).map(|j| term(j, 1)).sum(),
        b_next: term(order, 0),
        chi_next: term(order, 1),
    })
}

/// I(μ) = Λ′(μ)²/(1 − Λ(μ)²).
pub fn fisher_info(poly: &CosinePoly, mu: f64) -> Result<f64> {
    let l = poly.eval(mu);
    if l.abs() >= 1.0 - UNIT_BIAS_TOL {
        return Err(ElfError::Domain(format!(
            "|Λ(μ)| = 1 at μ = {mu}; use vrf_limit_sigma0"
        )));
    }
    let d = poly.derivative(mu, 1);
    Ok(d * d / (1.0 - l * l))
}

/// Deepest σ-derivative order examined by [`vrf_limit_sigma0`].
pub const LIMIT_MAX_ORDER: usize = 6;

/// σ-derivatives at σ = 0 of χ² and 1 − b² for even n ≤ 6, with magnitude bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTable {
    pub orders: Vec<usize>,
    pub chi_sq: Vec<f64>,
    pub one_minus_b_sq: Vec<f64>,
    pub chi_sq_scale: Vec<f64>,
    pub one_minus_b_sq_scale: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// ∂ⁿ_σ χ²|₀ and ∂ⁿ_σ(1 − b²)|₀ from Λ^{(k)}(μ), k ≤ 7.
pub fn limit_table(poly: &CosinePoly, mu: f64) -> LimitTable {
    let d: Vec<f64> = (0..=LIMIT_MAX_ORDER as u32 + 1).map(|k| poly.derivative(mu, k)).collect();
    let bound: Vec<f64> = (0..=LIMIT_MAX_ORDER as i32 + 1)
        .map(|k| {
            poly.coeffs()
                .iter()
                .enumerate()
                .map(|(l, c)| c.abs() * (l as f64).powi(k))
                .sum()
        })
        .collect();
    let mut t = LimitTable {
        orders: Vec::new(),
        chi_sq: Vec::new(),
        one_minus_b_sq: Vec::new(),
        chi_sq_scale: Vec::new(),
        one_minus_b_sq_scale: Vec::new(),
    };
    for n in (0..=LIMIT_MAX_ORDER).step_by(2) {
        let (mut chi, mut chi_s, mut bb, mut bb_s) = (0.0, 0.0, 0.0, 0.0);
        for k in (0..=n).step_by(2) {
            let w = factorial(n) / (double_factorial_even(k) * double_factorial_even(n - k));
            chi += w * d[n - k + 1] * d[k + 1];
            chi_s += w * bound[n - k + 1] * bound[k + 1];
            bb += w * d[n - k] * d[k];
            bb_s += w * bound[n - k] * bound[k];
        }
        let delta = if n == 0 { 1.0 } else { 0.0 };
        t.orders.push(n);
        t.chi_sq.push(chi);
        t.chi_sq_scale.push(chi_s);
        t.one_minus_b_sq.push(delta - bb);
        t.one_minus_b_sq_scale.push(delta + bb_s);
    }
    t
}

/// lim_{σ→0} V(μ, σ).
///
/// Equals the Fisher information when |Λ(μ)| < 1. At |Λ(μ)| = 1 the ratio of the first
/// even σ-derivatives of χ² and 1 − b² that are not both zero is returned; a constant
/// bias Λ ≡ ±1 gives 0.
pub fn vrf_limit_sigma0(poly: &CosinePoly, mu: f64) -> Result<f64> {
    if poly.is_constant_unit(UNIT_BIAS_TOL) {
        return Ok(0.0);
    }
    if poly.eval(mu).abs() < 1.0 - UNIT_BIAS_TOL {
        return fisher_info(poly, mu);
    }
    const REL_ZERO: f64 = 1e-9;
    let t = limit_table(poly, mu);
    for i in 0..t.orders.len() {
        let num_zero = t.chi_sq[i].abs() <= REL_ZERO * t.chi_sq_scale[i];
        let den_zero = t.one_minus_b_sq[i].abs() <= REL_ZERO * t.one_minus_b_sq_scale[i];
        if num_zero && den_zero {
            continue;
        }
        if den_zero {
            return Err(ElfError::Unresolved(format!(
                "order {} has nonzero ∂χ² over vanishing ∂(1 − b²) at μ = {mu}",
                t.orders[i]
            )));
        }
        let num = if num_zero { 0.0 } else { t.chi_sq[i] };
        return Ok(num / t.one_minus_b_sq[i]);
    }
    Err(ElfError::Unresolved(format!(
        "all σ-derivatives through order {LIMIT_MAX_ORDER} vanish at μ = {mu}"
    )))
}
