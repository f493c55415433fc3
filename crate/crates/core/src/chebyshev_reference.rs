//! Closed forms for the Chebyshev likelihood function (CLF), the bias at x = (π/2)^{2L}.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ElfError, Result};
use crate::logical_circuit::{Scheme, TunableParams};
use crate::series_expansion::CosinePoly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClfSpec {
    pub scheme: Scheme,
    pub layers: usize,
    /// Degree q: 2L+1 (AF) or L (AB).
    pub q: usize,
    /// Sign exponent r: 0 (AF) or L (AB).
    pub r: usize,
}

impl ClfSpec {
    pub fn new(scheme: Scheme, layers: usize) -> Result<Self> {
        if layers == 0 {
            return Err(invalid("layer count must be positive"));
        }
        let r = match scheme {
            Scheme::AncillaFree => 0,
            Scheme::AncillaBased => layers,
        };
        Ok(Self { scheme, layers, q: scheme.degree(layers), r })
    }

    fn qf(&self) -> f64 {
        self.q as f64
    }

    fn sign(&self) -> f64 {
        if self.r.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn params(&self) -> TunableParams {
        TunableParams::chebyshev(self.scheme, self.layers).expect("layers checked in constructor")
    }

    pub fn poly(&self) -> CosinePoly {
        CosinePoly::monomial(self.q, self.sign())
    }
}

/// (−1)^r cos(qθ).
pub fn clf_bias(spec: &ClfSpec, theta: f64) -> f64 {
    spec.sign() * (spec.qf() * theta).cos()
}

/// k-th θ-derivative of the CLF bias.
pub fn clf_bias_derivative(spec: &ClfSpec, theta: f64, order: u32) -> f64 {
    let q = spec.qf();
    spec.sign() * q.powi(order as i32) * (q * theta + f64::from(order % 4) * FRAC_PI_2).cos()
}

/// V = q² sin²(qμ)/(e^{q²σ²} − cos²(qμ)).
pub fn clf_vrf(spec: &ClfSpec, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let q = spec.qf();
    let (s, c) = (q * mu).sin_cos();
    Ok(q * q * s * s / ((q * q * sigma * sigma).exp() - c * c))
}

/// Largest V over μ: q² e^{−q²σ²}, reached at μ ∈ (π/2q)·odd.
pub fn clf_vrf_max(spec: &ClfSpec, sigma: f64) -> f64 {
    let q = spec.qf();
    q * q * (-q * q * sigma * sigma).exp()
}

/// True when μ lies in (π/q)ℤ to within `tol` (measured in qμ).
pub fn is_dead_spot(spec: &ClfSpec, mu: f64, tol: f64) -> bool {
    let k = spec.qf() * mu / PI;
    (k - k.round()).abs() * PI <= tol
}

/// σ → 0 limit: q² off (π/q)ℤ and 0 on it.
pub fn clf_vrf_limit(spec: &ClfSpec, mu: f64) -> f64 {
    if is_dead_spot(spec, mu, 1e-12) {
        0.0
    } else {
        spec.qf() * spec.qf()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfPropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl ClfPropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The report itself, or a property failure naming every failed check.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        Err(ElfError::PropertyFailure(failed.join("; ")))
    }
}

/// Checks periodicity, sign, zero set, maximum and the 1/(eσ²) bound of V on `grid`.
pub fn clf_properties_check(spec: &ClfSpec, sigma: f64, grid: &[f64]) -> Result<ClfPropertyReport> {
    let q = spec.qf();
    let period = PI / q;
    let vmax = clf_vrf_max(spec, sigma);
    let bound = 1.0 / (std::f64::consts::E * sigma * sigma);
    let tol = 1e-12 * vmax.max(1.0);
    let mut checks = Vec::new();
    let mut push = |name: &str, bad: Option<String>| {
        checks.push(PropertyCheck {
            name: name.to_string(),
            passed: bad.is_none(),
            detail: bad.unwrap_or_else(|| "ok".to_string()),
        });
    };

    let values = grid.iter().map(|&m| clf_vrf(spec, m, sigma)).collect::<Result<Vec<_>>>()?;

    let mut bad = None;
    for (&m, &v) in grid.iter().zip(&values) {
        let shifted = clf_vrf(spec, m + period, sigma)?;
        if (shifted - v).abs() > tol {
            bad = Some(format!("V(μ+π/q) − V(μ) = {:e} at μ = {m}", shifted - v));
            break;
        }
    }
    push("periodicity", bad);

    push(
        "nonnegativity",
        grid.iter()
            .zip(&values)
            .find(|(_, &v)| v < 0.0)
            .map(|(m, v)| format!("V = {v} at μ = {m}")),
    );

    let mut bad = None;
    for (&m, &v) in grid.iter().zip(&values) {
        let dead = is_dead_spot(spec, m, 1e-12);
        if dead && v.abs() > tol {
            bad = Some(format!("V = {v:e} at dead spot μ = {m}"));
            break;
        }
        if !dead && v <= 0.0 {
            bad = Some(format!("V = 0 at μ = {m} outside (π/q)ℤ"));
            break;
        }
    }
    let k = (grid.first().copied().unwrap_or(0.0) / period).ceil();
    let dead_value = clf_vrf(spec, k * period, sigma)?;
    if bad.is_none() && dead_value.abs() > tol {
        bad = Some(format!("V = {dead_value:e} at μ = {}", k * period));
    }
    push("zero set", bad);

    let mut bad = grid
        .iter()
        .zip(&values)
        .find(|(_, &v)| v > vmax + tol)
        .map(|(m, v)| format!("V = {v} exceeds q²e^(−q²σ²) = {vmax} at μ = {m}"));
    for odd in [1.0, 3.0, 5.0] {
        let at = clf_vrf(spec, odd * period / 2.0, sigma)?;
        if bad.is_none() && (at - vmax).abs() > tol {
            bad = Some(format!("V(π/2q·{odd}) = {at}, expected {vmax}"));
        }
    }
    push("maximum", bad);

    push(
        "global bound",
        (vmax > bound * (1.0 + 1e-12)).then(|| format!("q²e^(−q²σ²) = {vmax} exceeds 1/(eσ²) = {bound}")),
    );

    Ok(ClfPropertyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_engine::{vrf_limit_sigma0, vrf_report, GaussianPrior};
    use crate::logical_circuit::bias_direct;
    use crate::series_expansion::fourier;
    use std::f64::consts::{E, FRAC_PI_3, FRAC_PI_6};

    fn spec(scheme: Scheme, layers: usize) -> ClfSpec {
        ClfSpec::new(scheme, layers).unwrap()
    }

    #[test]
    fn spec_fields() {
        let s = spec(Scheme::AncillaFree, 2);
        assert_eq!((s.q, s.r), (5, 0));
        let s = spec(Scheme::AncillaBased, 3);
        assert_eq!((s.q, s.r), (3, 3));
        assert!(ClfSpec::new(Scheme::AncillaBased, 0).is_err());
    }

    #[test]
    fn bias_examples() {
        assert!((clf_bias(&spec(Scheme::AncillaFree, 2), 0.0) - 1.0).abs() < 1e-15);
        assert!((clf_bias(&spec(Scheme::AncillaBased, 1), FRAC_PI_3) + 0.5).abs() < 1e-15);
        for i in 0..20 {
            let t = 0.15 * i as f64;
            let c = t.cos();
            let t3 = 4.0 * c * c * c - 3.0 * c;
            assert!((clf_bias(&spec(Scheme::AncillaFree, 1), t) - t3).abs() < 1e-14);
        }
    }

    #[test]
    fn bias_matches_circuit() {
        for layers in 1..=4 {
            for scheme in Scheme::ALL {
                let s = spec(scheme, layers);
                for i in 0..50 {
                    let t = 0.0628 * i as f64;
                    let direct = bias_direct(scheme, t, &s.params()).unwrap();
                    assert!((clf_bias(&s, t) - direct).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vrf_examples() {
        let s = spec(Scheme::AncillaFree, 1);
        assert!((clf_vrf(&s, FRAC_PI_6, 0.1).unwrap() - 9.0 * (-0.09f64).exp()).abs() < 1e-12);
        assert!((clf_vrf(&s, FRAC_PI_6, 0.1).unwrap() - 8.225381).abs() < 1e-6);
        assert!(clf_vrf(&s, FRAC_PI_3, 0.1).unwrap().abs() < 1e-28);
        for sigma in [0.05, 0.3, 1.0] {
            let at = clf_vrf(&s, PI / 6.0, sigma).unwrap();
            assert!((at - clf_vrf_max(&s, sigma)).abs() < 1e-12);
        }
        assert!(clf_vrf(&s, 0.1, 0.0).is_err());
    }

    #[test]
    fn bound_saturates_at_q_equal_inverse_sigma() {
        for layers in 1..=4 {
            let s = spec(Scheme::AncillaFree, layers);
            let sigma = 1.0 / s.q as f64;
            let v = clf_vrf(&s, PI / (2.0 * s.q as f64), sigma).unwrap();
            assert!((v - 1.0 / (E * sigma * sigma)).abs() < 1e-12);
        }
    }

    #[test]
    fn limits() {
        let s = spec(Scheme::AncillaFree, 1);
        assert_eq!(clf_vrf_limit(&s, FRAC_PI_6), 9.0);
        assert_eq!(clf_vrf_limit(&s, FRAC_PI_3), 0.0);
        for &mu in &[0.2, FRAC_PI_6, 1.0, FRAC_PI_3, 2.0 * FRAC_PI_3] {
            let generic = vrf_limit_sigma0(&s.poly(), mu).unwrap();
            assert!((generic - clf_vrf_limit(&s, mu)).abs() < 1e-9, "μ={mu}");
            let small = clf_vrf(&s, mu, 1e-4).unwrap();
            assert!((small - clf_vrf_limit(&s, mu)).abs() < 1e-5 * 9.0);
        }
    }

    #[test]
    fn dead_spot_derivatives() {
        for scheme in Scheme::ALL {
            for layers in 1..=3 {
                let s = spec(scheme, layers);
                for k in 0..4 {
                    let mu = k as f64 * PI / s.q as f64;
                    assert!(clf_bias_derivative(&s, mu, 1).abs() < 1e-12);
                    let q2 = (s.q * s.q) as f64;
                    assert!((clf_bias_derivative(&s, mu, 2).abs() - q2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_poly() {
        let s = spec(Scheme::AncillaBased, 3);
        for k in 0..6 {
            assert!((clf_bias_derivative(&s, 0.7, k) - s.poly().derivative(0.7, k)).abs() < 1e-10);
        }
    }

    #[test]
    fn generic_pipeline_agrees() {
        for layers in 1..=3 {
            for scheme in Scheme::ALL {
                let s = spec(scheme, layers);
                let poly = fourier(&s.params()).unwrap();
                for i in 1..40 {
                    let mu = PI * i as f64 / 40.0;
                    for sigma in [0.05, 0.1, 0.2, 0.5] {
                        let prior = GaussianPrior::new(mu, sigma).unwrap();
                        let v = vrf_report(&poly, &prior, None).unwrap().v;
                        assert!((v - clf_vrf(&s, mu, sigma).unwrap()).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn property_report_passes() {
        let s = spec(Scheme::AncillaFree, 1);
        let grid: Vec<f64> = (0..1000).map(|i| PI * i as f64 / 999.0).collect();
        let report = clf_properties_check(&s, 0.2, &grid).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.checks.len(), 5);
        report.into_result().unwrap();
    }

    #[test]
    fn property_failure_is_reported() {
        let report = ClfPropertyReport {
            checks: vec![PropertyCheck { name: "x".into(), passed: false, detail: "bad".into() }],
        };
        assert!(matches!(report.into_result(), Err(ElfError::PropertyFailure(_))));
    }
}
