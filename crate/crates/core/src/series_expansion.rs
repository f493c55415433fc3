//! Cosine-polynomial expansions Λ(θ; x) = Σ_l μ_l(x) cos(lθ) and the per-angle
//! decompositions used by the optimizer.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::ops::{Add, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ElfError, Result};
use crate::logical_circuit::{bias_direct, Scheme, TunableParams};
use crate::pq_combinatorics::{BitString, Letter, WordReducer};

/// Largest AB layer count for the combinatorial sum over 2^{2L} strings.
pub const AB_COMBINATORIAL_MAX_LAYERS: usize = 12;
/// Largest AF layer count for the combinatorial sum over 4^{2L} pairs.
pub const AF_COMBINATORIAL_MAX_LAYERS: usize = 5;
/// Largest layer count accepted by the sampling path.
pub const NUMERIC_MAX_LAYERS: usize = 64;
/// Largest angle vector accepted by [`q00_coefficients`].
pub const Q00_MAX_LEN: usize = 24;

const NUMERIC_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosinePoly {
    coeffs: Vec<f64>,
}

impl CosinePoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "cosine polynomial needs at least one coefficient");
        Self { coeffs }
    }

    pub fn zero(degree: usize) -> Self {
        Self::new(vec![0.0; degree + 1])
    }

    /// δ_{l,degree}, scaled by `sign`.
    pub fn monomial(degree: usize, sign: f64) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = sign;
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(l, &c)| c * (l as f64 * theta).cos())
            .sum()
    }

    /// k-th derivative in θ, using d^k cos(lθ) = l^k cos(lθ + kπ/2).
    pub fn derivative(&self, theta: f64, order: u32) -> f64 {
        let shift = f64::from(order % 4) * FRAC_PI_2;
        self.coeffs
            .iter()
            .enumerate()
            .skip(usize::from(order > 0))
            .map(|(l, &c)| {
                let lf = l as f64;
                c * lf.powi(order as i32) * (lf * theta + shift).cos()
            })
            .sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| k * c).collect())
    }

    /// Pointwise product, using cos a cos b = ½[cos(a+b) + cos(a−b)].
    pub fn product(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.degree() + other.degree() + 1];
        for (a, &ca) in self.coeffs.iter().enumerate() {
            for (b, &cb) in other.coeffs.iter().enumerate() {
                out[a + b] += 0.5 * ca * cb;
                out[a.abs_diff(b)] += 0.5 * ca * cb;
            }
        }
        Self::new(out)
    }

    /// True when every coefficient beyond μ_0 vanishes and μ_0 = ±1.
    pub fn is_constant_unit(&self, tol: f64) -> bool {
        self.coeffs[1..].iter().all(|c| c.abs() <= tol) && (self.coeffs[0].abs() - 1.0).abs() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|l| {
                let a = self.coeffs.get(l).copied().unwrap_or(0.0);
                let b = other.coeffs.get(l).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|l| {
                    f(
                        self.coeffs.get(l).copied().unwrap_or(0.0),
                        other.coeffs.get(l).copied().unwrap_or(0.0),
                    )
                })
                .collect(),
        )
    }
}

impl Add for &CosinePoly {
    type Output = CosinePoly;

    fn add(self, rhs: &CosinePoly) -> CosinePoly {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &CosinePoly {
    type Output = CosinePoly;

    fn sub(self, rhs: &CosinePoly) -> CosinePoly {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// AB split Λ = C cos x_j + S sin x_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsdPair {
    pub c: CosinePoly,
    pub s: CosinePoly,
}

impl CsdPair {
    pub fn recombine(&self, xj: f64) -> CosinePoly {
        &self.c.scaled(xj.cos()) + &self.s.scaled(xj.sin())
    }
}

/// AF split Λ = C cos 2x_j + S sin 2x_j + B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsbdTriple {
    pub c: CosinePoly,
    pub s: CosinePoly,
    pub b: CosinePoly,
}

impl CsbdTriple {
    pub fn recombine(&self, xj: f64) -> CosinePoly {
        let t = 2.0 * xj;
        &(&self.c.scaled(t.cos()) + &self.s.scaled(t.sin())) + &self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoefficientPath {
    /// Combinatorial sums up to their layer limits, sampling beyond.
    #[default]
    Auto,
    Combinatorial,
    Numeric,
}

/// ζ_y(x) = ∏_{y_a=0} cos x_a ∏_{y_b=1} sin x_b.
pub fn zeta(y: &BitString, x: &[f64]) -> Result<f64> {
    if y.len() != x.len() {
        return Err(invalid(format!("zeta length mismatch: {} bits, {} angles", y.len(), x.len())));
    }
    Ok(y
        .bits()
        .iter()
        .zip(x)
        .map(|(&b, &a)| if b { a.sin() } else { a.cos() })
        .product())
}

/// ν_s = Re(i^s).
pub fn nu(s: i64) -> i8 {
    match s.rem_euclid(4) {
        0 => 1,
        2 => -1,
        _ => 0,
    }
}

#[derive(Clone, Copy)]
enum Role {
    /// Free bit counted with the given sign in the weight tally.
    Free(i64),
    /// Bit fixed to 1 that contributes no angle factor.
    FixedOne,
}

#[derive(Clone, Copy)]
struct Slot {
    letter: Letter,
    cos: f64,
    sin: f64,
    role: Role,
}

/// Depth-first walk over all free bit assignments, feeding letters from position n
/// down to 1. `leaf` receives (class, signed weight mod 4, ζ product).
fn walk(slots: &[Slot], leaf: &mut impl FnMut(usize, i64, f64)) {
    fn go(
        slots: &[Slot],
        depth: usize,
        red: WordReducer,
        wt: i64,
        prod: f64,
        leaf: &mut impl FnMut(usize, i64, f64),
    ) {
        if depth == slots.len() {
            leaf(red.finish().class(), wt.rem_euclid(4), prod);
            return;
        }
        let slot = slots[depth];
        match slot.role {
            Role::FixedOne => go(slots, depth + 1, red.push(slot.letter), wt, prod, leaf),
            Role::Free(sign) => {
                go(slots, depth + 1, red, wt, prod * slot.cos, leaf);
                go(slots, depth + 1, red.push(slot.letter), wt + sign, prod * slot.sin, leaf);
            }
        }
    }
    go(slots, 0, WordReducer::new(), 0, 1.0, leaf);
}

/// Slots for the string with per-position (angle, role), ordered position n first.
fn slots_for(positions: &[(f64, Role)]) -> Vec<Slot> {
    let n = positions.len();
    (1..=n)
        .rev()
        .map(|i| {
            let (angle, role) = positions[i - 1];
            let (sin, cos) = angle.sin_cos();
            Slot { letter: Letter::at_position(i), cos, sin, role }
        })
        .collect()
}

fn require_scheme(x: &TunableParams, scheme: Scheme) -> Result<()> {
    if x.scheme() != scheme {
        return Err(invalid(format!("expected {scheme} parameters, got {}", x.scheme())));
    }
    Ok(())
}

fn fourier_ab_impl(x: &TunableParams, nu_fn: fn(i64) -> i8) -> Result<CosinePoly> {
    require_scheme(x, Scheme::AncillaBased)?;
    let layers = x.layers();
    if layers > AB_COMBINATORIAL_MAX_LAYERS {
        return Err(ElfError::Capacity {
            what: format!("combinatorial AB expansion with L = {layers}"),
            limit: AB_COMBINATORIAL_MAX_LAYERS,
        });
    }
    let positions: Vec<(f64, Role)> = x.angles().iter().map(|&a| (a, Role::Free(1))).collect();
    let mut mu = vec![0.0; layers + 1];
    walk(&slots_for(&positions), &mut |l, wt, prod| {
        let sign = nu_fn(wt);
        if sign != 0 {
            mu[l] += f64::from(sign) * prod;
        }
    });
    Ok(CosinePoly::new(mu))
}

/// AB coefficients μ_l = Σ_{y ∈ Ξ_l^{2L}} ν_{wt(y)} ζ_y(x).
pub fn fourier_ab(x: &TunableParams) -> Result<CosinePoly> {
    fourier_ab_impl(x, nu)
}

/// [`fourier_ab`] with a substitute for ν, used to confirm that validation detects a
/// corrupted sign rule.
pub fn fourier_ab_with_nu(x: &TunableParams, nu_fn: fn(i64) -> i8) -> Result<CosinePoly> {
    fourier_ab_impl(x, nu_fn)
}

/// AF coefficients μ_l = Σ_{a·1·c^R ∈ Ξ_l^{4L+1}} ν_{wt(c)−wt(a)} ζ_a(x) ζ_c(x).
pub fn fourier_af(x: &TunableParams) -> Result<CosinePoly> {
    require_scheme(x, Scheme::AncillaFree)?;
    let layers = x.layers();
    if layers > AF_COMBINATORIAL_MAX_LAYERS {
        return Err(ElfError::Capacity {
            what: format!("combinatorial AF expansion with L = {layers}"),
            limit: AF_COMBINATORIAL_MAX_LAYERS,
        });
    }
    let a = x.angles();
    let mut positions: Vec<(f64, Role)> = a.iter().map(|&t| (t, Role::Free(-1))).collect();
    positions.push((FRAC_PI_2, Role::FixedOne));
    positions.extend(a.iter().rev().map(|&t| (t, Role::Free(1))));
    let mut mu = vec![0.0; 2 * layers + 2];
    walk(&slots_for(&positions), &mut |l, wt, prod| {
        let sign = nu(wt);
        if sign != 0 {
            mu[l] += f64::from(sign) * prod;
        }
    });
    Ok(CosinePoly::new(mu))
}

/// Coefficients a_l(z) with Q00(θ; z) = Σ_l a_l(z) cos(lθ), a_l = Σ_{Ξ_l} (−i)^{wt(y)} ζ_y(z).
pub fn q00_coefficients(z: &[f64]) -> Result<Vec<Complex64>> {
    if z.is_empty() {
        return Err(invalid("q00 expansion needs at least one angle"));
    }
    if z.len() > Q00_MAX_LEN {
        return Err(ElfError::Capacity { what: "Q00 expansion length".into(), limit: Q00_MAX_LEN });
    }
    const MINUS_I_POW: [Complex64; 4] = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let positions: Vec<(f64, Role)> = z.iter().map(|&a| (a, Role::Free(1))).collect();
    let mut a = vec![Complex64::new(0.0, 0.0); z.len().div_ceil(2) + 1];
    walk(&slots_for(&positions), &mut |l, wt, prod| {
        a[l] += MINUS_I_POW[wt as usize] * prod;
    });
    Ok(a)
}

/// Sampling nodes θ_j = (j + ½)π/(q + 1), j = 0..=q.
pub fn numeric_nodes(degree: usize) -> Vec<f64> {
    let n = (degree + 1) as f64;
    (0..=degree).map(|j| (j as f64 + 0.5) * PI / n).collect()
}

/// Coefficients of the degree-`degree` cosine polynomial through samples at
/// [`numeric_nodes`]. The nodes make the cosine-Vandermonde matrix orthogonal, so the
/// solve is an exact discrete cosine transform.
pub fn interpolate_cosine(samples: &[f64]) -> Result<CosinePoly> {
    if samples.is_empty() {
        return Err(invalid("interpolation needs at least one sample"));
    }
    let degree = samples.len() - 1;
    let nodes = numeric_nodes(degree);
    let n = samples.len() as f64;
    let coeffs: Vec<f64> = (0..=degree)
        .map(|l| {
            let dot: f64 = samples
                .iter()
                .zip(&nodes)
                .map(|(f, t)| f * (l as f64 * t).cos())
                .sum();
            if l == 0 {
                dot / n
            } else {
                2.0 * dot / n
            }
        })
        .collect();
    let poly = CosinePoly::new(coeffs);
    let residual = samples
        .iter()
        .zip(&nodes)
        .map(|(f, &t)| (f - poly.eval(t)).abs())
        .fold(0.0, f64::max);
    if residual > NUMERIC_RESIDUAL_TOL {
        return Err(ElfError::Numeric {
            message: format!("cosine interpolation of degree {degree} did not reproduce its samples"),
            estimate: residual,
        });
    }
    Ok(poly)
}

/// Coefficients recovered from q+1 samples of the circuit bias.
pub fn fourier_numeric(scheme: Scheme, x: &TunableParams) -> Result<CosinePoly> {
    require_scheme(x, scheme)?;
    if x.layers() > NUMERIC_MAX_LAYERS {
        return Err(ElfError::Capacity {
            what: format!("sampled expansion with L = {}", x.layers()),
            limit: NUMERIC_MAX_LAYERS,
        });
    }
    let samples = numeric_nodes(x.degree())
        .into_iter()
        .map(|t| bias_direct(scheme, t, x))
        .collect::<Result<Vec<_>>>()?;
    interpolate_cosine(&samples)
}

pub fn fourier_with(x: &TunableParams, path: CoefficientPath) -> Result<CosinePoly> {
    let combinatorial_ok = match x.scheme() {
        Scheme::AncillaFree => x.layers() <= AF_COMBINATORIAL_MAX_LAYERS,
        Scheme::AncillaBased => x.layers() <= AB_COMBINATORIAL_MAX_LAYERS,
    };
    let use_combinatorial = match path {
        CoefficientPath::Combinatorial => true,
        CoefficientPath::Numeric => false,
        CoefficientPath::Auto => combinatorial_ok,
    };
    match (use_combinatorial, x.scheme()) {
        (true, Scheme::AncillaFree) => fourier_af(x),
        (true, Scheme::AncillaBased) => fourier_ab(x),
        (false, scheme) => fourier_numeric(scheme, x),
    }
}

/// Coefficients by the combinatorial path where it is within limits, sampling otherwise.
pub fn fourier(x: &TunableParams) -> Result<CosinePoly> {
    fourier_with(x, CoefficientPath::Auto)
}

fn check_index(x: &TunableParams, j: usize) -> Result<()> {
    if j >= x.angles().len() {
        return Err(invalid(format!(
            "angle index {j} out of range for {} angles",
            x.angles().len()
        )));
    }
    Ok(())
}

/// AB split in angle `j` (0-based): C at x_j = 0, S at x_j = π/2.
pub fn csd_ab_with(x: &TunableParams, j: usize, path: CoefficientPath) -> Result<CsdPair> {
    require_scheme(x, Scheme::AncillaBased)?;
    check_index(x, j)?;
    Ok(CsdPair {
        c: fourier_with(&x.with_angle(j, 0.0), path)?,
        s: fourier_with(&x.with_angle(j, FRAC_PI_2), path)?,
    })
}

pub fn csd_ab(x: &TunableParams, j: usize) -> Result<CsdPair> {
    csd_ab_with(x, j, CoefficientPath::Auto)
}

/// AF split in angle `j` (0-based) from the expansions at x_j ∈ {0, π/2, π/4}.
pub fn csbd_af_with(x: &TunableParams, j: usize, path: CoefficientPath) -> Result<CsbdTriple> {
    require_scheme(x, Scheme::AncillaFree)?;
    check_index(x, j)?;
    let f0 = fourier_with(&x.with_angle(j, 0.0), path)?;
    let f90 = fourier_with(&x.with_angle(j, FRAC_PI_2), path)?;
    let f45 = fourier_with(&x.with_angle(j, FRAC_PI_4), path)?;
    let b = (&f0 + &f90).scaled(0.5);
    Ok(CsbdTriple { c: (&f0 - &f90).scaled(0.5), s: &f45 - &b, b })
}

pub fn csbd_af(x: &TunableParams, j: usize) -> Result<CsbdTriple> {
    csbd_af_with(x, j, CoefficientPath::Auto)
}

/// Two-argument arctangent Arg(x + iy) in (−π, π].
pub fn arg2(y: f64, x: f64) -> Result<f64> {
    if x == 0.0 && y == 0.0 {
        return Err(ElfError::Domain("arg2(0, 0) is undefined".into()));
    }
    let a = y.atan2(x);
    // atan2(−0, x<0) is −π; the principal branch here is (−π, π].
    Ok(if a == -PI { PI } else { a })
}

/// Maximizer in y of C cos y + S sin y.
pub fn argmax_csd(c: f64, s: f64) -> Result<f64> {
    arg2(s, c)
}

/// Maximizer in y of |C cos 2y + S sin 2y + B|.
pub fn argmax_abs_csbd(c: f64, s: f64, b: f64) -> Result<f64> {
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    Ok(0.5 * arg2(sign * s, sign * c)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pq_combinatorics::{reduce_mask, BitString};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(scheme: Scheme, a: &[f64]) -> TunableParams {
        TunableParams::new(scheme, a.to_vec()).unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, scheme: Scheme, layers: usize) -> TunableParams {
        params(scheme, &(0..2 * layers).map(|_| rng.gen_range(-PI..PI)).collect::<Vec<_>>())
    }

    fn grid_error(poly: &CosinePoly, x: &TunableParams, points: usize) -> f64 {
        (0..points)
            .map(|i| {
                let t = PI * i as f64 / (points - 1) as f64;
                (poly.eval(t) - bias_direct(x.scheme(), t, x).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Plain loop over masks with ζ and ν computed from scratch.
    fn ab_oracle(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut mu = vec![0.0; n / 2 + 1];
        for m in 0..1u64 << n {
            let y = BitString::from_mask(m, n);
            let s = nu(y.weight() as i64);
            mu[reduce_mask(m, n).class()] += f64::from(s) * zeta(&y, x).unwrap();
        }
        mu
    }

    #[test]
    fn zeta_examples() {
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        let y: BitString = "00101".parse().unwrap();
        let want = 0.1f64.cos() * 0.2f64.cos() * 0.3f64.sin() * 0.4f64.cos() * 0.5f64.sin();
        assert!((zeta(&y, &x).unwrap() - want).abs() < 1e-16);
        let z = BitString::zeros(3);
        let want: f64 = x[..3].iter().map(|a| a.cos()).product();
        assert!((zeta(&z, &x[..3]).unwrap() - want).abs() < 1e-16);
        assert!((zeta(&BitString::ones(2), &[FRAC_PI_2, FRAC_PI_2]).unwrap() - 1.0).abs() < 1e-16);
        assert!(zeta(&z, &x).is_err());
    }

    #[test]
    fn zeta_is_multiplicative() {
        let y1: BitString = "101".parse().unwrap();
        let y2: BitString = "01".parse().unwrap();
        let x = [0.3, -1.2, 2.2, 0.9, 1.7];
        let whole = zeta(&y1.concat(&y2), &x).unwrap();
        let parts = zeta(&y1, &x[..3]).unwrap() * zeta(&y2, &x[3..]).unwrap();
        assert!((whole - parts).abs() < 1e-15);
    }

    #[test]
    fn nu_values() {
        assert_eq!(nu(0), 1);
        assert_eq!(nu(6), -1);
        assert_eq!(nu(-3), 0);
        assert_eq!(nu(-2), -1);
        assert_eq!(nu(-4), 1);
        assert_eq!(nu(5), 0);
    }

    #[test]
    fn chebyshev_coefficients_are_deltas() {
        for layers in 1..=4 {
            let ab = fourier_ab(&TunableParams::chebyshev(Scheme::AncillaBased, layers).unwrap()).unwrap();
            let sign = if layers % 2 == 0 { 1.0 } else { -1.0 };
            assert!(ab.max_abs_diff(&CosinePoly::monomial(layers, sign)) < 1e-12);
            let af = fourier_af(&TunableParams::chebyshev(Scheme::AncillaFree, layers).unwrap()).unwrap();
            assert!(af.max_abs_diff(&CosinePoly::monomial(2 * layers + 1, 1.0)) < 1e-12);
            for scheme in Scheme::ALL {
                let x = TunableParams::chebyshev(scheme, layers).unwrap();
                let num = fourier_numeric(scheme, &x).unwrap();
                let want = match scheme {
                    Scheme::AncillaFree => CosinePoly::monomial(2 * layers + 1, 1.0),
                    Scheme::AncillaBased => CosinePoly::monomial(layers, sign),
                };
                assert!(num.max_abs_diff(&want) < 1e-12);
            }
        }
    }

    #[test]
    fn single_layer_closed_forms() {
        let (x1, x2) = (0.7_f64, -1.3_f64);
        let ab = fourier_ab(&params(Scheme::AncillaBased, &[x1, x2])).unwrap();
        let want_ab = CosinePoly::new(vec![x1.cos() * x2.cos(), -x1.sin() * x2.sin()]);
        assert!(ab.max_abs_diff(&want_ab) < 1e-14);

        let (c1, s1, c2, s2) = (x1.cos(), x1.sin(), x2.cos(), x2.sin());
        let want_af = CosinePoly::new(vec![
            2.0 * c1 * s1 * c2 * s2,
            c1 * c1 * c2 * c2 + c1 * c1 * s2 * s2 + s1 * s1 * c2 * c2,
            -2.0 * c1 * c2 * s1 * s2,
            s1 * s1 * s2 * s2,
        ]);
        let af = fourier_af(&params(Scheme::AncillaFree, &[x1, x2])).unwrap();
        assert!(af.max_abs_diff(&want_af) < 1e-14, "{af:?} vs {want_af:?}");
    }

    #[test]
    fn zero_angles_af_is_cos_theta() {
        let x = params(Scheme::AncillaFree, &[0.0, 0.0, 0.0, 0.0]);
        let want = CosinePoly::new(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(fourier_af(&x).unwrap().max_abs_diff(&want) < 1e-15);
        assert!(fourier_numeric(Scheme::AncillaFree, &x).unwrap().max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn ab_matches_plain_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for layers in 1..=4 {
            let x = random_params(&mut rng, Scheme::AncillaBased, layers);
            let got = fourier_ab(&x).unwrap();
            let want = CosinePoly::new(ab_oracle(x.angles()));
            assert!(got.max_abs_diff(&want) < 1e-13);
        }
    }

    #[test]
    fn expansions_match_circuit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for layers in 1..=3 {
            for _ in 0..50 {
                for scheme in Scheme::ALL {
                    let x = random_params(&mut rng, scheme, layers);
                    let poly = fourier_with(&x, CoefficientPath::Combinatorial).unwrap();
                    assert!(grid_error(&poly, &x, 257) < 1e-10);
                }
            }
        }
        let x = random_params(&mut rng, Scheme::AncillaBased, 4);
        assert!(grid_error(&fourier_ab(&x).unwrap(), &x, 64) < 1e-10);
    }

    #[test]
    fn numeric_matches_combinatorial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..100 {
            let layers = 1 + i % 4;
            for scheme in Scheme::ALL {
                let x = random_params(&mut rng, scheme, layers);
                let a = fourier_with(&x, CoefficientPath::Combinatorial).unwrap();
                let b = fourier_numeric(scheme, &x).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-9);
            }
        }
    }

    #[test]
    fn numeric_scales_past_combinatorial_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for scheme in Scheme::ALL {
            let x = random_params(&mut rng, scheme, 20);
            let poly = fourier(&x).unwrap();
            assert!(grid_error(&poly, &x, 301) < 1e-10);
        }
        let x = random_params(&mut rng, Scheme::AncillaFree, 6);
        assert!(matches!(fourier_af(&x), Err(ElfError::Capacity { .. })));
        let x = random_params(&mut rng, Scheme::AncillaBased, 13);
        assert!(matches!(fourier_ab(&x), Err(ElfError::Capacity { .. })));
    }

    #[test]
    fn leading_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for layers in 1..=4 {
            let x = random_params(&mut rng, Scheme::AncillaFree, layers);
            let want: f64 = x.angles().iter().map(|a| a.sin().powi(2)).product();
            assert!((fourier_af(&x).unwrap().leading() - want).abs() < 1e-12);
            let x = random_params(&mut rng, Scheme::AncillaBased, layers);
            let sign = if layers % 2 == 0 { 1.0 } else { -1.0 };
            let want: f64 = sign * x.angles().iter().map(|a| a.sin()).product::<f64>();
            assert!((fourier_ab(&x).unwrap().leading() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn scheme_is_checked() {
        let x = params(Scheme::AncillaFree, &[0.1, 0.2]);
        assert!(fourier_ab(&x).is_err());
        assert!(csd_ab(&x, 0).is_err());
        assert!(fourier_numeric(Scheme::AncillaBased, &x).is_err());
    }

    #[test]
    fn q00_expansion_matches_product() {
        let z = [0.1, 0.2, 0.3, 0.4];
        let a = q00_coefficients(&z).unwrap();
        for i in 0..40 {
            let t = 0.4 + 0.07 * i as f64;
            let series: Complex64 =
                a.iter().enumerate().map(|(l, c)| c * (l as f64 * t).cos()).sum();
            let direct = crate::logical_circuit::q00(t, &z).unwrap();
            assert!((series - direct).norm() < 1e-13);
        }
        let z = [0.9, -0.4, 1.7];
        let a = q00_coefficients(&z).unwrap();
        let direct = crate::logical_circuit::q00(0.4, &z).unwrap();
        let series: Complex64 = a.iter().enumerate().map(|(l, c)| c * (l as f64 * 0.4).cos()).sum();
        assert!((series - direct).norm() < 1e-13);
    }

    #[test]
    fn cosine_poly_calculus() {
        let p = CosinePoly::new(vec![0.3, -0.2, 0.5, 0.1]);
        let t = 0.77;
        let h = 1e-4;
        let fd1 = (p.eval(t + h) - p.eval(t - h)) / (2.0 * h);
        assert!((p.derivative(t, 1) - fd1).abs() < 1e-7);
        let fd2 = (p.eval(t + h) - 2.0 * p.eval(t) + p.eval(t - h)) / (h * h);
        assert!((p.derivative(t, 2) - fd2).abs() < 1e-5);
        assert_eq!(p.derivative(t, 0), p.eval(t));
        let q = CosinePoly::new(vec![1.0, 0.4]);
        let r = p.product(&q);
        assert_eq!(r.degree(), 4);
        assert!((r.eval(t) - p.eval(t) * q.eval(t)).abs() < 1e-15);
    }

    #[test]
    fn product_of_ab_biases_is_recovered_by_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = random_params(&mut rng, Scheme::AncillaBased, 3);
        let y = random_params(&mut rng, Scheme::AncillaBased, 3);
        let px = fourier_ab(&x).unwrap();
        let py = fourier_ab(&y).unwrap();
        let samples: Vec<f64> = numeric_nodes(6)
            .into_iter()
            .map(|t| {
                bias_direct(Scheme::AncillaBased, t, &x).unwrap()
                    * bias_direct(Scheme::AncillaBased, t, &y).unwrap()
            })
            .collect();
        let recovered = interpolate_cosine(&samples).unwrap();
        assert!(recovered.max_abs_diff(&px.product(&py)) < 1e-12);
    }

    #[test]
    fn csd_single_layer() {
        let x2 = 0.8_f64;
        let x = params(Scheme::AncillaBased, &[0.3, x2]);
        let pair = csd_ab(&x, 0).unwrap();
        assert!(pair.c.max_abs_diff(&CosinePoly::new(vec![x2.cos(), 0.0])) < 1e-15);
        assert!(pair.s.max_abs_diff(&CosinePoly::new(vec![0.0, -x2.sin()])) < 1e-15);
        assert!(csd_ab(&x, 2).is_err());
    }

    #[test]
    fn decomposition_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for layers in 1..=3 {
            let x = random_params(&mut rng, Scheme::AncillaBased, layers);
            let y = random_params(&mut rng, Scheme::AncillaFree, layers);
            for j in 0..2 * layers {
                let pair = csd_ab(&x, j).unwrap();
                let triple = csbd_af(&y, j).unwrap();
                for _ in 0..1000 / (2 * layers) {
                    let t = rng.gen_range(-PI..PI);
                    let lhs = fourier_ab(&x.with_angle(j, t)).unwrap();
                    assert!(lhs.max_abs_diff(&pair.recombine(t)) < 1e-12);
                    let lhs = fourier_af(&y.with_angle(j, t)).unwrap();
                    assert!(lhs.max_abs_diff(&triple.recombine(t)) < 1e-12);
                }
                let at0 = fourier_af(&y.with_angle(j, 0.0)).unwrap();
                assert!(at0.max_abs_diff(&(&triple.c + &triple.b)) < 1e-15);
                let at45 = fourier_af(&y.with_angle(j, FRAC_PI_4)).unwrap();
                assert!(at45.max_abs_diff(&(&triple.s + &triple.b)) < 1e-15);
                assert!(fourier_ab(&x.with_angle(j, 0.0)).unwrap().max_abs_diff(&pair.c) < 1e-15);
            }
        }
    }

    #[test]
    fn arg2_examples() {
        assert!((arg2(1.0, 0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((arg2(0.0, -1.0).unwrap() - PI).abs() < 1e-15);
        assert!((arg2(-0.0, -1.0).unwrap() - PI).abs() < 1e-15);
        assert!((arg2(1.0, 1.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((arg2(-1.0, -1.0).unwrap() + 3.0 * FRAC_PI_4).abs() < 1e-15);
        assert!(matches!(arg2(0.0, 0.0), Err(ElfError::Domain(_))));
    }

    #[test]
    fn argmax_forms() {
        let (c, s) = (0.3, -0.8);
        let y = argmax_csd(c, s).unwrap();
        let best = c * y.cos() + s * y.sin();
        assert!((best - (c * c + s * s).sqrt()).abs() < 1e-15);
        let (c, s, b) = (0.2, 0.5, -0.4);
        let y = argmax_abs_csbd(c, s, b).unwrap();
        let val = (c * (2.0 * y).cos() + s * (2.0 * y).sin() + b).abs();
        assert!((val - ((c * c + s * s).sqrt() + b.abs())).abs() < 1e-15);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn params(scheme: Scheme, max_layers: usize) -> impl Strategy<Value = TunableParams> {
        (1..=max_layers)
            .prop_flat_map(|l| prop::collection::vec(-PI..PI, 2 * l))
            .prop_map(move |a| TunableParams::new(scheme, a).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ab_expansion_matches_circuit(x in params(Scheme::AncillaBased, 3), t in -PI..PI) {
            let poly = fourier_ab(&x).unwrap();
            prop_assert!((poly.eval(t) - bias_direct(Scheme::AncillaBased, t, &x).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn af_expansion_matches_circuit(x in params(Scheme::AncillaFree, 3), t in -PI..PI) {
            let poly = fourier_af(&x).unwrap();
            prop_assert!((poly.eval(t) - bias_direct(Scheme::AncillaFree, t, &x).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn af_leading_term(x in params(Scheme::AncillaFree, 4)) {
            let want: f64 = x.angles().iter().map(|a| a.sin().powi(2)).product();
            prop_assert!((fourier_af(&x).unwrap().leading() - want).abs() < 1e-12);
        }

        #[test]
        fn ab_leading_term(x in params(Scheme::AncillaBased, 4)) {
            let sign = if x.layers() % 2 == 0 { 1.0 } else { -1.0 };
            let want: f64 = sign * x.angles().iter().map(|a| a.sin()).product::<f64>();
            prop_assert!((fourier_ab(&x).unwrap().leading() - want).abs() < 1e-12);
        }
    }
}
