//! Exact circuit biases from 2x2 products in the logical basis {|0̄⟩, |1̄⟩}.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ElfError, Result};

/// Overshoot of |Λ| past 1 that is clamped instead of reported.
pub const BIAS_CLAMP_TOL: f64 = 1e-10;
/// Largest imaginary residue tolerated in the ancilla-free bias.
pub const AF_IMAG_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    pub entries: [[Complex64; 2]; 2],
}

impl Unitary2 {
    pub const fn new(entries: [[Complex64; 2]; 2]) -> Self {
        Self { entries }
    }

    pub const fn identity() -> Self {
        Self::new([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn pauli_x() -> Self {
        Self::new([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn pauli_y() -> Self {
        Self::new([[ZERO, -I], [I, ZERO]])
    }

    pub fn pauli_z() -> Self {
        Self::new([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// The reflection P(θ) = cos θ Z̄ + sin θ X̄.
    pub fn reflection(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new([
            [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(-c, 0.0)],
        ])
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row][col]
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let m = &self.entries;
        Self::new([[k * m[0][0], k * m[0][1]], [k * m[1][0], k * m[1][1]]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.entries;
        Self::new([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.entries[r][c] - other.entries[r][c]).norm());
            }
        }
        worst
    }

    /// Entrywise deviation of U†U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity())
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let a = &self.entries;
        let b = &rhs.entries;
        Unitary2::new([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "af")]
    AncillaFree,
    #[serde(rename = "ab")]
    AncillaBased,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::AncillaFree, Scheme::AncillaBased];

    /// Degree of the bias as a cosine polynomial in θ for `layers` layers.
    pub fn degree(self, layers: usize) -> usize {
        match self {
            Scheme::AncillaFree => 2 * layers + 1,
            Scheme::AncillaBased => layers,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::AncillaFree => "af",
            Scheme::AncillaBased => "ab",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = ElfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "af" => Ok(Scheme::AncillaFree),
            "ab" => Ok(Scheme::AncillaBased),
            other => Err(invalid(format!("unknown scheme `{other}` (expected af or ab)"))),
        }
    }
}

/// Rotation angles x = (x_1, ..., x_{2L}) for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunableParams {
    scheme: Scheme,
    angles: Vec<f64>,
}

impl TunableParams {
    pub fn new(scheme: Scheme, angles: Vec<f64>) -> Result<Self> {
        if angles.len() < 2 || !angles.len().is_multiple_of(2) {
            return Err(invalid(format!(
                "angle vector must have even length >= 2, got {}",
                angles.len()
            )));
        }
        if let Some(bad) = angles.iter().find(|a| !a.is_finite()) {
            return Err(invalid(format!("non-finite angle {bad}")));
        }
        Ok(Self { scheme, angles })
    }

    /// The Chebyshev point (π/2, ..., π/2).
    pub fn chebyshev(scheme: Scheme, layers: usize) -> Result<Self> {
        if layers == 0 {
            return Err(invalid("layer count must be positive"));
        }
        Self::new(scheme, vec![std::f64::consts::FRAC_PI_2; 2 * layers])
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn layers(&self) -> usize {
        self.angles.len() / 2
    }

    pub fn degree(&self) -> usize {
        self.scheme.degree(self.layers())
    }

    pub fn with_angle(&self, index: usize, value: f64) -> Self {
        let mut angles = self.angles.clone();
        angles[index] = value;
        Self { scheme: self.scheme, angles }
    }
}

/// U(θ; α) = exp(−iα P(θ)).
pub fn u_rot(theta: f64, alpha: f64) -> Unitary2 {
    let (sa, ca) = alpha.sin_cos();
    let (st, ct) = theta.sin_cos();
    Unitary2::new([
        [Complex64::new(ca, -sa * ct), Complex64::new(0.0, -sa * st)],
        [Complex64::new(0.0, -sa * st), Complex64::new(ca, sa * ct)],
    ])
}

/// V(β) = exp(−iβ Z̄) = diag(e^{−iβ}, e^{iβ}).
pub fn v_rot(beta: f64) -> Unitary2 {
    let (s, c) = beta.sin_cos();
    Unitary2::new([
        [Complex64::new(c, -s), ZERO],
        [ZERO, Complex64::new(c, s)],
    ])
}

/// Q(θ; z) = ⋯ V(z_2) U(θ; z_1); factor 1 acts first, odd positions are U.
pub fn q_product(theta: f64, z: &[f64]) -> Result<Unitary2> {
    if z.is_empty() {
        return Err(invalid("q_product needs at least one angle"));
    }
    let mut acc = Unitary2::identity();
    for (i, &angle) in z.iter().enumerate() {
        let factor = if i % 2 == 0 { u_rot(theta, angle) } else { v_rot(angle) };
        acc = factor * acc;
    }
    Ok(acc)
}

/// ⟨0̄| Q(θ; z) |0̄⟩.
pub fn q00(theta: f64, z: &[f64]) -> Result<Complex64> {
    Ok(q_product(theta, z)?.get(0, 0))
}

/// The ancilla-free angle sequence (x, π/2, −x^R).
pub fn af_sequence(x: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(2 * x.len() + 1);
    z.extend_from_slice(x);
    z.push(std::f64::consts::FRAC_PI_2);
    z.extend(x.iter().rev().map(|a| -a));
    z
}

fn clamp_bias(raw: f64) -> Result<f64> {
    if !raw.is_finite() || raw.abs() > 1.0 + BIAS_CLAMP_TOL {
        return Err(ElfError::InvariantViolation(format!("bias {raw} outside [-1, 1]")));
    }
    Ok(raw.clamp(-1.0, 1.0))
}

/// Λ(θ; x) evaluated from the circuit product.
pub fn bias_direct(scheme: Scheme, theta: f64, x: &TunableParams) -> Result<f64> {
    if x.scheme() != scheme {
        return Err(invalid(format!(
            "parameters built for {} but evaluated as {}",
            x.scheme(),
            scheme
        )));
    }
    let raw = match scheme {
        Scheme::AncillaFree => {
            let value = I * q00(theta, &af_sequence(x.angles()))?;
            if value.im.abs() >= AF_IMAG_TOL {
                return Err(ElfError::InvariantViolation(format!(
                    "ancilla-free bias has imaginary part {:e}",
                    value.im
                )));
            }
            value.re
        }
        Scheme::AncillaBased => q00(theta, x.angles())?.re,
    };
    clamp_bias(raw)
}

/// P(d | θ; x) = ½(1 + (−1)^d Λ).
pub fn likelihood(scheme: Scheme, theta: f64, d: u8, x: &TunableParams) -> Result<f64> {
    let bias = bias_direct(scheme, theta, x)?;
    match d {
        0 => Ok(0.5 * (1.0 + bias)),
        1 => Ok(0.5 * (1.0 - bias)),
        _ => Err(invalid(format!("outcome must be 0 or 1, got {d}"))),
    }
}

/// Bias under a depolarizing-style fidelity factor f ∈ [0, 1).
pub fn bias_noisy(scheme: Scheme, theta: f64, x: &TunableParams, f: f64) -> Result<f64> {
    check_fidelity(f)?;
    Ok(f * bias_direct(scheme, theta, x)?)
}

pub(crate) fn check_fidelity(f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(invalid(format!("fidelity must lie in [0, 1), got {f}")));
    }
    Ok(())
}

/// Π = cos θ.
pub fn pi_from_theta(theta: f64) -> f64 {
    theta.cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Scaling-and-squaring exponential of a 2x2 matrix, Taylor to order 20.
    fn expm(a: Unitary2) -> Unitary2 {
        let norm: f64 = a.entries.iter().flatten().map(|z| z.norm()).sum();
        let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
        let scaled = a.scale(Complex64::new(0.5_f64.powi(squarings as i32), 0.0));
        let mut term = Unitary2::identity();
        let mut sum = Unitary2::identity();
        for k in 1..=20 {
            term = (term * scaled).scale(Complex64::new(1.0 / k as f64, 0.0));
            for r in 0..2 {
                for c in 0..2 {
                    sum.entries[r][c] += term.entries[r][c];
                }
            }
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn close(a: &Unitary2, b: &Unitary2, tol: f64) -> bool {
        a.max_abs_diff(b) < tol
    }

    #[test]
    fn u_rot_zero_is_identity() {
        assert!(close(&u_rot(0.7, 0.0), &Unitary2::identity(), 1e-15));
    }

    #[test]
    fn u_rot_half_pi_is_minus_i_p() {
        for &t in &[0.0, 0.4, 1.3, 2.9] {
            let expected = Unitary2::reflection(t).scale(-I);
            assert!(close(&u_rot(t, FRAC_PI_2), &expected, 1e-15));
        }
    }

    #[test]
    fn u_rot_matches_matrix_exponential() {
        let gen = Unitary2::reflection(PI / 3.0).scale(Complex64::new(0.0, -0.7));
        assert!(close(&u_rot(PI / 3.0, 0.7), &expm(gen), 1e-13));
    }

    #[test]
    fn v_rot_values() {
        assert!(close(&v_rot(0.0), &Unitary2::identity(), 1e-15));
        assert!(close(&v_rot(FRAC_PI_2), &Unitary2::pauli_z().scale(-I), 1e-15));
        let v = v_rot(0.3);
        assert!((v.get(0, 0) - Complex64::new(0.0, -0.3).exp()).norm() < 1e-15);
        assert!((v.get(1, 1) - Complex64::new(0.0, 0.3).exp()).norm() < 1e-15);
        assert_eq!(v.get(0, 1), ZERO);
    }

    #[test]
    fn v_rot_matches_matrix_exponential() {
        let gen = Unitary2::pauli_z().scale(Complex64::new(0.0, -1.9));
        assert!(close(&v_rot(1.9), &expm(gen), 1e-13));
    }

    #[test]
    fn q_product_rejects_empty() {
        assert!(matches!(q_product(0.1, &[]), Err(ElfError::InvalidArgument(_))));
    }

    #[test]
    fn q_product_zero_angles_is_identity() {
        let q = q_product(0.9, &[0.0; 7]).unwrap();
        assert!(close(&q, &Unitary2::identity(), 1e-15));
    }

    #[test]
    fn q_product_chebyshev_closed_form() {
        for layers in 1..=6 {
            let theta = 0.37;
            let q = q_product(theta, &vec![FRAC_PI_2; 2 * layers]).unwrap();
            let lt = layers as f64 * theta;
            let sign = if layers % 2 == 0 { 1.0 } else { -1.0 };
            let expected = Unitary2::new([
                [Complex64::new(sign * lt.cos(), 0.0), Complex64::new(sign * lt.sin(), 0.0)],
                [Complex64::new(-sign * lt.sin(), 0.0), Complex64::new(sign * lt.cos(), 0.0)],
            ]);
            assert!(close(&q, &expected, 1e-13), "L={layers}");
        }
    }

    #[test]
    fn q_product_regrouping() {
        let t = 1.1;
        let direct = q_product(t, &[0.2, -0.4, 0.9]).unwrap();
        let regrouped = u_rot(t, 0.9) * (v_rot(-0.4) * u_rot(t, 0.2));
        assert!(close(&direct, &regrouped, 1e-15));
    }

    #[test]
    fn q00_examples() {
        assert!((q00(0.3, &[0.0, 0.0]).unwrap() - ONE).norm() < 1e-15);
        let t = 0.8;
        let v = q00(t, &[FRAC_PI_2, FRAC_PI_2]).unwrap();
        assert!((v - Complex64::new(-t.cos(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn chebyshev_biases() {
        for &t in &[0.1, 0.9, 2.0] {
            let af = TunableParams::chebyshev(Scheme::AncillaFree, 1).unwrap();
            let ab = TunableParams::chebyshev(Scheme::AncillaBased, 1).unwrap();
            let got_af = bias_direct(Scheme::AncillaFree, t, &af).unwrap();
            let got_ab = bias_direct(Scheme::AncillaBased, t, &ab).unwrap();
            assert!((got_af - (3.0 * t).cos()).abs() < 1e-13);
            assert!((got_ab + t.cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn ab_single_layer_closed_form() {
        let x = TunableParams::new(Scheme::AncillaBased, vec![0.3, 1.2]).unwrap();
        let expected = 0.3f64.cos() * 1.2f64.cos() - 0.3f64.sin() * 1.2f64.sin() * 0.8f64.cos();
        assert!((bias_direct(Scheme::AncillaBased, 0.8, &x).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn af_zero_angles_is_cos_theta() {
        let x = TunableParams::new(Scheme::AncillaFree, vec![0.0, 0.0]).unwrap();
        assert!((bias_direct(Scheme::AncillaFree, 0.6, &x).unwrap() - 0.6f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn scheme_mismatch_is_rejected() {
        let x = TunableParams::chebyshev(Scheme::AncillaBased, 1).unwrap();
        assert!(matches!(
            bias_direct(Scheme::AncillaFree, 0.1, &x),
            Err(ElfError::InvalidArgument(_))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(TunableParams::new(Scheme::AncillaFree, vec![]).is_err());
        assert!(TunableParams::new(Scheme::AncillaFree, vec![0.1, 0.2, 0.3]).is_err());
        assert!(TunableParams::new(Scheme::AncillaFree, vec![0.1, f64::NAN]).is_err());
        assert!(TunableParams::chebyshev(Scheme::AncillaFree, 0).is_err());
    }

    #[test]
    fn likelihood_examples() {
        let af = TunableParams::chebyshev(Scheme::AncillaFree, 1).unwrap();
        for d in 0..2 {
            let p = likelihood(Scheme::AncillaFree, PI / 6.0, d, &af).unwrap();
            assert!((p - 0.5).abs() < 1e-15);
        }
        assert!(likelihood(Scheme::AncillaFree, PI / 3.0, 0, &af).unwrap().abs() < 1e-15);
        let ab = TunableParams::new(Scheme::AncillaBased, vec![0.3, 1.2]).unwrap();
        let bias = bias_direct(Scheme::AncillaBased, 0.8, &ab).unwrap();
        let p1 = likelihood(Scheme::AncillaBased, 0.8, 1, &ab).unwrap();
        assert_eq!(p1, 0.5 * (1.0 - bias));
        assert!(likelihood(Scheme::AncillaBased, 0.8, 2, &ab).is_err());
    }

    #[test]
    fn noisy_bias() {
        let af = TunableParams::chebyshev(Scheme::AncillaFree, 1).unwrap();
        assert_eq!(bias_noisy(Scheme::AncillaFree, 0.4, &af, 0.0).unwrap(), 0.0);
        let v = bias_noisy(Scheme::AncillaFree, PI / 3.0, &af, 0.9).unwrap();
        assert!((v + 0.9).abs() < 1e-14);
        let eps = 1e-6;
        let exact = bias_direct(Scheme::AncillaFree, 0.4, &af).unwrap();
        let near = bias_noisy(Scheme::AncillaFree, 0.4, &af, 1.0 - eps).unwrap();
        assert!((near - exact).abs() <= eps);
        assert!(bias_noisy(Scheme::AncillaFree, 0.4, &af, 1.0).is_err());
        assert!(bias_noisy(Scheme::AncillaFree, 0.4, &af, -0.1).is_err());
    }

    #[test]
    fn scheme_parsing_and_degree() {
        assert_eq!("AF".parse::<Scheme>().unwrap(), Scheme::AncillaFree);
        assert_eq!("ab".parse::<Scheme>().unwrap(), Scheme::AncillaBased);
        assert!("xy".parse::<Scheme>().is_err());
        assert_eq!(Scheme::AncillaFree.degree(3), 7);
        assert_eq!(Scheme::AncillaBased.degree(3), 3);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn angles(max_layers: usize) -> impl Strategy<Value = Vec<f64>> {
        (1..=max_layers).prop_flat_map(|l| prop::collection::vec(-PI..PI, 2 * l))
    }

    fn scheme() -> impl Strategy<Value = Scheme> {
        prop_oneof![Just(Scheme::AncillaFree), Just(Scheme::AncillaBased)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn bias_is_even_and_periodic(s in scheme(), a in angles(4), t in -PI..PI) {
            let x = TunableParams::new(s, a).unwrap();
            let b = bias_direct(s, t, &x).unwrap();
            prop_assert!((b - bias_direct(s, -t, &x).unwrap()).abs() < 1e-12);
            prop_assert!((b - bias_direct(s, t + 2.0 * PI, &x).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn bias_is_periodic_in_each_angle(s in scheme(), a in angles(4), t in -PI..PI, j in 0usize..8) {
            let x = TunableParams::new(s, a).unwrap();
            let j = j % x.angles().len();
            let shifted = x.with_angle(j, x.angles()[j] + 2.0 * PI);
            let d = bias_direct(s, t, &x).unwrap() - bias_direct(s, t, &shifted).unwrap();
            prop_assert!(d.abs() < 1e-12);
        }

        #[test]
        fn raw_bias_is_bounded(s in scheme(), a in angles(6), t in -PI..PI) {
            let raw = match s {
                Scheme::AncillaFree => I * q00(t, &af_sequence(&a)).unwrap(),
                Scheme::AncillaBased => Complex64::new(q00(t, &a).unwrap().re, 0.0),
            };
            prop_assert!(raw.re.abs() <= 1.0 + BIAS_CLAMP_TOL);
            prop_assert!(raw.im.abs() < AF_IMAG_TOL);
        }

        #[test]
        fn long_products_stay_unitary(z in prop::collection::vec(-PI..PI, 1..=41), t in -PI..PI) {
            prop_assert!(q_product(t, &z).unwrap().unitarity_defect() < 1e-12);
        }
    }
}
