//! Maximization of V(μ, σ; x) over the angles x by cyclic coordinate ascent.
//!
//! With all angles but x_j fixed, b and χ are a·cos x_j + c·sin x_j (AB) or
//! a·cos 2x_j + c·sin 2x_j + e (AF), so each 1-D subproblem is a scan of a cheap
//! closed form followed by golden-section refinement.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes_engine::{b_chi_gaussian, vrf, BChi, GaussianPrior, UNIT_BIAS_TOL};
use crate::chebyshev_reference::{clf_vrf, ClfSpec};
use crate::error::{invalid, Result};
use crate::logical_circuit::{check_fidelity, Scheme, TunableParams};
use crate::series_expansion::{csbd_af_with, csd_ab_with, fourier_with, CoefficientPath};

/// Grid points per coordinate scan over (−π, π].
pub const SCAN_POINTS: usize = 720;
/// Golden-section stopping width.
pub const REFINE_TOL: f64 = 1e-12;
/// Smallest per-coordinate gain that counts as a move.
pub const MIN_STEP_GAIN: f64 = 1e-14;
/// Sweep-to-sweep gain below which a start is considered converged.
pub const CONVERGENCE_TOL: f64 = 1e-12;
/// Candidates within this of the best V are tie-broken by distance to the CLF point.
pub const TIE_TOL: f64 = 1e-12;
/// Size of the deterministic perturbations of the CLF start.
pub const CLF_PERTURBATION: f64 = 0.05;
/// Step for the finite-difference gradient certificate.
pub const GRADIENT_STEP: f64 = 1e-6;
/// Relative sweep gain below which Newton polishing starts.
const POLISH_SWITCH: f64 = 1e-6;
/// Sweeps after which Newton polishing starts regardless of progress.
const POLISH_AFTER_SWEEPS: usize = 20;
/// Past this many AF layers `Auto` resolves to the numeric path inside the optimizer.
pub const OPTIMIZER_AF_COMBINATORIAL_MAX_LAYERS: usize = 2;
const POLISH_MAX_STEPS: usize = 100;
/// Every start gets this many sweeps and polish steps; only those within
/// `REFINE_MARGIN` (relative) of the best are run to convergence.
const SCREEN_SWEEPS: usize = 20;
const SCREEN_POLISH_STEPS: usize = 10;
const REFINE_MARGIN: f64 = 1e-6;
const POLISH_GRADIENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptProblem {
    pub scheme: Scheme,
    pub layers: usize,
    pub prior: GaussianPrior,
    /// Random starts in addition to the CLF point and its perturbations.
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    pub fidelity: Option<f64>,
    pub path: CoefficientPath,
}

impl OptProblem {
    pub fn new(scheme: Scheme, layers: usize, prior: GaussianPrior) -> Result<Self> {
        if layers == 0 {
            return Err(invalid("layer count must be positive"));
        }
        Ok(Self {
            scheme,
            layers,
            prior,
            restarts: 8,
            max_sweeps: 200,
            seed: 0,
            fidelity: None,
            path: CoefficientPath::Auto,
        })
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_fidelity(mut self, fidelity: Option<f64>) -> Result<Self> {
        if let Some(f) = fidelity {
            check_fidelity(f)?;
        }
        self.fidelity = fidelity;
        Ok(self)
    }

    pub fn with_path(mut self, path: CoefficientPath) -> Self {
        self.path = path;
        self
    }

    fn objective(&self) -> Objective {
        let path = match self.path {
            CoefficientPath::Auto
                if self.scheme == Scheme::AncillaFree && self.layers > OPTIMIZER_AF_COMBINATORIAL_MAX_LAYERS =>
            {
                CoefficientPath::Numeric
            }
            p => p,
        };
        Objective { prior: self.prior, scale: self.fidelity.unwrap_or(1.0), path }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub x_star: TunableParams,
    pub v_star: f64,
    pub v_clf: f64,
    /// V after each sweep of the winning start, beginning with its initial value.
    pub trace: Vec<f64>,
    /// Max-norm of the central-difference gradient of V at x_star.
    pub gradient_norm: f64,
    /// χ vanished at every start, so V_star = 0.
    pub degenerate: bool,
    pub starts: usize,
}

#[derive(Debug, Clone, Copy)]
struct Objective {
    prior: GaussianPrior,
    scale: f64,
    path: CoefficientPath,
}

/// V with |b| ≥ 1 − 1e−12 mapped to 0 and overshoot from rounding tolerated.
fn safe_vrf(b: f64, chi: f64) -> f64 {
    if b.abs() >= 1.0 - UNIT_BIAS_TOL {
        0.0
    } else {
        chi * chi / (1.0 - b * b)
    }
}

/// b and χ as functions of one angle t: cos-part, sin-part and constant, in the
/// argument `freq · t`.
#[derive(Debug, Clone, Copy)]
struct CoordinateModel {
    freq: f64,
    cos: BChi,
    sin: BChi,
    constant: BChi,
}

impl CoordinateModel {
    fn value(&self, t: f64) -> f64 {
        let (s, c) = (self.freq * t).sin_cos();
        let b = self.cos.b * c + self.sin.b * s + self.constant.b;
        let chi = self.cos.chi * c + self.sin.chi * s + self.constant.chi;
        safe_vrf(b, chi)
    }
}

impl Objective {
    fn bchi(&self, poly: &crate::series_expansion::CosinePoly) -> BChi {
        let r = b_chi_gaussian(poly, &self.prior);
        BChi { b: self.scale * r.b, chi: self.scale * r.chi }
    }

    fn value(&self, x: &TunableParams) -> Result<f64> {
        let r = self.bchi(&fourier_with(x, self.path)?);
        vrf(r.b, r.chi)
    }

    fn model(&self, x: &TunableParams, j: usize) -> Result<CoordinateModel> {
        Ok(match x.scheme() {
            Scheme::AncillaBased => {
                let pair = csd_ab_with(x, j, self.path)?;
                CoordinateModel {
                    freq: 1.0,
                    cos: self.bchi(&pair.c),
                    sin: self.bchi(&pair.s),
                    constant: BChi { b: 0.0, chi: 0.0 },
                }
            }
            Scheme::AncillaFree => {
                let triple = csbd_af_with(x, j, self.path)?;
                CoordinateModel {
                    freq: 2.0,
                    cos: self.bchi(&triple.c),
                    sin: self.bchi(&triple.s),
                    constant: self.bchi(&triple.b),
                }
            }
        })
    }
}

/// Maps an angle into (−π, π].
pub fn wrap_angle(t: f64) -> f64 {
    let w = (t + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > REFINE_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Best angle for one coordinate model and its value.
fn maximize_coordinate(model: &CoordinateModel) -> (f64, f64) {
    let step = 2.0 * PI / SCAN_POINTS as f64;
    let f = |t: f64| model.value(t);
    let (mut best_t, mut best_v) = (PI, f(PI));
    for i in 1..SCAN_POINTS {
        let t = -PI + i as f64 * step;
        let v = f(t);
        if v > best_v {
            best_t = t;
            best_v = v;
        }
    }
    let (t, v) = golden_max(&f, best_t - step, best_t + step);
    if v > best_v {
        (wrap_angle(t), v)
    } else {
        (best_t, best_v)
    }
}

fn sweep_with(obj: &Objective, x: &TunableParams) -> Result<TunableParams> {
    let mut x = x.clone();
    for j in 0..x.angles().len() {
        let model = obj.model(&x, j)?;
        let current = model.value(x.angles()[j]);
        let (t, v) = maximize_coordinate(&model);
        if v >= current + MIN_STEP_GAIN {
            x = x.with_angle(j, t);
        }
    }
    Ok(x)
}

/// V(μ, σ; x) through the cosine expansion, Gaussian b/χ and the V formula.
pub fn objective(scheme: Scheme, layers: usize, prior: &GaussianPrior, x: &TunableParams) -> Result<f64> {
    if x.scheme() != scheme || x.layers() != layers {
        return Err(invalid(format!(
            "parameters are {} with L = {}, expected {scheme} with L = {layers}",
            x.scheme(),
            x.layers()
        )));
    }
    Objective { prior: *prior, scale: 1.0, path: CoefficientPath::Auto }.value(x)
}

/// One pass of per-coordinate maximization over j = 1..2L in order.
pub fn coordinate_sweep(x: &TunableParams, prior: &GaussianPrior) -> Result<TunableParams> {
    sweep_with(&Objective { prior: *prior, scale: 1.0, path: CoefficientPath::Auto }, x)
}

struct StartOutcome {
    x: TunableParams,
    v: f64,
    trace: Vec<f64>,
    sweeps: usize,
    converged: bool,
}

impl StartOutcome {
    fn new(obj: &Objective, x: TunableParams) -> Result<Self> {
        let v = obj.value(&x)?;
        Ok(Self { x, v, trace: vec![v], sweeps: 0, converged: false })
    }
}

/// Sweeps until the gain drops below the convergence tolerance or `max_sweeps` is
/// reached in total, with a Newton polish every `POLISH_AFTER_SWEEPS` sweeps or once
/// progress slows.
fn ascend(obj: &Objective, mut o: StartOutcome, max_sweeps: usize, polish_steps: usize) -> Result<StartOutcome> {
    let mut polished = false;
    while o.sweeps < max_sweeps && !o.converged {
        let next = sweep_with(obj, &o.x)?;
        o.sweeps += 1;
        let nv = obj.value(&next)?;
        if nv < o.v {
            // Rounding between the coordinate model and the full objective; keep the better point.
            o.converged = true;
            break;
        }
        let gain = nv - o.v;
        o.x = next;
        o.v = nv;
        o.trace.push(nv);
        if gain < CONVERGENCE_TOL {
            // A stalled sweep on a narrow ridge is not a stationary point; let Newton try first.
            let before = o.v;
            if o.v > 0.0 {
                polish(obj, &mut o.x, &mut o.v, &mut o.trace, polish_steps)?;
            }
            if o.v - before < CONVERGENCE_TOL {
                o.converged = true;
                break;
            }
            polished = true;
            continue;
        }
        if o.v > 0.0 && (o.sweeps.is_multiple_of(POLISH_AFTER_SWEEPS) || (!polished && gain < POLISH_SWITCH * o.v)) {
            polish(obj, &mut o.x, &mut o.v, &mut o.trace, polish_steps)?;
            polished = true;
        }
    }
    if !polished && o.v > 0.0 {
        polish(obj, &mut o.x, &mut o.v, &mut o.trace, polish_steps)?;
    }
    Ok(o)
}

fn finite_gradient(obj: &Objective, x: &TunableParams, h: f64) -> Result<Vec<f64>> {
    (0..x.angles().len())
        .map(|j| {
            let a = x.angles()[j];
            Ok((obj.value(&x.with_angle(j, a + h))? - obj.value(&x.with_angle(j, a - h))?) / (2.0 * h))
        })
        .collect()
}

/// Sample angles for one coordinate and the weights that turn samples at them into
/// the first and second derivative at `t`. Exact on the per-angle span
/// {cos t, sin t} (AB) or {1, cos 2t, sin 2t} (AF).
fn derivative_stencil(scheme: Scheme, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match scheme {
        Scheme::AncillaBased => {
            let (s, c) = t.sin_cos();
            (vec![0.0, FRAC_PI_2], vec![-s, c], vec![-c, -s])
        }
        Scheme::AncillaFree => {
            let (s, c) = (2.0 * t).sin_cos();
            (
                vec![0.0, FRAC_PI_2, FRAC_PI_4],
                vec![-s - c, s - c, 2.0 * c],
                vec![2.0 * s - 2.0 * c, 2.0 * s + 2.0 * c, -4.0 * s],
            )
        }
    }
}

struct Derivatives {
    gradient: Vec<f64>,
    hessian: Vec<Vec<f64>>,
}

/// Exact gradient and Hessian of V from b and χ at stencil points.
fn exact_derivatives(obj: &Objective, x: &TunableParams) -> Result<Option<Derivatives>> {
    let n = x.angles().len();
    let at = |y: &TunableParams| -> Result<BChi> { Ok(obj.bchi(&fourier_with(y, obj.path)?)) };
    let r = at(x)?;
    let d = 1.0 - r.b * r.b;
    if d <= UNIT_BIAS_TOL {
        return Ok(None);
    }
    let stencils: Vec<_> = x.angles().iter().map(|&t| derivative_stencil(x.scheme(), t)).collect();
    let mut gb = vec![0.0; n];
    let mut gc = vec![0.0; n];
    let mut hb = vec![vec![0.0; n]; n];
    let mut hc = vec![vec![0.0; n]; n];
    for j in 0..n {
        let (nodes, w1, w2) = &stencils[j];
        for (a, &t) in nodes.iter().enumerate() {
            let s = at(&x.with_angle(j, t))?;
            gb[j] += w1[a] * s.b;
            gc[j] += w1[a] * s.chi;
            hb[j][j] += w2[a] * s.b;
            hc[j][j] += w2[a] * s.chi;
        }
        for k in 0..j {
            let (nodes_k, w1_k, _) = &stencils[k];
            for (a, &t) in nodes.iter().enumerate() {
                let y = x.with_angle(j, t);
                for (c, &u) in nodes_k.iter().enumerate() {
                    let s = at(&y.with_angle(k, u))?;
                    let w = w1[a] * w1_k[c];
                    hb[j][k] += w * s.b;
                    hc[j][k] += w * s.chi;
                }
            }
            hb[k][j] = hb[j][k];
            hc[k][j] = hc[j][k];
        }
    }
    // V = χ²/D with D = 1 − b²
    let (b, chi) = (r.b, r.chi);
    let dd: Vec<f64> = gb.iter().map(|g| -2.0 * b * g).collect();
    let gradient: Vec<f64> = (0..n).map(|i| 2.0 * chi * gc[i] / d - chi * chi * dd[i] / (d * d)).collect();
    let mut hessian = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let ddij = -2.0 * (gb[i] * gb[j] + b * hb[i][j]);
            hessian[i][j] = (2.0 * gc[i] * gc[j] + 2.0 * chi * hc[i][j]) / d
                - 2.0 * chi * (gc[i] * dd[j] + gc[j] * dd[i]) / (d * d)
                - chi * chi * ddij / (d * d)
                + 2.0 * chi * chi * dd[i] * dd[j] / (d * d * d);
        }
    }
    Ok(Some(Derivatives { gradient, hessian }))
}

/// Solves A p = g for symmetric A, or `None` if A is not positive definite.
fn cholesky_solve(a: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (g[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    for i in (0..n).rev() {
        y[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * y[k]).sum::<f64>()) / l[i][i];
    }
    Some(y)
}

/// Damped Newton steps on the full objective; only increases are accepted.
fn polish(obj: &Objective, x: &mut TunableParams, v: &mut f64, trace: &mut Vec<f64>, steps: usize) -> Result<()> {
    let n = x.angles().len();
    let mut damping = 0.0_f64;
    for _ in 0..steps {
        let Some(Derivatives { gradient: g, hessian: mut a }) = exact_derivatives(obj, x)? else {
            break;
        };
        if g.iter().all(|c| c.abs() < POLISH_GRADIENT_TOL) {
            break;
        }
        for row in a.iter_mut() {
            for e in row.iter_mut() {
                *e = -*e;
            }
        }
        let scale = (0..n).map(|i| a[i][i].abs()).fold(1.0, f64::max);
        let mut accepted = false;
        while damping <= 1e12 * scale {
            let mut shifted = a.clone();
            for (i, row) in shifted.iter_mut().enumerate() {
                row[i] += damping;
            }
            if let Some(p) = cholesky_solve(&shifted, &g) {
                let trial = TunableParams::new(
                    x.scheme(),
                    x.angles().iter().zip(&p).map(|(a, d)| a + d).collect(),
                )?;
                let tv = obj.value(&trial)?;
                if tv > *v {
                    *x = trial;
                    *v = tv;
                    trace.push(tv);
                    damping /= 4.0;
                    accepted = true;
                    break;
                }
            }
            damping = (4.0 * damping).max(1e-8 * scale);
        }
        if !accepted {
            break;
        }
    }
    Ok(())
}

fn linf_to_clf(x: &TunableParams) -> f64 {
    x.angles()
        .iter()
        .map(|&a| wrap_angle(a - std::f64::consts::FRAC_PI_2).abs())
        .fold(0.0, f64::max)
}

/// Starting points: CLF, CLF ± a small uniform shift, then `restarts` seeded draws.
pub fn start_points(problem: &OptProblem) -> Result<Vec<TunableParams>> {
    let clf = TunableParams::chebyshev(problem.scheme, problem.layers)?;
    let shift = |d: f64| {
        TunableParams::new(problem.scheme, clf.angles().iter().map(|a| a + d).collect())
    };
    let mut starts = vec![clf.clone(), shift(CLF_PERTURBATION)?, shift(-CLF_PERTURBATION)?];
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    for _ in 0..problem.restarts {
        let a: Vec<f64> = (0..2 * problem.layers).map(|_| wrap_angle(rng.gen_range(-PI..PI))).collect();
        starts.push(TunableParams::new(problem.scheme, a)?);
    }
    Ok(starts)
}

/// Max-norm of the central-difference gradient of the problem's objective.
pub fn gradient_norm(problem: &OptProblem, x: &TunableParams) -> Result<f64> {
    let g = finite_gradient(&problem.objective(), x, GRADIENT_STEP)?;
    Ok(g.iter().fold(0.0, |m, c| m.max(c.abs())))
}

/// Best-of-starts coordinate ascent. Deterministic for a given seed.
pub fn optimize(problem: &OptProblem) -> Result<OptResult> {
    let obj = problem.objective();
    let clf_spec = ClfSpec::new(problem.scheme, problem.layers)?;
    let mut outcomes = Vec::new();
    for s in start_points(problem)? {
        let screen_cap = SCREEN_SWEEPS.min(problem.max_sweeps);
        outcomes.push(ascend(&obj, StartOutcome::new(&obj, s)?, screen_cap, SCREEN_POLISH_STEPS)?);
    }
    let screened_best = outcomes.iter().map(|o| o.v).fold(f64::NEG_INFINITY, f64::max);
    let mut refined = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if o.v >= screened_best - REFINE_MARGIN * screened_best.abs() {
            refined.push(ascend(&obj, o, problem.max_sweeps, POLISH_MAX_STEPS)?);
        } else {
            refined.push(o);
        }
    }
    let outcomes = refined;
    let best_v = outcomes.iter().map(|o| o.v).fold(f64::NEG_INFINITY, f64::max);
    let winner = outcomes
        .into_iter()
        .filter(|o| o.v >= best_v - TIE_TOL)
        .map(|o| {
            let x = TunableParams::new(
                problem.scheme,
                o.x.angles().iter().map(|&a| wrap_angle(a)).collect(),
            )
            .expect("wrapped angles stay valid");
            StartOutcome { x, ..o }
        })
        .min_by(|a, b| linf_to_clf(&a.x).total_cmp(&linf_to_clf(&b.x)))
        .expect("at least the CLF start exists");
    let v_clf = match problem.fidelity {
        None => clf_vrf(&clf_spec, problem.prior.mu(), problem.prior.sigma())?,
        Some(_) => obj.value(&clf_spec.params())?,
    };
    Ok(OptResult {
        gradient_norm: gradient_norm(problem, &winner.x)?,
        degenerate: winner.v <= 0.0,
        x_star: winner.x,
        v_star: winner.v,
        v_clf,
        trace: winner.trace,
        starts: 3 + problem.restarts,
    })
}
