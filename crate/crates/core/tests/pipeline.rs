//! End-to-end checks through the public API: circuit, series, prior averages, optimizer.

use std::f64::consts::PI;

use elfkit_core::bayes_engine::{
    b_chi_gaussian, b_chi_quadrature, epv_from_vrf, epv_general, vrf, DiscreteLikelihood, GaussianPrior,
};
use elfkit_core::chebyshev_reference::{clf_vrf, ClfSpec};
use elfkit_core::elf_optimizer::{objective, optimize, OptProblem};
use elfkit_core::logical_circuit::{bias_direct, Scheme};
use elfkit_core::series_expansion::fourier;

#[test]
fn optimized_angles_lower_the_exact_posterior_variance() {
    for (scheme, layers, mu, sigma) in [
        (Scheme::AncillaFree, 1, PI / 3.0, 0.2),
        (Scheme::AncillaFree, 2, 1.1, 0.1),
        (Scheme::AncillaBased, 2, 0.7, 0.2),
    ] {
        let prior = GaussianPrior::new(mu, sigma).unwrap();
        let r = optimize(&OptProblem::new(scheme, layers, prior).unwrap().with_restarts(3)).unwrap();
        assert!(r.v_star >= r.v_clf - 1e-9);
        assert!(r.gradient_norm < 1e-5, "gradient {}", r.gradient_norm);
        assert!((objective(scheme, layers, &prior, &r.x_star).unwrap() - r.v_star).abs() < 1e-12);

        // Posterior variance by direct quadrature of the circuit likelihood, with no series or closed form.
        let x = r.x_star.clone();
        let lik = DiscreteLikelihood::from_bias(move |t| bias_direct(scheme, t, &x).unwrap());
        let epv = epv_general(&prior, &lik).unwrap();
        assert!((epv - epv_from_vrf(sigma, r.v_star)).abs() < 1e-9, "{epv} vs V = {}", r.v_star);
        assert!(epv < sigma * sigma);
    }
}

#[test]
fn series_prior_average_matches_circuit_quadrature() {
    let prior = GaussianPrior::new(2.0, 0.3).unwrap();
    for scheme in Scheme::ALL {
        let spec = ClfSpec::new(scheme, 2).unwrap();
        let x = spec.params();
        let closed = b_chi_gaussian(&fourier(&x).unwrap(), &prior);
        let quad = b_chi_quadrature(&|t| bias_direct(scheme, t, &x).unwrap(), &prior).unwrap();
        assert!((closed.b - quad.b).abs() < 1e-9 && (closed.chi - quad.chi).abs() < 1e-9);
        let v = vrf(closed.b, closed.chi).unwrap();
        assert!((v - clf_vrf(&spec, 2.0, 0.3).unwrap()).abs() < 1e-9);
    }
}
