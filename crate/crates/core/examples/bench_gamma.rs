//! Quick cost probe for the acceptance-scale pipelines.
use std::cell::Cell;
use std::time::Instant;

use levylab::entropy::{gamma_phi, PhiSpec, TestFunction};
use levylab::kernels::NoiseIncrementPlan;
use levylab::levy::RadialLevyMeasure;
use levylab::linalg::Mat;
use levylab::quad;
use levylab::sde::{simulate, CoefficientField, InitialState};

fn main() {
    let coeffs = CoefficientField::ou(1, 1.0);
    let plan =
        NoiseIncrementPlan::exact_stable(RadialLevyMeasure::stable(1, 1.5, 1.0).unwrap()).unwrap();
    let ens = simulate(
        &coeffs,
        &plan,
        &InitialState::point(&[0.0]),
        1.0,
        2e-3,
        20_000,
        1,
        None,
    )
    .unwrap();

    // eval-count probe of the tail integrand shape used by gamma_phi
    let count = Cell::new(0usize);
    let x = 0.4f64;
    let fx = 1.5 + x.tanh();
    let integrand = |r: f64| {
        count.set(count.get() + 1);
        let u: f64 = 1.5 + (x + r).tanh();
        let psi = u * (u / fx).ln() - (u - fx);
        psi * r.powf(-2.5)
    };
    let t0 = Instant::now();
    let q = quad::integrate_tail(&integrand, 1e-3, 1e-7, 2.0).unwrap();
    println!(
        "one tail integral: {} evals, {:?}, value {}",
        count.get(),
        t0.elapsed(),
        q.value
    );

    let f = TestFunction::shifted_tanh(1, 1.5).unwrap();
    let m = RadialLevyMeasure::stable(1, 1.5, 1.0).unwrap();
    let sigma = Mat::identity(1);
    let t0 = Instant::now();
    let mut acc = 0.0;
    for x in ens.terminal.iter().take(2000) {
        acc += gamma_phi(PhiSpec::XLogX, &f, x, &m, &sigma, 1e-3)
            .unwrap()
            .value;
    }
    println!("2000 gamma_phi calls: {:?} (acc {acc:.3})", t0.elapsed());
}
