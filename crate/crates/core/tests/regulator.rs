//! Gaussian-regulated tail integrals against the closed form through the
//! scaled complementary error function.

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use resonance::regulated::gaussian_tail;
use resonance::tail::Tail;

/// `int_R^inf e^{-nu r^2 + i q r} dr`.
fn closed_form(q: C, big_r: f64, nu: f64) -> C {
    let s = nu.sqrt();
    let z0 = s * big_r - C::i() * q / (2.0 * s);
    std::f64::consts::PI.sqrt() / (2.0 * s) * (C::i() * q * big_r - nu * big_r * big_r).exp() * z0.erfcx()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_tail_matches_erfcx(x in 0.5f64..6.0, y in -0.9f64..2.0, big_r in 0.5f64..3.0, nu in 1e-3f64..1.0) {
        let q = C::new(x, y * x.min(2.0));
        let got = gaussian_tail(&Tail::single(C::new(1.0, 0.0), 0, q), big_r, nu).unwrap();
        let want = closed_form(q, big_r, nu);
        prop_assert!((got - want).norm() <= 1e-10 * want.norm().max(1e-3), "{got} vs {want}");
    }
}

#[test]
fn small_regulator_approaches_the_exact_tail() {
    // for a decaying wave the regulated integral tends to -e^{iqR}/(iq)
    let q = C::new(3.0, 0.4);
    let big_r = 1.5;
    let exact = -(C::i() * q * big_r).exp() / (C::i() * q);
    let v = closed_form(q, big_r, 1e-8);
    assert!((v - exact).norm() < 1e-6);
}
