use arrayscatter::cross_section::{cross_sections, CrossSectionOptions, IncomingConfig};
use arrayscatter::lattice::{ArrayConfig, Classification, Dispersion, LatticeMomentum, Polarization, K0};
use arrayscatter::propagator::{PairPropagator, PropagatorOptions, Side};
use arrayscatter::single_excitation::{atomic_amplitude, lorentzian, transmission};
use arrayscatter::two_excitation::on_shell_smatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

const D: f64 = 0.25;

fn chain() -> &'static Dispersion {
    static DISP: OnceLock<Dispersion> = OnceLock::new();
    DISP.get_or_init(|| Dispersion::new(ArrayConfig::chain(D)).unwrap())
}

fn square() -> &'static Dispersion {
    static DISP: OnceLock<Dispersion> = OnceLock::new();
    DISP.get_or_init(|| {
        Dispersion::new(ArrayConfig::square(0.3, Polarization::PerpendicularToPlane)).unwrap()
    })
}

fn zone() -> std::ops::Range<f64> {
    -PI / D..PI / D
}

fn is_dark(p: f64) -> bool {
    chain().classify(LatticeMomentum::chain(p)) == Classification::Dark && (p.abs() - K0).abs() > 1e-3
}

fn dark_momentum() -> impl Strategy<Value = f64> {
    zone().prop_filter("dark", |p| is_dark(*p))
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn chain_decay_rate_is_nonnegative(p in zone()) {
        let disp = chain();
        let q = LatticeMomentum::chain(p);
        let eps = disp.epsilon(q);
        prop_assert!(eps.im <= 0.0);
        if disp.classify(q) == Classification::Dark {
            prop_assert_eq!(eps.im, 0.0);
        }
        let mirror = disp.epsilon(LatticeMomentum::chain(-p));
        prop_assert!((eps - mirror).norm() < 1e-10 * eps.norm().max(1.0));
    }

    #[test]
    fn transmission_is_a_phase(p in -0.999 * K0..0.999 * K0, e in -50.0f64..50.0) {
        let disp = chain();
        let q = LatticeMomentum::chain(p);
        let t = transmission(disp, q, e).unwrap();
        let a = atomic_amplitude(disp, q, e).unwrap();
        prop_assert!((t.norm() - 1.0).abs() < 1e-12);
        prop_assert!((a.conj() * t - a).norm() < 1e-12 * a.norm().max(1e-300));
        prop_assert!(lorentzian(disp, q, e).unwrap() > 0.0);
    }
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn square_decay_rate_is_nonnegative(x in -PI / 0.3..PI / 0.3, y in -PI / 0.3..PI / 0.3) {
        let disp = square();
        let q = LatticeMomentum::planar(x, y);
        let eps = disp.epsilon(q);
        prop_assert!(eps.im <= 1e-12);
        if disp.classify(q) == Classification::Dark {
            prop_assert!(eps.im.abs() < 1e-12);
        }
        let mirror = disp.epsilon(LatticeMomentum::planar(-x, -y));
        prop_assert!((eps - mirror).norm() < 1e-10 * eps.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn propagator_spectral_identities(total in zone(), e in -3.0f64..4.0) {
        let disp = chain();
        let prop = PairPropagator::new(disp, LatticeMomentum::chain(total), PropagatorOptions::default());
        let dec = match prop.evaluate(Complex64::new(e, 0.0), Side::AboveCut) {
            Ok(d) => d,
            Err(arrayscatter::error::Error::CriticalEnergyProximity { .. }) => return Ok(()),
            Err(err) => return Err(TestCaseError::fail(err.to_string())),
        };
        let l = dec.value(Side::AboveCut);
        prop_assert!(l.im <= 0.0);
        prop_assert!(dec.rho.iter().all(|r| *r >= 0.0));
        let rho: f64 = dec.rho.iter().sum();
        prop_assert!((l.im.abs() - PI * rho).abs() < 1e-6 * l.norm());
        let jump = dec.l0(Side::AboveCut) - dec.l0(Side::BelowCut);
        prop_assert!((jump - Complex64::new(0.0, -2.0 * PI * dec.rho[0])).norm() < 1e-12 * l.norm().max(1.0));
    }

    #[test]
    fn smatrix_is_unitary_and_symmetric(q in dark_momentum(), total in zone()) {
        let disp = chain();
        let p1 = LatticeMomentum::chain(0.5 * total + q);
        let p2 = LatticeMomentum::chain(0.5 * total - q);
        prop_assume!(is_dark(disp.config().wrap(p1).x) && is_dark(disp.config().wrap(p2).x));
        let cfg = IncomingConfig::dark_pair(disp, p1, p2).unwrap();
        let s = match on_shell_smatrix(disp, cfg.energy(), cfg.total(), &PropagatorOptions::default()) {
            Ok(s) => s,
            Err(arrayscatter::error::Error::CriticalEnergyProximity { .. }) => return Ok(()),
            Err(err) => return Err(TestCaseError::fail(err.to_string())),
        };
        prop_assert!(s.unitarity_defect() < 1e-6);
        let block = s.open_block();
        prop_assert!((&block - block.transpose()).norm() < 1e-12);
    }

    #[test]
    fn cross_sections_are_consistent(a in dark_momentum(), b in dark_momentum()) {
        let disp = chain();
        let opts = CrossSectionOptions::default();
        let run = |x: f64, y: f64| {
            let cfg = IncomingConfig::dark_pair(disp, LatticeMomentum::chain(x), LatticeMomentum::chain(y)).unwrap();
            cross_sections(disp, &cfg, &opts)
        };
        let set = match run(a, b) {
            Ok(s) => s,
            Err(arrayscatter::error::Error::CriticalEnergyProximity { .. }) => return Ok(()),
            Err(err) => return Err(TestCaseError::fail(err.to_string())),
        };
        let sum: f64 = set.partial.iter().sum();
        prop_assert!((sum - set.total).abs() < 1e-8 * set.total.max(1e-12));
        prop_assert!(set.partial.iter().all(|s| *s >= 0.0));
        let cfg = IncomingConfig::dark_pair(disp, LatticeMomentum::chain(a), LatticeMomentum::chain(b)).unwrap();
        let s = on_shell_smatrix(disp, cfg.energy(), cfg.total(), &PropagatorOptions::default()).unwrap();
        prop_assert!((set.partial[0] - (s.element(0, 0).unwrap() - 1.0).norm_sqr()).abs() < 1e-8);
        let mirrored = run(-a, -b).unwrap();
        let swapped = run(b, a).unwrap();
        for other in [mirrored, swapped] {
            prop_assert!((other.total - set.total).abs() < 1e-8 * set.total.max(1e-12));
        }
    }
}

#[test]
fn square_propagator_identities() {
    let disp = square();
    let prop = PairPropagator::new(disp, LatticeMomentum::planar(0.4, -0.2), PropagatorOptions::default());
    let dec = prop.evaluate(Complex64::new(1.0, 0.0), Side::AboveCut).unwrap();
    let l = dec.value(Side::AboveCut);
    assert!(l.im <= 0.0);
    assert!(dec.rho.iter().all(|r| *r >= 0.0));
    let rho: f64 = dec.rho.iter().sum();
    assert!((l.im.abs() - PI * rho).abs() < 1e-6 * l.norm());
    let s = arrayscatter::two_excitation::OnShellSMatrix::from_decomposition(dec).unwrap();
    assert!(s.unitarity_defect() < 1e-6);
}
