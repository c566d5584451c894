use proptest::prelude::*;

use euler_lab::du::{self, symmetric_eigenvalues};
use euler_lab::initial::random_bandlimited;
use euler_lab::monitor::{delta_tilde, RegularitySample, RegularityTrace};
use euler_lab::norms::{self, HolderConfig};
use euler_lab::{ops, Grid3, SpectralField3};

fn grid(n: usize) -> Grid3 {
    Grid3::periodic(n).unwrap()
}

fn field(n: usize, seed: u64, hi: f64) -> SpectralField3 {
    random_bandlimited(grid(n), seed, (1.0, hi), 1.0).unwrap()
}

/// Real-valued field that is neither solenoidal nor band-limited.
fn rough(n: usize, values: &[f64]) -> SpectralField3 {
    let g = grid(n);
    let comps = (0..3).map(|c| (0..g.len()).map(|i| values[(i * 3 + c) % values.len()]).collect()).collect();
    SpectralField3::from_real(g, comps).unwrap().to_spectral()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval(seed in any::<u64>()) {
        let u = field(8, seed, 3.0);
        let phys = u.to_physical().l2_norm_squared();
        prop_assert!((phys - u.l2_norm_squared()).abs() < 1e-10 * phys);
    }

    #[test]
    fn leray_output_is_solenoidal(values in prop::collection::vec(-1.0f64..1.0, 7..64)) {
        let v = rough(8, &values);
        let p = ops::leray_project(&v).unwrap();
        prop_assert!(ops::divergence_defect(&p).unwrap() < 1e-12);
        // Idempotent.
        let pp = ops::leray_project(&p).unwrap();
        prop_assert!(pp.sub(&p).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn biot_savart_inverts_curl(seed in any::<u64>()) {
        let u = field(16, seed, 5.0);
        let back = ops::velocity_from_vorticity(&ops::curl(&u).unwrap()).unwrap();
        prop_assert!(back.max_relative_difference(&u).unwrap() < 1e-12);
    }

    #[test]
    fn derivative_commutes_with_dealiasing(values in prop::collection::vec(-1.0f64..1.0, 5..40), axis in 0usize..3) {
        let f = rough(8, &values);
        let a = ops::dealias(&ops::derivative(&f, axis).unwrap()).unwrap();
        let b = ops::derivative(&ops::dealias(&f).unwrap(), axis).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn multiplier_matches_differentiation(seed in any::<u64>()) {
        let u = field(16, seed, 5.0);
        let a = du::du_from_vorticity(&ops::curl(&u).unwrap()).unwrap();
        let b = du::du_by_differentiation(&u).unwrap();
        prop_assert!(a.max_relative_difference(&b).unwrap() < 1e-10);
    }

    #[test]
    fn sup_norm_grows_under_refinement(seed in any::<u64>()) {
        let u = field(8, seed, 3.0);
        let coarse = norms::linf_norm(&u, 1).unwrap();
        let fine = norms::linf_norm(&u, 2).unwrap();
        prop_assert!(fine >= coarse);
    }

    #[test]
    fn besov_sobolev_sandwich(seed in any::<u64>(), s in 0.0f64..3.5) {
        let u = field(16, seed, 7.0);
        let ratio = norms::besov_norm(&u, s, false).unwrap() / norms::sobolev_norm(&u, s).unwrap();
        prop_assert!(ratio >= 2f64.powf(-s - 1.0) && ratio <= 2f64.powf(s + 1.0));
    }

    #[test]
    fn length_scale_shrinks_as_seminorm_grows(sem in 1e-3f64..1e3, factor in 1.0f64..100.0, delta in 0.05f64..1.0) {
        let a = norms::length_scale_from_seminorm(sem, 2.0, delta, 6.0).unwrap();
        let b = norms::length_scale_from_seminorm(sem * factor, 2.0, delta, 6.0).unwrap();
        prop_assert!(b <= a && a <= 6.0);
    }

    #[test]
    fn delta_tilde_in_unit_interval(delta in 1e-6f64..1e6) {
        let d = delta_tilde(delta);
        prop_assert!(d > 0.0 && d < 1.0);
    }

    #[test]
    fn trapezoid_integrals_nondecreasing(
        rows in prop::collection::vec((1e-3f64..0.5, 0.0f64..10.0, 1e-2f64..5.0), 1..30)
    ) {
        let mut tr = RegularityTrace::from_samples(Vec::new());
        let mut t = 0.0;
        for (dt, w, ell) in rows {
            t += dt;
            tr.accumulate(RegularitySample { t, omega_linf: w, ell, ..Default::default() }).unwrap();
        }
        for pair in tr.samples.windows(2) {
            prop_assert!(pair[1].bkm_int >= pair[0].bkm_int);
            prop_assert!(pair[1].const_int >= pair[0].const_int);
        }
    }

    #[test]
    fn jacobi_eigenvalues_match_invariants(e in prop::array::uniform6(-10.0f64..10.0)) {
        let a = [[e[0], e[3], e[4]], [e[3], e[1], e[5]], [e[4], e[5], e[2]]];
        let l = symmetric_eigenvalues(&a);
        let trace = e[0] + e[1] + e[2];
        let det = e[0] * (e[1] * e[2] - e[5] * e[5]) - e[3] * (e[3] * e[2] - e[5] * e[4])
            + e[4] * (e[3] * e[5] - e[1] * e[4]);
        let scale = e.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(l[0] >= l[1] && l[1] >= l[2]);
        prop_assert!((l.iter().sum::<f64>() - trace).abs() < 1e-12 * scale);
        prop_assert!((l[0] * l[1] * l[2] - det).abs() < 1e-11 * scale.powi(3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn holder_nondecreasing_in_budget_and_cutoff(seed in any::<u64>(), lo in 1000usize..4000, extra in 0usize..6000, frac in 0.1f64..1.0) {
        let w = ops::curl(&field(8, seed, 3.0)).unwrap();
        let big_l = w.grid().box_length();
        let base = HolderConfig::new(0.5, frac * big_l, lo, 2).unwrap();
        let more_pairs = HolderConfig { pair_budget: lo + extra, ..base };
        let longer = HolderConfig { cutoff_l: big_l, ..base };
        let h = norms::holder_seminorm(&w, &base).unwrap();
        prop_assert!(norms::holder_seminorm(&w, &more_pairs).unwrap() >= h);
        prop_assert!(norms::holder_seminorm(&w, &longer).unwrap() >= h);
    }
}
