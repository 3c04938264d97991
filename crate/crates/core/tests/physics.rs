use dosc::dynamics::{
    classify_damping, kernels, relaxation_check, uniform_times, DampingClass, RELAXATION_THRESHOLD,
};
use dosc::groundstate::ground_state_moments;
use dosc::oracle::{discretize, ground_covariance, normal_modes, DiscretizationScheme};
use dosc::weakcoupling::lamb_shift;
use dosc::{compute_pi, CouplingSpectrum, FanoOptions, UnitSystem};

fn reference() -> CouplingSpectrum {
    CouplingSpectrum::ohmic_exp(0.3, 5.0).unwrap()
}

#[test]
fn lamb_shift_of_the_reference_spectrum() {
    // Frozen from an independent high-precision evaluation (pole subtracted) of the integral to 400.
    let s = reference().with_omega_max(400.0).unwrap();
    let f = lamb_shift(&s, 1.0, &FanoOptions::default()).unwrap();
    assert!((f - -0.826_150_672_624_580_8 / 4.0).abs() < 2.5e-11, "{f}");
}

#[test]
fn damping_classes() {
    let (u, o) = (UnitSystem::default(), FanoOptions::default());
    let sol = compute_pi(&reference(), &u, &o)
        .unwrap()
        .refine_for_time(50.0, 200_000, &o)
        .unwrap();
    let c = classify_damping(&sol.measure().unwrap(), &u, 50.0).unwrap();
    assert_eq!(c.class, DampingClass::Underdamped);

    let strong = CouplingSpectrum::ohmic_with_strength(0.999, 20.0, 1.0).unwrap();
    let sol = compute_pi(&strong, &u, &o)
        .unwrap()
        .refine_for_time(50.0, 200_000, &o)
        .unwrap();
    let c = classify_damping(&sol.measure().unwrap(), &u, 50.0).unwrap();
    assert_eq!(c.class, DampingClass::NonOscillatory, "{c:?}");
}

#[test]
fn kernels_relax_for_a_broad_resonance() {
    let (u, o) = (UnitSystem::default(), FanoOptions::default());
    let s = CouplingSpectrum::ohmic_with_strength(0.8, 1.0, 1.0).unwrap();
    let sol = compute_pi(&s, &u, &o)
        .unwrap()
        .refine_for_time(400.0, 200_000, &o)
        .unwrap();
    let k = kernels(&sol.measure().unwrap(), &uniform_times(400.0, 4000)).unwrap();
    let r = relaxation_check(&k, RELAXATION_THRESHOLD);
    assert!(r.relaxed, "{r:?}");
    assert!(r.max_abs_k_cos < 5e-3);
}

#[test]
fn oracle_converges_to_the_continuum() {
    let (u, o) = (UnitSystem::default(), FanoOptions::default());
    let sol = compute_pi(&reference(), &u, &o).unwrap();
    let exact = ground_state_moments(&sol.measure().unwrap(), &u).unwrap();
    let errs: Vec<(f64, f64)> = [500, 1000, 2000]
        .iter()
        .map(|n| {
            let m = discretize(&reference(), &u, *n, DiscretizationScheme::Uniform).unwrap();
            let g = ground_covariance(&normal_modes(&m).unwrap(), &u);
            (
                (g.var_x / exact.var_x - 1.0).abs(),
                (g.var_p / exact.var_p - 1.0).abs(),
            )
        })
        .collect();
    for w in errs.windows(2) {
        assert!((w[0].0 / w[1].0).log2() >= 1.0, "{errs:?}");
        assert!((w[0].1 / w[1].1).log2() >= 1.0, "{errs:?}");
    }
}

#[test]
fn near_margin_spectrum_keeps_its_invariants() {
    let (u, o) = (UnitSystem::default(), FanoOptions::default());
    let s = CouplingSpectrum::ohmic_with_strength(0.99, 5.0, 1.0).unwrap();
    let sol = compute_pi(&s, &u, &o).unwrap();
    assert!(sol.norm_defect <= 1e-5 && sol.sum_rule_defect() <= 1e-5);
    let m = sol.measure().unwrap();
    let g = ground_state_moments(&m, &u).unwrap();
    assert!(g.moments.mean < 1.0 && g.moments.mean * g.moments.mean_inverse > 1.0);
    dosc::groundstate::interpretation_identities(&m, &u).unwrap();
}
