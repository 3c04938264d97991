//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use dosc::dynamics::short_time_check;
use dosc::groundstate::{ground_state_moments, interpretation_identities, GroundStateSummary};
use dosc::measure::FrequencyMeasure;
use dosc::oracle::{
    compare, discretize, full_ground_covariance, ground_covariance, normal_modes,
    recurrence_estimate, relaxation_run, symplectic_eigenvalues, Continuum, DiscretizationScheme,
    FiniteBathModel, HistogramBins,
};
use dosc::weakcoupling::{lamb_shift, lorentzian_fit};
use dosc::{compute_pi, CouplingSpectrum, FanoOptions, Result, SpectralSolution, UnitSystem};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Result<Verdict> + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn units() -> UnitSystem {
    UnitSystem::default()
}

fn opts() -> FanoOptions {
    FanoOptions::default()
}

/// The three ohmic strengths (cutoff 5ω₀) and two flat-band levels on [0.2, 3].
fn suite() -> Vec<(String, CouplingSpectrum)> {
    let mut v: Vec<(String, CouplingSpectrum)> = [0.05, 0.3, 0.8]
        .iter()
        .map(|s| {
            (
                format!("ohmic_exp k2L={s}"),
                CouplingSpectrum::ohmic_with_strength(*s, 5.0, 1.0).unwrap(),
            )
        })
        .collect();
    for v2 in [0.05f64, 0.2] {
        v.push((
            format!("flat_band v2={v2}"),
            CouplingSpectrum::flat_band(v2.sqrt(), 0.2, 3.0).unwrap(),
        ));
    }
    v
}

fn solve_suite() -> Result<Vec<(String, SpectralSolution)>> {
    suite()
        .into_iter()
        .map(|(n, s)| Ok((n, compute_pi(&s, &units(), &opts())?)))
        .collect()
}

/// Ohmic spectrum with `π|V(ω₀)|²/4 = 1e-3ω₀`; the cutoff 0.54ω₀ keeps `F(ω₀)` small.
fn weak_spectrum() -> CouplingSpectrum {
    let cutoff: f64 = 0.54;
    let v2 = 4.0e-3 / PI;
    CouplingSpectrum::ohmic_exp((v2 * (1.0 / cutoff).exp()).sqrt(), cutoff).unwrap()
}

fn ac1_2(sols: &[(String, SpectralSolution)], sum_rule: bool) -> Result<Verdict> {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (name, sol) in sols {
        let d = if sum_rule {
            sol.sum_rule_defect()
        } else {
            sol.norm_defect
        };
        worst = worst.max(d);
        detail.push(format!("{name}: {d:.1e}"));
    }
    check(
        worst <= 1e-6,
        format!("max defect {worst:.2e} <= 1e-6 [{}]", detail.join(", ")),
    )
}

fn inequalities(m: &FrequencyMeasure) -> (bool, f64, f64) {
    let (a, b) = (m.mean(), m.mean() * m.mean_inverse());
    (a < 1.0 && b > 1.0, a, b)
}

fn ac3(sols: &[(String, SpectralSolution)]) -> Result<Verdict> {
    let mut measures: Vec<(String, FrequencyMeasure)> = sols
        .iter()
        .map(|(n, s)| Ok((n.clone(), s.measure()?)))
        .collect::<Result<_>>()?;
    measures.push((
        "weak".into(),
        compute_pi(&weak_spectrum(), &units(), &opts())?.measure()?,
    ));
    measures.push((
        "two-mode".into(),
        normal_modes(&FiniteBathModel::two_mode())?.measure()?,
    ));
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, m) in &measures {
        let (pass, a, b) = inequalities(m);
        ok &= pass;
        detail.push(format!("{name}: <<w>>={a:.6} <<w>><<1/w>>={b:.6}"));
    }
    check(
        ok,
        format!("{} configurations [{}]", measures.len(), detail.join("; ")),
    )
}

fn ac4() -> Result<Verdict> {
    let t = Instant::now();
    let spec = CouplingSpectrum::ohmic_exp(0.3, 5.0)?;
    let sol = compute_pi(&spec, &units(), &opts())?;
    let model = discretize(&spec, &units(), 4000, DiscretizationScheme::Uniform)?;
    let decomp = normal_modes(&model)?;
    let o = opts();
    let r = compare(
        Continuum::Solution(&sol, &o),
        &model,
        &decomp,
        DiscretizationScheme::Uniform,
        HistogramBins::default(),
        (0.005, 0.02),
    )?;
    let secs = t.elapsed().as_secs_f64();
    check(
        r.passed && secs < 60.0,
        format!(
            "var_x rel {:.2e}, var_p rel {:.2e} (<= 5e-3); pi L1 {:.2e} over {} mode-cell bins (<= 0.02); {secs:.1}s",
            r.var_x_rel_error, r.var_p_rel_error, r.pi_l1_distance, r.bin_count
        ),
    )
}

fn ac5() -> Result<Verdict> {
    let (lo, hi) = (0.5f64.sqrt(), 1.5f64.sqrt());
    let mean = 0.5 * (lo + hi);
    let mean_inv = 0.5 * (1.0 / lo + 1.0 / hi);
    let n_bar = 0.5 * ((mean * mean_inv).sqrt() - 1.0);
    let closed = [
        ("Omega-", lo),
        ("Omega+", hi),
        ("pi-", 0.5),
        ("pi+", 0.5),
        ("var_x", 0.5 * mean_inv),
        ("var_p", 0.5 * mean),
        ("omega_c", (mean / mean_inv).sqrt()),
        ("n_bar_c", n_bar),
        ("S", (n_bar + 1.0) * (n_bar + 1.0).ln() - n_bar * n_bar.ln()),
        ("E", 0.25 * (mean + mean_inv)),
    ];
    let d = normal_modes(&FiniteBathModel::two_mode())?;
    let g = ground_state_moments(&d.measure()?, &units())?;
    let cov = ground_covariance(&d, &units());
    let got = [
        d.omegas[0],
        d.omegas[1],
        d.pi[0],
        d.pi[1],
        cov.var_x,
        cov.var_p,
        g.omega_c,
        g.n_bar_c,
        g.entropy,
        g.mean_energy,
    ];
    let summary_vars = (g.var_x - cov.var_x).abs().max((g.var_p - cov.var_p).abs());
    let worst = closed
        .iter()
        .zip(&got)
        .map(|((_, c), v)| (c - v).abs())
        .fold(summary_vars, f64::max);
    let listed = closed
        .iter()
        .map(|(n, c)| format!("{n}={c:.7}"))
        .collect::<Vec<_>>()
        .join(" ");
    check(
        worst <= 1e-6,
        format!("max deviation from 2x2 closed forms {worst:.1e} <= 1e-6 [{listed}]"),
    )
}

fn ac6() -> Result<Verdict> {
    let spec = weak_spectrum();
    let sol = compute_pi(&spec, &units(), &opts())?;
    let r = lorentzian_fit(&sol, &opts())?;
    let f0 = lamb_shift(&spec, 1.0, &opts())?;
    let centre = (r.center_fit - 1.0 - f0).abs() / r.hwhm_fit;
    let m = sol.measure()?;
    let vacuum = (-0.5f64).exp();
    let chi_r = dosc::groundstate::characteristic_function(&m, &units(), 1.0, 0.0);
    let chi_i = dosc::groundstate::characteristic_function(&m, &units(), 0.0, 1.0);
    let chi_err = (chi_r / vacuum - 1.0)
        .abs()
        .max((chi_i / vacuum - 1.0).abs());
    check(
        r.hwhm_rel_error() <= 0.05 && centre <= 1.0 && r.max_beta_ratio_peak <= 2e-3 && chi_err <= 0.01,
        format!(
            "hwhm {:.6e} vs pi|V|^2/4 {:.6e} (rel {:.1e} <= 0.05); centre offset {centre:.1e} HWHM (<= 1); max|beta/alpha| {:.1e} (<= 2e-3); chi(|xi|=1) rel {chi_err:.1e} (<= 0.01)",
            r.hwhm_fit,
            r.hwhm_pred,
            r.hwhm_rel_error(),
            r.max_beta_ratio_peak
        ),
    )
}

fn ac7(sols: &[(String, SpectralSolution)]) -> Result<Verdict> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, sol) in sols {
        let r = short_time_check(&sol.measure()?, &units())?;
        ok &= r.passed(0.1, 0.05);
        detail.push(format!(
            "{name}: q={:.4} c_err={:.1e}",
            r.exponent, r.coefficient_rel_error
        ));
    }
    check(
        ok,
        format!(
            "exponent 3 +/- 0.1, coefficient within 5% [{}]",
            detail.join("; ")
        ),
    )
}

fn ac8() -> Result<Verdict> {
    let t = Instant::now();
    let spec = CouplingSpectrum::ohmic_with_strength(0.8, 1.0, 1.0)?;
    let sol = compute_pi(&spec, &units(), &opts())?;
    let gamma = lorentzian_fit(&sol, &opts())?.hwhm_fit;
    let model = discretize(&spec, &units(), 4000, DiscretizationScheme::Uniform)?;
    let decomp = normal_modes(&model)?;
    let window = (20.0 / gamma, 0.5 * recurrence_estimate(&decomp));
    let run = relaxation_run(&model, &decomp, &units(), 1.0, window, 400, 0.01)?;

    // The reference spectrum, for the record: its window is empty at N = 4000.
    let reference = CouplingSpectrum::ohmic_exp(0.3, 5.0)?;
    let ref_gamma = lorentzian_fit(&compute_pi(&reference, &units(), &opts())?, &opts())?.hwhm_fit;
    let ref_decomp = normal_modes(&discretize(
        &reference,
        &units(),
        4000,
        DiscretizationScheme::Uniform,
    )?)?;
    let ref_window = (20.0 / ref_gamma, 0.5 * recurrence_estimate(&ref_decomp));
    check(
        run.passed,
        format!(
            "ohmic k2L=0.8 cutoff=1, N=4000: window [{:.1}, {:.1}], max rel dev var_x {:.1e} var_p {:.1e} sym_xp {:.1e} (<= 1e-2); {:.1}s; reference k2L=0.45 cutoff=5 window [{:.1}, {:.1}] is empty",
            window.0,
            window.1,
            run.max_rel_dev_var_x,
            run.max_rel_dev_var_p,
            run.max_rel_sym_xp,
            t.elapsed().as_secs_f64(),
            ref_window.0,
            ref_window.1
        ),
    )
}

fn identity_defects(g: &GroundStateSummary) -> (f64, f64) {
    let e = ((g.n_bar_c + 0.5) * g.omega_c - 0.5 * g.moments.mean).abs();
    let mi = (g.mutual_info - 2.0 * g.entropy).abs();
    (e, mi)
}

fn ac9(sols: &[(String, SpectralSolution)]) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (_, sol) in sols {
        let m = sol.measure()?;
        interpretation_identities(&m, &units())?;
        let (e, mi) = identity_defects(&ground_state_moments(&m, &units())?);
        worst = worst.max(e).max(mi);
        runs += 1;
    }
    let mut sym: f64 = 0.0;
    for model in [
        FiniteBathModel::two_mode(),
        discretize(
            &CouplingSpectrum::ohmic_exp(0.3, 5.0)?,
            &units(),
            4000,
            DiscretizationScheme::Uniform,
        )?,
    ] {
        let d = normal_modes(&model)?;
        let g = ground_state_moments(&d.measure()?, &units())?;
        let (e, mi) = identity_defects(&g);
        worst = worst.max(e).max(mi);
        runs += 1;
        let c = ground_covariance(&d, &units());
        sym = sym.max((2.0 * (c.var_x * c.var_p).sqrt() - (2.0 * g.n_bar_c + 1.0)).abs());
    }
    let small = normal_modes(&discretize(
        &CouplingSpectrum::ohmic_exp(0.3, 5.0)?,
        &units(),
        60,
        DiscretizationScheme::Uniform,
    )?)?;
    let pure = symplectic_eigenvalues(&full_ground_covariance(&small, &units()))?
        .iter()
        .map(|v| (v - 0.5).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 1e-9 && sym <= 1e-9 && pure <= 1e-9,
        format!(
            "{runs} runs: max identity defect {worst:.1e}; oracle symplectic vs 2n_c+1 {sym:.1e}; global state purity {pure:.1e} (all <= 1e-9)"
        ),
    )
}

fn ac10() -> Result<Verdict> {
    let bad = CouplingSpectrum::ohmic_with_strength(1.01, 5.0, 1.0)?;
    let lib_code = compute_pi(&bad, &units(), &opts())
        .err()
        .map(|e| e.exit_code());
    let config = std::env::temp_dir().join(format!("dosc-acceptance-{}.json", std::process::id()));
    std::fs::write(
        &config,
        r#"{"spectrum": {"family": "ohmic_exp", "strength": 1.01, "cutoff": 5.0}}"#,
    )?;
    let cli_code = Command::new(env!("CARGO_BIN_EXE_dosc"))
        .args(["spectrum", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(std::env::temp_dir().join("dosc-acceptance-out"))
        .output()?
        .status
        .code();
    let _ = std::fs::remove_file(&config);

    let near = CouplingSpectrum::ohmic_with_strength(0.99, 5.0, 1.0)?;
    let sol = compute_pi(&near, &units(), &opts())?;
    let m = sol.measure()?;
    let (ineq, mean, prod) = inequalities(&m);
    interpretation_identities(&m, &units())?;
    let (e, mi) = identity_defects(&ground_state_moments(&m, &units())?);
    let st = short_time_check(&m, &units())?;
    let pass = lib_code == Some(2)
        && cli_code == Some(2)
        && sol.norm_defect <= 1e-5
        && sol.sum_rule_defect() <= 1e-5
        && ineq
        && e.max(mi) <= 1e-9
        && st.passed(0.1, 0.05);
    check(
        pass,
        format!(
            "1.01: library exit {lib_code:?}, CLI exit {cli_code:?} (want 2); 0.99: norm {:.1e} sum rule {:.1e} (<= 1e-5), <<w>>={mean:.4} product={prod:.4}, identities {:.1e}, short-time q={:.3}",
            sol.norm_defect,
            sol.sum_rule_defect(),
            e.max(mi),
            st.exponent
        ),
    )
}

fn main() {
    let start = Instant::now();
    let sols = solve_suite();
    let sols_ref = sols.as_ref().map_err(|e| e.to_string());
    let criteria: Vec<Criterion> = vec![
        (
            "AC1 normalisation",
            Box::new(|| ac1_2(sols_ref.clone().map_err(dosc::DoscError::Config)?, false)),
        ),
        (
            "AC2 sum rule",
            Box::new(|| ac1_2(sols_ref.clone().map_err(dosc::DoscError::Config)?, true)),
        ),
        (
            "AC3 inequalities",
            Box::new(|| ac3(sols_ref.clone().map_err(dosc::DoscError::Config)?)),
        ),
        ("AC4 oracle equivalence", Box::new(ac4)),
        ("AC5 two-mode regression", Box::new(ac5)),
        ("AC6 weak-coupling limit", Box::new(ac6)),
        (
            "AC7 short-time behaviour",
            Box::new(|| ac7(sols_ref.clone().map_err(dosc::DoscError::Config)?)),
        ),
        ("AC8 relaxation", Box::new(ac8)),
        (
            "AC9 algebraic identities",
            Box::new(|| ac9(sols_ref.clone().map_err(dosc::DoscError::Config)?)),
        ),
        ("AC10 positivity gate", Box::new(ac10)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} ({:.2}s)",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
