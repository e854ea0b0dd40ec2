//! The `verify` command: per-kind invariant suites with pass/fail reporting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torsion_core::circle::{
    analytic_torsion_circle_with, bfk_determinant_log, composition_defect, galerkin_matrix,
    galerkin_spectrum, kamber_tondeur_integral, laplacian_coefficients, monodromy, CircleBundle,
    CoEulerStructureS1, EulerStructureS1, OperatorDegree, TrigPoly,
};
use torsion_core::combinatorial::{
    lefschetz_zeta, lefschetz_zeta_series, mapping_torus_torsion, relative_torsion_at,
    MappingTorusInput,
};
use torsion_core::linalg::{eigenvalues, ComplexMatrix, Lu};
use torsion_core::scalar::LogComplex;
use torsion_core::torsion::{
    cohomology, conjugate, direct_sum, is_acyclic, kernel_gram, laplacian, torsion_direct,
    torsion_spectral, transpose_differential, CohomologyBasis, GradedBilinearForm, GradedComplex,
};
use torsion_core::{Complex64, TorsionError};

use crate::ops::Context;
use crate::records::property_json;
use crate::schema::Typed;

pub struct Property {
    pub name: String,
    pub pass: bool,
    pub deviation: f64,
    pub detail: String,
}

impl Property {
    fn check(name: &str, deviation: f64, threshold: f64) -> Self {
        Property {
            name: name.to_string(),
            pass: deviation <= threshold,
            deviation,
            detail: format!("threshold {threshold:.1e}"),
        }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Property {
            name: name.to_string(),
            pass: true,
            deviation: 0.0,
            detail: format!("skipped: {why}"),
        }
    }

    fn failed(name: &str, why: &str) -> Self {
        Property {
            name: name.to_string(),
            pass: false,
            deviation: f64::NAN,
            detail: why.to_string(),
        }
    }

    pub fn into_json(self) -> serde_json::Value {
        property_json(&self.name, self.pass, self.deviation, &self.detail)
    }
}

pub fn run_suite(typed: &Typed, ctx: &Context) -> Result<Vec<Property>, TorsionError> {
    match typed {
        Typed::Complex {
            complex,
            form,
            basis,
        } => Ok(complex_suite(complex, form, basis.as_ref(), ctx.tol)),
        Typed::Circle(bundle) => Ok(circle_suite(bundle, ctx)),
        Typed::MappingTorus(input) => Ok(torus_suite(input, ctx)),
    }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Contour radii clear of the spectrum: everything-inside, a zero-cluster
/// split when present, and the largest magnitude gap.
fn admissible_radii(
    complex: &GradedComplex,
    form: &GradedBilinearForm,
    tol: f64,
) -> Result<Vec<f64>, TorsionError> {
    let deltas = laplacian(complex, form, tol)?;
    let mut mags: Vec<f64> = Vec::new();
    for d in &deltas {
        for e in eigenvalues(d)? {
            mags.push(e.norm());
        }
    }
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let top = mags.last().copied().unwrap_or(0.0);
    let scale = top.max(1.0);
    let floor = 50.0 * tol * scale;
    let mut radii = vec![2.0 * top + 1.0];
    let above: Vec<f64> = mags.iter().copied().filter(|&m| m > floor).collect();
    if above.len() < mags.len() {
        if let Some(&first) = above.first() {
            if first / floor > 100.0 {
                radii.push((floor * first).sqrt());
            }
        }
    }
    let mut best_ratio = 1.0;
    let mut best_mid = None;
    for w in above.windows(2) {
        let ratio = w[1] / w[0];
        if ratio > best_ratio {
            best_ratio = ratio;
            best_mid = Some((w[0] * w[1]).sqrt());
        }
    }
    if best_ratio > 100.0 {
        radii.push(best_mid.unwrap());
    }
    Ok(radii)
}

fn complex_suite(
    complex: &GradedComplex,
    form: &GradedBilinearForm,
    basis: Option<&CohomologyBasis>,
    tol: f64,
) -> Vec<Property> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);

    // d² = 0
    let mut dsq: f64 = 0.0;
    for q in complex.degrees() {
        if let (Some(d0), Some(d1)) = (complex.diff(q), complex.diff(q + 1)) {
            let scale = d0.max_abs().max(1.0) * d1.max_abs().max(1.0);
            dsq = dsq.max(d1.mul(d0).max_abs() / scale);
        }
    }
    out.push(Property::check("d_squared_zero", dsq, tol));

    // Laplacian commutes with d.
    match laplacian(complex, form, tol) {
        Ok(deltas) => {
            let mut worst: f64 = 0.0;
            for (i, q) in complex.degrees().enumerate() {
                if let Some(d) = complex.diff(q) {
                    let lhs = deltas[i + 1].mul(d);
                    let rhs = d.mul(&deltas[i]);
                    let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
                    worst = worst.max(lhs.sub(&rhs).max_abs() / scale);
                }
            }
            out.push(Property::check("laplacian_commutes_with_d", worst, 1e-9));
        }
        Err(e) => out.push(Property::failed(
            "laplacian_commutes_with_d",
            &e.to_string(),
        )),
    }

    // b(dv, w) = b(v, d♯w) on random vectors.
    match transpose_differential(complex, form, tol) {
        Ok(sharps) => {
            let mut worst: f64 = 0.0;
            for (i, q) in complex.degrees().enumerate() {
                let Some(d) = complex.diff(q) else { continue };
                let bq = form.gram_at(q).unwrap();
                let bq1 = form.gram_at(q + 1).unwrap();
                for _ in 0..4 {
                    let v: Vec<Complex64> = (0..d.cols())
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect();
                    let w: Vec<Complex64> = (0..d.rows())
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect();
                    let lhs: Complex64 = d
                        .mul_vec(&v)
                        .iter()
                        .zip(bq1.mul_vec(&w))
                        .map(|(x, y)| x * y)
                        .sum();
                    let sw = sharps[i].mul_vec(&w);
                    let rhs: Complex64 = v.iter().zip(bq.mul_vec(&sw)).map(|(x, y)| x * y).sum();
                    worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
                }
            }
            out.push(Property::check("transpose_defining_identity", worst, 1e-9));
        }
        Err(e) => out.push(Property::failed(
            "transpose_defining_identity",
            &e.to_string(),
        )),
    }

    // Route equivalence and contour independence.
    let owned_basis;
    let h = match basis {
        Some(h) => Some(h),
        None => match cohomology(complex, tol) {
            Ok(h) => {
                owned_basis = h;
                Some(&owned_basis)
            }
            Err(_) => None,
        },
    };
    match (h, admissible_radii(complex, form, tol)) {
        (Some(h), Ok(radii)) => match torsion_direct(complex, form, Some(h), tol) {
            Ok(direct) => {
                let mut spectral_values = Vec::new();
                let mut worst: f64 = 0.0;
                let mut errs = Vec::new();
                for &r in &radii {
                    match torsion_spectral(complex, form, r, Some(h), tol) {
                        Ok(t) => {
                            worst = worst.max(rel(t.value, direct.value));
                            spectral_values.push(t.value);
                        }
                        Err(e) => errs.push(format!("radius {r:.3e}: {e}")),
                    }
                }
                if spectral_values.is_empty() {
                    out.push(Property::failed("route_equivalence", &errs.join("; ")));
                } else {
                    out.push(Property::check("route_equivalence", worst, 1e-6));
                }
                if spectral_values.len() >= 2 {
                    let mut dev: f64 = 0.0;
                    for v in &spectral_values[1..] {
                        dev = dev.max(rel(*v, spectral_values[0]));
                    }
                    out.push(Property::check("contour_independence", dev, 1e-8));
                } else {
                    out.push(Property::skipped(
                        "contour_independence",
                        "only one admissible radius",
                    ));
                }
            }
            Err(e) => out.push(Property::failed("route_equivalence", &e.to_string())),
        },
        (_, Err(e)) => out.push(Property::failed("route_equivalence", &e.to_string())),
        (None, _) => out.push(Property::failed("route_equivalence", "no cohomology basis")),
    }

    let acyclic = is_acyclic(complex, tol).unwrap_or(false);
    if acyclic {
        // Conjugation: τ(conj) = conj(τ).
        let (cc, cb) = conjugate(complex, form);
        match (
            torsion_direct(complex, form, None, tol),
            torsion_direct(&cc, &cb, None, tol),
        ) {
            (Ok(t), Ok(tc)) => {
                out.push(Property::check(
                    "conjugation",
                    (tc.value - t.value.conj()).norm() / t.value.norm().max(1e-300),
                    1e-10,
                ));
            }
            _ => out.push(Property::failed("conjugation", "torsion evaluation failed")),
        }
        // Multiplicativity against a self-sum.
        let (sum_c, sum_b) = direct_sum(complex, form, complex, form);
        match (
            torsion_direct(complex, form, None, tol),
            torsion_direct(&sum_c, &sum_b, None, tol),
        ) {
            (Ok(t), Ok(ts)) => {
                out.push(Property::check(
                    "direct_sum_multiplicativity",
                    rel(ts.value, t.value * t.value),
                    1e-8,
                ));
            }
            _ => out.push(Property::failed(
                "direct_sum_multiplicativity",
                "evaluation failed",
            )),
        }
    } else if let Some(h) = h {
        // Basis covariance: h ↦ h·S rescales τ by ∏ det(S_q)^(2(-1)^q).
        match torsion_direct(complex, form, Some(h), tol) {
            Ok(base) => {
                let mut factor = LogComplex::ONE;
                let mut reps = Vec::new();
                for (i, r) in h.reps().iter().enumerate() {
                    let q = h.q_min() + i as i32;
                    let k = r.cols();
                    let s = loop {
                        let s = ComplexMatrix::from_fn(k, k, |_, _| {
                            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        });
                        if k == 0 {
                            break s;
                        }
                        if let Some(lu) = Lu::factor(&s) {
                            if lu.pivot_ratio() > 1e-2 {
                                break s;
                            }
                        }
                    };
                    if k > 0 {
                        let sign = if q.rem_euclid(2) == 0 { 2 } else { -2 };
                        factor = factor.mul(s.determinant_log().powi(sign));
                    }
                    reps.push(r.mul(&s));
                }
                let h2 = CohomologyBasis::new(h.q_min(), reps);
                match torsion_direct(complex, form, Some(&h2), tol) {
                    Ok(scaled) => {
                        let want = base.value * factor.to_complex();
                        out.push(Property::check(
                            "basis_covariance",
                            rel(scaled.value, want),
                            1e-8,
                        ));
                    }
                    Err(e) => out.push(Property::failed("basis_covariance", &e.to_string())),
                }
            }
            Err(e) => out.push(Property::failed("basis_covariance", &e.to_string())),
        }
    }

    // Degeneracy of b on ker Δ (detection, informational).
    match kernel_gram(complex, form, tol) {
        Ok(reports) => {
            let degenerate: Vec<i32> = reports
                .iter()
                .filter(|r| r.is_degenerate())
                .map(|r| r.degree)
                .collect();
            out.push(Property {
                name: "kernel_form_degeneracy".into(),
                pass: true,
                deviation: 0.0,
                detail: if degenerate.is_empty() {
                    "b restricted to ker Δ is non-degenerate in every degree".into()
                } else {
                    format!("b degenerates on ker Δ at degrees {degenerate:?}")
                },
            });
        }
        Err(e) => out.push(Property::failed("kernel_form_degeneracy", &e.to_string())),
    }

    out
}

fn circle_suite(bundle: &CircleBundle, ctx: &Context) -> Vec<Property> {
    let tol = ctx.tol;
    let mut out = Vec::new();

    let holonomy = match monodromy(bundle) {
        Ok(h) => h,
        Err(e) => {
            out.push(Property::failed("monodromy", &e.to_string()));
            return out;
        }
    };

    // det A = exp(∫ tr a).
    let want = bundle.integral_tr_a().exp();
    out.push(Property::check(
        "monodromy_det_identity",
        rel(holonomy.det(), want),
        1e-8,
    ));

    // exp(∫ω) / det A ∈ {±1}.
    match kamber_tondeur_integral(bundle) {
        Ok(omega) => {
            let ratio = omega.exp() / holonomy.det();
            let dev = (ratio - Complex64::new(1.0, 0.0))
                .norm()
                .min((ratio + Complex64::new(1.0, 0.0)).norm());
            out.push(Property::check("kamber_tondeur_sign", dev, 1e-8));
        }
        Err(e) => out.push(Property::failed("kamber_tondeur_sign", &e.to_string())),
    }

    // Expanded coefficients match the composition of d and d♯.
    match laplacian_coefficients(bundle) {
        Ok(ops) => {
            out.push(Property::check(
                "laplacian_composition",
                composition_defect(bundle, &ops, 4),
                1e-10,
            ));
        }
        Err(e) => out.push(Property::failed("laplacian_composition", &e.to_string())),
    }

    // Galerkin self-convergence at a modest truncation.
    let truncation = ctx.truncation.unwrap_or(16).max(8);
    match galerkin_spectrum(bundle, OperatorDegree::One, truncation) {
        Ok(report) => {
            out.push(Property::check(
                "galerkin_self_convergence",
                report.convergence_estimate,
                1e-6,
            ));
        }
        Err(e) => out.push(Property::failed(
            "galerkin_self_convergence",
            &e.to_string(),
        )),
    }

    let acyclic = holonomy.det_a_minus_one().is_some();
    if !acyclic {
        out.push(Property::skipped(
            "relative_torsion",
            "bundle is not acyclic",
        ));
        out.push(Property::skipped(
            "coeuler_equivariance",
            "bundle is not acyclic",
        ));
        out.push(Property::skipped(
            "euler_independence",
            "bundle is not acyclic",
        ));
    } else {
        // Relative torsion S ≈ 1.
        match relative_torsion_at(bundle, &EulerStructureS1::base(), tol) {
            Ok(report) => {
                out.push(Property::check(
                    "relative_torsion_modulus",
                    report.modulus_deviation,
                    1e-6,
                ));
                out.push(Property::check(
                    "relative_torsion_conjecture",
                    report.conjecture_deviation,
                    1e-6,
                ));
                // Independence of the Euler structure used internally.
                let mut worst: f64 = 0.0;
                for offset in -2i64..=2 {
                    match relative_torsion_at(bundle, &EulerStructureS1::with_offset(offset), tol) {
                        Ok(r) => worst = worst.max(rel(r.s, report.s)),
                        Err(e) => {
                            out.push(Property::failed("euler_independence", &e.to_string()));
                            worst = f64::NAN;
                            break;
                        }
                    }
                }
                if worst.is_finite() {
                    out.push(Property::check("euler_independence", worst, 1e-8));
                }
            }
            Err(e) => out.push(Property::failed(
                "relative_torsion_conjecture",
                &e.to_string(),
            )),
        }
        // CoEuler offsets: τ(e*+β)/τ(e*) = (e^{β∫ω})².
        match (
            analytic_torsion_circle_with(bundle, &holonomy, &CoEulerStructureS1::base()),
            kamber_tondeur_integral(bundle),
        ) {
            (Ok(base), Ok(omega)) => {
                let mut worst: f64 = 0.0;
                for beta in [
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.0, 1.0),
                    Complex64::new(0.5, -0.3),
                ] {
                    match analytic_torsion_circle_with(
                        bundle,
                        &holonomy,
                        &CoEulerStructureS1::with_offset(beta),
                    ) {
                        Ok(shifted) => {
                            let factor = (beta * omega).exp();
                            worst = worst.max(rel(shifted.value, base.value * factor * factor));
                        }
                        Err(e) => {
                            out.push(Property::failed("coeuler_equivariance", &e.to_string()));
                            worst = f64::NAN;
                            break;
                        }
                    }
                }
                if worst.is_finite() {
                    out.push(Property::check("coeuler_equivariance", worst, 1e-8));
                }
            }
            _ => out.push(Property::failed(
                "coeuler_equivariance",
                "base torsion failed",
            )),
        }
    }

    // Galerkin determinant ratio against a closed-form partner (rank 1).
    if bundle.rank() == 1 && acyclic {
        out.push(galerkin_ratio_property(bundle, tol));
    } else {
        out.push(Property::skipped(
            "galerkin_ratio_closed_form",
            "needs an acyclic rank-1 bundle",
        ));
    }

    // Parameter sweep: scaled connections, independent points.
    if let Some(n) = ctx.sweep {
        for j in 1..=n {
            let t = j as f64 / n as f64;
            let scaled = bundle.connection().scale(Complex64::new(t, 0.0));
            let name = format!("sweep_relative_torsion_{j}");
            match CircleBundle::new(
                bundle.rank(),
                scaled,
                bundle.bilinear().clone(),
                bundle.sample_count(),
                tol,
            ) {
                Ok(b) => match relative_torsion_at(&b, &EulerStructureS1::base(), tol) {
                    Ok(r) => out.push(Property::check(&name, r.conjecture_deviation, 1e-6)),
                    Err(TorsionError::NotAcyclic) => {
                        out.push(Property::skipped(&name, "point is not acyclic"))
                    }
                    Err(e) => out.push(Property::failed(&name, &e.to_string())),
                },
                Err(e) => out.push(Property::failed(&name, &e.to_string())),
            }
        }
    }

    out
}

/// Rank-1 bundles admit a constant-coefficient partner with identical
/// holonomy and winding; the Richardson-extrapolated Galerkin determinant
/// ratio must match the closed-form determinant ratio.
fn galerkin_ratio_property(bundle: &CircleBundle, tol: f64) -> Property {
    let name = "galerkin_ratio_closed_form";
    let mean = bundle.connection().coeff(0);
    let winding = match bundle.integral_tr_binv_bprime() {
        Ok(integral) => (integral.im / (2.0 * std::f64::consts::PI)).round() as i64,
        Err(e) => return Property::failed(name, &e.to_string()),
    };
    let partner_b = match TrigPoly::from_modes(1, &[(winding, ComplexMatrix::identity(1))]) {
        Ok(b) => b,
        Err(e) => return Property::failed(name, &e.to_string()),
    };
    let partner = match CircleBundle::new(
        1,
        TrigPoly::constant(mean),
        partner_b,
        bundle.sample_count(),
        tol,
    ) {
        Ok(p) => p,
        Err(e) => return Property::failed(name, &e.to_string()),
    };
    let (Ok(ops_a), Ok(ops_b)) = (
        laplacian_coefficients(bundle),
        laplacian_coefficients(&partner),
    ) else {
        return Property::failed(name, "operator expansion failed");
    };
    let ratio_at = |m: i64| -> Complex64 {
        let ga = galerkin_matrix(&ops_a.first_order, &ops_a.zeroth_deg1, 1, m);
        let gb = galerkin_matrix(&ops_b.first_order, &ops_b.zeroth_deg1, 1, m);
        ga.determinant_log().div(gb.determinant_log()).to_complex()
    };
    let r32 = ratio_at(32);
    let r64 = ratio_at(64);
    let extrapolated = (r64 * 64.0 - r32 * 32.0) / 32.0;
    let closed = match (bfk_determinant_log(bundle), bfk_determinant_log(&partner)) {
        (Ok(a), Ok(b)) => a.div(b).to_complex(),
        _ => return Property::failed(name, "closed-form determinant failed"),
    };
    Property::check(
        name,
        (extrapolated - closed).norm() / closed.norm().max(1e-300),
        1e-3,
    )
}

fn torus_suite(input: &MappingTorusInput, ctx: &Context) -> Vec<Property> {
    let mut out = Vec::new();
    let input_owned;
    let input = match ctx.z {
        Some(z) => match input.with_z(z) {
            Ok(i) => {
                input_owned = i;
                &input_owned
            }
            Err(e) => {
                out.push(Property::failed("zeta_parameter", &e.to_string()));
                return out;
            }
        },
        None => input,
    };

    // ζ² equals the mapping-torus torsion.
    match (lefschetz_zeta(input), mapping_torus_torsion(input)) {
        (Ok(zeta), Ok(torsion)) => {
            out.push(Property::check(
                "torsion_is_zeta_squared",
                rel(torsion.value, zeta * zeta),
                1e-12,
            ));
        }
        (Err(TorsionError::ZetaPole), _) | (_, Err(TorsionError::NotAcyclic)) => {
            out.push(Property::failed(
                "torsion_is_zeta_squared",
                "zeta determinant vanishes at this parameter",
            ));
        }
        (Err(e), _) | (_, Err(e)) => {
            out.push(Property::failed("torsion_is_zeta_squared", &e.to_string()))
        }
    }

    // Series identity at a parameter safely inside the spectral radius.
    let radius_bound = input
        .phi_star()
        .iter()
        .map(|m| (m.rows() as f64) * m.max_abs())
        .fold(1.0f64, f64::max);
    let z_small = Complex64::new(0.1 / radius_bound, 0.0);
    match input.with_z(z_small) {
        Ok(small) => match lefschetz_zeta(&small) {
            Ok(closed) => {
                let series = lefschetz_zeta_series(&small, 24);
                out.push(Property::check(
                    "zeta_series_identity",
                    (series - closed).norm() / closed.norm().max(1e-300),
                    1e-9,
                ));
            }
            Err(e) => out.push(Property::failed("zeta_series_identity", &e.to_string())),
        },
        Err(e) => out.push(Property::failed("zeta_series_identity", &e.to_string())),
    }

    // Point fibers coincide with the circle route A = z.
    let point_like = input.phi_star().len() == 1
        && input.phi_star()[0].rows() == 1
        && (input.phi_star()[0][(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12;
    if point_like {
        let hol = torsion_core::circle::Holonomy::new(ComplexMatrix::scalar(input.z()))
            .expect("nonzero z");
        match (
            mapping_torus_torsion(input),
            torsion_core::combinatorial::combinatorial_torsion_circle(
                &hol,
                &EulerStructureS1::base(),
                None,
                ctx.tol,
            ),
        ) {
            (Ok(t1), Ok(t2)) => {
                out.push(Property::check(
                    "point_fiber_circle_route",
                    rel(t1.value, t2.value),
                    1e-10,
                ));
            }
            _ => out.push(Property::failed(
                "point_fiber_circle_route",
                "route evaluation failed",
            )),
        }
    } else {
        out.push(Property::skipped(
            "point_fiber_circle_route",
            "fiber is not a point",
        ));
    }

    // Parameter sweep around the circle |z| = |z₀|.
    if let Some(n) = ctx.sweep {
        for j in 0..n {
            let phase = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let zj = input.z() * Complex64::new(phase.cos(), phase.sin());
            let name = format!("sweep_zeta_consistency_{j}");
            match input.with_z(zj) {
                Ok(rotated) => match (lefschetz_zeta(&rotated), mapping_torus_torsion(&rotated)) {
                    (Ok(zeta), Ok(t)) => {
                        out.push(Property::check(&name, rel(t.value, zeta * zeta), 1e-12))
                    }
                    (Err(TorsionError::ZetaPole), _) | (_, Err(TorsionError::NotAcyclic)) => {
                        out.push(Property::skipped(&name, "pole at this parameter"))
                    }
                    (Err(e), _) | (_, Err(e)) => out.push(Property::failed(&name, &e.to_string())),
                },
                Err(e) => out.push(Property::failed(&name, &e.to_string())),
            }
        }
    }

    out
}
