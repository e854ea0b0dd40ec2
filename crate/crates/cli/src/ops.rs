//! Command dispatch onto the core operations.

use serde_json::json;
use torsion_core::circle::{
    analytic_torsion_circle_with, galerkin_spectrum, monodromy, CoEulerStructureS1,
    EulerStructureS1, OperatorDegree,
};
use torsion_core::combinatorial::{
    combinatorial_torsion_circle, lefschetz_zeta, mapping_torus_torsion, relative_torsion_at,
};
use torsion_core::torsion::{is_acyclic, torsion_direct, torsion_spectral};
use torsion_core::{Complex64, TorsionError};

use crate::records::{pair, relative_json, spectrum_json, torsion_json};
use crate::schema::Typed;
use crate::verify;

/// Flags shared by every command.
pub struct Context {
    pub tol: f64,
    pub z: Option<Complex64>,
    pub radius: Option<f64>,
    pub truncation: Option<usize>,
    pub euler_offset: i64,
    pub coeuler: CoEulerStructureS1,
    pub sweep: Option<usize>,
}

/// A computed value ready to be wrapped into a result record.
pub struct Output {
    pub params: serde_json::Value,
    pub values: Vec<serde_json::Value>,
    /// Verify runs report failures through the exit status.
    pub all_passed: bool,
}

fn wrong_kind(command: &str, expected: &str) -> TorsionError {
    TorsionError::InvalidInput(format!(
        "command {command} expects a {expected} problem file"
    ))
}

pub fn run(command: &str, typed: &Typed, ctx: &Context) -> Result<Output, TorsionError> {
    match command {
        "torsion-direct" => {
            let Typed::Complex {
                complex,
                form,
                basis,
            } = typed
            else {
                return Err(wrong_kind(command, "complex"));
            };
            if basis.is_none() && !is_acyclic(complex, ctx.tol)? {
                return Err(TorsionError::InvalidInput(
                    "non_acyclic_requires_basis: supply cohomology_basis in the problem file"
                        .into(),
                ));
            }
            let t = torsion_direct(complex, form, basis.as_ref(), ctx.tol)?;
            Ok(Output {
                params: json!({ "tol": ctx.tol }),
                values: vec![torsion_json(&t)],
                all_passed: true,
            })
        }
        "torsion-spectral" => {
            let Typed::Complex {
                complex,
                form,
                basis,
            } = typed
            else {
                return Err(wrong_kind(command, "complex"));
            };
            if basis.is_none() && !is_acyclic(complex, ctx.tol)? {
                return Err(TorsionError::InvalidInput(
                    "non_acyclic_requires_basis: supply cohomology_basis in the problem file"
                        .into(),
                ));
            }
            let radius = ctx.radius.ok_or_else(|| {
                TorsionError::InvalidInput("torsion-spectral requires --radius".into())
            })?;
            let t = torsion_spectral(complex, form, radius, basis.as_ref(), ctx.tol)?;
            Ok(Output {
                params: json!({ "tol": ctx.tol, "radius": radius }),
                values: vec![torsion_json(&t)],
                all_passed: true,
            })
        }
        "analytic" => {
            let Typed::Circle(bundle) = typed else {
                return Err(wrong_kind(command, "circle"));
            };
            let holonomy = monodromy(bundle)?;
            let t = analytic_torsion_circle_with(bundle, &holonomy, &ctx.coeuler)?;
            Ok(Output {
                params: json!({
                    "tol": ctx.tol,
                    "coeuler": coeuler_json(&ctx.coeuler),
                }),
                values: vec![torsion_json(&t)],
                all_passed: true,
            })
        }
        "combinatorial" => {
            let Typed::Circle(bundle) = typed else {
                return Err(wrong_kind(command, "circle"));
            };
            let holonomy = monodromy(bundle)?;
            let structure = EulerStructureS1::with_offset(ctx.euler_offset);
            let t = combinatorial_torsion_circle(&holonomy, &structure, None, ctx.tol)?;
            let mut value = torsion_json(&t);
            value["holonomy_det"] = pair(holonomy.det());
            Ok(Output {
                params: json!({ "tol": ctx.tol, "euler_offset": ctx.euler_offset }),
                values: vec![value],
                all_passed: true,
            })
        }
        "relative" => {
            let Typed::Circle(bundle) = typed else {
                return Err(wrong_kind(command, "circle"));
            };
            let structure = EulerStructureS1::with_offset(ctx.euler_offset);
            let report = relative_torsion_at(bundle, &structure, ctx.tol)?;
            Ok(Output {
                params: json!({ "tol": ctx.tol, "euler_offset": ctx.euler_offset }),
                values: vec![relative_json(&report)],
                all_passed: true,
            })
        }
        "zeta" => {
            let Typed::MappingTorus(input) = typed else {
                return Err(wrong_kind(command, "mapping_torus"));
            };
            let input = match ctx.z {
                Some(z) => input.with_z(z)?,
                None => input.clone(),
            };
            let zeta = lefschetz_zeta(&input)?;
            let torsion = mapping_torus_torsion(&input)?;
            Ok(Output {
                params: json!({ "tol": ctx.tol, "z": [input.z().re, input.z().im] }),
                values: vec![json!({
                    "type": "zeta",
                    "zeta": pair(zeta),
                    "torsion": torsion_json(&torsion),
                })],
                all_passed: true,
            })
        }
        "spectrum" => {
            let Typed::Circle(bundle) = typed else {
                return Err(wrong_kind(command, "circle"));
            };
            let truncation = ctx.truncation.unwrap_or(16);
            let r0 = galerkin_spectrum(bundle, OperatorDegree::Zero, truncation)?;
            let r1 = galerkin_spectrum(bundle, OperatorDegree::One, truncation)?;
            Ok(Output {
                params: json!({ "tol": ctx.tol, "truncation": truncation }),
                values: vec![spectrum_json(&r0), spectrum_json(&r1)],
                all_passed: true,
            })
        }
        "verify" => {
            let results = verify::run_suite(typed, ctx)?;
            let all_passed = results.iter().all(|p| p.pass);
            Ok(Output {
                params: json!({ "tol": ctx.tol, "sweep": ctx.sweep }),
                values: results.into_iter().map(|p| p.into_json()).collect(),
                all_passed,
            })
        }
        other => Err(TorsionError::InvalidInput(format!(
            "unknown command {other}"
        ))),
    }
}

pub fn coeuler_json(s: &CoEulerStructureS1) -> serde_json::Value {
    if s.canonical {
        json!("canonical")
    } else if s.offset.norm() == 0.0 {
        json!("base")
    } else {
        json!({ "offset": [s.offset.re, s.offset.im] })
    }
}
