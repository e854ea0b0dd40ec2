//! Result records: one JSON object per computation, deterministic except
//! for the timestamp field.

use serde::Serialize;
use serde_json::json;
use torsion_core::circle::SpectralReport;
use torsion_core::combinatorial::RelativeTorsionReport;
use torsion_core::torsion::{BasisDescriptor, TorsionValue};
use torsion_core::Complex64;

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub schema: &'static str,
    pub input_digest: String,
    pub operation: Operation,
    pub value: serde_json::Value,
    pub tolerances: Tolerances,
    pub timestamp: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Operation {
    pub name: String,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub tol: f64,
}

pub fn pair(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

pub fn basis_json(basis: &BasisDescriptor) -> serde_json::Value {
    match basis {
        BasisDescriptor::CanonicalUnit => json!("canonical_unit"),
        BasisDescriptor::Computed(dims) => json!({ "computed": dims }),
        BasisDescriptor::Provided(dims) => json!({ "provided": dims }),
    }
}

pub fn torsion_json(t: &TorsionValue) -> serde_json::Value {
    json!({
        "type": "torsion",
        "value": pair(t.value),
        "log_abs": t.log_value.log_abs,
        "arg": t.log_value.arg,
        "basis": basis_json(&t.basis),
    })
}

pub fn relative_json(r: &RelativeTorsionReport) -> serde_json::Value {
    json!({
        "type": "relative_torsion",
        "s": pair(r.s),
        "modulus_deviation": r.modulus_deviation,
        "conjecture_deviation": r.conjecture_deviation,
    })
}

pub fn spectrum_json(r: &SpectralReport) -> serde_json::Value {
    json!({
        "type": "spectrum",
        "degree": match r.degree {
            torsion_core::circle::OperatorDegree::Zero => 0,
            torsion_core::circle::OperatorDegree::One => 1,
        },
        "truncation": r.truncation,
        "eigenvalues": r.eigenvalues.iter().map(|e| pair(*e)).collect::<Vec<_>>(),
        "determinant_products": r.determinant_products.iter()
            .map(|p| json!([p.log_abs, p.arg])).collect::<Vec<_>>(),
        "convergence_estimate": r.convergence_estimate,
    })
}

/// One verified property: name, pass/fail, and the measured deviation.
pub fn property_json(name: &str, pass: bool, deviation: f64, detail: &str) -> serde_json::Value {
    json!({
        "type": "property",
        "name": name,
        "pass": pass,
        "deviation": deviation,
        "detail": detail,
    })
}

pub fn timestamp_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
