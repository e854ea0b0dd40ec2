//! On-disk problem files: UTF-8 JSON, schema `torsionlab/1`.
//!
//! Complex scalars are `[re, im]` pairs, matrices are row-major nested
//! arrays, Fourier coefficients are keyed by integer mode index. Loading
//! validates the payload against its kind's invariants before any
//! computation runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use torsion_core::circle::{CircleBundle, TrigPoly, DEFAULT_SAMPLE_COUNT};
use torsion_core::combinatorial::MappingTorusInput;
use torsion_core::linalg::ComplexMatrix;
use torsion_core::torsion::{CohomologyBasis, GradedBilinearForm, GradedComplex};
use torsion_core::{Complex64, TorsionError};

pub const SCHEMA: &str = "torsionlab/1";

pub type JsonMatrix = Vec<Vec<(f64, f64)>>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Complex,
    Circle,
    MappingTorus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex: Option<ComplexPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle: Option<CirclePayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping_torus: Option<MappingTorusPayload>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexPayload {
    #[serde(default)]
    pub degree_min: i32,
    pub dims: Vec<usize>,
    pub differentials: Vec<JsonMatrix>,
    /// Gram matrices per degree; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grams: Option<Vec<JsonMatrix>>,
    /// Cocycle representatives per degree (columns), for non-acyclic inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohomology_basis: Option<Vec<JsonMatrix>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CirclePayload {
    pub rank: usize,
    /// Fourier coefficients of the connection coefficient a(θ), keyed by mode.
    pub a_coeffs: BTreeMap<i64, JsonMatrix>,
    /// Fourier coefficients of the bilinear form b(θ), keyed by mode.
    pub b_coeffs: BTreeMap<i64, JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MappingTorusPayload {
    #[serde(default)]
    pub degree_min: i32,
    /// Matrix of φ* on the fiber cohomology, one per degree.
    pub phi_star: Vec<JsonMatrix>,
    pub z: (f64, f64),
}

/// Typed, validated payload.
pub enum Typed {
    Complex {
        complex: GradedComplex,
        form: GradedBilinearForm,
        basis: Option<CohomologyBasis>,
    },
    Circle(CircleBundle),
    MappingTorus(MappingTorusInput),
}

pub struct LoadedProblem {
    pub file: ProblemFile,
    pub digest: String,
    pub typed: Typed,
}

fn matrix_from_json(m: &JsonMatrix, what: &str) -> Result<ComplexMatrix, TorsionError> {
    let rows: Vec<Vec<Complex64>> = m
        .iter()
        .map(|row| row.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
        .collect();
    let out = ComplexMatrix::from_rows(&rows)
        .map_err(|_| TorsionError::InvalidInput(format!("ragged rows in {what}")))?;
    if !out.is_finite() {
        return Err(TorsionError::InvalidInput(format!(
            "non-finite entry in {what}"
        )));
    }
    Ok(out)
}

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| (m[(i, j)].re, m[(i, j)].im))
                .collect()
        })
        .collect()
}

fn trig_poly_from_json(
    coeffs: &BTreeMap<i64, JsonMatrix>,
    rank: usize,
    what: &str,
) -> Result<TrigPoly, TorsionError> {
    let mut modes = Vec::new();
    for (&m, mat) in coeffs {
        modes.push((m, matrix_from_json(mat, &format!("{what} mode {m}"))?));
    }
    if modes.is_empty() {
        modes.push((0, ComplexMatrix::zeros(rank, rank)));
    }
    TrigPoly::from_modes(rank, &modes)
}

impl ProblemFile {
    /// Parse and validate a problem document against its kind's invariants.
    pub fn validate(self, tol: f64) -> Result<(ProblemFile, Typed), TorsionError> {
        if self.schema != SCHEMA {
            return Err(TorsionError::InvalidInput(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        let typed = match self.kind {
            Kind::Complex => {
                let payload = self.complex.as_ref().ok_or_else(|| {
                    TorsionError::InvalidInput("kind is complex but payload missing".into())
                })?;
                let diffs = payload
                    .differentials
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix_from_json(m, &format!("differential {i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                let complex = GradedComplex::new(payload.degree_min, payload.dims.clone(), diffs)?;
                complex.validate_complex(tol)?;
                let form = match &payload.grams {
                    Some(grams) => {
                        let grams = grams
                            .iter()
                            .enumerate()
                            .map(|(i, m)| matrix_from_json(m, &format!("gram {i}")))
                            .collect::<Result<Vec<_>, _>>()?;
                        GradedBilinearForm::new(payload.degree_min, grams)
                    }
                    None => GradedBilinearForm::standard(&complex),
                };
                form.validate(&complex, tol)?;
                let basis = match &payload.cohomology_basis {
                    Some(reps) => {
                        let reps = reps
                            .iter()
                            .enumerate()
                            .map(|(i, m)| matrix_from_json(m, &format!("cohomology basis {i}")))
                            .collect::<Result<Vec<_>, _>>()?;
                        Some(CohomologyBasis::new(payload.degree_min, reps))
                    }
                    None => None,
                };
                Typed::Complex {
                    complex,
                    form,
                    basis,
                }
            }
            Kind::Circle => {
                let payload = self.circle.as_ref().ok_or_else(|| {
                    TorsionError::InvalidInput("kind is circle but payload missing".into())
                })?;
                let a = trig_poly_from_json(&payload.a_coeffs, payload.rank, "a_coeffs")?;
                let b = trig_poly_from_json(&payload.b_coeffs, payload.rank, "b_coeffs")?;
                let bundle = CircleBundle::new(
                    payload.rank,
                    a,
                    b,
                    payload.sample_count.unwrap_or(DEFAULT_SAMPLE_COUNT),
                    tol,
                )?;
                Typed::Circle(bundle)
            }
            Kind::MappingTorus => {
                let payload = self.mapping_torus.as_ref().ok_or_else(|| {
                    TorsionError::InvalidInput("kind is mapping_torus but payload missing".into())
                })?;
                let phi = payload
                    .phi_star
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix_from_json(m, &format!("phi_star {i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                let input = MappingTorusInput::new(
                    payload.degree_min,
                    phi,
                    Complex64::new(payload.z.0, payload.z.1),
                )?;
                Typed::MappingTorus(input)
            }
        };
        Ok((self, typed))
    }

    /// Normalized JSON rendering (stable key order, canonical shapes).
    pub fn to_normalized_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }
}
