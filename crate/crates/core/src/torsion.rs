//! Finite graded complexes over ℂ with symmetric bilinear forms, and their
//! torsion.
//!
//! The torsion of a based complex `(C*, b)` relative to a cohomology basis
//! `h` is computed in two independent ways:
//!
//! * [`torsion_direct`] — through the determinant-line isomorphism
//!   `det C* ≅ det H(C*)`: alternating Gram determinants divided by the
//!   square of the transition determinant of the boundary/cohomology/pivot
//!   bases. Only the square enters, so the sign ambiguity of the transition
//!   factor is immaterial.
//! * [`torsion_spectral`] — through the generalized eigenspaces of the
//!   Laplacian `Δ = dd♯ + d♯d`: the complex splits along a contour
//!   `|λ| = radius` into a small subcomplex carrying the cohomology and an
//!   acyclic complement whose Laplacian determinants enter with weights
//!   `(-1)^q q`.
//!
//! Both routes produce the same number; the equality is the
//! finite-dimensional model of expressing a zeta-regularized torsion through
//! finitely many explicit eigenspaces.

use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::TorsionError;
use crate::linalg::{
    condition_estimate, generalized_eigenspaces, pivot_columns, rank_kernel, ComplexMatrix,
    EigenCluster, Lu,
};
use crate::scalar::LogComplex;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Finite graded cochain complex over ℂ.
///
/// `dims[i]` is the dimension in degree `q_min + i`; `diffs[i]` is the
/// matrix of `d: C^q → C^{q+1}` (shape `dims[i+1] × dims[i]`).
#[derive(Debug, Clone)]
pub struct GradedComplex {
    q_min: i32,
    dims: Vec<usize>,
    diffs: Vec<ComplexMatrix>,
}

impl GradedComplex {
    pub fn new(
        q_min: i32,
        dims: Vec<usize>,
        diffs: Vec<ComplexMatrix>,
    ) -> Result<Self, TorsionError> {
        if dims.is_empty() {
            return Err(TorsionError::InvalidInput(
                "complex needs at least one degree".into(),
            ));
        }
        if diffs.len() + 1 != dims.len() {
            return Err(TorsionError::InvalidInput(format!(
                "expected {} differentials for {} degrees, got {}",
                dims.len() - 1,
                dims.len(),
                diffs.len()
            )));
        }
        for (i, d) in diffs.iter().enumerate() {
            if d.rows() != dims[i + 1] || d.cols() != dims[i] {
                return Err(TorsionError::InvalidInput(format!(
                    "differential at degree {} has shape {}x{}, expected {}x{}",
                    q_min + i as i32,
                    d.rows(),
                    d.cols(),
                    dims[i + 1],
                    dims[i]
                )));
            }
            if !d.is_finite() {
                return Err(TorsionError::InvalidInput(
                    "non-finite differential entry".into(),
                ));
            }
        }
        Ok(GradedComplex { q_min, dims, diffs })
    }

    /// Two-term complex `d: C^q → C^{q+1}`.
    pub fn two_term(q: i32, d: ComplexMatrix) -> Self {
        let dims = alloc::vec![d.cols(), d.rows()];
        GradedComplex {
            q_min: q,
            dims,
            diffs: alloc::vec![d],
        }
    }

    pub fn q_min(&self) -> i32 {
        self.q_min
    }

    pub fn q_max(&self) -> i32 {
        self.q_min + self.dims.len() as i32 - 1
    }

    pub fn degrees(&self) -> impl Iterator<Item = i32> + '_ {
        self.q_min..=self.q_max()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim_at(&self, q: i32) -> usize {
        let i = q - self.q_min;
        if i < 0 || i as usize >= self.dims.len() {
            0
        } else {
            self.dims[i as usize]
        }
    }

    /// Differential out of degree `q`, when `q` and `q+1` are in range.
    pub fn diff(&self, q: i32) -> Option<&ComplexMatrix> {
        let i = q - self.q_min;
        if i < 0 {
            None
        } else {
            self.diffs.get(i as usize)
        }
    }

    pub fn diffs(&self) -> &[ComplexMatrix] {
        &self.diffs
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Check `d∘d ≈ 0` degree by degree.
    pub fn validate_complex(&self, tol: f64) -> Result<(), TorsionError> {
        for i in 0..self.diffs.len().saturating_sub(1) {
            let prod = self.diffs[i + 1].mul(&self.diffs[i]);
            let bound =
                tol * self.diffs[i + 1].max_abs().max(1.0) * self.diffs[i].max_abs().max(1.0);
            if prod.max_abs() > bound {
                return Err(TorsionError::NotAComplex {
                    degree: self.q_min + i as i32,
                });
            }
        }
        Ok(())
    }
}

/// Graded non-degenerate symmetric bilinear form: one Gram matrix per degree.
#[derive(Debug, Clone)]
pub struct GradedBilinearForm {
    q_min: i32,
    grams: Vec<ComplexMatrix>,
}

impl GradedBilinearForm {
    pub fn new(q_min: i32, grams: Vec<ComplexMatrix>) -> Self {
        GradedBilinearForm { q_min, grams }
    }

    /// Standard form: identity Gram in every degree of the complex.
    pub fn standard(c: &GradedComplex) -> Self {
        GradedBilinearForm {
            q_min: c.q_min,
            grams: c.dims.iter().map(|&n| ComplexMatrix::identity(n)).collect(),
        }
    }

    pub fn q_min(&self) -> i32 {
        self.q_min
    }

    pub fn grams(&self) -> &[ComplexMatrix] {
        &self.grams
    }

    pub fn gram_at(&self, q: i32) -> Option<&ComplexMatrix> {
        let i = q - self.q_min;
        if i < 0 {
            None
        } else {
            self.grams.get(i as usize)
        }
    }

    /// Symmetry (plain transpose) and invertibility of each Gram matrix.
    pub fn validate(&self, c: &GradedComplex, tol: f64) -> Result<(), TorsionError> {
        if self.q_min != c.q_min || self.grams.len() != c.dims.len() {
            return Err(TorsionError::InvalidInput(
                "form degree range mismatch".into(),
            ));
        }
        for (i, g) in self.grams.iter().enumerate() {
            let q = self.q_min + i as i32;
            if g.rows() != c.dims[i] || g.cols() != c.dims[i] {
                return Err(TorsionError::InvalidInput(format!(
                    "Gram matrix at degree {q} has wrong shape"
                )));
            }
            if g.symmetry_defect() > tol {
                return Err(TorsionError::SingularForm(format!(
                    "b_not_symmetric at degree {q}"
                )));
            }
            if g.rows() > 0 {
                match Lu::factor(g) {
                    Some(lu) if lu.pivot_ratio() > tol => {}
                    _ => {
                        return Err(TorsionError::SingularForm(format!(
                            "b_not_invertible at degree {q}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Cocycle representatives of the cohomology, one column block per degree.
#[derive(Debug, Clone)]
pub struct CohomologyBasis {
    q_min: i32,
    reps: Vec<ComplexMatrix>,
}

impl CohomologyBasis {
    pub fn new(q_min: i32, reps: Vec<ComplexMatrix>) -> Self {
        CohomologyBasis { q_min, reps }
    }

    pub fn q_min(&self) -> i32 {
        self.q_min
    }

    pub fn reps(&self) -> &[ComplexMatrix] {
        &self.reps
    }

    pub fn rep_at(&self, q: i32) -> Option<&ComplexMatrix> {
        let i = q - self.q_min;
        if i < 0 {
            None
        } else {
            self.reps.get(i as usize)
        }
    }

    pub fn dims(&self) -> Vec<(i32, usize)> {
        self.reps
            .iter()
            .enumerate()
            .map(|(i, r)| (self.q_min + i as i32, r.cols()))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.iter().all(|r| r.cols() == 0)
    }
}

/// Which cohomology basis a torsion scalar refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BasisDescriptor {
    /// Acyclic complex: the determinant line is canonically ℂ.
    CanonicalUnit,
    /// Auto-computed representatives with the given dimensions per degree.
    Computed(Vec<(i32, usize)>),
    /// Caller-supplied representatives with the given dimensions per degree.
    Provided(Vec<(i32, usize)>),
}

/// A non-vanishing torsion scalar together with the basis it refers to.
#[derive(Debug, Clone)]
pub struct TorsionValue {
    pub value: Complex64,
    /// Same number in log-space (winding-tracked phase).
    pub log_value: LogComplex,
    pub basis: BasisDescriptor,
}

impl TorsionValue {
    pub(crate) fn from_log(log_value: LogComplex, basis: BasisDescriptor) -> Self {
        TorsionValue {
            value: log_value.to_complex(),
            log_value,
            basis,
        }
    }
}

fn sign_of_degree(q: i32) -> i32 {
    if q.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Zero out entries below an absolute threshold.
fn flush_below(m: &ComplexMatrix, threshold: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        if m[(i, j)].norm() <= threshold {
            Complex64::new(0.0, 0.0)
        } else {
            m[(i, j)]
        }
    })
}

/// Per-degree ranks and maximal-pivot column selections of the differentials.
fn differential_pivots(c: &GradedComplex, tol: f64) -> Vec<(usize, Vec<usize>)> {
    c.diffs.iter().map(|d| pivot_columns(d, tol)).collect()
}

/// Cohomology representatives: kernel vectors completing the boundary space,
/// degree by degree.
///
/// `dim H^q = n_q − rank d_q − rank d_{q−1}`; representatives are columns of
/// the kernel basis chosen independent modulo the image of the incoming
/// differential.
pub fn cohomology(c: &GradedComplex, tol: f64) -> Result<CohomologyBasis, TorsionError> {
    c.validate_complex(tol)?;
    let pivots = differential_pivots(c, tol);
    let mut reps = Vec::with_capacity(c.dims.len());
    for i in 0..c.dims.len() {
        let n = c.dims[i];
        let kernel = match c.diffs.get(i) {
            Some(d) => rank_kernel(d, tol).1,
            None => ComplexMatrix::identity(n),
        };
        let boundary = if i == 0 {
            ComplexMatrix::zeros(n, 0)
        } else {
            c.diffs[i - 1].select_columns(&pivots[i - 1].1)
        };
        let expected = kernel.cols() - boundary.cols();
        let stacked = boundary.hstack(&kernel);
        let chosen = independent_columns_ordered(&stacked, tol);
        let mut rep_cols: Vec<usize> = Vec::new();
        for idx in chosen {
            if idx >= boundary.cols() {
                rep_cols.push(idx - boundary.cols());
            }
        }
        if rep_cols.len() != expected {
            return Err(TorsionError::InvalidInput(format!(
                "cohomology extraction unstable at degree {} (got {}, expected {expected})",
                c.q_min + i as i32,
                rep_cols.len()
            )));
        }
        reps.push(kernel.select_columns(&rep_cols));
    }
    Ok(CohomologyBasis {
        q_min: c.q_min,
        reps,
    })
}

/// Dimensions of the cohomology per degree.
pub fn cohomology_dims(c: &GradedComplex, tol: f64) -> Result<Vec<(i32, usize)>, TorsionError> {
    Ok(cohomology(c, tol)?.dims())
}

pub fn is_acyclic(c: &GradedComplex, tol: f64) -> Result<bool, TorsionError> {
    Ok(cohomology(c, tol)?.is_empty())
}

/// Left-to-right elimination with row pivoting; returns the indices of the
/// columns producing pivots above `tol·max|entry|`. Earlier columns win,
/// which lets callers force a prefix (the boundary columns) into the span.
fn independent_columns_ordered(m: &ComplexMatrix, tol: f64) -> Vec<usize> {
    let rows = m.rows();
    let cols = m.cols();
    let scale = m.max_abs();
    let mut chosen = Vec::new();
    if scale == 0.0 || rows == 0 {
        return chosen;
    }
    let threshold = tol * scale;
    let mut w = m.clone();
    let mut rank = 0usize;
    for j in 0..cols {
        let mut best = rank;
        let mut best_mag = 0.0;
        for i in rank..rows {
            let mag = w[(i, j)].norm();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag <= threshold {
            continue;
        }
        if best != rank {
            for k in 0..cols {
                let tmp = w[(rank, k)];
                w[(rank, k)] = w[(best, k)];
                w[(best, k)] = tmp;
            }
        }
        let pivot = w[(rank, j)];
        for i in rank + 1..rows {
            let factor = w[(i, j)] / pivot;
            for k in j..cols {
                let sub = factor * w[(rank, k)];
                w[(i, k)] -= sub;
            }
        }
        chosen.push(j);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    chosen
}

/// The `b`-transposed differentials `d♯: C^{q+1} → C^q`, defined by
/// `b(dv, w) = b(v, d♯w)`, i.e. `D♯_q = B_q⁻¹ · D_qᵗ · B_{q+1}`.
pub fn transpose_differential(
    c: &GradedComplex,
    b: &GradedBilinearForm,
    tol: f64,
) -> Result<Vec<ComplexMatrix>, TorsionError> {
    b.validate(c, tol)?;
    let mut sharps = Vec::with_capacity(c.diffs.len());
    for (i, d) in c.diffs.iter().enumerate() {
        let bq = &b.grams[i];
        let bq1 = &b.grams[i + 1];
        let lu = Lu::factor(bq).ok_or_else(|| {
            TorsionError::SingularForm(format!("b_not_invertible at degree {}", c.q_min + i as i32))
        })?;
        sharps.push(lu.solve(&d.transpose().mul(bq1)));
    }
    Ok(sharps)
}

/// The Laplacians `Δ_q = d♯d + dd♯` per degree.
pub fn laplacian(
    c: &GradedComplex,
    b: &GradedBilinearForm,
    tol: f64,
) -> Result<Vec<ComplexMatrix>, TorsionError> {
    let sharps = transpose_differential(c, b, tol)?;
    let mut out = Vec::with_capacity(c.dims.len());
    for i in 0..c.dims.len() {
        let n = c.dims[i];
        let mut delta = ComplexMatrix::zeros(n, n);
        if i < c.diffs.len() {
            delta = delta.add(&sharps[i].mul(&c.diffs[i]));
        }
        if i > 0 {
            delta = delta.add(&c.diffs[i - 1].mul(&sharps[i - 1]));
        }
        out.push(delta);
    }
    Ok(out)
}

/// Restriction of the Gram matrix to `ker Δ_q`, with its numerical rank.
///
/// A rank below the kernel dimension means `b` degenerates on the kernel —
/// possible for defective Laplacians, in which case the kernel does not
/// compute the cohomology and the torsion is invisible to the spectrum.
#[derive(Debug, Clone)]
pub struct KernelGramReport {
    pub degree: i32,
    pub kernel_dim: usize,
    pub gram_rank: usize,
}

impl KernelGramReport {
    pub fn is_degenerate(&self) -> bool {
        self.gram_rank < self.kernel_dim
    }
}

pub fn kernel_gram(
    c: &GradedComplex,
    b: &GradedBilinearForm,
    tol: f64,
) -> Result<Vec<KernelGramReport>, TorsionError> {
    let deltas = laplacian(c, b, tol)?;
    let mut out = Vec::new();
    for (i, delta) in deltas.iter().enumerate() {
        let (_, kernel) = rank_kernel(delta, tol);
        let gram = kernel.transpose().mul(&b.grams[i]).mul(&kernel);
        let (gram_rank, _) = rank_kernel(&gram, tol);
        out.push(KernelGramReport {
            degree: c.q_min + i as i32,
            kernel_dim: kernel.cols(),
            gram_rank,
        });
    }
    Ok(out)
}

/// Torsion through the determinant-line isomorphism.
///
/// Returns `∏_q det(B_q)^{(-1)^q} / T²` where `T` is the transition
/// determinant of the adapted bases `[d(pivots_{q-1}) | h_q | pivots_q]` of
/// each `C^q`. The result does not depend on the internal pivot choices; the
/// sign ambiguity of `T` cancels in `T²`. For non-acyclic complexes the
/// scalar refers to the basis `h` (auto-computed when `None`).
pub fn torsion_direct(
    c: &GradedComplex,
    b: &GradedBilinearForm,
    h: Option<&CohomologyBasis>,
    tol: f64,
) -> Result<TorsionValue, TorsionError> {
    c.validate_complex(tol)?;
    b.validate(c, tol)?;
    let computed;
    let (basis, provided) = match h {
        Some(basis) => (basis, true),
        None => {
            computed = cohomology(c, tol)?;
            (&computed, false)
        }
    };
    validate_basis(c, basis, tol)?;

    let pivots = differential_pivots(c, tol);
    let mut transition = LogComplex::ONE; // T, up to sign
    let mut gram_product = LogComplex::ONE;
    for i in 0..c.dims.len() {
        let q = c.q_min + i as i32;
        let n = c.dims[i];
        let boundary = if i == 0 {
            ComplexMatrix::zeros(n, 0)
        } else {
            c.diffs[i - 1].select_columns(&pivots[i - 1].1)
        };
        let reps = match basis.rep_at(q) {
            Some(r) => r.clone(),
            None => ComplexMatrix::zeros(n, 0),
        };
        let lifts = match pivots.get(i) {
            Some((_, cols)) => ComplexMatrix::from_fn(n, cols.len(), |r, j| {
                if r == cols[j] {
                    ONE
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
            None => ComplexMatrix::zeros(n, 0),
        };
        if boundary.cols() + reps.cols() + lifts.cols() != n {
            return Err(TorsionError::InvalidInput(format!(
                "cohomology basis at degree {q} has dimension {}, expected {}",
                reps.cols(),
                n - boundary.cols() - lifts.cols()
            )));
        }
        let adapted = boundary.hstack(&reps).hstack(&lifts);
        let det = match Lu::factor(&adapted) {
            Some(lu) if lu.pivot_ratio() > 1e-13 => lu.det_log(),
            _ if n == 0 => LogComplex::ONE,
            _ => {
                return Err(TorsionError::InvalidInput(format!(
                    "adapted basis at degree {q} is singular; cohomology representatives \
                     are not independent modulo boundaries"
                )))
            }
        };
        if sign_of_degree(q) == 1 {
            transition = transition.div(det);
            gram_product = gram_product.mul(b.grams[i].determinant_log());
        } else {
            transition = transition.mul(det);
            gram_product = gram_product.div(b.grams[i].determinant_log());
        }
    }
    let log_value = gram_product.div(transition.powi(2));
    let descriptor = if basis.is_empty() {
        BasisDescriptor::CanonicalUnit
    } else if provided {
        BasisDescriptor::Provided(basis.dims())
    } else {
        BasisDescriptor::Computed(basis.dims())
    };
    Ok(TorsionValue::from_log(log_value, descriptor))
}

fn validate_basis(
    c: &GradedComplex,
    basis: &CohomologyBasis,
    tol: f64,
) -> Result<(), TorsionError> {
    if basis.q_min != c.q_min || basis.reps.len() != c.dims.len() {
        return Err(TorsionError::InvalidInput(
            "cohomology basis degree range mismatch".into(),
        ));
    }
    for (i, reps) in basis.reps.iter().enumerate() {
        let q = c.q_min + i as i32;
        if reps.rows() != c.dims[i] {
            return Err(TorsionError::InvalidInput(format!(
                "cohomology representatives at degree {q} have wrong row count"
            )));
        }
        if let Some(d) = c.diffs.get(i) {
            if reps.cols() > 0 {
                let image = d.mul(reps);
                let bound = tol * d.max_abs().max(1.0) * reps.max_abs().max(1.0);
                if image.max_abs() > bound {
                    return Err(TorsionError::InvalidInput(format!(
                        "cohomology representative at degree {q} is not a cocycle"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Torsion through the spectral decomposition of the Laplacian.
///
/// The complex splits `b`-orthogonally into the subcomplex spanned by the
/// generalized eigenspaces of `Δ` with `|λ| < radius` and its complement, on
/// which `Δ` is invertible. The torsion is the torsion of the inner
/// subcomplex (with the cohomology basis transported through the inclusion
/// quasi-isomorphism) times `∏_q det(Δ_q|outside)^{(-1)^q q}`.
pub fn torsion_spectral(
    c: &GradedComplex,
    b: &GradedBilinearForm,
    radius: f64,
    h: Option<&CohomologyBasis>,
    tol: f64,
) -> Result<TorsionValue, TorsionError> {
    if !(radius > 0.0) {
        return Err(TorsionError::InvalidInput(
            "contour radius must be positive".into(),
        ));
    }
    c.validate_complex(tol)?;
    b.validate(c, tol)?;
    let computed;
    let (basis, provided) = match h {
        Some(basis) => (basis, true),
        None => {
            computed = cohomology(c, tol)?;
            (&computed, false)
        }
    };
    validate_basis(c, basis, tol)?;

    let deltas = laplacian(c, b, tol)?;
    let clusters: Vec<Vec<EigenCluster>> = deltas
        .iter()
        .map(|d| generalized_eigenspaces(d, tol))
        .collect::<Result<_, _>>()?;

    // Contour admissibility: no cluster near the circle |λ| = radius, and no
    // zero cluster outside it (the cohomology lives in the generalized
    // 0-eigenspace).
    let spectral_scale = clusters
        .iter()
        .flatten()
        .fold(1.0f64, |acc, cl| acc.max(cl.center.norm()));
    let guard = 10.0 * tol * spectral_scale;
    for (i, degree_clusters) in clusters.iter().enumerate() {
        for cl in degree_clusters {
            if (cl.center.norm() - radius).abs() <= guard {
                return Err(TorsionError::ContourOnSpectrum(format!(
                    "cluster at |λ| = {:.6e} (degree {}) within guard band of radius {radius}",
                    cl.center.norm(),
                    c.q_min + i as i32
                )));
            }
            if cl.center.norm() <= guard && cl.center.norm() >= radius {
                return Err(TorsionError::ContourOnSpectrum(format!(
                    "zero cluster at degree {} lies outside the contour",
                    c.q_min + i as i32
                )));
            }
        }
    }

    // Split bases per degree.
    let mut inner_dims = Vec::with_capacity(c.dims.len());
    let mut v_in: Vec<ComplexMatrix> = Vec::with_capacity(c.dims.len());
    let mut t_factor: Vec<Option<Lu>> = Vec::with_capacity(c.dims.len());
    let mut t_matrices: Vec<ComplexMatrix> = Vec::with_capacity(c.dims.len());
    for (i, degree_clusters) in clusters.iter().enumerate() {
        let n = c.dims[i];
        let mut inside = ComplexMatrix::zeros(n, 0);
        let mut outside = ComplexMatrix::zeros(n, 0);
        for cl in degree_clusters {
            if cl.center.norm() < radius {
                inside = inside.hstack(&cl.basis);
            } else {
                outside = outside.hstack(&cl.basis);
            }
        }
        let t = inside.hstack(&outside);
        let lu = if n > 0 {
            match Lu::factor(&t) {
                Some(lu) if lu.pivot_ratio() > 1e-13 => Some(lu),
                _ => {
                    return Err(TorsionError::ClusterAmbiguous(format!(
                        "eigenspace bases at degree {} do not span",
                        c.q_min + i as i32
                    )))
                }
            }
        } else {
            None
        };
        inner_dims.push(inside.cols());
        v_in.push(inside);
        t_factor.push(lu);
        t_matrices.push(t);
    }

    // Inner differentials: coordinates of d·V_in in the T basis; the
    // outside block must vanish (d preserves the decomposition).
    let mut inner_diffs = Vec::with_capacity(c.diffs.len());
    for (i, d) in c.diffs.iter().enumerate() {
        let image = d.mul(&v_in[i]);
        let m_next = inner_dims[i + 1];
        let coords = match &t_factor[i + 1] {
            Some(lu) => lu.solve(&image),
            None => ComplexMatrix::zeros(0, image.cols()),
        };
        let top = coords.block(0, m_next, 0, coords.cols());
        let bottom = coords.block(m_next, coords.rows(), 0, coords.cols());
        let bound = 1e3 * tol * d.max_abs().max(1.0);
        if bottom.max_abs() > bound {
            return Err(TorsionError::ClusterAmbiguous(format!(
                "differential leaks across the contour at degree {} (residual {:.3e})",
                c.q_min + i as i32,
                bottom.max_abs()
            )));
        }
        // Solve noise inherits the outer scale; flush it so that rank
        // decisions on the inner complex see genuine structure only.
        inner_diffs.push(flush_below(&top, 0.1 * tol * d.max_abs().max(1.0)));
    }

    // Inner Gram matrices; theory guarantees non-degeneracy of b on each
    // eigenspace, so a degenerate restriction signals that the clustering
    // failed numerically.
    let mut inner_grams = Vec::with_capacity(c.dims.len());
    for i in 0..c.dims.len() {
        let g = v_in[i].transpose().mul(&b.grams[i]).mul(&v_in[i]);
        if g.rows() > 0 {
            let cond = condition_estimate(&g);
            if !cond.is_finite() || cond > 1e10 {
                return Err(TorsionError::SingularForm(format!(
                    "restricted form at degree {} has condition {:.3e}",
                    c.q_min + i as i32,
                    cond
                )));
            }
        }
        inner_grams.push(g);
    }

    // Transport the cohomology basis: inner coordinates of the spectral
    // projection of each representative. The discarded outside component is
    // exact, so the class in cohomology is unchanged.
    let mut inner_reps = Vec::with_capacity(c.dims.len());
    for i in 0..c.dims.len() {
        let reps = match basis.rep_at(c.q_min + i as i32) {
            Some(r) => r.clone(),
            None => ComplexMatrix::zeros(c.dims[i], 0),
        };
        let coords = match &t_factor[i] {
            Some(lu) => lu.solve(&reps),
            None => ComplexMatrix::zeros(0, reps.cols()),
        };
        inner_reps.push(coords.block(0, inner_dims[i], 0, coords.cols()));
    }

    let inner_complex = GradedComplex::new(c.q_min, inner_dims.clone(), inner_diffs)?;
    let inner_form = GradedBilinearForm::new(c.q_min, inner_grams);
    let inner_basis = CohomologyBasis::new(c.q_min, inner_reps);
    let inner = torsion_direct(&inner_complex, &inner_form, Some(&inner_basis), tol)?;

    // Outside determinants with weights (-1)^q · q.
    let mut log_value = inner.log_value;
    for i in 0..c.dims.len() {
        let n = c.dims[i];
        let m_in = inner_dims[i];
        if n == m_in {
            continue;
        }
        let t = &t_matrices[i];
        let outside_cols = t.block(0, n, m_in, n);
        let image = deltas[i].mul(&outside_cols);
        let coords = t_factor[i].as_ref().expect("nonzero degree").solve(&image);
        let top = coords.block(0, m_in, 0, coords.cols());
        let delta_out = coords.block(m_in, n, 0, coords.cols());
        let bound = 1e3 * tol * deltas[i].max_abs().max(1.0);
        if top.max_abs() > bound {
            return Err(TorsionError::ClusterAmbiguous(format!(
                "Laplacian leaks across the contour at degree {} (residual {:.3e})",
                c.q_min + i as i32,
                top.max_abs()
            )));
        }
        let q = c.q_min + i as i32;
        let weight = sign_of_degree(q) * q;
        if weight != 0 {
            log_value = log_value.mul(delta_out.determinant_log().powi(weight));
        }
    }

    let descriptor = if basis.is_empty() {
        BasisDescriptor::CanonicalUnit
    } else if provided {
        BasisDescriptor::Provided(basis.dims())
    } else {
        BasisDescriptor::Computed(basis.dims())
    };
    Ok(TorsionValue::from_log(log_value, descriptor))
}

/// Direct sum: block-diagonal differentials and Gram matrices over the union
/// of the degree ranges (missing degrees padded with zeros).
pub fn direct_sum(
    c1: &GradedComplex,
    b1: &GradedBilinearForm,
    c2: &GradedComplex,
    b2: &GradedBilinearForm,
) -> (GradedComplex, GradedBilinearForm) {
    let q_min = c1.q_min.min(c2.q_min);
    let q_max = c1.q_max().max(c2.q_max());
    let len = (q_max - q_min + 1) as usize;
    let mut dims = Vec::with_capacity(len);
    let mut diffs = Vec::with_capacity(len - 1);
    let mut grams = Vec::with_capacity(len);
    for q in q_min..=q_max {
        let n1 = c1.dim_at(q);
        let n2 = c2.dim_at(q);
        dims.push(n1 + n2);
        let g1 = match b1.gram_at(q) {
            Some(g) => g.clone(),
            None => ComplexMatrix::zeros(n1, n1),
        };
        let g2 = match b2.gram_at(q) {
            Some(g) => g.clone(),
            None => ComplexMatrix::zeros(n2, n2),
        };
        grams.push(g1.direct_sum(&g2));
        if q < q_max {
            let d1 = match c1.diff(q) {
                Some(d) => d.clone(),
                None => ComplexMatrix::zeros(c1.dim_at(q + 1), n1),
            };
            let d2 = match c2.diff(q) {
                Some(d) => d.clone(),
                None => ComplexMatrix::zeros(c2.dim_at(q + 1), n2),
            };
            diffs.push(d1.direct_sum(&d2));
        }
    }
    (
        GradedComplex { q_min, dims, diffs },
        GradedBilinearForm { q_min, grams },
    )
}

/// Entrywise complex conjugate of a complex with form. For acyclic inputs
/// the torsion of the conjugate is the conjugate of the torsion.
pub fn conjugate(c: &GradedComplex, b: &GradedBilinearForm) -> (GradedComplex, GradedBilinearForm) {
    (
        GradedComplex {
            q_min: c.q_min,
            dims: c.dims.clone(),
            diffs: c.diffs.iter().map(ComplexMatrix::conj).collect(),
        },
        GradedBilinearForm {
            q_min: b.q_min,
            grams: b.grams.iter().map(ComplexMatrix::conj).collect(),
        },
    )
}
