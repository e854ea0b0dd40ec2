//! Clustered generalized eigenspaces of possibly defective matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::{eigenvalues, ComplexMatrix, Lu};
use crate::error::TorsionError;

/// One cluster of the spectrum together with a basis of the generalized
/// eigenspace `ker((M - center)^N)`, `N` the ambient dimension.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    /// Cluster representative (mean of the merged eigenvalues).
    pub center: Complex64,
    /// Algebraic multiplicity: dimension of the generalized eigenspace.
    pub multiplicity: usize,
    /// `n × multiplicity` matrix with orthonormal basis columns.
    pub basis: ComplexMatrix,
}

/// Decompose the spectrum of a square matrix into clusters and compute the
/// generalized eigenspace of each.
///
/// Eigenvalues closer than `tol · spectral_scale` are merged by single
/// linkage, where `spectral_scale = max(1, max|λ|)`. Two clusters separated
/// by less than ten times that radius signal [`TorsionError::ClusterAmbiguous`].
/// Defective eigenvalues scatter numerically like `ε^(1/k)`; when the
/// per-cluster kernel growth produces multiplicities that do not sum to the
/// dimension, the merge radius is escalated internally (up to `1e-3 ·
/// spectral_scale`) until the decomposition is consistent.
pub fn generalized_eigenspaces(
    m: &ComplexMatrix,
    tol: f64,
) -> Result<Vec<EigenCluster>, TorsionError> {
    assert!(
        m.is_square(),
        "generalized eigenspaces of non-square matrix"
    );
    assert!(tol > 0.0, "tolerance must be positive");
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let eigs = eigenvalues(m)?;
    let spectral_scale = eigs.iter().fold(1.0f64, |acc, e| acc.max(e.norm()));
    let base_radius = tol * spectral_scale;
    let cap = 1e-3 * spectral_scale;

    let mut radius = base_radius;
    let mut first_attempt = true;
    let mut fallback: Option<Vec<EigenCluster>> = None;
    loop {
        let groups = single_linkage(&eigs, radius);
        if first_attempt {
            let gap = min_intercluster_gap(&eigs, &groups);
            if gap < 10.0 * radius {
                return Err(TorsionError::ClusterAmbiguous(format!(
                    "cluster separation {gap:.3e} below 10x tolerance {:.3e}",
                    10.0 * radius
                )));
            }
        }
        match try_resolve(m, &eigs, &groups, tol) {
            Resolution::Solid(clusters) => return Ok(clusters),
            Resolution::IllConditioned(clusters) => {
                // Consistent but with a poorly conditioned change of basis:
                // keep the finest such decomposition and try merging further
                // (scattered defective eigenvalues resolve into a solid
                // single cluster; genuinely skew eigenbases do not).
                if fallback.is_none() {
                    fallback = Some(clusters);
                }
            }
            Resolution::Inconsistent => {}
        }
        first_attempt = false;
        radius *= 10.0;
        if radius > cap {
            return match fallback {
                Some(clusters) => Ok(clusters),
                None => Err(TorsionError::ClusterAmbiguous(format!(
                    "no consistent eigenspace decomposition up to merge radius {cap:.3e}"
                ))),
            };
        }
    }
}

enum Resolution {
    /// Consistent with a well-conditioned stacked basis.
    Solid(Vec<EigenCluster>),
    /// Consistent but with a nearly dependent stacked basis.
    IllConditioned(Vec<EigenCluster>),
    Inconsistent,
}

/// Union-find single linkage: indices grouped when within `radius`.
fn single_linkage(eigs: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..n {
        for j in i + 1..n {
            if (eigs[i] - eigs[j]).norm() < radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of_group: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of_group.iter().position(|&g| g == r) {
            Some(g) => groups[g].push(i),
            None => {
                root_of_group.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

fn min_intercluster_gap(eigs: &[Complex64], groups: &[Vec<usize>]) -> f64 {
    let mut gap = f64::INFINITY;
    for (gi, a) in groups.iter().enumerate() {
        for b in groups.iter().skip(gi + 1) {
            for &i in a {
                for &j in b {
                    gap = gap.min((eigs[i] - eigs[j]).norm());
                }
            }
        }
    }
    gap
}

/// Kernel-growth pass over the clusters.
fn try_resolve(
    m: &ComplexMatrix,
    eigs: &[Complex64],
    groups: &[Vec<usize>],
    tol: f64,
) -> Resolution {
    let n = m.rows();
    if groups.len() == 1 {
        // A single cluster spans everything; no kernel growth needed.
        let center = eigs.iter().sum::<Complex64>() / n as f64;
        return Resolution::Solid(alloc::vec![EigenCluster {
            center,
            multiplicity: n,
            basis: ComplexMatrix::identity(n),
        }]);
    }
    let mut clusters = Vec::with_capacity(groups.len());
    for (gi, group) in groups.iter().enumerate() {
        let center = group.iter().map(|&i| eigs[i]).sum::<Complex64>() / group.len() as f64;
        let gap = groups
            .iter()
            .enumerate()
            .filter(|(gj, _)| *gj != gi)
            .flat_map(|(_, other)| other.iter())
            .map(|&j| (eigs[j] - center).norm())
            .fold(f64::INFINITY, f64::min);
        let basis = generalized_kernel(m, center, gap, tol);
        if basis.cols() == 0 {
            return Resolution::Inconsistent;
        }
        clusters.push(EigenCluster {
            center,
            multiplicity: basis.cols(),
            basis,
        });
    }
    let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
    if total != n {
        return Resolution::Inconsistent;
    }
    // The stacked bases must change basis invertibly. Scattered defective
    // eigenvalues masquerading as separate clusters produce nearly parallel
    // kernel vectors here, which is what demotes them below tolerance and
    // triggers further merging.
    let mut stacked = ComplexMatrix::zeros(n, 0);
    for c in &clusters {
        stacked = stacked.hstack(&c.basis);
    }
    let ratio = match Lu::factor(&stacked) {
        Some(lu) => lu.pivot_ratio(),
        None => return Resolution::Inconsistent,
    };
    if ratio <= 1e-13 {
        return Resolution::Inconsistent;
    }
    clusters.sort_by(|a, b| {
        (a.center.norm(), a.center.arg())
            .partial_cmp(&(b.center.norm(), b.center.arg()))
            .expect("finite centers")
    });
    if ratio > tol {
        Resolution::Solid(clusters)
    } else {
        Resolution::IllConditioned(clusters)
    }
}

/// Kernel of `((M - λ)/s₀)^j` for growing `j`, stopping when the dimension
/// stabilizes (at most `j = n`).
///
/// The powers are *not* renormalized per step. The pivot threshold at power
/// `j` is `tol·ρ^j` with `ρ = gap/s₀`, the relative position of the nearest
/// foreign eigenvalue: foreign directions decay exactly like `ρ^j` and stay
/// above the threshold, while directions annihilated by the cluster decay
/// like the (machine-accurate) center error and fall below it. Cluster
/// centers are eigenvalue means, which the QR iteration keeps accurate to
/// rounding even when the cluster is defective.
fn generalized_kernel(m: &ComplexMatrix, lambda: Complex64, gap: f64, tol: f64) -> ComplexMatrix {
    let n = m.rows();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let norm = shifted.max_abs();
    if norm == 0.0 {
        return ComplexMatrix::identity(n);
    }
    let rho = (gap / norm).min(1.0);
    let step = shifted.scale(Complex64::new(1.0 / norm, 0.0));
    let mut power = step.clone();
    let mut best = ComplexMatrix::zeros(n, 0);
    let mut threshold = tol;
    for _j in 1..=n {
        threshold *= rho;
        if threshold < 1e-300 {
            break;
        }
        let pnorm = power.max_abs();
        if pnorm <= threshold {
            // (M - λ)^j vanished on the whole space at working precision.
            return ComplexMatrix::identity(n);
        }
        if pnorm > 1e100 {
            break;
        }
        let (_, kern) = super::kernel::rank_kernel_threshold(&power, threshold);
        if kern.cols() <= best.cols() {
            break;
        }
        best = kern;
        if best.cols() == n {
            break;
        }
        power = power.mul(&step);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const TOL: f64 = 1e-8;

    #[test]
    fn diagonal_clusters_are_eigenvectors() {
        let m = ComplexMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c((i + 1) as f64, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let clusters = generalized_eigenspaces(&m, TOL).unwrap();
        assert_eq!(clusters.len(), 3);
        for cluster in &clusters {
            assert_eq!(cluster.multiplicity, 1);
            let v = cluster.basis.column(0);
            let mv = m.mul_vec(&v);
            let mut residual = 0.0f64;
            for i in 0..3 {
                residual = residual.max((mv[i] - cluster.center * v[i]).norm());
            }
            assert!(residual <= TOL * m.max_abs(), "residual {residual}");
        }
    }

    #[test]
    fn nilpotent_matrix_is_one_cluster_at_zero() {
        // 10 · v vᵗ with v = (1, i): Δ² = 0, generalized 0-eigenspace is all of C².
        let m = ComplexMatrix::from_rows(&[
            vec![c(10.0, 0.0), c(0.0, 10.0)],
            vec![c(0.0, 10.0), c(-10.0, 0.0)],
        ])
        .unwrap();
        let clusters = generalized_eigenspaces(&m, TOL).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].multiplicity, 2);
        assert!(clusters[0].center.norm() < 1e-6);
    }

    #[test]
    fn conjugated_jordan_block_recovers_multiplicity() {
        let n = 3;
        let mut j = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            j[(i, i)] = c(5.0, 0.0);
            if i + 1 < n {
                j[(i, i + 1)] = c(1.0, 0.0);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = loop {
            let p = ComplexMatrix::from_fn(n, n, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            if let Some(lu) = Lu::factor(&p) {
                if lu.pivot_ratio() > 1e-2 {
                    break p;
                }
            }
        };
        let p_inv = Lu::factor(&p).unwrap().solve(&ComplexMatrix::identity(n));
        let m = p.mul(&j).mul(&p_inv);
        let clusters = generalized_eigenspaces(&m, TOL).unwrap();
        assert_eq!(clusters.len(), 1, "expected a single merged cluster");
        assert_eq!(clusters[0].multiplicity, 3);
        assert!((clusters[0].center - c(5.0, 0.0)).norm() < 1e-4);
        // (M - center)^N annihilates the basis within tolerance.
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] -= clusters[0].center;
        }
        let s = shifted.scale(Complex64::new(1.0 / shifted.max_abs(), 0.0));
        let power = s.mul(&s).mul(&s);
        let image = power.mul(&clusters[0].basis);
        assert!(
            image.max_abs() <= 1e-6,
            "annihilation defect {}",
            image.max_abs()
        );
    }

    #[test]
    fn mixed_spectrum_partitions_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = 6;
            let m = ComplexMatrix::from_fn(n, n, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let clusters = generalized_eigenspaces(&m, TOL).unwrap();
            let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
            assert_eq!(total, n);
            // Random matrices are diagonalizable with separated eigenvalues:
            // every cluster basis vector is an ordinary eigenvector.
            for cluster in &clusters {
                if cluster.multiplicity != 1 {
                    continue;
                }
                let v = cluster.basis.column(0);
                let mv = m.mul_vec(&v);
                let mut residual = 0.0f64;
                for i in 0..n {
                    residual = residual.max((mv[i] - cluster.center * v[i]).norm());
                }
                assert!(residual <= TOL * m.max_abs(), "eigen residual {residual}");
            }
        }
    }

    #[test]
    fn defective_block_among_separated_eigenvalues() {
        // J₃(5) ⊕ diag(1, -2+i), conjugated: the scattered triple must merge
        // into one multiplicity-3 cluster while the simple eigenvalues stay
        // separate. This exercises the gap-aware kernel-growth thresholds.
        let n = 5;
        let mut model = ComplexMatrix::zeros(n, n);
        for i in 0..3 {
            model[(i, i)] = c(5.0, 0.0);
            if i + 1 < 3 {
                model[(i, i + 1)] = c(1.0, 0.0);
            }
        }
        model[(3, 3)] = c(1.0, 0.0);
        model[(4, 4)] = c(-2.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = loop {
            let p = ComplexMatrix::from_fn(n, n, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            if let Some(lu) = Lu::factor(&p) {
                if lu.pivot_ratio() > 1e-2 {
                    break p;
                }
            }
        };
        let p_inv = Lu::factor(&p).unwrap().solve(&ComplexMatrix::identity(n));
        let m = p.mul(&model).mul(&p_inv);
        let clusters = generalized_eigenspaces(&m, TOL).unwrap();
        assert_eq!(
            clusters.len(),
            3,
            "expected three clusters, got {}",
            clusters.len()
        );
        let mut mults: Vec<(f64, usize)> = clusters
            .iter()
            .map(|cl| (cl.center.norm(), cl.multiplicity))
            .collect();
        mults.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(mults[0].1, 1);
        assert_eq!(mults[1].1, 1);
        assert_eq!(mults[2].1, 3);
        let triple = clusters.iter().find(|cl| cl.multiplicity == 3).unwrap();
        assert!(
            (triple.center - c(5.0, 0.0)).norm() < 1e-6,
            "center {}",
            triple.center
        );
        // The triple's basis spans an invariant subspace: M·V stays inside.
        let v = &triple.basis;
        let image = m.mul(v);
        // Solve V·X ≈ image in the least-squares sense through the stacked
        // full basis, then confirm the foreign coordinates vanish.
        let mut stacked = ComplexMatrix::zeros(n, 0);
        for cl in &clusters {
            stacked = stacked.hstack(&cl.basis);
        }
        let coords = Lu::factor(&stacked).unwrap().solve(&image);
        let mut foreign: f64 = 0.0;
        for i in 0..n {
            for j in 0..coords.cols() {
                let owned_by_triple = {
                    let mut offset = 0;
                    let mut inside = false;
                    for cl in &clusters {
                        if cl.multiplicity == 3 && i >= offset && i < offset + cl.multiplicity {
                            inside = true;
                        }
                        offset += cl.multiplicity;
                    }
                    inside
                };
                if !owned_by_triple {
                    foreign = foreign.max(coords[(i, j)].norm());
                }
            }
        }
        assert!(foreign < 1e-6 * m.max_abs(), "invariance defect {foreign}");
    }

    #[test]
    fn near_coincident_distinct_clusters_are_ambiguous() {
        // Two eigenvalues 3·tol apart: separated by single linkage but
        // inside the 10×tol guard band.
        let m = ComplexMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                c(1.0 + 3e-8 * i as f64, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        match generalized_eigenspaces(&m, TOL) {
            Err(TorsionError::ClusterAmbiguous(_)) => {}
            other => panic!("expected CLUSTER_AMBIGUOUS, got {other:?}"),
        }
    }
}
