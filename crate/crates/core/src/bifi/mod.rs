//! Offline/online bi-fidelity surrogate: Gramian construction, greedy point
//! selection by pivoted Cholesky, Galerkin projection, reconstruction, and the
//! error-split and coefficient-stability diagnostics.
//!
//! Offline, the low-fidelity model explores the parameter set and the greedy
//! picks the N most informative points gamma_N; the high-fidelity model runs
//! only there. Online, a new z costs one low-fidelity solve: its projection
//! coefficients onto span{u_L(gamma_N)} are reused verbatim on the
//! high-fidelity snapshots.

pub mod persist;
pub mod snapshot;

pub use snapshot::Snapshot;

use crate::error::{Error, Result};
use crate::randomspace::ParameterVector;

/// Dense symmetric matrix as nested rows; fine at surrogate sizes (N <= ~100).
pub type Matrix = Vec<Vec<f64>>;

/// Gramian G_ij = <u_i, u_j> in the snapshots' weighted discrete L2 product.
pub fn gramian(set: &[Snapshot]) -> Result<Matrix> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("gramian of empty set".into()));
    }
    let m = set.len();
    let mut g = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let v = set[i].inner(&set[j])?;
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    Ok(g)
}

/// Result of greedy point selection on a candidate snapshot set.
///
/// `indices` are candidate positions in selection order; `factor` is the
/// lower-triangular Cholesky factor of the selected-point Gramian in that
/// order (row k holds k+1 entries); `pivots[k]` is the squared residual
/// distance of the k-th pick to the span of the previous picks.
#[derive(Debug, Clone)]
pub struct GreedyBasis {
    pub indices: Vec<usize>,
    pub factor: Matrix,
    pub pivots: Vec<f64>,
    pub tol: f64,
}

impl GreedyBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Basis spanned by the first `n` picks. Greedy orderings are nested, so
    /// the prefix is itself the greedy result for the smaller budget.
    pub fn prefix(&self, n: usize) -> GreedyBasis {
        let n = n.min(self.len());
        GreedyBasis {
            indices: self.indices[..n].to_vec(),
            factor: self.factor[..n]
                .iter()
                .map(|row| row[..row.len().min(n)].to_vec())
                .collect(),
            pivots: self.pivots[..n].to_vec(),
            tol: self.tol,
        }
    }

    /// Solve G c = f through the stored factor (forward then back substitution).
    // negated comparison rejects NaN pivots as well
    #[allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if f.len() != n {
            return Err(Error::InvalidArgument(format!(
                "right-hand side has {} entries for basis of size {n}",
                f.len()
            )));
        }
        let mut y = vec![0.0; n];
        for k in 0..n {
            let diag = self.factor[k][k];
            if !(diag > 0.0) {
                return Err(Error::SingularGramian(format!(
                    "non-positive pivot {diag} at step {k}"
                )));
            }
            let mut v = f[k];
            for j in 0..k {
                v -= self.factor[k][j] * y[j];
            }
            y[k] = v / diag;
        }
        let mut c = vec![0.0; n];
        for k in (0..n).rev() {
            let mut v = y[k];
            for j in k + 1..n {
                v -= self.factor[j][k] * c[j];
            }
            c[k] = v / self.factor[k][k];
        }
        Ok(c)
    }
}

/// Greedy selection by pivoted Cholesky on the candidate Gramian.
///
/// Each step picks the candidate with the largest squared residual distance
/// to the span of the already-selected snapshots (ties break to the lowest
/// index) and stops at `n_max` or when the pivot falls below `tol` times the
/// first pivot.
#[allow(clippy::needless_range_loop)]
pub fn greedy_select(candidates: &[Snapshot], n_max: usize, tol: f64) -> Result<GreedyBasis> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates".into()));
    }
    if n_max == 0 || n_max > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} outside 1..={}",
            candidates.len()
        )));
    }
    let g = gramian(candidates)?;
    let m = candidates.len();
    let mut residual: Vec<f64> = (0..m).map(|i| g[i][i]).collect();
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut selected: Vec<usize> = Vec::new();
    let mut pivots: Vec<f64> = Vec::new();
    let mut first_pivot = 0.0;

    for step in 0..n_max {
        let mut best = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for j in 0..m {
            if !selected.contains(&j) && residual[j] > best_val {
                best_val = residual[j];
                best = j;
            }
        }
        if step == 0 {
            if best_val <= 0.0 {
                return Err(Error::EmptyBasis);
            }
            first_pivot = best_val;
        } else if best_val <= 0.0 || best_val < tol * first_pivot {
            break;
        }

        let pivot_sqrt = best_val.sqrt();
        let sel_row = rows[best].clone();
        for j in 0..m {
            let mut v = g[j][best];
            for (a, b) in rows[j].iter().zip(&sel_row) {
                v -= a * b;
            }
            let l = v / pivot_sqrt;
            rows[j].push(l);
            residual[j] -= l * l;
        }
        selected.push(best);
        pivots.push(best_val);
    }

    let factor = selected
        .iter()
        .enumerate()
        .map(|(k, &j)| rows[j][..=k].to_vec())
        .collect();
    Ok(GreedyBasis {
        indices: selected,
        factor,
        pivots,
        tol,
    })
}

/// Galerkin projection coefficients of `u` onto span of the basis snapshots:
/// solves G c = f with f_k = <u, u_L(z_k)>.
pub fn project(basis: &GreedyBasis, low_snaps: &[Snapshot], u: &Snapshot) -> Result<Vec<f64>> {
    if low_snaps.len() != basis.len() {
        return Err(Error::InvalidArgument(format!(
            "{} basis snapshots for basis of size {}",
            low_snaps.len(),
            basis.len()
        )));
    }
    let f = low_snaps
        .iter()
        .map(|s| u.inner(s))
        .collect::<Result<Vec<_>>>()?;
    basis.solve(&f)
}

/// Offline product of Algorithm-style training: selected points, paired
/// low/high snapshots, and the minimum eigenvalue of the selected Gramian.
#[derive(Debug, Clone)]
pub struct BiFiSurrogate {
    pub basis: GreedyBasis,
    pub low: Vec<Snapshot>,
    pub high: Vec<Snapshot>,
    pub lambda_min: f64,
}

impl BiFiSurrogate {
    /// Pair the selected low snapshots with their high-fidelity runs.
    ///
    /// `low` and `high` are in selection order and must carry identical
    /// parameter samples pairwise.
    pub fn assemble(basis: GreedyBasis, low: Vec<Snapshot>, high: Vec<Snapshot>) -> Result<Self> {
        if low.len() != basis.len() || high.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "basis size {} with {} low and {} high snapshots",
                basis.len(),
                low.len(),
                high.len()
            )));
        }
        for (l, h) in low.iter().zip(&high) {
            if l.z != h.z {
                return Err(Error::InvalidArgument(
                    "low/high snapshot pair with different parameter samples".into(),
                ));
            }
        }
        let g = gramian(&low)?;
        let lambda_min = min_eigenvalue(&g);
        if lambda_min <= 0.0 {
            return Err(Error::SingularGramian(format!(
                "minimum eigenvalue {lambda_min} of the selected Gramian"
            )));
        }
        Ok(Self {
            basis,
            low,
            high,
            lambda_min,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    /// Surrogate truncated to the first `n` greedy picks.
    pub fn prefix(&self, n: usize) -> Result<BiFiSurrogate> {
        let n = n.min(self.n());
        BiFiSurrogate::assemble(
            self.basis.prefix(n),
            self.low[..n].to_vec(),
            self.high[..n].to_vec(),
        )
    }

    /// Project a low-fidelity solution onto the stored low-fidelity span.
    pub fn project(&self, u: &Snapshot) -> Result<Vec<f64>> {
        project(&self.basis, &self.low, u)
    }

    /// u_B = sum_k c_k u_H(z_k), stamped with the query sample `z`.
    pub fn reconstruct(&self, c: &[f64], z: &ParameterVector) -> Result<Snapshot> {
        if c.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for surrogate of size {}",
                c.len(),
                self.n()
            )));
        }
        Snapshot::linear_combination(c, &self.high, &self.high[0], z.clone())
    }

    /// Online stage: one low-fidelity solve at `z`, projection, reconstruction.
    pub fn evaluate<F>(&self, z: &ParameterVector, low_solver: F) -> Result<Snapshot>
    where
        F: Fn(&ParameterVector) -> Result<Snapshot>,
    {
        Ok(self.evaluate_detailed(z, low_solver)?.0)
    }

    /// Like [`evaluate`](Self::evaluate) but also returns the coefficients and
    /// the low-fidelity solution, which the diagnostics reuse.
    pub fn evaluate_detailed<F>(
        &self,
        z: &ParameterVector,
        low_solver: F,
    ) -> Result<(Snapshot, Vec<f64>, Snapshot)>
    where
        F: Fn(&ParameterVector) -> Result<Snapshot>,
    {
        let u_low = low_solver(z)?;
        let c = self.project(&u_low)?;
        let u_b = self.reconstruct(&c, z)?;
        Ok((u_b, c, u_low))
    }
}

/// Norm components of the error split
/// u_H - u_B = (u_H - u_L) + (u_L - P u_L) + sum_k c_k (u_L(z_k) - u_H(z_k)).
#[derive(Debug, Clone, Copy)]
pub struct ErrorSplit {
    /// ||u_H(z) - u_L(z)||.
    pub model_gap: f64,
    /// ||u_L(z) - sum_k c_k u_L(z_k)||.
    pub projection_residual: f64,
    /// ||sum_k c_k (u_L(z_k) - u_H(z_k))||.
    pub term_a: f64,
    /// ||u_H(z) - u_B(z)||.
    pub total: f64,
    /// Max entrywise defect of the vector identity; rounding-level by algebra.
    pub identity_residual: f64,
}

/// Evaluate the error-split components and audit the defining vector identity.
pub fn error_split(
    u_high: &Snapshot,
    u_low: &Snapshot,
    surrogate: &BiFiSurrogate,
    c: &[f64],
) -> Result<ErrorSplit> {
    u_high.check_compatible(u_low)?;
    let p_low = Snapshot::linear_combination(c, &surrogate.low, u_low, u_low.z.clone())?;
    let u_b = surrogate.reconstruct(c, &u_high.z)?;
    u_high.check_compatible(&u_b)?;

    let model_gap = u_high.distance(u_low)?;
    let projection_residual = u_low.distance(&p_low)?;
    let total = u_high.distance(&u_b)?;

    let mut term_a_sq = 0.0;
    let mut identity_residual = 0.0f64;
    for i in 0..u_high.values.len() {
        let term_a_i = p_low.values[i] - u_b.values[i];
        term_a_sq += u_high.weights[i] * term_a_i * term_a_i;
        let lhs = u_high.values[i] - u_b.values[i];
        let rhs =
            (u_high.values[i] - u_low.values[i]) + (u_low.values[i] - p_low.values[i]) + term_a_i;
        identity_residual = identity_residual.max((lhs - rhs).abs());
    }

    Ok(ErrorSplit {
        model_gap,
        projection_residual,
        term_a: term_a_sq.sqrt(),
        total,
        identity_residual,
    })
}

/// Coefficient-stability diagnostic tied to the selected Gramian's
/// minimum eigenvalue: ||c||_2 <= ||u_L|| / sqrt(lambda_min).
#[derive(Debug, Clone, Copy)]
pub struct StabilityReport {
    pub lambda_min: f64,
    pub coeff_norm: f64,
    pub low_norm: f64,
    pub bound: f64,
    pub satisfied: bool,
}

pub fn stability_report(
    surrogate: &BiFiSurrogate,
    c: &[f64],
    u_low: &Snapshot,
) -> Result<StabilityReport> {
    let lambda_min = surrogate.lambda_min;
    if lambda_min <= 0.0 {
        return Err(Error::SingularGramian(format!(
            "minimum eigenvalue {lambda_min}"
        )));
    }
    let coeff_norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let low_norm = u_low.norm();
    let bound = low_norm / lambda_min.sqrt();
    // 1e-10 headroom for the rounding in both sides of the inequality
    let satisfied = coeff_norm <= bound * (1.0 + 1e-10);
    Ok(StabilityReport {
        lambda_min,
        coeff_norm,
        low_norm,
        bound,
        satisfied,
    })
}

/// Minimum eigenvalue of a symmetric positive-semidefinite matrix by inertia
/// bisection: LDL^T of (G - mu I) counts the eigenvalues below mu.
#[allow(clippy::needless_range_loop)]
pub fn min_eigenvalue(g: &Matrix) -> f64 {
    let n = g.len();
    if n == 1 {
        return g[0][0];
    }
    // Gershgorin enclosure of the spectrum
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| g[i][j].abs()).sum();
        lo = lo.min(g[i][i] - radius);
        hi = hi.max(g[i][i] + radius);
    }
    if lo == hi {
        return lo;
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if count_eigenvalues_below(g, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Number of eigenvalues of G strictly below mu (Sylvester inertia of G - mu I).
fn count_eigenvalues_below(g: &Matrix, mu: f64) -> usize {
    let n = g.len();
    let mut l = vec![vec![0.0; n]; n];
    let mut d = vec![0.0; n];
    let mut negatives = 0;
    for k in 0..n {
        let mut dk = g[k][k] - mu;
        for j in 0..k {
            dk -= l[k][j] * l[k][j] * d[j];
        }
        if dk == 0.0 {
            // nudge exact zeros so the Sturm count stays well defined
            dk = -f64::MIN_POSITIVE;
        }
        d[k] = dk;
        if dk < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let mut v = g[i][k];
            for j in 0..k {
                v -= l[i][j] * l[k][j] * d[j];
            }
            l[i][k] = v / dk;
        }
    }
    negatives
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_snap(values: Vec<f64>, z: f64) -> Snapshot {
        let n = values.len();
        Snapshot::new("test", n, 1, ParameterVector(vec![z]), vec![1.0; n], values).unwrap()
    }

    fn random_snaps(rng: &mut ChaCha8Rng, count: usize, len: usize) -> Vec<Snapshot> {
        (0..count)
            .map(|k| {
                unit_snap(
                    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    k as f64 / count as f64,
                )
            })
            .collect()
    }

    /// Brute-force greedy oracle: explicit modified Gram-Schmidt residuals,
    /// max-residual pick each step, lowest index on ties.
    fn mgs_greedy_oracle(snaps: &[Snapshot], n_max: usize, tol: f64) -> Vec<usize> {
        let w = &snaps[0].weights;
        let norm2 = |v: &[f64]| -> f64 { v.iter().zip(w).map(|(x, wi)| wi * x * x).sum() };
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(w).map(|((x, y), wi)| wi * x * y).sum()
        };
        let mut residuals: Vec<Vec<f64>> = snaps.iter().map(|s| s.values.clone()).collect();
        let mut chosen: Vec<usize> = Vec::new();
        let mut first = 0.0;
        for step in 0..n_max {
            let mut best = usize::MAX;
            let mut best_val = f64::NEG_INFINITY;
            for (j, r) in residuals.iter().enumerate() {
                if chosen.contains(&j) {
                    continue;
                }
                let v = norm2(r);
                if v > best_val {
                    best_val = v;
                    best = j;
                }
            }
            if step == 0 {
                first = best_val;
            } else if best_val <= 0.0 || best_val < tol * first {
                break;
            }
            let scale = best_val.sqrt();
            let q: Vec<f64> = residuals[best].iter().map(|x| x / scale).collect();
            for r in residuals.iter_mut() {
                let proj = dot(r, &q);
                for (ri, qi) in r.iter_mut().zip(&q) {
                    *ri -= proj * qi;
                }
            }
            chosen.push(best);
        }
        chosen
    }

    /// Jacobi rotation eigensolver, used only as an oracle.
    #[allow(clippy::needless_range_loop)]
    fn jacobi_eigenvalues(mut a: Matrix) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(a[p][q].abs());
                }
            }
            if off < 1e-14 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn gramian_of_orthonormal_pair_is_identity() {
        let snaps = vec![
            unit_snap(vec![1.0, 0.0, 0.0], 0.0),
            unit_snap(vec![0.0, 1.0, 0.0], 0.5),
        ];
        let g = gramian(&snaps).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0][0] - 1.0).abs() < 1e-15);
        assert!((g[1][1] - 1.0).abs() < 1e-15);
        assert!(g[0][1].abs() < 1e-15);
    }

    #[test]
    fn gramian_single_element() {
        let s = unit_snap(vec![1.0, 1.0], 0.0); // <u,u> = 2 with unit weights
        let g = gramian(&[s]).unwrap();
        assert!((g[0][0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gramian_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let snaps = random_snaps(&mut rng, 3, 8);
        let g = gramian(&snaps).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut direct = 0.0;
                for k in 0..8 {
                    direct += snaps[i].weights[k] * snaps[i].values[k] * snaps[j].values[k];
                }
                assert!((g[i][j] - direct).abs() < 1e-14);
                assert!((g[i][j] - g[j][i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn greedy_orders_orthogonal_candidates_by_norm() {
        // norms 3, 1, 2 -> selection order 0, 2, 1
        let snaps = vec![
            unit_snap(vec![3.0, 0.0, 0.0], 0.0),
            unit_snap(vec![0.0, 1.0, 0.0], 0.3),
            unit_snap(vec![0.0, 0.0, 2.0], 0.6),
        ];
        let basis = greedy_select(&snaps, 3, 1e-12).unwrap();
        assert_eq!(basis.indices, vec![0, 2, 1]);
    }

    #[test]
    fn greedy_collapses_identical_candidates() {
        let snaps: Vec<Snapshot> = (0..5).map(|_| unit_snap(vec![1.0, 2.0], 0.1)).collect();
        let basis = greedy_select(&snaps, 5, 1e-10).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis.indices, vec![0]);
    }

    #[test]
    fn greedy_stops_at_numerical_rank() {
        // six candidates in a 2-dimensional span: two picks, and every
        // training residual ends below tol * first pivot
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let snaps: Vec<Snapshot> = (0..6)
            .map(|k| {
                let (ca, cb) = (1.0 + k as f64, 0.5 * k as f64 - 1.0);
                unit_snap(
                    a.iter().zip(&b).map(|(x, y)| ca * x + cb * y).collect(),
                    k as f64 / 6.0,
                )
            })
            .collect();
        let tol = 1e-10;
        let basis = greedy_select(&snaps, 5, tol).unwrap();
        assert_eq!(basis.len(), 2, "rank-2 set selected {} points", basis.len());
        let lows: Vec<Snapshot> = basis.indices.iter().map(|&i| snaps[i].clone()).collect();
        for s in &snaps {
            let c = project(&basis, &lows, s).unwrap();
            let p = Snapshot::linear_combination(&c, &lows, s, s.z.clone()).unwrap();
            let residual_sq = s.distance(&p).unwrap().powi(2);
            assert!(
                residual_sq <= tol * basis.pivots[0] * (1.0 + 1e-6),
                "training residual^2 {residual_sq} above stopping level"
            );
        }
    }

    #[test]
    fn greedy_rejects_all_zero_candidates() {
        let snaps: Vec<Snapshot> = (0..3).map(|_| unit_snap(vec![0.0, 0.0], 0.0)).collect();
        assert!(matches!(
            greedy_select(&snaps, 2, 1e-12),
            Err(Error::EmptyBasis)
        ));
    }

    #[test]
    fn greedy_matches_gram_schmidt_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let snaps = random_snaps(&mut rng, 10, 6);
        let basis = greedy_select(&snaps, 4, 1e-12).unwrap();
        let oracle = mgs_greedy_oracle(&snaps, 4, 1e-12);
        assert_eq!(basis.indices, oracle);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn greedy_pivots_nonincreasing_and_factor_reproduces_gramian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let snaps = random_snaps(&mut rng, 8, 10);
        let basis = greedy_select(&snaps, 6, 1e-12).unwrap();
        for w in basis.pivots.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "pivots not decreasing: {w:?}");
        }
        let selected: Vec<Snapshot> = basis.indices.iter().map(|&i| snaps[i].clone()).collect();
        let g = gramian(&selected).unwrap();
        let scale = g[0][0];
        for i in 0..basis.len() {
            for j in 0..=i {
                let mut rebuilt = 0.0;
                for k in 0..=j {
                    rebuilt += basis.factor[i][k] * basis.factor[j][k];
                }
                assert!(
                    (rebuilt - g[i][j]).abs() <= 1e-12 * scale,
                    "LL^T mismatch at ({i},{j}): {rebuilt} vs {}",
                    g[i][j]
                );
            }
        }
    }

    #[test]
    fn projection_reproduces_basis_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let snaps = random_snaps(&mut rng, 6, 8);
        let basis = greedy_select(&snaps, 4, 1e-12).unwrap();
        let lows: Vec<Snapshot> = basis.indices.iter().map(|&i| snaps[i].clone()).collect();
        for k in 0..4 {
            let c = project(&basis, &lows, &lows[k]).unwrap();
            for (j, cj) in c.iter().enumerate() {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (cj - expect).abs() < 1e-12,
                    "c[{j}] = {cj} for basis element {k}"
                );
            }
        }
    }

    #[test]
    fn projection_of_zero_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let snaps = random_snaps(&mut rng, 5, 8);
        let basis = greedy_select(&snaps, 3, 1e-12).unwrap();
        let lows: Vec<Snapshot> = basis.indices.iter().map(|&i| snaps[i].clone()).collect();
        let zero = unit_snap(vec![0.0; 8], 0.9);
        let c = project(&basis, &lows, &zero).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-300));
    }

    #[test]
    fn projection_matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let snaps = random_snaps(&mut rng, 3, 8);
        let basis = greedy_select(&snaps, 3, 1e-12).unwrap();
        let lows: Vec<Snapshot> = basis.indices.iter().map(|&i| snaps[i].clone()).collect();
        let u = unit_snap((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.77);

        // explicit 3x3 inversion of the Gramian
        let g = gramian(&lows).unwrap();
        let f: Vec<f64> = lows.iter().map(|s| u.inner(s).unwrap()).collect();
        let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
            - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
        let adj = [
            [
                g[1][1] * g[2][2] - g[1][2] * g[2][1],
                g[0][2] * g[2][1] - g[0][1] * g[2][2],
                g[0][1] * g[1][2] - g[0][2] * g[1][1],
            ],
            [
                g[1][2] * g[2][0] - g[1][0] * g[2][2],
                g[0][0] * g[2][2] - g[0][2] * g[2][0],
                g[0][2] * g[1][0] - g[0][0] * g[1][2],
            ],
            [
                g[1][0] * g[2][1] - g[1][1] * g[2][0],
                g[0][1] * g[2][0] - g[0][0] * g[2][1],
                g[0][0] * g[1][1] - g[0][1] * g[1][0],
            ],
        ];
        let oracle: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| adj[i][j] * f[j]).sum::<f64>() / det)
            .collect();

        let c = project(&basis, &lows, &u).unwrap();
        for (ck, ok) in c.iter().zip(&oracle) {
            assert!((ck - ok).abs() < 1e-10, "{ck} vs oracle {ok}");
        }
    }

    fn build_surrogate(
        rng: &mut ChaCha8Rng,
        m: usize,
        len: usize,
        n: usize,
        identical: bool,
    ) -> (BiFiSurrogate, Vec<Snapshot>) {
        let lows = random_snaps(rng, m, len);
        let highs: Vec<Snapshot> = if identical {
            lows.clone()
        } else {
            lows.iter()
                .map(|s| {
                    let mut t = s.clone();
                    for v in t.values.iter_mut() {
                        *v += 0.05 * rng.gen_range(-1.0..1.0);
                    }
                    t.model = "high".into();
                    t
                })
                .collect()
        };
        let basis = greedy_select(&lows, n, 1e-12).unwrap();
        let sel_low: Vec<Snapshot> = basis.indices.iter().map(|&i| lows[i].clone()).collect();
        let sel_high: Vec<Snapshot> = basis.indices.iter().map(|&i| highs[i].clone()).collect();
        let surrogate = BiFiSurrogate::assemble(basis, sel_low, sel_high).unwrap();
        (surrogate, lows)
    }

    #[test]
    fn reconstruct_unit_vector_returns_high_snapshot() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (surrogate, _) = build_surrogate(&mut rng, 6, 8, 3, false);
        for k in 0..3 {
            let mut c = vec![0.0; 3];
            c[k] = 1.0;
            let u = surrogate
                .reconstruct(&c, &surrogate.high[k].z.clone())
                .unwrap();
            for (a, b) in u.values.iter().zip(&surrogate.high[k].values) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn reconstruct_zero_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (surrogate, _) = build_surrogate(&mut rng, 5, 6, 2, false);
        let z = ParameterVector(vec![0.0]);
        let zero = surrogate.reconstruct(&[0.0, 0.0], &z).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        let sum = surrogate.reconstruct(&[1.0, 1.0], &z).unwrap();
        for i in 0..6 {
            let direct = surrogate.high[0].values[i] + surrogate.high[1].values[i];
            assert!((sum.values[i] - direct).abs() < 1e-15);
        }
        assert!(surrogate.reconstruct(&[1.0], &z).is_err());
    }

    #[test]
    fn evaluate_reproduces_high_at_selected_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (surrogate, lows) = build_surrogate(&mut rng, 8, 8, 8, true);
        let solver = |z: &ParameterVector| -> Result<Snapshot> {
            Ok(lows.iter().find(|s| &s.z == z).unwrap().clone())
        };
        for k in 0..surrogate.n() {
            let z = surrogate.high[k].z.clone();
            let u_b = surrogate.evaluate(&z, solver).unwrap();
            let err = u_b.distance(&surrogate.high[k]).unwrap();
            assert!(
                err < 1e-10,
                "reproduction error {err} at selected point {k}"
            );
        }
    }

    #[test]
    fn identical_models_make_total_equal_projection_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (surrogate, lows) = build_surrogate(&mut rng, 9, 8, 4, true);
        // a fresh sample: any combination not in the span
        let u = unit_snap((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.123);
        let c = surrogate.project(&u).unwrap();
        let split = error_split(&u, &u, &surrogate, &c).unwrap();
        assert!(split.model_gap == 0.0);
        assert!(split.term_a < 1e-12);
        assert!(
            (split.total - split.projection_residual).abs() < 1e-12,
            "total {} vs projection {}",
            split.total,
            split.projection_residual
        );
        let _ = lows;
    }

    #[test]
    fn full_rank_projection_drives_residual_below_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let lows = random_snaps(&mut rng, 5, 5);
        let basis = greedy_select(&lows, 5, 1e-12).unwrap();
        let sel: Vec<Snapshot> = basis.indices.iter().map(|&i| lows[i].clone()).collect();
        let surrogate = BiFiSurrogate::assemble(basis, sel.clone(), sel).unwrap();
        // candidate 0 is in the span of a full-rank basis
        let c = surrogate.project(&lows[0]).unwrap();
        let p =
            Snapshot::linear_combination(&c, &surrogate.low, &lows[0], lows[0].z.clone()).unwrap();
        let residual = lows[0].distance(&p).unwrap();
        assert!(residual < 1e-6 * lows[0].norm(), "residual {residual}");
    }

    #[test]
    fn error_split_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let (surrogate, _) = build_surrogate(&mut rng, 8, 8, 4, false);
        let u_low = unit_snap((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.2);
        let mut u_high = u_low.clone();
        for v in u_high.values.iter_mut() {
            *v += 0.05 * rng.gen_range(-1.0..1.0);
        }
        let c = surrogate.project(&u_low).unwrap();
        let split = error_split(&u_high, &u_low, &surrogate, &c).unwrap();
        assert!(split.identity_residual < 1e-12);
        assert!(split.total <= split.model_gap + split.projection_residual + split.term_a + 1e-12);
    }

    #[test]
    fn stability_orthonormal_basis() {
        let lows = vec![
            unit_snap(vec![1.0, 0.0, 0.0], 0.0),
            unit_snap(vec![0.0, 1.0, 0.0], 0.5),
        ];
        let basis = greedy_select(&lows, 2, 1e-12).unwrap();
        let sel: Vec<Snapshot> = basis.indices.iter().map(|&i| lows[i].clone()).collect();
        let surrogate = BiFiSurrogate::assemble(basis, sel.clone(), sel).unwrap();
        assert!((surrogate.lambda_min - 1.0).abs() < 1e-12);
        let u = unit_snap(vec![0.3, -0.4, 0.5], 0.9);
        let c = surrogate.project(&u).unwrap();
        let report = stability_report(&surrogate, &c, &u).unwrap();
        assert!((report.bound - u.norm()).abs() < 1e-12);
        assert!(report.satisfied);
    }

    #[test]
    fn stability_diagonal_gramian() {
        // Gramian [[2, 0], [0, 0.5]] -> lambda_min = 0.5
        let lows = vec![
            unit_snap(vec![2.0f64.sqrt(), 0.0], 0.0),
            unit_snap(vec![0.0, 0.5f64.sqrt()], 0.5),
        ];
        let basis = greedy_select(&lows, 2, 1e-12).unwrap();
        let sel: Vec<Snapshot> = basis.indices.iter().map(|&i| lows[i].clone()).collect();
        let surrogate = BiFiSurrogate::assemble(basis, sel.clone(), sel).unwrap();
        assert!((surrogate.lambda_min - 0.5).abs() < 1e-12);
    }

    #[test]
    fn min_eigenvalue_matches_jacobi_oracle_and_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (surrogate, _) = build_surrogate(&mut rng, 9, 10, 4, false);
        let g = gramian(&surrogate.low).unwrap();
        let mut eigs = jacobi_eigenvalues(g);
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            (surrogate.lambda_min - eigs[0]).abs() < 1e-9 * eigs.last().unwrap().max(1.0),
            "bisection {} vs jacobi {}",
            surrogate.lambda_min,
            eigs[0]
        );

        let u = unit_snap((0..10).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.9);
        let c = surrogate.project(&u).unwrap();
        let report = stability_report(&surrogate, &c, &u).unwrap();
        assert!(
            report.satisfied,
            "||c|| = {} > bound {}",
            report.coeff_norm, report.bound
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn error_split_identity_holds(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (surrogate, _) = build_surrogate(&mut rng, 7, 8, 3, false);
            let u_low = unit_snap(
                (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                0.11,
            );
            let mut u_high = u_low.clone();
            for v in u_high.values.iter_mut() {
                *v += 0.1 * rng.gen_range(-1.0..1.0);
            }
            let c = surrogate.project(&u_low).unwrap();
            let split = error_split(&u_high, &u_low, &surrogate, &c).unwrap();
            prop_assert!(split.identity_residual < 1e-12);
            prop_assert!(
                split.total <= split.model_gap + split.projection_residual + split.term_a + 1e-12
            );
        }
    }
}
