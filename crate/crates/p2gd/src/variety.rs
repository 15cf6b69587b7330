//! Geometry of the determinantal variety `R^{m×n}_{≤r}`.
//!
//! Everything downstream reduces to a handful of primitives on this set:
//! the thin SVD with a deterministic sign convention, numerical rank and
//! Δ-rank, metric projection onto `R^{m×n}_{≤r̲}` by singular-value
//! truncation, projection onto the tangent cone at a point, and the
//! stationarity measure `s_f` (the Frobenius norm of a projection of the
//! negative gradient onto the tangent cone).

use crate::error::{Error, Result};
use crate::Matrix;
use nalgebra::DVector;

/// Thin SVD `X = U · diag(sigma) · Vᵀ` with `k = min(m, n)` columns,
/// singular values sorted descending, and a deterministic sign convention:
/// the largest-magnitude entry of each column of `U` is nonnegative (flips
/// are propagated to `V`).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: DVector<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    /// Reconstruct `U[:, ..k] · diag(sigma[..k]) · V[:, ..k]ᵀ`.
    ///
    /// `k = sigma.len()` gives the full reconstruction. A rank of 0 yields
    /// the zero matrix exactly.
    pub fn reconstruct_rank(&self, k: usize) -> Matrix {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let mut out = Matrix::zeros(m, n);
        for j in 0..k.min(self.sigma.len()) {
            let s = self.sigma[j];
            let uj = self.u.column(j);
            let vj = self.v.column(j);
            for c in 0..n {
                for r in 0..m {
                    out[(r, c)] += s * uj[r] * vj[c];
                }
            }
        }
        out
    }
}

/// The variety `R^{m×n}_{≤r}` together with the numerical-rank threshold.
///
/// `rank_tol` is relative to the largest singular value and only governs
/// what "rank X" means for floating-point iterates; the algorithmic rank
/// reduction is driven by the separate Δ parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarietySpec {
    m: usize,
    n: usize,
    r: usize,
    rank_tol: f64,
}

/// Default relative threshold separating numerically nonzero singular
/// values from noise.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

impl VarietySpec {
    /// A variety of `m×n` matrices with rank at most `r`, requiring
    /// `0 < r < min(m, n)`.
    pub fn new(m: usize, n: usize, r: usize) -> Result<Self> {
        Self::with_rank_tol(m, n, r, DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(m: usize, n: usize, r: usize, rank_tol: f64) -> Result<Self> {
        if m == 0 || n == 0 || r == 0 || r >= m.min(n) {
            return Err(Error::InvalidParams(format!(
                "determinantal variety requires 0 < r < min(m, n); got m={m}, n={n}, r={r}"
            )));
        }
        if !rank_tol.is_finite() || rank_tol < 0.0 {
            return Err(Error::InvalidParams(format!(
                "rank_tol must be finite and nonnegative; got {rank_tol}"
            )));
        }
        Ok(Self { m, n, r, rank_tol })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// The rank bound `r`.
    pub fn max_rank(&self) -> usize {
        self.r
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub(crate) fn check_dims(&self, x: &Matrix) -> Result<()> {
        if x.nrows() != self.m || x.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected_rows: self.m,
                expected_cols: self.n,
                rows: x.nrows(),
                cols: x.ncols(),
            });
        }
        Ok(())
    }
}

/// A projection of a direction `Z` onto the tangent cone to the variety at
/// a point, together with its norm and the discarded remainder.
#[derive(Debug, Clone)]
pub struct TangentProjection {
    /// The chosen element of the (possibly set-valued) projection.
    pub direction: Matrix,
    /// Frobenius norm of `direction`; all elements of the projection share
    /// this norm, so it is well defined.
    pub s_f: f64,
    /// Discarded part of the orthogonal-complement block (diagnostics).
    pub residual_rank_block: Matrix,
}

fn all_finite(x: &Matrix) -> bool {
    x.iter().all(|e| e.is_finite())
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// One-sided Jacobi SVD for `m >= n`: rotates column pairs of a working
/// copy until they are mutually orthogonal, at which point the column norms
/// are the singular values and `V` is the accumulated rotation product.
///
/// Jacobi is slower than bidiagonalization but computes small factorizations
/// to essentially full working precision, including tiny singular values,
/// and it leaves matrices that already have orthogonal columns (diagonal
/// ones in particular) untouched, so their factors are exact.
fn one_sided_jacobi(x: &Matrix) -> SvdFactors {
    let (m, n) = x.shape();
    if m < n {
        let flipped = one_sided_jacobi(&x.transpose());
        return SvdFactors {
            u: flipped.v,
            sigma: flipped.sigma,
            v: flipped.u,
        };
    }
    let mut b = x.clone();
    let mut v = Matrix::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let app = b.column(p).norm_squared();
                let aqq = b.column(q).norm_squared();
                let apq = b.column(p).dot(&b.column(q));
                if app == 0.0 || aqq == 0.0 || apq.abs() <= f64::EPSILON * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..m {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = cs * bp - sn * bq;
                    b[(i, q)] = sn * bp + cs * bq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = cs * vp - sn * vq;
                    v[(i, q)] = sn * vp + cs * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms; a single-entry column takes the exact absolute value,
    // so inputs with orthogonal sparse columns factor without rounding.
    let sigma_of = |col: nalgebra::DVectorView<f64>| -> f64 {
        let mut nonzero = None;
        let mut count = 0;
        for &e in col.iter() {
            if e != 0.0 {
                count += 1;
                nonzero = Some(e);
            }
        }
        match (count, nonzero) {
            (0, _) => 0.0,
            (1, Some(e)) => e.abs(),
            _ => col.norm(),
        }
    };
    let raw_sigma: Vec<f64> = (0..n).map(|j| sigma_of(b.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        raw_sigma[j]
            .partial_cmp(&raw_sigma[i])
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut u = Matrix::zeros(m, n);
    let mut v_sorted = Matrix::zeros(n, n);
    let mut sigma = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = raw_sigma[src];
        for i in 0..n {
            v_sorted[(i, dst)] = v[(i, src)];
        }
        if raw_sigma[src] > 0.0 {
            for i in 0..m {
                u[(i, dst)] = b[(i, src)] / raw_sigma[src];
            }
        }
    }
    // Orthonormal completion of U for zero singular values. Zero sigmas
    // sort last, so every column left of `dst` is already established.
    for dst in 0..n {
        if sigma[dst] > 0.0 {
            continue;
        }
        for c in 0..m {
            let mut w = DVector::zeros(m);
            w[c] = 1.0;
            for j in 0..dst {
                let proj = u[(c, j)];
                for i in 0..m {
                    w[i] -= proj * u[(i, j)];
                }
            }
            let norm = w.norm();
            if norm > 0.5 {
                for i in 0..m {
                    u[(i, dst)] = w[i] / norm;
                }
                break;
            }
        }
    }
    SvdFactors {
        u,
        sigma,
        v: v_sorted,
    }
}

/// Thin SVD of `X` with descending singular values and deterministic signs.
///
/// Signs are normalized after factorization: each column of `U` is flipped
/// so that its largest-magnitude entry (first one on ties) is nonnegative,
/// with the flip propagated to the matching column of `V`. Reconstruction
/// is unaffected; repeated runs produce identical factor bits.
pub fn thin_svd(x: &Matrix) -> Result<SvdFactors> {
    if !all_finite(x) {
        return Err(Error::NonFiniteInput);
    }
    let mut factors = one_sided_jacobi(x);

    for j in 0..factors.u.ncols() {
        let col = factors.u.column(j);
        let mut pivot = 0;
        let mut best = -1.0f64;
        for (i, e) in col.iter().enumerate() {
            if e.abs() > best {
                best = e.abs();
                pivot = i;
            }
        }
        if factors.u[(pivot, j)] < 0.0 {
            factors.u.column_mut(j).neg_mut();
            if j < factors.v.ncols() {
                factors.v.column_mut(j).neg_mut();
            }
        }
    }
    Ok(factors)
}

/// Number of singular values strictly above `rank_tol · σ₁(X)`.
///
/// The zero matrix has rank 0 by convention.
pub fn numerical_rank(x: &Matrix, spec: &VarietySpec) -> Result<usize> {
    let factors = thin_svd(x)?;
    Ok(rank_of_sigma(&factors.sigma, spec.rank_tol))
}

fn rank_of_sigma(sigma: &DVector<f64>, rank_tol: f64) -> usize {
    let sigma_max = if sigma.is_empty() { 0.0 } else { sigma[0] };
    sigma.iter().filter(|&&s| s > rank_tol * sigma_max).count()
}

/// The Δ-rank of `X`: the number of singular values strictly greater than
/// `Δ`, i.e. `max{ j ≤ rank X : σ_j(X) > Δ }` with the zero matrix mapped
/// to 0. Nonincreasing in Δ; `Δ = 0` recovers the exact rank.
pub fn delta_rank(x: &Matrix, delta: f64) -> Result<usize> {
    debug_assert!(delta >= 0.0, "delta must be nonnegative");
    let factors = thin_svd(x)?;
    // σ_j > Δ ≥ 0 already implies j ≤ rank X, so one strict comparison
    // covers both conditions including the zero matrix.
    Ok(factors.sigma.iter().filter(|&&s| s > delta).count())
}

/// Metric projection of `X` onto `R^{m×n}_{≤r̲}`: the `r̲`-truncated SVD,
/// which minimizes the Frobenius distance among matrices of rank at most
/// `r̲` (Eckart–Young). When `σ_{r̲} = σ_{r̲+1}` the minimizer set is not a
/// singleton; the first `r̲` singular triples in the computed descending
/// order are kept, so the result is one deterministic representative.
pub fn project_to_rank(x: &Matrix, rank: usize) -> Result<Matrix> {
    if rank > x.nrows().min(x.ncols()) {
        return Err(Error::RankOutOfRange {
            requested: rank,
            rows: x.nrows(),
            cols: x.ncols(),
        });
    }
    if rank == 0 {
        if !all_finite(x) {
            return Err(Error::NonFiniteInput);
        }
        return Ok(Matrix::zeros(x.nrows(), x.ncols()));
    }
    let factors = thin_svd(x)?;
    Ok(factors.reconstruct_rank(rank))
}

/// `W = (I − U_s U_sᵀ) · Z · (I − V_s V_sᵀ)`: the part of `Z` outside the
/// spaces spanned by the leading `s` singular triples of the base point.
fn complement_block(factors: &SvdFactors, s: usize, z: &Matrix) -> Matrix {
    let u_s = factors.u.columns(0, s);
    let v_s = factors.v.columns(0, s);
    let rows = z - u_s * (u_s.transpose() * z);
    &rows - (&rows * v_s) * v_s.transpose()
}

/// Projects `Z` onto the tangent cone to `R^{m×n}_{≤r}` at `X`.
///
/// With `s = rank X` and `P_U`, `P_V` the orthogonal projectors onto the
/// column and row spaces of `X`, the cone at `X` consists of all directions
/// whose block `W = (I−P_U) · Z · (I−P_V)` outside those spaces has rank at
/// most `r − s`. The projection keeps `Z − W` and the best rank-`(r−s)`
/// approximation of `W`:
///
/// ```text
/// direction = Z − W + P_{R_{≤ r−s}}(W)
/// ```
///
/// At `s = r` the complement block is dropped entirely (the tangent-space
/// case), and at `X = 0` the cone is the variety itself, so the projection
/// reduces to rank-`r` truncation of `Z`.
pub fn project_tangent_cone(
    x: &Matrix,
    z: &Matrix,
    spec: &VarietySpec,
) -> Result<TangentProjection> {
    spec.check_dims(x)?;
    spec.check_dims(z)?;
    if !all_finite(z) {
        return Err(Error::NonFiniteInput);
    }
    let factors = thin_svd(x)?;
    let s = rank_of_sigma(&factors.sigma, spec.rank_tol);
    if s > spec.r {
        return Err(Error::RankExceedsVariety { rank: s, r: spec.r });
    }

    let w = complement_block(&factors, s, z);
    let kept = project_to_rank(&w, spec.r - s)?;
    let direction = z - &w + &kept;
    let s_f = direction.norm();

    #[cfg(debug_assertions)]
    {
        // Cross-check against the component-sum route:
        // ‖direction‖² = ‖Z‖² − ‖W‖² + Σ_{k ≤ r−s} σ_k(W)².
        // Compared on the squared scale: the subtraction cancels when
        // s_f ≪ ‖Z‖, so only ‖Z‖²-relative agreement is meaningful there.
        let w_sigma = thin_svd(&w).expect("finite by construction").sigma;
        let kept_sq: f64 = w_sigma.iter().take(spec.r - s).map(|s| s * s).sum();
        let alt_sq = z.norm_squared() - w.norm_squared() + kept_sq;
        debug_assert!(
            (s_f * s_f - alt_sq).abs() <= 1e-10 * (1.0 + z.norm_squared()),
            "s_f mismatch: assembled {} vs component sum {}",
            s_f * s_f,
            alt_sq
        );
    }

    Ok(TangentProjection {
        direction,
        s_f,
        residual_rank_block: w - kept,
    })
}

/// Whether `V` lies in the tangent cone to the variety at `X`, up to `tol`:
/// the part of `V` outside the row/column spaces of `X` must have numerical
/// rank at most `r − rank X`, treating singular values `≤ tol` as zero.
pub fn in_tangent_cone(x: &Matrix, v: &Matrix, spec: &VarietySpec, tol: f64) -> Result<bool> {
    spec.check_dims(x)?;
    spec.check_dims(v)?;
    let factors = thin_svd(x)?;
    let s = rank_of_sigma(&factors.sigma, spec.rank_tol);
    if s > spec.r {
        return Err(Error::RankExceedsVariety { rank: s, r: spec.r });
    }
    let w = complement_block(&factors, s, v);
    let w_sigma = thin_svd(&w)?.sigma;
    let outer_rank = w_sigma.iter().filter(|&&s| s > tol).count();
    Ok(outer_rank <= spec.r - s)
}

/// The stationarity measure `s_f(X) = ‖P_{T_X}(−∇f(X))‖_F`, evaluated from
/// a precomputed gradient. Zero exactly at stationary points of the
/// rank-constrained problem.
pub fn stationarity_measure(x: &Matrix, grad: &Matrix, spec: &VarietySpec) -> Result<f64> {
    Ok(project_tangent_cone(x, &(-grad), spec)?.s_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn diag3(a: f64, b: f64, c: f64) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a, b, c]))
    }

    fn diag2(a: f64, b: f64) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a, b]))
    }

    fn random_matrix(rng: &mut impl Rng, m: usize, n: usize) -> Matrix {
        Matrix::from_fn(m, n, |_, _| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn thin_svd_diagonal_descending() {
        let f = thin_svd(&diag3(2.0, 1.0, 0.0)).unwrap();
        assert_eq!(f.sigma.as_slice(), &[2.0, 1.0, 0.0]);
    }

    #[test]
    fn thin_svd_zero_matrix() {
        let f = thin_svd(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(f.sigma.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn thin_svd_rejects_non_finite() {
        let mut x = Matrix::zeros(2, 2);
        x[(0, 0)] = f64::NAN;
        assert!(matches!(thin_svd(&x), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn thin_svd_reconstructs_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_matrix(&mut rng, 3, 3);
            let f = thin_svd(&x).unwrap();
            // Orthonormal columns to 1e-12.
            let eye_u = f.u.transpose() * &f.u;
            let eye_v = f.v.transpose() * &f.v;
            assert!((eye_u - Matrix::identity(3, 3)).norm() < 1e-12);
            assert!((eye_v - Matrix::identity(3, 3)).norm() < 1e-12);
            // Descending sigma.
            for j in 1..f.sigma.len() {
                assert!(f.sigma[j - 1] >= f.sigma[j]);
            }
            // Reconstruction to 1e-10 relative.
            let rec = f.reconstruct_rank(3);
            assert!((&rec - &x).norm() <= 1e-10 * x.norm());
        }
    }

    #[test]
    fn thin_svd_sign_convention_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 3, 3);
        let f1 = thin_svd(&x).unwrap();
        let f2 = thin_svd(&x).unwrap();
        assert_eq!(f1.u, f2.u);
        assert_eq!(f1.v, f2.v);
        for j in 0..f1.u.ncols() {
            let col = f1.u.column(j);
            let max = col.iter().cloned().fold(f64::MIN, f64::max);
            let max_abs = col.iter().map(|e| e.abs()).fold(f64::MIN, f64::max);
            assert_relative_eq!(max, max_abs, max_relative = 1e-15);
        }
    }

    #[test]
    fn numerical_rank_examples() {
        let spec = VarietySpec::new(2, 2, 1).unwrap();
        assert_eq!(numerical_rank(&diag2(1.0, 0.0), &spec).unwrap(), 1);
        assert_eq!(numerical_rank(&Matrix::zeros(2, 2), &spec).unwrap(), 0);
        assert_eq!(numerical_rank(&diag2(1.0, 3e-13), &spec).unwrap(), 1);
        assert_eq!(numerical_rank(&diag2(1.0, 1e-6), &spec).unwrap(), 2);
    }

    #[test]
    fn delta_rank_examples() {
        // Fifth iterate of the 3x3 run: diag(1+(-3/5)^5, (3/5)^5, 0).
        let x5 = diag3(1.0 + (-0.6f64).powi(5), 0.6f64.powi(5), 0.0);
        assert_eq!(delta_rank(&x5, 0.1).unwrap(), 1);
        assert_eq!(delta_rank(&diag3(2.0, 1.0, 0.0), 0.1).unwrap(), 2);
        assert_eq!(delta_rank(&Matrix::zeros(2, 2), 0.0).unwrap(), 0);
        assert_eq!(delta_rank(&Matrix::zeros(2, 2), 5.0).unwrap(), 0);
    }

    #[test]
    fn delta_rank_monotone_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 3, 3);
            let deltas = [0.0, 0.1, 0.5, 1.0, 2.0, 10.0];
            let ranks: Vec<usize> = deltas.iter().map(|&d| delta_rank(&x, d).unwrap()).collect();
            for w in ranks.windows(2) {
                assert!(w[0] >= w[1], "delta_rank must be nonincreasing in delta");
            }
            let c = rng.random_range(0.1..10.0);
            for &d in &deltas {
                assert_eq!(
                    delta_rank(&(&x * c), c * d).unwrap(),
                    delta_rank(&x, d).unwrap()
                );
            }
        }
    }

    #[test]
    fn project_to_rank_examples() {
        let x = diag3(2.0, 1.0, 0.0);
        assert_eq!(project_to_rank(&x, 1).unwrap(), diag3(2.0, 0.0, 0.0));
        assert_eq!(project_to_rank(&x, 0).unwrap(), Matrix::zeros(3, 3));
        // Rank-1 truncation of the fifth 3x3 iterate keeps sigma_1 = 1+(-3/5)^5.
        let x5 = diag3(1.0 + (-0.6f64).powi(5), 0.6f64.powi(5), 0.0);
        let t = project_to_rank(&x5, 1).unwrap();
        assert_relative_eq!(t[(0, 0)], 0.92224, max_relative = 1e-12);
        assert_eq!(t[(1, 1)], 0.0);
        assert!(matches!(
            project_to_rank(&x, 4),
            Err(Error::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn eckart_young_beats_random_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_matrix(&mut rng, 3, 3);
        for r in 0..=2usize {
            let best = (&x - project_to_rank(&x, r).unwrap()).norm();
            for _ in 0..10_000 {
                let a = random_matrix(&mut rng, 3, r.max(1));
                let b = random_matrix(&mut rng, 3, r.max(1));
                let cand = if r == 0 {
                    Matrix::zeros(3, 3)
                } else {
                    a * b.transpose()
                };
                assert!(best <= (&x - cand).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn tangent_projection_on_rank_deficient_diagonal() {
        // At X = diag(x, 0) with r = 1 the cone only allows the first axis:
        // Z = diag(-x, 1) projects to diag(-x, 0) with s_f = x.
        let spec = VarietySpec::new(2, 2, 1).unwrap();
        for &x in &[1.0, 0.4, 0.16] {
            let p = project_tangent_cone(&diag2(x, 0.0), &diag2(-x, 1.0), &spec).unwrap();
            assert_eq!(p.direction, diag2(-x, 0.0));
            assert_eq!(p.s_f, x);
        }
    }

    #[test]
    fn tangent_projection_at_zero_truncates() {
        // The cone at 0 is the variety itself.
        let spec = VarietySpec::new(2, 2, 1).unwrap();
        let p = project_tangent_cone(&Matrix::zeros(2, 2), &diag2(0.0, 1.0), &spec).unwrap();
        assert_eq!(p.direction, diag2(0.0, 1.0));
        assert_eq!(p.s_f, 1.0);

        let p = project_tangent_cone(&Matrix::zeros(2, 2), &diag2(4.0, 6.0), &spec).unwrap();
        assert_eq!(p.direction, diag2(0.0, 6.0));
        assert_eq!(p.s_f, 6.0);
        assert_eq!(p.residual_rank_block, diag2(4.0, 0.0));
    }

    #[test]
    fn tangent_projection_rejects_overranked_point() {
        let spec = VarietySpec::new(2, 2, 1).unwrap();
        let err = project_tangent_cone(&diag2(1.0, 1.0), &diag2(1.0, 1.0), &spec);
        assert!(matches!(err, Err(Error::RankExceedsVariety { .. })));
    }

    #[test]
    fn in_tangent_cone_examples() {
        let spec = VarietySpec::new(2, 2, 1).unwrap();
        let x = diag2(1.0, 0.0);
        assert!(in_tangent_cone(&x, &x, &spec, 1e-10).unwrap());
        assert!(!in_tangent_cone(&x, &diag2(0.0, 1.0), &spec, 1e-10).unwrap());
        let zero = Matrix::zeros(2, 2);
        assert!(in_tangent_cone(&zero, &diag2(0.0, 3.0), &spec, 1e-10).unwrap());
    }

    #[test]
    fn moreau_orthogonality_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec2 = VarietySpec::new(3, 3, 2).unwrap();
        let spec1 = VarietySpec::new(3, 3, 1).unwrap();
        for _ in 0..100 {
            let s = rng.random_range(0..=2usize);
            let x = if s == 0 {
                Matrix::zeros(3, 3)
            } else {
                let a = random_matrix(&mut rng, 3, s);
                let b = random_matrix(&mut rng, 3, s);
                a * b.transpose()
            };
            let z = random_matrix(&mut rng, 3, 3);
            for spec in [&spec1, &spec2] {
                if s > spec.max_rank() {
                    continue;
                }
                let p = project_tangent_cone(&x, &z, spec).unwrap();
                let resid = &z - &p.direction;
                let tol = 1e-10 * z.norm_squared().max(1.0);
                assert!(p.direction.dot(&resid).abs() <= tol);
                assert!((z.norm_squared() - p.s_f * p.s_f - resid.norm_squared()).abs() <= tol);
                // Membership and idempotence.
                assert!(in_tangent_cone(&x, &p.direction, spec, 1e-9).unwrap());
                let again = project_tangent_cone(&x, &p.direction, spec).unwrap();
                assert!((&again.direction - &p.direction).norm() <= 1e-12 * (1.0 + p.s_f));
            }
        }
    }

    #[test]
    fn stationarity_measure_norm_dominance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = VarietySpec::new(3, 3, 2).unwrap();
        for _ in 0..50 {
            let a = random_matrix(&mut rng, 3, 1);
            let b = random_matrix(&mut rng, 3, 1);
            let x = a * b.transpose();
            let g = random_matrix(&mut rng, 3, 3);
            let s_f = stationarity_measure(&x, &g, &spec).unwrap();
            assert!(s_f <= g.norm() + 1e-12);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn entries() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-3.0..3.0f64, 9)
        }

        fn low_rank_point(s: usize, a: &[f64], b: &[f64]) -> Matrix {
            if s == 0 {
                return Matrix::zeros(3, 3);
            }
            let a = Matrix::from_column_slice(3, s, &a[..3 * s]);
            let b = Matrix::from_column_slice(3, s, &b[..3 * s]);
            a * b.transpose()
        }

        proptest! {
            // Projection onto a closed cone: the chosen element is
            // orthogonal to the residual, lives in the cone, and projects
            // to itself.
            #[test]
            fn moreau_membership_idempotence(
                r in 1..=2usize,
                s in 0..=2usize,
                a in entries(),
                b in entries(),
                z_entries in entries(),
            ) {
                prop_assume!(s <= r);
                let spec = VarietySpec::new(3, 3, r).unwrap();
                let x = low_rank_point(s, &a, &b);
                let z = Matrix::from_column_slice(3, 3, &z_entries);
                let p = project_tangent_cone(&x, &z, &spec).unwrap();
                let resid = &z - &p.direction;
                let tol = 1e-10 * z.norm_squared().max(1.0);
                prop_assert!(p.direction.dot(&resid).abs() <= tol);
                prop_assert!(p.s_f <= z.norm() + 1e-12);
                prop_assert!(in_tangent_cone(&x, &p.direction, &spec, 1e-9).unwrap());
                let again = project_tangent_cone(&x, &p.direction, &spec).unwrap();
                prop_assert!((&again.direction - &p.direction).norm() <= 1e-12 * (1.0 + p.s_f));
            }

            // delta_rank is nonincreasing in delta and invariant under
            // joint positive scaling of the matrix and the threshold.
            #[test]
            fn delta_rank_monotone_and_scale_covariant(
                m in entries(),
                d1 in 0.0..2.0f64,
                d2 in 0.0..2.0f64,
                c in 0.01..100.0f64,
            ) {
                let x = Matrix::from_column_slice(3, 3, &m);
                let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
                prop_assert!(delta_rank(&x, lo).unwrap() >= delta_rank(&x, hi).unwrap());
                prop_assert_eq!(
                    delta_rank(&(&x * c), c * lo).unwrap(),
                    delta_rank(&x, lo).unwrap()
                );
            }
        }
    }
}
