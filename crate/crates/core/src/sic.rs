//! Exact digital MMSE-SIC.
//!
//! This is the reference the analog pipeline is checked against. All matrix
//! computations run on the real-valued ("realified") form of the complex
//! problem, the same form the crossbar arrays implement.

use crate::mimo::{Constellation, MimoConfig};
use crate::{CMatrix, CVector, Error, RMatrix, RVector, Result, C64};

/// `V(x) = [Re x; Im x]`.
pub fn realify_vector(x: &CVector) -> RVector {
    let n = x.len();
    RVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`realify_vector`].
pub fn complexify_vector(x: &RVector) -> CVector {
    let n = x.len() / 2;
    CVector::from_fn(n, |i, _| C64::new(x[i], x[i + n]))
}

/// `M(A) = [[Re A, -Im A], [Im A, Re A]]`.
pub fn realify_matrix(a: &CMatrix) -> RMatrix {
    let (m, n) = a.shape();
    RMatrix::from_fn(2 * m, 2 * n, |i, j| {
        let z = a[(i % m, j % n)];
        match (i < m, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Detection sequence `m_1..m_K` as 0-based user indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionOrder(Vec<usize>);

impl DetectionOrder {
    pub fn new(seq: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; seq.len()];
        for &i in &seq {
            if i >= seq.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("{seq:?} is not a permutation")));
            }
        }
        Ok(Self(seq))
    }

    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `G = [f_{m_1}, ..., f_{m_K}]`.
    pub fn permute_columns(&self, f: &CMatrix) -> CMatrix {
        CMatrix::from_fn(f.nrows(), self.0.len(), |i, j| f[(i, self.0[j])])
    }

    /// Puts detection-ordered estimates back into user order.
    pub fn unpermute(&self, detected: &[C64]) -> CVector {
        let mut out = CVector::zeros(detected.len());
        for (k, &user) in self.0.iter().enumerate() {
            out[user] = detected[k];
        }
        out
    }
}

/// Column-norm ordering: strongest column first, ties to the lower index.
pub fn order_columns(f: &CMatrix) -> Result<DetectionOrder> {
    let norms: Vec<f64> = f.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateChannel(j));
    }
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    // stable sort keeps the lower index first on ties
    idx.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    Ok(DetectionOrder(idx))
}

/// Solves `(AᵀA + σ²I) r = Aᵀ b` by Cholesky.
pub fn solve_regularized(a: &RMatrix, b: &RVector, noise_variance: f64) -> Result<RVector> {
    let mut normal = a.tr_mul(a);
    for i in 0..normal.nrows() {
        normal[(i, i)] += noise_variance;
    }
    let rhs = a.tr_mul(b);
    let scale = normal.diagonal().max();
    let chol = normal
        .cholesky()
        .ok_or(Error::Singular("regularized normal matrix is not positive definite"))?;
    // Rounding can let a rank-deficient matrix through the factorization.
    let pivot = chol.l_dirty().diagonal().min();
    if !(pivot * pivot > normal_tolerance(a.ncols(), scale)) {
        return Err(Error::Singular("regularized normal matrix is numerically singular"));
    }
    Ok(chol.solve(&rhs))
}

fn normal_tolerance(n: usize, scale: f64) -> f64 {
    n as f64 * f64::EPSILON * scale
}

/// One MMSE stage: `r_k = (G̃ᵀG̃ + σ²I)⁻¹ G̃ᵀ Ṽ(residual)` with `G̃ = M(G_tail)`.
pub fn mmse_stage(g_tail: &CMatrix, residual: &CVector, noise_variance: f64) -> Result<RVector> {
    if residual.len() != g_tail.nrows() {
        return Err(Error::Dimension {
            what: "residual vector",
            expected: g_tail.nrows(),
            got: residual.len(),
        });
    }
    solve_regularized(
        &realify_matrix(g_tail),
        &realify_vector(residual),
        noise_variance,
    )
}

/// Index of the level nearest to `x`, with ties going to the lower level.
///
/// Counts the midpoints that `x` strictly exceeds, which is exactly what a
/// bank of strict greater-than comparators does.
pub fn nearest_level_index(x: f64, levels: &[f64]) -> usize {
    levels
        .windows(2)
        .filter(|w| x > (w[0] + w[1]) / 2.0)
        .count()
}

/// `Q(a1, a2)` on the constellation's voltage levels.
pub fn ideal_slice(a1: f64, a2: f64, constellation: &Constellation) -> C64 {
    let levels = constellation.per_axis_levels();
    C64::new(
        levels[nearest_level_index(a1, &levels)],
        levels[nearest_level_index(a2, &levels)],
    )
}

/// `Q(a1, a2)` in symbol units.
pub fn slice_symbol(a1: f64, a2: f64, constellation: &Constellation) -> C64 {
    let levels = constellation.unit_levels();
    constellation.point_from_indices(
        nearest_level_index(a1, levels),
        nearest_level_index(a2, levels),
    )
}

/// Stage record: the real result vector, its complex form and the decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SicStage {
    pub r: RVector,
    pub b: CVector,
    pub estimate: C64,
}

impl SicStage {
    /// The two slicer inputs, `r_k(1)` and `r_k(K+2-k)`.
    pub fn slicer_inputs(&self) -> (f64, f64) {
        (self.r[0], self.r[self.r.len() / 2])
    }
}

/// Everything produced along the way by one SIC run.
#[derive(Debug, Clone, PartialEq)]
pub struct SicTrace {
    pub order: DetectionOrder,
    /// `G`, the column-permuted transfer matrix.
    pub ordered: CMatrix,
    pub stages: Vec<SicStage>,
}

impl SicTrace {
    /// `G_⟨k⟩` for 0-based stage `k` (columns `k..K`).
    pub fn tail(&self, k: usize) -> CMatrix {
        self.ordered.columns(k, self.ordered.ncols() - k).into_owned()
    }

    /// `G_(k-1)` for 0-based stage `k` (columns `0..k`).
    pub fn head(&self, k: usize) -> CMatrix {
        self.ordered.columns(0, k).into_owned()
    }

    /// `e_(K)`, estimates in detection order.
    pub fn estimates(&self) -> Vec<C64> {
        self.stages.iter().map(|s| s.estimate).collect()
    }
}

/// Full MMSE-SIC. Returns the estimates in user order and the trace.
pub fn sic_detect(
    f: &CMatrix,
    y: &CVector,
    noise_variance: f64,
    constellation: &Constellation,
) -> Result<(CVector, SicTrace)> {
    if y.len() != f.nrows() {
        return Err(Error::Dimension {
            what: "received vector",
            expected: f.nrows(),
            got: y.len(),
        });
    }
    let order = order_columns(f)?;
    let g = order.permute_columns(f);
    let k_total = g.ncols();
    let mut stages: Vec<SicStage> = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let tail = g.columns(k, k_total - k);
        let head = g.columns(0, k);
        let e_head = CVector::from_iterator(k, stages.iter().map(|s| s.estimate));
        let residual = y - head * e_head;
        let r = mmse_stage(&tail.into_owned(), &residual, noise_variance)?;
        let n = k_total - k;
        let estimate = slice_symbol(r[0], r[n], constellation);
        stages.push(SicStage {
            b: complexify_vector(&r),
            r,
            estimate,
        });
    }
    let trace = SicTrace {
        ordered: g,
        order,
        stages,
    };
    let symbols = trace.order.unpermute(&trace.estimates());
    Ok((symbols, trace))
}

/// Equivalent FLOP count of the digital MMSE-SIC for `K` users and `R`
/// antennas.
///
/// Convention (real-valued formulation, one FLOP per real add or multiply):
/// for stage `k` with `n = 2(K-k+1)` unknowns and `m = 2R` rows,
///
/// | step                 | count            |
/// |----------------------|------------------|
/// | Gram product         | `2·n²·m`         |
/// | regularization       | `n`              |
/// | Cholesky             | `⌊n³/3⌋`         |
/// | two triangular solves| `2·n²`           |
/// | matched filter       | `2·n·m`          |
/// | cancellation update  | `2·m·2(k-1)`     |
pub fn flop_count_dims(num_users: usize, num_bs_antennas: usize) -> u64 {
    let m = 2 * num_bs_antennas as u64;
    (1..=num_users as u64)
        .map(|k| {
            let n = 2 * (num_users as u64 - k + 1);
            2 * n * n * m + n + n * n * n / 3 + 2 * n * n + 2 * n * m + 2 * m * 2 * (k - 1)
        })
        .sum()
}

/// [`flop_count_dims`] for a configuration.
pub fn flop_count(cfg: &MimoConfig) -> u64 {
    flop_count_dims(cfg.num_users(), cfg.num_bs_antennas())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mimo::{build_constellation, generate_channel, MimoConfig};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cmatrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
        DMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn rel(a: &RMatrix, b: &RMatrix) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn realify_vector_definition() {
        let x = CVector::from_vec(vec![C64::new(1.0, 2.0)]);
        assert_eq!(realify_vector(&x).as_slice(), &[1.0, 2.0]);
        let z = CVector::zeros(3);
        assert_eq!(realify_vector(&z), RVector::zeros(6));
    }

    #[test]
    fn realify_matrix_identity() {
        assert_eq!(realify_matrix(&CMatrix::identity(3, 3)), RMatrix::identity(6, 6));
    }

    #[test]
    fn realify_homomorphisms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = rand_cmatrix(&mut rng, 4, 3);
            let b = rand_cmatrix(&mut rng, 3, 5);
            let x = rand_cmatrix(&mut rng, 3, 1).column(0).into_owned();
            // V(Ax) = M(A)V(x), oracle is plain complex arithmetic
            let lhs = realify_vector(&(&a * &x));
            let rhs = realify_matrix(&a) * realify_vector(&x);
            assert!((&lhs - &rhs).norm() <= 1e-12 * lhs.norm());
            assert!(rel(&realify_matrix(&a.adjoint()), &realify_matrix(&a).transpose()) < 1e-12);
            assert!(rel(&(realify_matrix(&a) * realify_matrix(&b)), &realify_matrix(&(&a * &b))) < 1e-12);
        }
    }

    #[test]
    fn ordering_by_descending_norm() {
        let f = CMatrix::from_fn(1, 3, |_, j| C64::new([1.0, 3.0, 2.0][j], 0.0));
        assert_eq!(order_columns(&f).unwrap().as_slice(), &[1, 2, 0]);
        let eq = CMatrix::from_element(2, 4, C64::new(0.5, -0.5));
        assert_eq!(order_columns(&eq).unwrap().as_slice(), &[0, 1, 2, 3]);
    }

    #[test]
    fn ordering_rejects_zero_column() {
        let mut f = CMatrix::from_element(2, 3, C64::new(1.0, 0.0));
        f.column_mut(1).fill(C64::new(0.0, 0.0));
        assert_eq!(order_columns(&f), Err(Error::DegenerateChannel(1)));
    }

    #[test]
    fn ordering_is_non_increasing_on_random_channels() {
        let cfg = MimoConfig::equal_power(8, 16, 0.1, 16).unwrap();
        for seed in 0..20 {
            let ch = generate_channel(&cfg, seed);
            let order = order_columns(&ch.f).unwrap();
            let norms: Vec<f64> = order.as_slice().iter().map(|&j| ch.f.column(j).norm()).collect();
            assert!(norms.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn detection_order_validates_permutation() {
        assert!(DetectionOrder::new(vec![2, 0, 1]).is_ok());
        assert!(DetectionOrder::new(vec![0, 0, 1]).is_err());
        assert!(DetectionOrder::new(vec![0, 3]).is_err());
    }

    #[test]
    fn mmse_identity_channel() {
        let g = CMatrix::identity(3, 3);
        let y = CVector::from_vec(vec![C64::new(1.0, -1.0), C64::new(0.3, 0.0), C64::new(-2.0, 0.5)]);
        let r = mmse_stage(&g, &y, 0.0).unwrap();
        assert!((r - realify_vector(&y)).norm() < 1e-14);
    }

    #[test]
    fn mmse_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rand_cmatrix(&mut rng, 6, 3);
        let q = a.qr().q();
        let y = rand_cmatrix(&mut rng, 6, 1).column(0).into_owned();
        let r = mmse_stage(&q, &y, 0.0).unwrap();
        let want = realify_vector(&(q.adjoint() * &y));
        assert!((r - want).norm() < 1e-12);
    }

    #[test]
    fn mmse_matches_independent_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let g = rand_cmatrix(&mut rng, 4, 2);
            let y = rand_cmatrix(&mut rng, 4, 1).column(0).into_owned();
            let r = mmse_stage(&g, &y, 0.1).unwrap();
            // independent route: complex normal equations solved by LU
            let mut normal = g.adjoint() * &g;
            for i in 0..2 {
                normal[(i, i)] += C64::new(0.1, 0.0);
            }
            let b = normal.lu().solve(&(g.adjoint() * &y)).unwrap();
            let want = realify_vector(&b);
            assert!((&r - &want).norm() / want.norm() < 1e-10);
        }
    }

    #[test]
    fn mmse_singular_without_regularization() {
        let g = CMatrix::from_element(4, 2, C64::new(1.0, 1.0));
        let y = CVector::from_element(4, C64::new(1.0, 0.0));
        assert!(matches!(mmse_stage(&g, &y, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn ideal_slice_table_row() {
        let c = build_constellation(16, 0.1).unwrap();
        let z = ideal_slice(0.015, -0.04, &c);
        let x = 0.1 / 10f64.sqrt();
        assert!((z.re - x).abs() < 1e-15 && (z.im + x).abs() < 1e-15);
    }

    #[test]
    fn ideal_slice_fixed_points_and_brute_force() {
        let c = build_constellation(16, 0.1).unwrap();
        let levels = c.per_axis_levels();
        for &l in &levels {
            let z = ideal_slice(l, l, &c);
            assert_eq!((z.re, z.im), (l, l));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a1 = rng.random_range(-0.2..0.2);
            let a2 = rng.random_range(-0.2..0.2);
            let z = ideal_slice(a1, a2, &c);
            let brute = |v: f64| {
                *levels
                    .iter()
                    .min_by(|a, b| (v - **a).abs().total_cmp(&(v - **b).abs()))
                    .unwrap()
            };
            assert_eq!(z.re, brute(a1));
            assert_eq!(z.im, brute(a2));
        }
    }

    #[test]
    fn tie_goes_to_lower_level() {
        assert_eq!(nearest_level_index(0.0, &[-1.0, 1.0]), 0);
        assert_eq!(nearest_level_index(1e-300, &[-1.0, 1.0]), 1);
    }

    #[test]
    fn noise_free_recovery() {
        let c = build_constellation(16, 1.0).unwrap();
        let cfg = MimoConfig::equal_power(6, 12, 0.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..30 {
            let ch = generate_channel(&cfg, seed);
            let bits = crate::mimo::random_bits(&mut rng, 24);
            let s = c.modulate(&bits).unwrap();
            let y = &ch.f * &s;
            let (s_hat, trace) = sic_detect(&ch.f, &y, 0.0, &c).unwrap();
            assert_eq!(s_hat, s);
            assert_eq!(trace.stages.len(), 6);
        }
    }

    #[test]
    fn single_user_is_plain_mmse() {
        let c = build_constellation(4, 1.0).unwrap();
        let f = CMatrix::from_fn(3, 1, |i, _| C64::new(1.0 + i as f64, -0.5));
        let y = CVector::from_fn(3, |i, _| C64::new(0.2 * i as f64, 0.7));
        let (s_hat, trace) = sic_detect(&f, &y, 0.3, &c).unwrap();
        let r = mmse_stage(&f, &y, 0.3).unwrap();
        assert_eq!(trace.stages.len(), 1);
        assert_eq!(trace.stages[0].r, r);
        assert_eq!(s_hat[0], slice_symbol(r[0], r[1], &c));
    }

    #[test]
    fn qpsk_two_users_exhaustive() {
        let c = build_constellation(4, 1.0).unwrap();
        let cfg = MimoConfig::equal_power(2, 4, 0.0, 4).unwrap();
        let ch = generate_channel(&cfg, 42);
        for a in c.points() {
            for b in c.points() {
                let s = CVector::from_vec(vec![*a, *b]);
                let y = &ch.f * &s;
                let (s_hat, _) = sic_detect(&ch.f, &y, 0.0, &c).unwrap();
                assert_eq!(s_hat, s);
            }
        }
    }

    #[test]
    fn trace_layout_consistency() {
        let c = build_constellation(16, 1.0).unwrap();
        let cfg = MimoConfig::equal_power(5, 10, 0.2, 16).unwrap();
        let ch = generate_channel(&cfg, 8);
        let y = CVector::from_fn(10, |i, _| C64::new(i as f64 * 0.1, -0.3));
        let (_, trace) = sic_detect(&ch.f, &y, 0.2, &c).unwrap();
        for (k, st) in trace.stages.iter().enumerate() {
            assert_eq!(st.r.len(), 2 * (5 - k));
            assert_eq!(realify_vector(&st.b), st.r);
            let (a1, a2) = st.slicer_inputs();
            assert_eq!((a1, a2), (st.b[0].re, st.b[0].im));
            assert_eq!(trace.tail(k).ncols(), 5 - k);
            assert_eq!(trace.head(k).ncols(), k);
        }
        for (j, &user) in trace.order.as_slice().iter().enumerate() {
            assert_eq!(trace.ordered.column(j), ch.f.column(user));
        }
    }

    #[test]
    fn flop_count_smallest_case() {
        // n = 2, m = 2: 16 + 2 + 2 + 8 + 8 + 0
        assert_eq!(flop_count_dims(1, 1), 36);
    }

    #[test]
    fn flop_count_monotone() {
        for k in 1..12 {
            for r in 1..20 {
                assert!(flop_count_dims(k + 1, r) > flop_count_dims(k, r));
                assert!(flop_count_dims(k, r + 1) > flop_count_dims(k, r));
            }
        }
    }

    #[test]
    fn flop_count_reference_scale() {
        let n = flop_count_dims(32, 64) as f64;
        let ratio = n / 2.68e7;
        assert!((0.3..=3.0).contains(&ratio), "{ratio}");
    }
}
