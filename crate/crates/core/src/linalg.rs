//! Small dense linear-algebra helpers shared by the analysis and experiment code.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Compensated running sum: every addition's rounding error is recovered
/// exactly (branch-free two-sum) and accumulated separately. Deterministic for
/// a fixed input order, with an error bound that does not grow with the
/// number of terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        let bp = t - self.sum;
        self.comp += (self.sum - (t - bp)) + (x - bp);
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

pub fn frob2(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

const GRAM_BLOCK: usize = 4096;

/// `AᵀA`, accumulated over row blocks that fit in cache.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = a.shape();
    let mut g = DMatrix::<f64>::zeros(d, d);
    let mut block = DMatrix::<f64>::zeros(0, d);
    for start in (0..n).step_by(GRAM_BLOCK) {
        let len = GRAM_BLOCK.min(n - start);
        if block.nrows() != len {
            block = DMatrix::zeros(len, d);
        }
        block.copy_from(&a.rows(start, len));
        g.gemm_tr(1.0, &block, &block, 1.0);
    }
    g
}

/// A `d×k` matrix with orthonormal columns spanning a uniformly random subspace.
pub fn random_orthonormal<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(k <= d, "cannot draw {k} orthonormal vectors in dimension {d}");
    let g = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    q.columns(0, k).into_owned()
}

/// `‖XᵀX − I‖_F`.
pub fn orthonormality_defect(x: &DMatrix<f64>) -> f64 {
    let k = x.ncols();
    (x.tr_mul(x) - DMatrix::<f64>::identity(k, k)).norm()
}

/// Orders `(value, vector)` pairs by descending value and fixes signs so the
/// largest-magnitude entry of every vector is positive. Values equal within
/// `tie_tol` (relative to the largest) are ordered by the position of each
/// vector's largest-magnitude entry.
pub fn canonical_order(
    values: &[f64],
    vectors: &DMatrix<f64>,
    tie_tol: f64,
) -> (Vec<f64>, DMatrix<f64>) {
    let p = values.len();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let peak = |j: usize| -> usize {
        let col = vectors.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        best
    };
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (values[a], values[b]);
        if (va - vb).abs() <= tie_tol * scale {
            peak(a).cmp(&peak(b))
        } else {
            vb.partial_cmp(&va).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let mut out = DMatrix::<f64>::zeros(vectors.nrows(), p);
    let mut vals = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vectors.column(src).into_owned();
        let pk = peak(src);
        if col[pk] < 0.0 {
            col.neg_mut();
        }
        out.set_column(dst, &col);
        vals.push(values[src]);
    }
    (vals, out)
}

/// Top-`k` eigenpairs of a symmetric matrix, canonically ordered.
pub fn top_eigen_sym(g: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (g + g.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let (vals, vecs) = canonical_order(&values, &eig.eigenvectors, 1e-12);
    (vals[..k].to_vec(), vecs.columns(0, k).into_owned())
}

/// Right singular vectors of `y` with their singular values, canonically ordered.
pub fn right_singular(y: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = y.clone().svd(false, true);
    let v = svd.v_t.expect("requested right singular vectors").transpose();
    let values: Vec<f64> = svd.singular_values.iter().copied().collect();
    canonical_order(&values, &v, 1e-12)
}

/// Solves the symmetric positive definite system `m x = rhs` with one step of
/// iterative refinement.
pub fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = m.clone().cholesky()?;
    let mut x = chol.solve(rhs);
    let r = rhs - m * &x;
    x += chol.solve(&r);
    Some(x)
}
