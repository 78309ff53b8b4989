//! Public sketch matrices: sparse OSNAP and dense Rademacher.
//!
//! A sketch `S ∈ R^{m×n}` with `s` nonzeros per column is stored as its
//! decomposition `S = (1/√s)·Σ_i S_i`, where every piece `S_i` has exactly one
//! `±1` per column. A piece is therefore just two length-`n` arrays: the row of
//! each column's nonzero and its sign.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frob2, random_orthonormal, CompensatedSum};
use crate::rng::{derive_seed, stream_rng};

const SKETCH_LABEL: u64 = 0x534b_4554_4348;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchMode {
    SparseOsnap,
    DenseRademacher,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub mode: SketchMode,
    pub seed: u64,
    /// Draw the `s` rows of a column independently instead of without
    /// replacement. Only meaningful in sparse mode.
    #[serde(default)]
    pub with_replacement: bool,
}

impl SketchSpec {
    pub fn sparse(n: usize, m: usize, s: usize, seed: u64) -> Self {
        SketchSpec { n, m, s, mode: SketchMode::SparseOsnap, seed, with_replacement: false }
    }

    /// Dense Rademacher sketch; `s` is forced to `m`.
    pub fn dense(n: usize, m: usize, seed: u64) -> Self {
        SketchSpec { n, m, s: m, mode: SketchMode::DenseRademacher, seed, with_replacement: false }
    }

    pub fn is_dense(&self) -> bool {
        self.mode == SketchMode::DenseRademacher
    }

    pub fn validate(&self) -> Result<()> {
        let SketchSpec { n, m, s, .. } = *self;
        if m == 0 || n == 0 || s == 0 {
            return Err(Error::param(format!("n, m, s must be positive (n={n}, m={m}, s={s})")));
        }
        if s > m {
            return Err(Error::param(format!("s={s} exceeds m={m}")));
        }
        if m > n {
            return Err(Error::param(format!("m={m} exceeds n={n}")));
        }
        if m > u32::MAX as usize {
            return Err(Error::param(format!("m={m} does not fit the row index type")));
        }
        if self.is_dense() {
            if s != m {
                return Err(Error::Structure(format!("dense mode requires s = m (s={s}, m={m})")));
            }
            if n % m != 0 {
                return Err(Error::Structure(format!(
                    "dense mode requires m | n (n={n}, m={m}); pad the input with pad_rows first"
                )));
            }
        }
        Ok(())
    }
}

/// One piece `S_i`: column `j` has the value `signs[j]` in row `rows[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchPiece {
    pub rows: Vec<u32>,
    pub signs: Vec<i8>,
}

impl SketchPiece {
    fn with_capacity(n: usize) -> Self {
        SketchPiece { rows: Vec::with_capacity(n), signs: Vec::with_capacity(n) }
    }

    pub fn row_loads(&self, m: usize) -> Vec<usize> {
        let mut loads = vec![0; m];
        for &r in &self.rows {
            loads[r as usize] += 1;
        }
        loads
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SketchDecomposition {
    n: usize,
    m: usize,
    pieces: Vec<SketchPiece>,
}

/// Draws the sketch described by `spec`. Deterministic in `spec`.
pub fn sample_sketch(spec: &SketchSpec) -> Result<SketchDecomposition> {
    spec.validate()?;
    let mut rng = stream_rng(derive_seed(spec.seed, &[SKETCH_LABEL]), 0);
    let pieces = match spec.mode {
        SketchMode::SparseOsnap => sample_sparse(spec, &mut rng),
        SketchMode::DenseRademacher => sample_dense(spec, &mut rng),
    };
    Ok(SketchDecomposition { n: spec.n, m: spec.m, pieces })
}

fn sample_sparse<R: Rng>(spec: &SketchSpec, rng: &mut R) -> Vec<SketchPiece> {
    let SketchSpec { n, m, s, .. } = *spec;
    let mut pieces: Vec<SketchPiece> = (0..s).map(|_| SketchPiece::with_capacity(n)).collect();
    let mut perm: Vec<u32> = (0..m as u32).collect();
    let mut swaps = Vec::with_capacity(s);
    for _ in 0..n {
        if spec.with_replacement {
            for piece in pieces.iter_mut() {
                piece.rows.push(rng.random_range(0..m as u32));
                piece.signs.push(if rng.random::<bool>() { 1 } else { -1 });
            }
            continue;
        }
        // Partial Fisher-Yates: the k-th draw lands in piece k, so the
        // assignment of a column's nonzeros to pieces is uniform as well.
        for (k, piece) in pieces.iter_mut().enumerate() {
            let r = rng.random_range(k..m);
            perm.swap(k, r);
            swaps.push(r);
            piece.rows.push(perm[k]);
            piece.signs.push(if rng.random::<bool>() { 1 } else { -1 });
        }
        for (k, r) in swaps.drain(..).enumerate().rev() {
            perm.swap(k, r);
        }
    }
    pieces
}

fn sample_dense<R: Rng>(spec: &SketchSpec, rng: &mut R) -> Vec<SketchPiece> {
    let SketchSpec { n, m, .. } = *spec;
    let mut pieces: Vec<SketchPiece> = (0..m)
        .map(|_| SketchPiece { rows: vec![0; n], signs: vec![0; n] })
        .collect();
    let mut clients: Vec<usize> = (0..n).collect();
    shuffle(&mut clients, rng);
    let mut row_perm: Vec<u32> = (0..m as u32).collect();
    let mut piece_perm: Vec<usize> = (0..m).collect();
    // Clients are cut into groups of m. Within a group, piece i sends the
    // a-th client to row π((a + i) mod m): a Latin square, so every piece
    // hits each row once per group and every client hits each row once.
    for group in clients.chunks(m) {
        shuffle(&mut row_perm, rng);
        shuffle(&mut piece_perm, rng);
        for (a, &client) in group.iter().enumerate() {
            for (i, &p) in piece_perm.iter().enumerate() {
                pieces[p].rows[client] = row_perm[(a + i) % m];
            }
        }
    }
    for piece in &mut pieces {
        for sign in &mut piece.signs {
            *sign = if rng.random::<bool>() { 1 } else { -1 };
        }
    }
    pieces
}

fn shuffle<T, R: Rng>(xs: &mut [T], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

impl SketchDecomposition {
    /// Builds a decomposition from explicit pieces, checking their structure.
    pub fn from_pieces(n: usize, m: usize, pieces: Vec<SketchPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::param("a decomposition needs at least one piece"));
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.rows.len() != n || p.signs.len() != n {
                return Err(Error::shape(format!("piece {i} does not have {n} columns")));
            }
            if let Some(&r) = p.rows.iter().find(|&&r| r as usize >= m) {
                return Err(Error::Structure(format!("piece {i} uses row {r} outside 0..{m}")));
            }
            if p.signs.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::Structure(format!("piece {i} has a sign outside {{-1, +1}}")));
            }
        }
        Ok(SketchDecomposition { n, m, pieces })
    }

    /// The `n×n` identity as a one-piece sketch. Preserves every norm exactly.
    pub fn identity(n: usize) -> Self {
        let piece = SketchPiece { rows: (0..n as u32).collect(), signs: vec![1; n] };
        SketchDecomposition { n, m: n, pieces: vec![piece] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.pieces.len()
    }

    pub fn scale(&self) -> f64 {
        1.0 / (self.s() as f64).sqrt()
    }

    pub fn pieces(&self) -> &[SketchPiece] {
        &self.pieces
    }

    /// True when no column reuses a row across pieces.
    pub fn has_distinct_rows(&self) -> bool {
        let mut seen = vec![usize::MAX; self.m];
        for j in 0..self.n {
            for p in &self.pieces {
                let r = p.rows[j] as usize;
                if seen[r] == j {
                    return false;
                }
                seen[r] = j;
            }
        }
        true
    }

    /// The assembled dense `m×n` sketch. Intended for small instances.
    pub fn assemble(&self) -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(self.m, self.n);
        for p in &self.pieces {
            for j in 0..self.n {
                out[(p.rows[j] as usize, j)] += p.signs[j] as f64;
            }
        }
        out * self.scale()
    }

    /// A single piece as a dense `m×n` matrix over `{-1, 0, 1}`.
    pub fn piece_matrix(&self, i: usize) -> DMatrix<f64> {
        let p = &self.pieces[i];
        let mut out = DMatrix::<f64>::zeros(self.m, self.n);
        for j in 0..self.n {
            out[(p.rows[j] as usize, j)] = p.signs[j] as f64;
        }
        out
    }

    /// Number of nonzeros in each row, summed over pieces.
    pub fn row_loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.m];
        for p in &self.pieces {
            for (l, pl) in loads.iter_mut().zip(p.row_loads(self.m)) {
                *l += pl;
            }
        }
        loads
    }

    pub fn piece_row_loads(&self) -> Vec<Vec<usize>> {
        self.pieces.iter().map(|p| p.row_loads(self.m)).collect()
    }

    /// `(1/√s)·Σ_i S_i·A_i` for `s` blocks of shape `n×d`.
    pub fn apply(&self, blocks: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        if blocks.len() != self.s() {
            return Err(Error::shape(format!("expected {} blocks, got {}", self.s(), blocks.len())));
        }
        let d = blocks[0].ncols();
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != self.n || b.ncols() != d {
                return Err(Error::shape(format!(
                    "block {i} is {}x{}, expected {}x{d}",
                    b.nrows(),
                    b.ncols(),
                    self.n
                )));
            }
        }
        Ok(self.apply_with(d, |i| &blocks[i]))
    }

    /// `S·A`, i.e. every block equal to `a`.
    pub fn apply_uniform(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.n {
            return Err(Error::shape(format!("input has {} rows, sketch has {} columns", a.nrows(), self.n)));
        }
        Ok(self.apply_with(a.ncols(), |_| a))
    }

    // Each piece is accumulated on its own with compensated sums, then pieces
    // are added in index order, so the result does not depend on scheduling.
    // Clients are visited in blocks so that a block of every input and of the
    // piece maps stays in cache while all columns are processed.
    fn apply_with<'a, F>(&self, d: usize, block: F) -> DMatrix<f64>
    where
        F: Fn(usize) -> &'a DMatrix<f64> + Sync,
    {
        const BLOCK: usize = 1024;
        let per_task = self.pieces.len().div_ceil(rayon::current_num_threads()).max(1);
        let partials: Vec<Vec<CompensatedSum>> = self
            .pieces
            .par_chunks(per_task)
            .enumerate()
            .flat_map_iter(|(t, chunk)| {
                let mut accs = vec![vec![CompensatedSum::default(); self.m * d]; chunk.len()];
                for start in (0..self.n).step_by(BLOCK) {
                    let end = (start + BLOCK).min(self.n);
                    for (k, p) in chunk.iter().enumerate() {
                        let a = block(t * per_task + k);
                        let acc = &mut accs[k];
                        let (rows, signs) = (&p.rows[start..end], &p.signs[start..end]);
                        for c in 0..d {
                            let col = &a.as_slice()[c * self.n + start..c * self.n + end];
                            let acc = &mut acc[c * self.m..(c + 1) * self.m];
                            for ((&v, &r), &sg) in col.iter().zip(rows).zip(signs) {
                                acc[r as usize].add(if sg > 0 { v } else { -v });
                            }
                        }
                    }
                }
                accs
            })
            .collect();
        let mut out = DMatrix::<f64>::zeros(self.m, d);
        for acc in &partials {
            out += DMatrix::from_iterator(self.m, d, acc.iter().map(CompensatedSum::value));
        }
        out * self.scale()
    }
}

/// Appends zero rows so the row count becomes a multiple of `m`.
pub fn pad_rows(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let padded = n.div_ceil(m) * m;
    let mut out = DMatrix::<f64>::zeros(padded, a.ncols());
    out.rows_mut(0, n).copy_from(a);
    out
}

/// Accuracy targets for choosing `(m, s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsnapParams {
    pub k: usize,
    pub alpha_s: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub c_m: f64,
    #[serde(default = "one")]
    pub c_s: f64,
}

fn one() -> f64 {
    1.0
}

impl OsnapParams {
    pub fn new(k: usize, alpha_s: f64, beta: f64) -> Self {
        OsnapParams { k, alpha_s, beta, c_m: 1.0, c_s: 1.0 }
    }
}

/// `m = ⌈c_m·k·ln(k/β)/α²⌉`, `s = ⌈c_s·ln(k/β)/α⌉`, with `s` clamped to `m`.
pub fn cohen_params(p: &OsnapParams, n: usize) -> Result<(usize, usize)> {
    if p.k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if !(p.alpha_s > 0.0 && p.alpha_s <= 1.0) {
        return Err(Error::param(format!("alpha_s={} outside (0, 1]", p.alpha_s)));
    }
    if !(p.beta > 0.0 && p.beta < 1.0) {
        return Err(Error::param(format!("beta={} outside (0, 1)", p.beta)));
    }
    if !(p.c_m > 0.0 && p.c_s > 0.0) {
        return Err(Error::param("leading constants must be positive"));
    }
    let l = (p.k as f64 / p.beta).ln().max(0.0);
    let m = (p.c_m * p.k as f64 * l / (p.alpha_s * p.alpha_s)).ceil().max(1.0) as usize;
    let s = ((p.c_s * l / p.alpha_s).ceil().max(1.0) as usize).min(m);
    if m > n {
        return Err(Error::Infeasible(format!(
            "target dimension m={m} exceeds n={n}; use a larger alpha_s or a smaller k"
        )));
    }
    Ok((m, s))
}

/// Chernoff tail bound `2m·exp(−γ²n/(2m))` on some row load leaving
/// `[(1−γ)n/m, (1+γ)n/m]` for a one-nonzero-per-column piece.
pub fn row_load_tail_bound(n: usize, m: usize, gamma: f64) -> f64 {
    2.0 * m as f64 * (-gamma * gamma * n as f64 / (2.0 * m as f64)).exp()
}

/// Whether any load leaves the band `|X − n/m| ≤ γ·n/m`.
pub fn row_loads_violate(loads: &[usize], n: usize, gamma: f64) -> bool {
    let mean = n as f64 / loads.len() as f64;
    loads.iter().any(|&x| (x as f64 - mean).abs() > gamma * mean)
}

/// Largest observed `|‖S R‖²/‖R‖² − 1|` over random rank-`k` residuals
/// `R = A − A X Xᵀ`. Residuals that vanish are skipped.
pub fn embedding_distortion_test<R: Rng + ?Sized>(
    dec: &SketchDecomposition,
    a: &DMatrix<f64>,
    k: usize,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let d = a.ncols();
    if k > d {
        return Err(Error::param(format!("k={k} exceeds d={d}")));
    }
    let floor = 1e-24 * frob2(a).max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let x = random_orthonormal(d, k, rng);
        let r = a - (a * &x) * x.transpose();
        let base = frob2(&r);
        if base <= floor {
            continue;
        }
        let sk = frob2(&dec.apply_uniform(&r)?);
        worst = worst.max((sk / base - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 99);
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn s_equal_m_uses_every_row() {
        let dec = sample_sketch(&SketchSpec::sparse(4, 2, 2, 11)).unwrap();
        let full = dec.assemble();
        for j in 0..4 {
            assert!(full[(0, j)] != 0.0 && full[(1, j)] != 0.0);
        }
    }

    #[test]
    fn pieces_reconstruct_the_assembled_sketch() {
        for spec in [SketchSpec::sparse(50, 8, 3, 1), SketchSpec::dense(24, 4, 2)] {
            let dec = sample_sketch(&spec).unwrap();
            let mut sum = DMatrix::<f64>::zeros(dec.m(), dec.n());
            for i in 0..dec.s() {
                sum += dec.piece_matrix(i);
            }
            assert_eq!(sum * dec.scale(), dec.assemble());
        }
    }

    #[test]
    fn sparse_columns_use_distinct_rows() {
        let dec = sample_sketch(&SketchSpec::sparse(2000, 10, 4, 5)).unwrap();
        assert!(dec.has_distinct_rows());
        assert_eq!(dec.row_loads().iter().sum::<usize>(), 2000 * 4);
    }

    #[test]
    fn with_replacement_can_repeat_rows() {
        let mut spec = SketchSpec::sparse(2000, 3, 3, 5);
        spec.with_replacement = true;
        assert!(!sample_sketch(&spec).unwrap().has_distinct_rows());
    }

    #[test]
    fn dense_rows_are_exactly_balanced_per_piece() {
        let dec = sample_sketch(&SketchSpec::dense(60, 6, 9)).unwrap();
        assert!(dec.has_distinct_rows());
        for loads in dec.piece_row_loads() {
            assert!(loads.iter().all(|&l| l == 10));
        }
        assert!(dec.assemble().iter().all(|v| v.abs() > 0.0));
    }

    #[test]
    fn dense_signs_are_balanced() {
        let dec = sample_sketch(&SketchSpec::dense(10_000, 10, 3)).unwrap();
        let pos: usize = dec.pieces().iter().map(|p| p.signs.iter().filter(|&&v| v > 0).count()).sum();
        let total = 100_000.0;
        assert!((pos as f64 / total - 0.5).abs() < 5.0 * 0.5 / total.sqrt());
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = SketchSpec::sparse(300, 7, 2, 42);
        assert_eq!(sample_sketch(&spec).unwrap(), sample_sketch(&spec).unwrap());
        let other = SketchSpec { seed: 43, ..spec };
        assert_ne!(sample_sketch(&other).unwrap(), sample_sketch(&SketchSpec::sparse(300, 7, 2, 42)).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(sample_sketch(&SketchSpec::sparse(10, 3, 4, 0)), Err(Error::Parameter(_))));
        assert!(matches!(sample_sketch(&SketchSpec::dense(10, 3, 0)), Err(Error::Structure(_))));
        assert!(matches!(sample_sketch(&SketchSpec::sparse(3, 4, 1, 0)), Err(Error::Parameter(_))));
    }

    #[test]
    fn spec_json_uses_kebab_case_mode() {
        let json = serde_json::to_string(&SketchSpec::dense(8, 2, 1)).unwrap();
        assert!(json.contains("\"dense-rademacher\""));
        let back: SketchSpec =
            serde_json::from_str(r#"{"n":8,"m":2,"s":1,"mode":"sparse-osnap","seed":3}"#).unwrap();
        assert_eq!(back, SketchSpec::sparse(8, 2, 1, 3));
    }

    #[test]
    fn two_term_product() {
        let piece = SketchPiece { rows: vec![0, 0], signs: vec![1, -1] };
        let dec = SketchDecomposition::from_pieces(2, 1, vec![piece]).unwrap();
        let a = DMatrix::from_column_slice(2, 1, &[3.0, 5.0]);
        assert_eq!(dec.apply(&[a]).unwrap()[(0, 0)], -2.0);
    }

    #[test]
    fn zero_blocks_give_zero_output() {
        let dec = sample_sketch(&SketchSpec::sparse(40, 5, 3, 2)).unwrap();
        let z = DMatrix::<f64>::zeros(40, 3);
        assert_eq!(dec.apply(&[z.clone(), z.clone(), z]).unwrap(), DMatrix::zeros(5, 3));
    }

    #[test]
    fn identical_blocks_match_assembled_product() {
        let dec = sample_sketch(&SketchSpec::sparse(80, 6, 3, 4)).unwrap();
        let a = gaussian(80, 4, 1);
        let via_pieces = dec.apply(&[a.clone(), a.clone(), a.clone()]).unwrap();
        let direct = dec.assemble() * &a;
        assert!((via_pieces - direct).abs().max() < 1e-12);
    }

    #[test]
    fn apply_checks_shapes() {
        let dec = sample_sketch(&SketchSpec::sparse(10, 2, 2, 0)).unwrap();
        let a = DMatrix::<f64>::zeros(10, 1);
        assert!(matches!(dec.apply(std::slice::from_ref(&a)), Err(Error::Shape(_))));
        assert!(matches!(dec.apply(&[a, DMatrix::zeros(9, 1)]), Err(Error::Shape(_))));
    }

    #[test]
    fn padding_reaches_a_multiple() {
        let a = DMatrix::from_element(7, 2, 1.0);
        let p = pad_rows(&a, 3);
        assert_eq!(p.nrows(), 9);
        assert_eq!(p.rows(7, 2).sum(), 0.0);
    }

    #[test]
    fn cohen_parameters() {
        assert_eq!(cohen_params(&OsnapParams::new(10, 0.5, 0.01), 10_000).unwrap(), (277, 14));
        let unit = OsnapParams::new(1, 1.0, (-1.0_f64).exp());
        assert_eq!(cohen_params(&unit, 10).unwrap(), (1, 1));
        // The ceiling is taken after scaling: ⌈2·276.31⌉ = 553, not 2·277.
        let doubled = OsnapParams { c_m: 2.0, ..OsnapParams::new(10, 0.5, 0.01) };
        assert_eq!(cohen_params(&doubled, 10_000).unwrap(), (553, 14));
        assert!(matches!(cohen_params(&OsnapParams::new(10, 0.5, 0.01), 100), Err(Error::Infeasible(_))));
    }

    #[test]
    fn identity_sketch_has_no_distortion() {
        let a = gaussian(30, 5, 2);
        let mut rng = stream_rng(1, 1);
        let dist = embedding_distortion_test(&SketchDecomposition::identity(30), &a, 2, 20, &mut rng).unwrap();
        assert!(dist < 1e-12);
    }

    #[test]
    fn vanishing_residuals_are_skipped() {
        // Rank one: any X spanning the row direction leaves no residual.
        let a = DMatrix::from_fn(20, 1, |_, _| 1.0);
        let dec = sample_sketch(&SketchSpec::sparse(20, 4, 1, 0)).unwrap();
        let mut rng = stream_rng(0, 0);
        assert_eq!(embedding_distortion_test(&dec, &a, 1, 5, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn tail_bound_formula() {
        assert!((row_load_tail_bound(1000, 10, 0.5) - 20.0 * (-12.5_f64).exp()).abs() < 1e-18);
        assert!(row_loads_violate(&[4, 16], 20, 0.5));
        assert!(!row_loads_violate(&[9, 11], 20, 0.5));
    }
}
