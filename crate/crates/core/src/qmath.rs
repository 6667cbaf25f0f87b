//! Dense complex linear algebra on qubit registers.
//!
//! Basis-state convention: qubit 0 is the most significant bit of the basis
//! index. In joint registers the system qubits come first, ancillas last.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance for exact-equality style checks.
pub const EQ_TOL: f64 = 1e-10;
/// Tolerance for eigendecomposition reconstruction and PSD checks.
pub const RECON_TOL: f64 = 1e-9;
/// Largest matrix dimension accepted by [`tensor`].
pub const MAX_DIM: usize = 1 << 16;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Square matrix from nested rows of real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Self::from_fn(n, rows[0].len(), |r, c| C64::new(rows[r][c], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Rank-one projector `|v><v|`.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |r, c| v[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    fn require_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::DimensionMismatch(format!("{what} requires a square matrix, got {}x{}", self.rows, self.cols)))
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> Result<C64> {
        let n = self.require_square("trace")?;
        Ok((0..n).map(|i| self.data[i * n + i]).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(C64, C64) -> C64) -> Result<CMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Largest entrywise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |a_ij - conj(a_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                dev = dev.max((self.data[r * n + c] - self.data[c * n + r].conj()).norm());
            }
        }
        dev
    }

    /// `max |(U^dagger U - I)_ij|`.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        match self.adjoint().matmul(self) {
            Ok(p) => p.max_abs_diff(&CMatrix::identity(self.rows)),
            Err(_) => f64::INFINITY,
        }
    }

    /// `(h + h^dagger) / 2`.
    pub fn hermitian_part(&self) -> Result<CMatrix> {
        let n = self.require_square("hermitian_part")?;
        Ok(CMatrix::from_fn(n, n, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Number of qubits in a register and its Hilbert-space dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegisterShape {
    qubit_count: usize,
}

impl RegisterShape {
    pub fn new(qubit_count: usize) -> Result<Self> {
        if qubit_count > 16 {
            return Err(Error::SizeCap(format!("{qubit_count} qubits exceeds 16")));
        }
        Ok(Self { qubit_count })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn dim(&self) -> usize {
        1 << self.qubit_count
    }
}

/// Where the traced-out factor sits in a bipartite register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropPosition {
    Front,
    Back,
}

/// Kronecker product; `a`'s indices are the most significant.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let rows = a.rows.checked_mul(b.rows).filter(|&d| d <= MAX_DIM);
    let cols = a.cols.checked_mul(b.cols).filter(|&d| d <= MAX_DIM);
    let (Some(rows), Some(cols)) = (rows, cols) else {
        return Err(Error::SizeCap(format!(
            "tensor of {}x{} and {}x{} exceeds dimension {MAX_DIM}",
            a.rows, a.cols, b.rows, b.cols
        )));
    };
    let mut out = CMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                let row = (ar * b.rows + br) * cols + ac * b.cols;
                for bc in 0..b.cols {
                    out.data[row + bc] = x * b[(br, bc)];
                }
            }
        }
    }
    Ok(out)
}

/// Trace out one factor of a bipartite operator.
pub fn partial_trace(
    rho: &CMatrix,
    keep: RegisterShape,
    drop: RegisterShape,
    position: DropPosition,
) -> Result<CMatrix> {
    let n = rho.require_square("partial_trace")?;
    let (dk, dd) = (keep.dim(), drop.dim());
    if n != dk * dd {
        return Err(Error::DimensionMismatch(format!("partial_trace: operator dim {n} != {dk} * {dd}")));
    }
    let index = |k: usize, d: usize| match position {
        DropPosition::Back => k * dd + d,
        DropPosition::Front => d * dk + k,
    };
    let mut out = CMatrix::zeros(dk, dk);
    for r in 0..dk {
        for c in 0..dk {
            out.data[r * dk + c] = (0..dd).map(|d| rho[(index(r, d), index(c, d))]).sum();
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl HermEig {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows).map(|r| self.vectors[(r, k)]).collect()
    }

    /// `V f(diag(values)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        CMatrix::from_fn(n, n, |r, c| (0..n).map(|k| self.vectors[(r, k)] * self.vectors[(c, k)].conj() * fv[k]).sum())
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Hermitian eigensolver by cyclic complex Jacobi rotations.
///
/// The input is symmetrized to `(h + h^dagger)/2` first.
pub fn herm_eig(h: &CMatrix) -> Result<HermEig> {
    let n = h.require_square("herm_eig")?;
    if !h.is_finite() {
        return Err(Error::Numerical("herm_eig input has non-finite entries".into()));
    }
    let mut a = h.hermitian_part()?;
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 || mag <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Unitary on span{p, q}: U = diag(1, conj(phase)) * [[c, s], [-s, c]].
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(s, 0.0);
                let u_qp = phase.conj() * (-s);
                let u_qq = phase.conj() * c;
                // a <- a U
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                // a <- U^dagger a
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermEig { values, vectors })
}

/// Bit stride of qubit `q` in an `n`-qubit basis index.
#[inline]
pub fn qubit_stride(n_qubits: usize, q: usize) -> usize {
    1 << (n_qubits - 1 - q)
}

/// In-place `rho <- G rho G^dagger` for a 2x2 `g` (row-major) on qubit `q`.
pub fn conjugate_1q(rho: &mut CMatrix, n_qubits: usize, q: usize, g: &[C64; 4]) {
    let dim = rho.rows;
    let s = qubit_stride(n_qubits, q);
    let [g00, g01, g10, g11] = *g;
    // Left multiplication mixes row pairs.
    for r0 in (0..dim).filter(|r| r & s == 0) {
        let r1 = r0 | s;
        let (lo, hi) = rho.data.split_at_mut(r1 * dim);
        let row0 = &mut lo[r0 * dim..(r0 + 1) * dim];
        let row1 = &mut hi[..dim];
        for (x0, x1) in row0.iter_mut().zip(row1.iter_mut()) {
            let (a, b) = (*x0, *x1);
            *x0 = g00 * a + g01 * b;
            *x1 = g10 * a + g11 * b;
        }
    }
    // Right multiplication by G^dagger mixes column pairs.
    let (h00, h01, h10, h11) = (g00.conj(), g01.conj(), g10.conj(), g11.conj());
    for row in rho.data.chunks_exact_mut(dim) {
        for c0 in (0..dim).filter(|c| c & s == 0) {
            let c1 = c0 | s;
            let (a, b) = (row[c0], row[c1]);
            row[c0] = a * h00 + b * h01;
            row[c1] = a * h10 + b * h11;
        }
    }
}

/// Offsets of the `2^k` local basis states of `targets` inside the full index.
fn target_offsets(n_qubits: usize, targets: &[usize]) -> Vec<usize> {
    let k = targets.len();
    (0..1usize << k)
        .map(|l| {
            targets
                .iter()
                .enumerate()
                .filter(|(t, _)| l >> (k - 1 - t) & 1 == 1)
                .map(|(_, &q)| qubit_stride(n_qubits, q))
                .sum()
        })
        .collect()
}

fn target_mask(n_qubits: usize, targets: &[usize]) -> usize {
    targets.iter().map(|&q| qubit_stride(n_qubits, q)).sum()
}

/// In-place `rho <- A rho B^dagger` with `A`, `B` embedded on `targets`.
pub fn sandwich_embedded(rho: &mut CMatrix, n_qubits: usize, targets: &[usize], a: &CMatrix, b: &CMatrix) {
    let dim = rho.rows;
    let offsets = target_offsets(n_qubits, targets);
    let mask = target_mask(n_qubits, targets);
    let local = offsets.len();
    let mut buf = vec![ZERO; local];
    let bases: Vec<usize> = (0..dim).filter(|i| i & mask == 0).collect();
    for &r0 in &bases {
        for c in 0..dim {
            for (l, off) in offsets.iter().enumerate() {
                buf[l] = rho.data[(r0 + off) * dim + c];
            }
            for (l, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (j, x) in buf.iter().enumerate() {
                    acc += a.data[l * local + j] * x;
                }
                rho.data[(r0 + off) * dim + c] = acc;
            }
        }
    }
    for r in 0..dim {
        let row = &mut rho.data[r * dim..(r + 1) * dim];
        for &c0 in &bases {
            for (l, off) in offsets.iter().enumerate() {
                buf[l] = row[c0 + off];
            }
            for (l, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (j, x) in buf.iter().enumerate() {
                    acc += x * b.data[l * local + j].conj();
                }
                row[c0 + off] = acc;
            }
        }
    }
}

/// In-place `rho <- sum_k K_k rho K_k^dagger` for 2x2 operators on qubit `q`.
///
/// With `adjoint` set, applies the dual map `sum_k K_k^dagger rho K_k`.
pub fn kraus_1q_in_place(rho: &mut CMatrix, n_qubits: usize, q: usize, ops: &[[C64; 4]], adjoint: bool) {
    let dim = rho.rows;
    let s = qubit_stride(n_qubits, q);
    let ops: Vec<[C64; 4]> = if adjoint {
        ops.iter().map(|k| [k[0].conj(), k[2].conj(), k[1].conj(), k[3].conj()]).collect()
    } else {
        ops.to_vec()
    };
    for r0 in (0..dim).filter(|r| r & s == 0) {
        let r1 = r0 | s;
        for c0 in (0..dim).filter(|c| c & s == 0) {
            let c1 = c0 | s;
            let b =
                [rho.data[r0 * dim + c0], rho.data[r0 * dim + c1], rho.data[r1 * dim + c0], rho.data[r1 * dim + c1]];
            let mut out = [ZERO; 4];
            for k in &ops {
                // t = K b
                let t = [
                    k[0] * b[0] + k[1] * b[2],
                    k[0] * b[1] + k[1] * b[3],
                    k[2] * b[0] + k[3] * b[2],
                    k[2] * b[1] + k[3] * b[3],
                ];
                // out += t K^dagger
                out[0] += t[0] * k[0].conj() + t[1] * k[1].conj();
                out[1] += t[0] * k[2].conj() + t[1] * k[3].conj();
                out[2] += t[2] * k[0].conj() + t[3] * k[1].conj();
                out[3] += t[2] * k[2].conj() + t[3] * k[3].conj();
            }
            rho.data[r0 * dim + c0] = out[0];
            rho.data[r0 * dim + c1] = out[1];
            rho.data[r1 * dim + c0] = out[2];
            rho.data[r1 * dim + c1] = out[3];
        }
    }
}

/// In-place single-qubit depolarizing map `(1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)`.
///
/// Uses `sum_P P B P = 2 Tr(B) I` on each 2x2 block. The map is self-dual.
pub fn depolarize_1q_in_place(rho: &mut CMatrix, n_qubits: usize, q: usize, p: f64) {
    let dim = rho.rows;
    let s = qubit_stride(n_qubits, q);
    let keep = 1.0 - 4.0 * p / 3.0;
    let mix = 2.0 * p / 3.0;
    for r0 in (0..dim).filter(|r| r & s == 0) {
        let r1 = r0 | s;
        for c0 in (0..dim).filter(|c| c & s == 0) {
            let c1 = c0 | s;
            let t = rho.data[r0 * dim + c0] + rho.data[r1 * dim + c1];
            rho.data[r0 * dim + c0] = rho.data[r0 * dim + c0] * keep + t * mix;
            rho.data[r1 * dim + c1] = rho.data[r1 * dim + c1] * keep + t * mix;
            rho.data[r0 * dim + c1] *= keep;
            rho.data[r1 * dim + c0] *= keep;
        }
    }
}

/// `rho ⊗ |0..0><0..0|` on `extra` appended qubits.
pub fn attach_zero_qubits(rho: &CMatrix, extra: usize) -> CMatrix {
    let d = rho.rows;
    let f = 1usize << extra;
    let big = d * f;
    let mut out = CMatrix::zeros(big, big);
    for r in 0..d {
        for c in 0..d {
            out.data[(r * f) * big + c * f] = rho.data[r * d + c];
        }
    }
    out
}

/// `<0..0| O |0..0>` on the trailing `extra` qubits (dual of [`attach_zero_qubits`]).
pub fn project_zero_qubits(op: &CMatrix, extra: usize) -> CMatrix {
    let f = 1usize << extra;
    let d = op.rows / f;
    CMatrix::from_fn(d, d, |r, c| op[(r * f, c * f)])
}

/// `O ⊗ I` on `extra` trailing qubits (dual of tracing them out).
pub fn extend_identity(op: &CMatrix, extra: usize) -> CMatrix {
    let f = 1usize << extra;
    let d = op.rows;
    let big = d * f;
    let mut out = CMatrix::zeros(big, big);
    for r in 0..d {
        for c in 0..d {
            let x = op.data[r * d + c];
            for a in 0..f {
                out.data[(r * f + a) * big + c * f + a] = x;
            }
        }
    }
    out
}

/// `Tr[A B]` for square matrices of equal size.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.rows;
    let mut acc = ZERO;
    for r in 0..n {
        for c in 0..n {
            acc += a.data[r * n + c] * b.data[c * n + r];
        }
    }
    acc
}
