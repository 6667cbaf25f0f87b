//! Density matrices, pure target states, and the fidelity / energy functionals.

use crate::error::{Error, Result};
use crate::hamiltonian::PauliHamiltonian;
use crate::qmath::{herm_eig, trace_product, CMatrix, RegisterShape, C64, EQ_TOL, ONE, RECON_TOL, ZERO};

/// Largest tolerated excursion of a fidelity outside `[0, 1]` before clamping.
pub const FIDELITY_CLAMP_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive semidefinite operator on a qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    shape: RegisterShape,
    mat: CMatrix,
}

/// Measured deviations from the density-matrix invariants.
#[derive(Clone, Copy, Debug)]
pub struct Validity {
    pub hermitian_deviation: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        self.hermitian_deviation <= EQ_TOL && self.trace_deviation <= EQ_TOL && self.min_eigenvalue >= -RECON_TOL
    }
}

impl DensityMatrix {
    /// Wraps `mat` after checking every invariant.
    pub fn new(shape: RegisterShape, mat: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(shape, mat)?;
        let v = rho.validity()?;
        if !v.is_valid() {
            return Err(Error::Numerical(format!("not a density matrix: {v:?}")));
        }
        Ok(rho)
    }

    /// Wraps `mat` checking only its dimension; used on hot paths whose
    /// maps are CPTP by construction.
    pub fn from_matrix_unchecked(shape: RegisterShape, mat: CMatrix) -> Result<Self> {
        if mat.rows() != shape.dim() || mat.cols() != shape.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a {}-qubit register",
                mat.rows(),
                mat.cols(),
                shape.qubit_count()
            )));
        }
        Ok(Self { shape, mat })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self { shape: psi.shape, mat: CMatrix::outer(&psi.amplitudes) }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let shape = RegisterShape::new(n)?;
        let d = shape.dim();
        Ok(Self { shape, mat: CMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0)) })
    }

    pub fn shape(&self) -> RegisterShape {
        self.shape
    }

    pub fn qubit_count(&self) -> usize {
        self.shape.qubit_count()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().map(|t| t.re).unwrap_or(f64::NAN)
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        trace_product(&self.mat, &self.mat).re
    }

    pub fn validity(&self) -> Result<Validity> {
        let tr = self.mat.trace()?;
        let eig = herm_eig(&self.mat)?;
        Ok(Validity {
            hermitian_deviation: self.mat.hermitian_deviation(),
            trace_deviation: (tr - ONE).norm(),
            min_eigenvalue: eig.values.first().copied().unwrap_or(0.0),
        })
    }

    pub fn is_valid(&self) -> bool {
        self.validity().map(|v| v.is_valid()).unwrap_or(false)
    }
}

/// `|0...0><0...0|` on `n` qubits.
pub fn zero_state(n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("zero_state needs n >= 1".into()));
    }
    let shape = RegisterShape::new(n)?;
    let mut mat = CMatrix::zeros(shape.dim(), shape.dim());
    mat[(0, 0)] = ONE;
    Ok(DensityMatrix { shape, mat })
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    shape: RegisterShape,
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(shape: RegisterShape, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != shape.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a {}-qubit register",
                amplitudes.len(),
                shape.qubit_count()
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > EQ_TOL {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(Self { shape, amplitudes })
    }

    pub fn shape(&self) -> RegisterShape {
        self.shape
    }

    pub fn qubit_count(&self) -> usize {
        self.shape.qubit_count()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// `(|10..0> + |010..0> + ... + |0..01>) / sqrt(n)`.
pub fn w_state(n: usize) -> Result<PureState> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("W state needs n >= 2, got {n}")));
    }
    let shape = RegisterShape::new(n)?;
    let amp = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut amps = vec![ZERO; shape.dim()];
    for q in 0..n {
        amps[1 << q] = amp;
    }
    PureState::new(shape, amps)
}

/// `|+>^n`.
pub fn plus_state(n: usize) -> Result<PureState> {
    let shape = RegisterShape::new(n)?;
    let amp = C64::new(1.0 / (shape.dim() as f64).sqrt(), 0.0);
    PureState::new(shape, vec![amp; shape.dim()])
}

/// Dressed cluster state: starting from `|+>^n`, each of the `angles.len()`
/// layers applies `RY(angles[d][i])` on every qubit `i` and then the open
/// CZ chain on `(i, i+1)`.
pub fn dressed_cluster_state(n: usize, angles: &[Vec<f64>]) -> Result<PureState> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dressed cluster state needs n >= 2, got {n}")));
    }
    if let Some(bad) = angles.iter().position(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "angle row {bad} has {} entries, expected {n}",
            angles[bad].len()
        )));
    }
    let plus = plus_state(n)?;
    let mut amps = plus.amplitudes;
    for layer in angles {
        for (q, &alpha) in layer.iter().enumerate() {
            let (s, c) = (alpha / 2.0).sin_cos();
            let stride = 1 << (n - 1 - q);
            for i0 in (0..amps.len()).filter(|i| i & stride == 0) {
                let (a, b) = (amps[i0], amps[i0 | stride]);
                amps[i0] = a * c - b * s;
                amps[i0 | stride] = a * s + b * c;
            }
        }
        for q in 0..n - 1 {
            let both = (1 << (n - 1 - q)) | (1 << (n - 2 - q));
            for (i, a) in amps.iter_mut().enumerate() {
                if i & both == both {
                    *a = -*a;
                }
            }
        }
    }
    PureState::new(plus.shape, amps)
}

/// The dressed cluster target used in the recovery benchmarks: three layers,
/// every angle `pi/4`.
pub fn default_dressed_cluster_state(n: usize) -> Result<PureState> {
    dressed_cluster_state(n, &vec![vec![std::f64::consts::FRAC_PI_4; n]; 3])
}

fn clamp_fidelity(f: f64) -> Result<f64> {
    if !(-FIDELITY_CLAMP_TOL..=1.0 + FIDELITY_CLAMP_TOL).contains(&f) {
        return Err(Error::Numerical(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// `<psi| rho |psi>`.
pub fn fidelity_pure(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.shape != target.shape {
        return Err(Error::DimensionMismatch("fidelity_pure register mismatch".into()));
    }
    let v = rho.mat.mul_vec(&target.amplitudes)?;
    let f: C64 = target.amplitudes.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
    if f.im.abs() > FIDELITY_CLAMP_TOL {
        return Err(Error::Numerical(format!("fidelity has imaginary part {}", f.im)));
    }
    clamp_fidelity(f.re)
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(m)?;
    if eig.values[0] < -RECON_TOL {
        return Err(Error::Numerical(format!("negative eigenvalue {} in matrix square root", eig.values[0])));
    }
    Ok(eig.map_spectrum(|x| x.max(0.0).sqrt()))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2`.
pub fn fidelity_general(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.shape != sigma.shape {
        return Err(Error::DimensionMismatch("fidelity_general register mismatch".into()));
    }
    let s = psd_sqrt(&sigma.mat)?;
    let inner = s.matmul(&rho.mat)?.matmul(&s)?;
    let eig = herm_eig(&inner)?;
    if eig.values[0] < -RECON_TOL {
        return Err(Error::Numerical(format!("PSD violation {}", eig.values[0])));
    }
    // Eigenvalues at rounding level would contribute O(sqrt(eps)) each.
    let floor = f64::EPSILON * 64.0 * eig.values.last().copied().unwrap_or(0.0).max(1.0);
    let root_trace: f64 = eig.values.iter().filter(|&&x| x > floor).map(|x| x.sqrt()).sum();
    clamp_fidelity(root_trace * root_trace)
}

/// `Re Tr[H rho]`.
pub fn expectation(h: &PauliHamiltonian, rho: &DensityMatrix) -> Result<f64> {
    if h.qubit_count() != rho.qubit_count() {
        return Err(Error::DimensionMismatch(format!(
            "{}-qubit Hamiltonian on a {}-qubit state",
            h.qubit_count(),
            rho.qubit_count()
        )));
    }
    let e = h.trace_with(&rho.mat);
    if e.im.abs() > 1e-9 {
        return Err(Error::Numerical(format!("energy has imaginary part {}", e.im)));
    }
    Ok(e.re)
}
