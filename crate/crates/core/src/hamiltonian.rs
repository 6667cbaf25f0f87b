//! Pauli-string Hamiltonians and the open-boundary spin-chain family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{herm_eig, qubit_stride, CMatrix, RegisterShape, C64, ONE, ZERO};
use crate::states::PureState;

/// Largest register [`to_dense`] will materialize.
pub const MAX_DENSE_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(ch: char) -> Option<Pauli> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> CMatrix {
        let m = |a, b, c, d| CMatrix::new(2, 2, vec![a, b, c, d]).unwrap();
        match self {
            Pauli::I => CMatrix::identity(2),
            Pauli::X => m(ZERO, ONE, ONE, ZERO),
            Pauli::Y => m(ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO),
            Pauli::Z => m(ONE, ZERO, ZERO, -ONE),
        }
    }
}

/// Bit-mask form of a Pauli string: `P|j> = phase(j) |j ^ flip>`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PauliMasks {
    flip: usize,
    sign: usize,
    y_count: u32,
}

impl PauliMasks {
    pub(crate) fn new(paulis: &[Pauli]) -> Self {
        let n = paulis.len();
        let (mut flip, mut sign, mut y_count) = (0, 0, 0);
        for (q, p) in paulis.iter().enumerate() {
            let bit = qubit_stride(n, q);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    sign |= bit;
                    y_count += 1;
                }
                Pauli::Z => sign |= bit,
            }
        }
        Self { flip, sign, y_count }
    }

    #[inline]
    pub(crate) fn flip(&self) -> usize {
        self.flip
    }

    #[inline]
    pub(crate) fn phase(&self, j: usize) -> C64 {
        let base = match self.y_count % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        if (j & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }
}

/// One weighted Pauli string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub paulis: Vec<Pauli>,
}

impl PauliTerm {
    pub fn label(&self) -> String {
        self.paulis.iter().map(|p| p.as_char()).collect()
    }

    pub(crate) fn masks(&self) -> PauliMasks {
        PauliMasks::new(&self.paulis)
    }
}

/// Weighted sum of Pauli strings on a fixed register. Real coefficients keep it Hermitian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    qubit_count: usize,
    terms: Vec<PauliTerm>,
}

impl PauliHamiltonian {
    pub fn new(qubit_count: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::InvalidArgument("Hamiltonian needs at least one qubit".into()));
        }
        for t in &terms {
            if t.paulis.len() != qubit_count {
                return Err(Error::DimensionMismatch(format!(
                    "Pauli string {} has length {}, expected {qubit_count}",
                    t.label(),
                    t.paulis.len()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::Numerical(format!("non-finite coefficient on {}", t.label())));
            }
        }
        Ok(Self { qubit_count, terms })
    }

    /// Build from `(coefficient, label)` pairs such as `(0.5, "XXI")`.
    pub fn from_labels(qubit_count: usize, terms: &[(f64, &str)]) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|(c, s)| {
                let paulis = s
                    .chars()
                    .map(|ch| {
                        Pauli::from_char(ch)
                            .ok_or_else(|| Error::InvalidArgument(format!("bad Pauli label {ch:?} in {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(PauliTerm { coeff: *c, paulis })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(qubit_count, terms)
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn negated(&self) -> PauliHamiltonian {
        let terms = self.terms.iter().map(|t| PauliTerm { coeff: -t.coeff, paulis: t.paulis.clone() }).collect();
        PauliHamiltonian { qubit_count: self.qubit_count, terms }
    }

    /// `Tr[H rho]` evaluated term by term without densifying `H`.
    pub(crate) fn trace_with(&self, rho: &CMatrix) -> C64 {
        let d = rho.rows();
        let data = rho.data();
        let mut acc = ZERO;
        for term in &self.terms {
            let m = term.masks();
            let mut t = ZERO;
            for j in 0..d {
                t += m.phase(j) * data[j * d + (j ^ m.flip())];
            }
            acc += t * term.coeff;
        }
        acc
    }
}

/// Text form: one `coefficient LABEL` pair per line; `#` starts a comment.
impl fmt::Display for PauliHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{} {}", t.coeff, t.label())?;
        }
        Ok(())
    }
}

impl FromStr for PauliHamiltonian {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut width = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let mut parts = line.split_whitespace();
            let (Some(coeff), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(format!("expected `<coefficient> <pauli string>`, got {line:?}")));
            };
            let coeff: f64 = coeff.parse().map_err(|_| parse_err(format!("bad coefficient {coeff:?}")))?;
            if !coeff.is_finite() {
                return Err(parse_err("coefficient must be finite".into()));
            }
            let paulis = label
                .chars()
                .map(|ch| {
                    Pauli::from_char(ch.to_ascii_uppercase())
                        .ok_or_else(|| parse_err(format!("bad Pauli label {ch:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            match width {
                None => width = Some(paulis.len()),
                Some(w) if w != paulis.len() => {
                    return Err(parse_err(format!(
                        "string {label} has length {}, previous lines have {w}",
                        paulis.len()
                    )))
                }
                _ => {}
            }
            terms.push(PauliTerm { coeff, paulis });
        }
        let n = width.ok_or(Error::Parse { line: 0, message: "no Hamiltonian terms".into() })?;
        PauliHamiltonian::new(n, terms)
    }
}

/// Couplings of the open-boundary nearest-neighbour chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinModelSpec {
    pub n: usize,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
}

impl SpinModelSpec {
    pub fn new(n: usize) -> Self {
        Self { n, ..Default::default() }
    }
}

/// `sum_i (Jx X_i X_i+1 + Jy Y_i Y_i+1 + Jz Z_i Z_i+1) + sum_i (hx X_i + hy Y_i + hz Z_i)`.
///
/// Zero-coefficient terms are omitted.
pub fn build_spin_model(spec: &SpinModelSpec) -> Result<PauliHamiltonian> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("spin chain needs n >= 2, got {n}")));
    }
    let mut terms = Vec::new();
    for (coeff, p) in [(spec.jx, Pauli::X), (spec.jy, Pauli::Y), (spec.jz, Pauli::Z)] {
        if coeff == 0.0 {
            continue;
        }
        for i in 0..n - 1 {
            let mut paulis = vec![Pauli::I; n];
            paulis[i] = p;
            paulis[i + 1] = p;
            terms.push(PauliTerm { coeff, paulis });
        }
    }
    for (coeff, p) in [(spec.hx, Pauli::X), (spec.hy, Pauli::Y), (spec.hz, Pauli::Z)] {
        if coeff == 0.0 {
            continue;
        }
        for i in 0..n {
            let mut paulis = vec![Pauli::I; n];
            paulis[i] = p;
            terms.push(PauliTerm { coeff, paulis });
        }
    }
    PauliHamiltonian::new(n, terms)
}

/// The three benchmark chains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkModel {
    /// XX coupling in a transverse Z field.
    H1,
    /// Transverse-field Ising.
    H2,
    /// XXZ-type.
    H3,
}

impl BenchmarkModel {
    pub fn spec(self, n: usize) -> SpinModelSpec {
        let base = SpinModelSpec::new(n);
        match self {
            BenchmarkModel::H1 => SpinModelSpec { jx: 1.0, hz: 0.3, ..base },
            BenchmarkModel::H2 => SpinModelSpec { jz: 1.0, hx: 0.3, ..base },
            BenchmarkModel::H3 => SpinModelSpec { jx: 1.0, jy: 1.0, jz: 0.3, ..base },
        }
    }

    pub fn build(self, n: usize) -> Result<PauliHamiltonian> {
        build_spin_model(&self.spec(n))
    }
}

pub fn benchmark_models(n: usize) -> Result<(PauliHamiltonian, PauliHamiltonian, PauliHamiltonian)> {
    Ok((BenchmarkModel::H1.build(n)?, BenchmarkModel::H2.build(n)?, BenchmarkModel::H3.build(n)?))
}

pub fn to_dense(h: &PauliHamiltonian) -> Result<CMatrix> {
    let n = h.qubit_count;
    if n > MAX_DENSE_QUBITS {
        return Err(Error::SizeCap(format!("dense Hamiltonian on {n} qubits exceeds {MAX_DENSE_QUBITS}")));
    }
    let d = 1usize << n;
    let mut out = CMatrix::zeros(d, d);
    for term in &h.terms {
        let m = term.masks();
        for j in 0..d {
            out[(j ^ m.flip(), j)] += m.phase(j) * term.coeff;
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of `h` and a unit eigenvector for it.
pub fn ground_energy(h: &PauliHamiltonian) -> Result<(f64, PureState)> {
    let dense = to_dense(h)?;
    let eig = herm_eig(&dense)?;
    let shape = RegisterShape::new(h.qubit_count)?;
    let state = PureState::new(shape, eig.vector(0))?;
    Ok((eig.values[0], state))
}
