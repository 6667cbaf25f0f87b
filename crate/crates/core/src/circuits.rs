//! Gates, parameterized blocks, and their action on density matrices.

use serde::{Deserialize, Serialize};

use crate::channels::{NoiseAction, NoiseSite, NoiseSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::Pauli;
use crate::qmath::{conjugate_1q, qubit_stride, sandwich_embedded, CMatrix, C64, I, ONE, ZERO};
use crate::states::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cz,
    Iswap,
    Cnot,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    /// Pauli `P` with `R(theta) = exp(-i theta P / 2)`.
    pub fn generator(self) -> Option<Pauli> {
        match self {
            GateKind::Rx => Some(Pauli::X),
            GateKind::Ry => Some(Pauli::Y),
            GateKind::Rz => Some(Pauli::Z),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    /// Index into the owning circuit's parameters; present iff `kind` is a rotation.
    pub param_index: Option<usize>,
}

impl Gate {
    pub fn rotation(kind: GateKind, qubit: usize, param_index: usize) -> Self {
        debug_assert!(kind.is_rotation());
        Self { kind, targets: vec![qubit], param_index: Some(param_index) }
    }

    pub fn two_qubit(kind: GateKind, a: usize, b: usize) -> Self {
        debug_assert!(!kind.is_rotation());
        Self { kind, targets: vec![a, b], param_index: None }
    }

    fn check_shape(&self) -> Result<()> {
        let ok = if self.kind.is_rotation() {
            self.targets.len() == 1 && self.param_index.is_some()
        } else {
            self.targets.len() == 2 && self.targets[0] != self.targets[1] && self.param_index.is_none()
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("malformed gate {self:?}")))
        }
    }
}

fn rotation_2x2(kind: GateKind, theta: f64) -> [C64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    let (cr, sr) = (C64::new(c, 0.0), C64::new(s, 0.0));
    match kind {
        GateKind::Rx => [cr, -I * s, -I * s, cr],
        GateKind::Ry => [cr, -sr, sr, cr],
        GateKind::Rz => [C64::new(c, -s), ZERO, ZERO, C64::new(c, s)],
        _ => unreachable!("not a rotation"),
    }
}

fn fixed_4x4(kind: GateKind) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    match kind {
        GateKind::Cz => {
            for i in 0..3 {
                m[(i, i)] = ONE;
            }
            m[(3, 3)] = -ONE;
        }
        GateKind::Iswap => {
            m[(0, 0)] = ONE;
            m[(2, 1)] = I;
            m[(1, 2)] = I;
            m[(3, 3)] = ONE;
        }
        GateKind::Cnot => {
            m[(0, 0)] = ONE;
            m[(1, 1)] = ONE;
            m[(3, 2)] = ONE;
            m[(2, 3)] = ONE;
        }
        _ => unreachable!("rotation"),
    }
    m
}

/// Matrix of `g` in its own target ordering (first target most significant).
pub fn gate_matrix(g: &Gate, theta: Option<f64>) -> Result<CMatrix> {
    match (g.kind.is_rotation(), theta) {
        (true, Some(t)) => {
            let r = rotation_2x2(g.kind, t);
            CMatrix::new(2, 2, r.to_vec())
        }
        (false, None) => Ok(fixed_4x4(g.kind)),
        (true, None) => Err(Error::InvalidArgument(format!("{:?} needs an angle", g.kind))),
        (false, Some(_)) => Err(Error::InvalidArgument(format!("{:?} takes no angle", g.kind))),
    }
}

/// In-place `rho <- G rho G^dagger` for a permutation-times-phase 4x4 gate.
fn conjugate_monomial_2q(rho: &mut CMatrix, n: usize, targets: &[usize], g: &CMatrix) {
    let (sa, sb) = (qubit_stride(n, targets[0]), qubit_stride(n, targets[1]));
    let local = |i: usize| ((i & sa != 0) as usize) << 1 | (i & sb != 0) as usize;
    let offsets = [0, sb, sa, sa | sb];
    // For each local column j: G|j> = phase[j] |perm[j]>.
    let mut perm = [0usize; 4];
    let mut phase = [ZERO; 4];
    for j in 0..4 {
        let r = (0..4).find(|&r| g[(r, j)] != ZERO).expect("monomial gate");
        perm[j] = r;
        phase[j] = g[(r, j)];
    }
    let d = rho.rows();
    let mask = sa | sb;
    let map = |i: usize| {
        let l = local(i);
        ((i & !mask) | offsets[perm[l]], phase[l])
    };
    let src = rho.data().to_vec();
    let dst = rho.data_mut();
    let cols: Vec<(usize, C64)> = (0..d)
        .map(|c| {
            let (pc, ph) = map(c);
            (pc, ph.conj())
        })
        .collect();
    for r in 0..d {
        let (pr, phr) = map(r);
        let row = &src[r * d..(r + 1) * d];
        let out = &mut dst[pr * d..(pr + 1) * d];
        for (c, x) in row.iter().enumerate() {
            let (pc, phc) = cols[c];
            out[pc] = phr * x * phc;
        }
    }
}

/// In-place conjugation by a gate; `adjoint` conjugates by `G^dagger` instead.
pub(crate) fn conjugate_gate(rho: &mut CMatrix, n: usize, g: &Gate, theta: Option<f64>, adjoint: bool) {
    if g.kind.is_rotation() {
        let t = theta.expect("rotation angle");
        let t = if adjoint { -t } else { t };
        conjugate_1q(rho, n, g.targets[0], &rotation_2x2(g.kind, t));
    } else {
        let m = fixed_4x4(g.kind);
        let m = if adjoint { m.adjoint() } else { m };
        conjugate_monomial_2q(rho, n, &g.targets, &m);
    }
}

/// Which pipeline stage a block belongs to; decides where noise is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockRole {
    /// System-only variational block.
    System,
    /// System-ancilla dilation of a trainable channel.
    Dissipative,
}

impl BlockRole {
    pub fn noise_site(self) -> NoiseSite {
        match self {
            BlockRole::System => NoiseSite::SystemGate,
            BlockRole::Dissipative => NoiseSite::DissipativeGate,
        }
    }
}

/// Ordered gate list with a local parameter vector of length `param_count`.
///
/// `param_offset` locates the block's parameters inside a run's flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    qubit_count: usize,
    gates: Vec<Gate>,
    param_count: usize,
    param_offset: usize,
    role: BlockRole,
}

impl ParamCircuit {
    pub fn new(
        qubit_count: usize,
        gates: Vec<Gate>,
        param_count: usize,
        param_offset: usize,
        role: BlockRole,
    ) -> Result<Self> {
        let mut used = vec![false; param_count];
        for g in &gates {
            g.check_shape()?;
            if let Some(&t) = g.targets.iter().find(|&&t| t >= qubit_count) {
                return Err(Error::InvalidArgument(format!("gate target {t} outside {qubit_count} qubits")));
            }
            if let Some(k) = g.param_index {
                if k >= param_count || used[k] {
                    return Err(Error::InvalidArgument(format!("parameter index {k} out of range or reused")));
                }
                used[k] = true;
            }
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidArgument("unused parameter index".into()));
        }
        Ok(Self { qubit_count, gates, param_count, param_offset, role })
    }

    pub fn empty(qubit_count: usize, role: BlockRole) -> Self {
        Self { qubit_count, gates: Vec::new(), param_count: 0, param_offset: 0, role }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn param_offset(&self) -> usize {
        self.param_offset
    }

    pub fn role(&self) -> BlockRole {
        self.role
    }

    /// This block's slice of a run-wide parameter vector.
    pub fn slice<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.param_offset..self.param_offset + self.param_count]
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count {
            return Err(Error::ParameterCount { expected: self.param_count, got: theta.len() });
        }
        Ok(())
    }

    pub(crate) fn angle(&self, g: &Gate, theta: &[f64]) -> Option<f64> {
        g.param_index.map(|k| theta[k])
    }
}

/// Hardware-efficient system block: per layer `RY`, `RZ` on every qubit, then
/// the open CZ chain.
pub fn build_vqe_block(n: usize, layers: usize, param_offset: usize) -> Result<ParamCircuit> {
    if n == 0 || layers == 0 {
        return Err(Error::InvalidArgument("vqe block needs n >= 1 and layers >= 1".into()));
    }
    let mut gates = Vec::new();
    let mut k = 0;
    for _ in 0..layers {
        for q in 0..n {
            gates.push(Gate::rotation(GateKind::Ry, q, k));
            gates.push(Gate::rotation(GateKind::Rz, q, k + 1));
            k += 2;
        }
        for q in 0..n.saturating_sub(1) {
            gates.push(Gate::two_qubit(GateKind::Cz, q, q + 1));
        }
    }
    ParamCircuit::new(n, gates, k, param_offset, BlockRole::System)
}

fn push_euler(gates: &mut Vec<Gate>, q: usize, k: &mut usize) {
    for kind in [GateKind::Rz, GateKind::Ry, GateKind::Rz] {
        gates.push(Gate::rotation(kind, q, *k));
        *k += 1;
    }
}

/// Dissipative block on `n` system + `m` ancilla qubits: an `RZ RY RZ` layer on
/// all qubits, the full system-ancilla iSWAP mesh in `(system, ancilla)`
/// lexicographic order, and a second `RZ RY RZ` layer.
pub fn build_dissipative_block(n: usize, m: usize, param_offset: usize) -> Result<ParamCircuit> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("dissipative block needs n >= 1 and m >= 1".into()));
    }
    let mut gates = Vec::new();
    let mut k = 0;
    for q in 0..n + m {
        push_euler(&mut gates, q, &mut k);
    }
    for s in 0..n {
        for a in 0..m {
            gates.push(Gate::two_qubit(GateKind::Iswap, s, n + a));
        }
    }
    for q in 0..n + m {
        push_euler(&mut gates, q, &mut k);
    }
    ParamCircuit::new(n + m, gates, k, param_offset, BlockRole::Dissipative)
}

/// Same mesh, but every iSWAP is followed by `RY RZ` on both of its qubits.
///
/// With the layered form each round maps every input to one fixed product-like
/// state, which caps what the output can be; interleaving removes that cap.
pub fn build_interleaved_dissipative_block(n: usize, m: usize, param_offset: usize) -> Result<ParamCircuit> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("dissipative block needs n >= 1 and m >= 1".into()));
    }
    let mut gates = Vec::new();
    let mut k = 0;
    for q in 0..n + m {
        push_euler(&mut gates, q, &mut k);
    }
    for s in 0..n {
        for a in 0..m {
            gates.push(Gate::two_qubit(GateKind::Iswap, s, n + a));
            for q in [s, n + a] {
                for kind in [GateKind::Ry, GateKind::Rz] {
                    gates.push(Gate::rotation(kind, q, k));
                    k += 1;
                }
            }
        }
    }
    ParamCircuit::new(n + m, gates, k, param_offset, BlockRole::Dissipative)
}

/// Layout of the trainable system-ancilla block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipativeAnsatz {
    /// Rotation layer, bare iSWAP mesh, rotation layer: `6(n+m)` parameters.
    Layered,
    /// `RZ RY RZ` layer, then `RY RZ` on both qubits after every iSWAP:
    /// `3(n+m) + 4nm` parameters.
    #[default]
    Interleaved,
}

impl DissipativeAnsatz {
    pub fn build(self, n: usize, m: usize, param_offset: usize) -> Result<ParamCircuit> {
        match self {
            DissipativeAnsatz::Layered => build_dissipative_block(n, m, param_offset),
            DissipativeAnsatz::Interleaved => build_interleaved_dissipative_block(n, m, param_offset),
        }
    }

    pub fn param_count(self, n: usize, m: usize) -> usize {
        match self {
            DissipativeAnsatz::Layered => 6 * (n + m),
            DissipativeAnsatz::Interleaved => 3 * (n + m) + 4 * n * m,
        }
    }
}

/// Applies the gates in order as `rho -> G rho G^dagger`, injecting `noise`
/// on each gate's qubits when it is active at this block's site.
pub fn apply_circuit(c: &ParamCircuit, theta: &[f64], rho: &DensityMatrix, noise: &NoiseSpec) -> Result<DensityMatrix> {
    c.check_params(theta)?;
    if rho.qubit_count() != c.qubit_count {
        return Err(Error::DimensionMismatch(format!(
            "{}-qubit circuit on a {}-qubit state",
            c.qubit_count,
            rho.qubit_count()
        )));
    }
    let action = if noise.applies_at(c.role.noise_site()) { NoiseAction::resolve(noise)? } else { None };
    let mut out = rho.clone();
    let n = c.qubit_count;
    for g in &c.gates {
        conjugate_gate(out.matrix_mut(), n, g, c.angle(g, theta), false);
        if let Some(a) = &action {
            a.apply(out.matrix_mut(), n, &g.targets, false);
        }
    }
    Ok(out)
}

/// Ordered product of the embedded gate matrices.
pub fn circuit_unitary(c: &ParamCircuit, theta: &[f64]) -> Result<CMatrix> {
    c.check_params(theta)?;
    let d = 1usize << c.qubit_count;
    let mut u = CMatrix::identity(d);
    for g in &c.gates {
        let m = gate_matrix(g, c.angle(g, theta))?;
        let id = CMatrix::identity(m.rows());
        sandwich_embedded(&mut u, c.qubit_count, &g.targets, &m, &id);
    }
    Ok(u)
}
