//! CPTP maps: single-qubit noise, Kraus application, Stinespring dilation and
//! the partial reset channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    attach_zero_qubits, depolarize_1q_in_place, kraus_1q_in_place, partial_trace, sandwich_embedded, CMatrix,
    DropPosition, RegisterShape, C64, EQ_TOL, ONE, RECON_TOL, ZERO,
};
use crate::states::DensityMatrix;

/// Kraus operators `K_i` with `sum_i K_i^dagger K_i = I`, acting on `arity` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    arity: usize,
    ops: Vec<CMatrix>,
}

impl KrausChannel {
    pub fn new(arity: usize, ops: Vec<CMatrix>) -> Result<Self> {
        let d = 1usize << arity;
        if ops.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one Kraus operator".into()));
        }
        if let Some(k) = ops.iter().find(|k| k.rows() != d || k.cols() != d) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator {}x{} on {arity} qubits",
                k.rows(),
                k.cols()
            )));
        }
        let ch = Self { arity, ops };
        let dev = ch.completeness_deviation();
        if dev > EQ_TOL {
            return Err(Error::Completeness(dev));
        }
        Ok(ch)
    }

    pub fn identity(arity: usize) -> Self {
        Self { arity, ops: vec![CMatrix::identity(1 << arity)] }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    /// `max |(sum_i K_i^dagger K_i - I)_jk|`.
    pub fn completeness_deviation(&self) -> f64 {
        let d = 1usize << self.arity;
        let mut sum = CMatrix::zeros(d, d);
        for k in &self.ops {
            sum = sum.add(&k.adjoint().matmul(k).expect("square")).expect("same shape");
        }
        sum.max_abs_diff(&CMatrix::identity(d))
    }

    fn ops_2x2(&self) -> Vec<[C64; 4]> {
        self.ops.iter().map(|k| [k[(0, 0)], k[(0, 1)], k[(1, 0)], k[(1, 1)]]).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    Depolarizing,
    BitFlip,
    AmplitudeDamping,
}

/// Which call sites a noise model is active at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLocation {
    /// After every gate, both in system-only blocks and in dissipative blocks.
    #[default]
    FullyNoisy,
    /// After gates of system-only blocks.
    SystemOnly,
    /// Once on every qubit of a prepared input state.
    InputOnly,
}

/// A place in a pipeline where noise may be injected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseSite {
    SystemGate,
    DissipativeGate,
    InputPreparation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub location: NoiseLocation,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { kind: NoiseKind::None, p: 0.0, location: NoiseLocation::FullyNoisy };

    pub fn new(kind: NoiseKind, p: f64, location: NoiseLocation) -> Result<Self> {
        let spec = Self { kind, p, location };
        spec.validate()?;
        Ok(spec)
    }

    pub fn depolarizing(p: f64, location: NoiseLocation) -> Result<Self> {
        Self::new(NoiseKind::Depolarizing, p, location)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("noise strength {} outside [0, 1]", self.p)));
        }
        Ok(())
    }

    /// True when this spec does nothing anywhere.
    pub fn is_trivial(&self) -> bool {
        self.kind == NoiseKind::None || self.p == 0.0
    }

    pub fn applies_at(&self, site: NoiseSite) -> bool {
        if self.is_trivial() {
            return false;
        }
        matches!(
            (self.location, site),
            (NoiseLocation::FullyNoisy, NoiseSite::SystemGate | NoiseSite::DissipativeGate)
                | (NoiseLocation::SystemOnly, NoiseSite::SystemGate)
                | (NoiseLocation::InputOnly, NoiseSite::InputPreparation)
        )
    }
}

/// Single-qubit Kraus set for `spec`.
///
/// Depolarizing uses the Pauli-mixing form `(1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)`.
pub fn make_noise(spec: &NoiseSpec) -> Result<KrausChannel> {
    spec.validate()?;
    let p = spec.p;
    let r = |x: f64| C64::new(x, 0.0);
    let m = |a, b, c, d| CMatrix::new(2, 2, vec![a, b, c, d]).expect("2x2");
    let ops = match spec.kind {
        NoiseKind::None => vec![CMatrix::identity(2)],
        NoiseKind::Depolarizing => {
            let (a, b) = ((1.0 - p).sqrt(), (p / 3.0).sqrt());
            vec![
                m(r(a), ZERO, ZERO, r(a)),
                m(ZERO, r(b), r(b), ZERO),
                m(ZERO, C64::new(0.0, -b), C64::new(0.0, b), ZERO),
                m(r(b), ZERO, ZERO, r(-b)),
            ]
        }
        NoiseKind::BitFlip => {
            let (a, b) = ((1.0 - p).sqrt(), p.sqrt());
            vec![m(r(a), ZERO, ZERO, r(a)), m(ZERO, r(b), r(b), ZERO)]
        }
        NoiseKind::AmplitudeDamping => vec![m(ONE, ZERO, ZERO, r((1.0 - p).sqrt())), m(ZERO, r(p.sqrt()), ZERO, ZERO)],
    };
    KrausChannel::new(1, ops)
}

fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::InvalidArgument(format!("qubit {t} out of range for {n_qubits} qubits")));
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidArgument(format!("qubit {t} listed twice")));
        }
    }
    Ok(())
}

/// `sum_i K_i rho K_i^dagger` with each `K_i` embedded on `targets`.
pub fn apply_kraus(ch: &KrausChannel, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
    let n = rho.qubit_count();
    check_targets(n, targets)?;
    if ch.arity != targets.len() {
        return Err(Error::DimensionMismatch(format!("{}-qubit channel on {} targets", ch.arity, targets.len())));
    }
    let dev = ch.completeness_deviation();
    if dev > EQ_TOL {
        return Err(Error::Completeness(dev));
    }
    let mut out = rho.clone();
    if ch.arity == 1 {
        kraus_1q_in_place(out.matrix_mut(), n, targets[0], &ch.ops_2x2(), false);
    } else {
        let d = rho.shape().dim();
        let mut acc = CMatrix::zeros(d, d);
        for k in &ch.ops {
            let mut term = rho.matrix().clone();
            sandwich_embedded(&mut term, n, targets, k, k);
            acc = acc.add(&term)?;
        }
        *out.matrix_mut() = acc;
    }
    Ok(out)
}

/// Per-qubit noise action resolved for the in-place kernels.
#[derive(Clone, Debug)]
pub(crate) enum NoiseAction {
    Depolarize(f64),
    Kraus(Vec<[C64; 4]>),
}

impl NoiseAction {
    pub(crate) fn resolve(spec: &NoiseSpec) -> Result<Option<NoiseAction>> {
        if spec.is_trivial() {
            return Ok(None);
        }
        Ok(Some(match spec.kind {
            NoiseKind::Depolarizing => NoiseAction::Depolarize(spec.p),
            _ => NoiseAction::Kraus(make_noise(spec)?.ops_2x2()),
        }))
    }

    /// Applies the channel (or its dual with `adjoint`) to each touched qubit.
    pub(crate) fn apply(&self, mat: &mut CMatrix, n_qubits: usize, touched: &[usize], adjoint: bool) {
        for &q in touched {
            match self {
                NoiseAction::Depolarize(p) => depolarize_1q_in_place(mat, n_qubits, q, *p),
                NoiseAction::Kraus(ops) => kraus_1q_in_place(mat, n_qubits, q, ops, adjoint),
            }
        }
    }
}

/// Applies the single-qubit channel of `spec` independently to every touched
/// qubit, provided `spec` is active at `site`.
pub fn inject_noise(
    rho: &DensityMatrix,
    spec: &NoiseSpec,
    touched: &[usize],
    site: NoiseSite,
) -> Result<DensityMatrix> {
    check_targets(rho.qubit_count(), touched)?;
    let mut out = rho.clone();
    if spec.applies_at(site) {
        if let Some(action) = NoiseAction::resolve(spec)? {
            let n = rho.qubit_count();
            action.apply(out.matrix_mut(), n, touched, false);
        }
    }
    Ok(out)
}

fn check_unitary(v: &CMatrix, dim: usize) -> Result<()> {
    if v.rows() != dim || v.cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "dilation unitary is {}x{}, expected {dim}x{dim}",
            v.rows(),
            v.cols()
        )));
    }
    let dev = v.unitarity_deviation();
    if dev > RECON_TOL {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

/// `Tr_A[V (rho_S ⊗ |0><0|^m) V^dagger]`.
pub fn stinespring_apply(v_sa: &CMatrix, rho_s: &DensityMatrix, m: usize) -> Result<DensityMatrix> {
    let n = rho_s.qubit_count();
    let joint = RegisterShape::new(n + m)?;
    check_unitary(v_sa, joint.dim())?;
    let big = attach_zero_qubits(rho_s.matrix(), m);
    let evolved = v_sa.matmul(&big)?.matmul(&v_sa.adjoint())?;
    let reduced = partial_trace(&evolved, rho_s.shape(), RegisterShape::new(m)?, DropPosition::Back)?;
    DensityMatrix::from_matrix_unchecked(rho_s.shape(), reduced)
}

/// `K_i = <i|_A V |0>_A` for every ancilla basis state `i`.
pub fn kraus_from_stinespring(v_sa: &CMatrix, n: usize, m: usize) -> Result<KrausChannel> {
    let joint = RegisterShape::new(n + m)?;
    check_unitary(v_sa, joint.dim())?;
    let (ds, da) = (1usize << n, 1usize << m);
    let ops = (0..da).map(|i| CMatrix::from_fn(ds, ds, |r, c| v_sa[(r * da + i, c * da)])).collect();
    KrausChannel::new(n, ops)
}

/// `(1-q) rho + q (Tr_R[rho] ⊗ |0><0|_R)` for the qubit set `R = targets`.
pub fn reset_channel(rho: &DensityMatrix, targets: &[usize], q: f64) -> Result<DensityMatrix> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("reset probability {q} outside (0, 1]")));
    }
    let n = rho.qubit_count();
    check_targets(n, targets)?;
    let reset_ops = [[ONE, ZERO, ZERO, ZERO], [ZERO, ONE, ZERO, ZERO]];
    let mut reset = rho.matrix().clone();
    for &t in targets {
        kraus_1q_in_place(&mut reset, n, t, &reset_ops, false);
    }
    let mixed = rho.matrix().scale(C64::new(1.0 - q, 0.0)).add(&reset.scale(C64::new(q, 0.0)))?;
    DensityMatrix::from_matrix_unchecked(rho.shape(), mixed)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::qmath::tensor;
    use crate::states::tests::random_density;
    use crate::states::{fidelity_general, fidelity_pure, w_state, zero_state};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dp(p: f64) -> NoiseSpec {
        NoiseSpec::depolarizing(p, NoiseLocation::FullyNoisy).unwrap()
    }

    /// Haar-ish random unitary via Gram-Schmidt on a random complex matrix.
    pub(crate) fn random_unitary(rng: &mut impl Rng, d: usize) -> CMatrix {
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
        while cols.len() < d {
            let mut v: Vec<C64> =
                (0..d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            for u in &cols {
                let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                cols.push(v.iter().map(|z| z / norm).collect());
            }
        }
        CMatrix::from_fn(d, d, |r, c| cols[c][r])
    }

    #[test]
    fn identity_channel_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, 2);
        let out = apply_kraus(&KrausChannel::identity(1), &rho, &[1]).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn certain_bit_flip() {
        let spec = NoiseSpec::new(NoiseKind::BitFlip, 1.0, NoiseLocation::FullyNoisy).unwrap();
        let out = apply_kraus(&make_noise(&spec).unwrap(), &zero_state(1).unwrap(), &[0]).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::diag(&[ZERO, ONE])) < 1e-15);
    }

    #[test]
    fn depolarizing_on_zero_state() {
        for p in [0.0, 0.1, 0.4, 0.75, 1.0] {
            let out = apply_kraus(&make_noise(&dp(p)).unwrap(), &zero_state(1).unwrap(), &[0]).unwrap();
            // Hand-composed sum: (1-p)|0><0| + (p/3)(|1><1| + |1><1| + |0><0|).
            assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 1.0 - 2.0 * p / 3.0, epsilon = 1e-14);
            assert_abs_diff_eq!(out.matrix()[(1, 1)].re, 2.0 * p / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_strength_is_identity_for_every_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&mut rng, 1);
        for kind in [NoiseKind::Depolarizing, NoiseKind::BitFlip, NoiseKind::AmplitudeDamping] {
            let ch = make_noise(&NoiseSpec::new(kind, 0.0, NoiseLocation::FullyNoisy).unwrap()).unwrap();
            let out = apply_kraus(&ch, &rho, &[0]).unwrap();
            assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
        }
    }

    #[test]
    fn full_damping_and_full_twirl() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ad = NoiseSpec::new(NoiseKind::AmplitudeDamping, 1.0, NoiseLocation::FullyNoisy).unwrap();
        let half = CMatrix::identity(2).scale(C64::new(0.5, 0.0));
        for _ in 0..10 {
            let rho = random_density(&mut rng, 1);
            let damped = apply_kraus(&make_noise(&ad).unwrap(), &rho, &[0]).unwrap();
            assert!(damped.matrix().max_abs_diff(zero_state(1).unwrap().matrix()) < 1e-14);
            let twirled = apply_kraus(&make_noise(&dp(0.75)).unwrap(), &rho, &[0]).unwrap();
            assert!(twirled.matrix().max_abs_diff(&half) < 1e-14);
        }
    }

    #[test]
    fn invalid_strength_rejected() {
        assert!(NoiseSpec::depolarizing(1.5, NoiseLocation::FullyNoisy).is_err());
        let bad = NoiseSpec { kind: NoiseKind::BitFlip, p: -0.1, location: NoiseLocation::InputOnly };
        assert!(make_noise(&bad).is_err());
    }

    #[test]
    fn kraus_target_errors() {
        let rho = zero_state(2).unwrap();
        let ch = make_noise(&dp(0.1)).unwrap();
        assert!(apply_kraus(&ch, &rho, &[2]).is_err());
        assert!(apply_kraus(&ch, &rho, &[0, 1]).is_err());
        let broken = KrausChannel { arity: 1, ops: vec![CMatrix::identity(2).scale(C64::new(0.5, 0.0))] };
        assert!(matches!(apply_kraus(&broken, &rho, &[0]), Err(Error::Completeness(_))));
        assert!(KrausChannel::new(1, vec![CMatrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn inject_noise_respects_kind_strength_and_site() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density(&mut rng, 2);
        let same = |out: DensityMatrix| out.matrix().max_abs_diff(rho.matrix()) < 1e-15;
        assert!(same(inject_noise(&rho, &NoiseSpec::NONE, &[0, 1], NoiseSite::SystemGate).unwrap()));
        assert!(same(inject_noise(&rho, &dp(0.0), &[0, 1], NoiseSite::SystemGate).unwrap()));
        let input_only = NoiseSpec::depolarizing(0.2, NoiseLocation::InputOnly).unwrap();
        assert!(same(inject_noise(&rho, &input_only, &[0], NoiseSite::DissipativeGate).unwrap()));
        assert!(!same(inject_noise(&rho, &input_only, &[0], NoiseSite::InputPreparation).unwrap()));
        let sys_only = NoiseSpec::depolarizing(0.2, NoiseLocation::SystemOnly).unwrap();
        assert!(same(inject_noise(&rho, &sys_only, &[0], NoiseSite::DissipativeGate).unwrap()));
        assert!(!same(inject_noise(&rho, &sys_only, &[0], NoiseSite::SystemGate).unwrap()));
    }

    #[test]
    fn bell_purity_under_two_qubit_depolarizing() {
        let r = 0.5f64.sqrt();
        let bell = DensityMatrix::from_pure(
            &crate::states::PureState::new(
                RegisterShape::new(2).unwrap(),
                vec![C64::new(r, 0.0), ZERO, ZERO, C64::new(r, 0.0)],
            )
            .unwrap(),
        );
        let out = inject_noise(&bell, &dp(0.1), &[0, 1], NoiseSite::SystemGate).unwrap();
        // Oracle: explicit 16-operator tensor-product Kraus sum.
        let single = make_noise(&dp(0.1)).unwrap();
        let mut acc = CMatrix::zeros(4, 4);
        for a in single.ops() {
            for b in single.ops() {
                let k = tensor(a, b).unwrap();
                let term = k.matmul(bell.matrix()).unwrap().matmul(&k.adjoint()).unwrap();
                acc = acc.add(&term).unwrap();
            }
        }
        let oracle = crate::qmath::trace_product(&acc, &acc).re;
        assert_abs_diff_eq!(out.purity(), oracle, epsilon = 1e-14);
        let general = apply_kraus(
            &KrausChannel::new(
                2,
                single.ops().iter().flat_map(|a| single.ops().iter().map(move |b| tensor(a, b).unwrap())).collect(),
            )
            .unwrap(),
            &bell,
            &[0, 1],
        )
        .unwrap();
        assert!(general.matrix().max_abs_diff(&acc) < 1e-14);
    }

    #[test]
    fn w_state_fidelity_after_depolarizing_matches_uhlmann() {
        let w = w_state(3).unwrap();
        let noisy = inject_noise(&w.projector(), &dp(0.1), &[0, 1, 2], NoiseSite::SystemGate).unwrap();
        let f_pure = fidelity_pure(&noisy, &w).unwrap();
        let f_general = fidelity_general(&noisy, &w.projector()).unwrap();
        assert_abs_diff_eq!(f_pure, f_general, epsilon = 1e-9);
        assert!(f_pure < 1.0 && f_pure > 0.5);
    }

    #[test]
    fn stinespring_identity_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(&mut rng, 1);
        let same = stinespring_apply(&CMatrix::identity(4), &rho, 1).unwrap();
        assert!(same.matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let swap = CMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let out = stinespring_apply(&swap, &rho, 1).unwrap();
        assert!(out.matrix().max_abs_diff(zero_state(1).unwrap().matrix()) < 1e-15);
        assert!(matches!(stinespring_apply(&swap.scale(C64::new(2.0, 0.0)), &rho, 1), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn kraus_extraction_examples() {
        let ch = kraus_from_stinespring(&CMatrix::identity(4), 1, 1).unwrap();
        assert_eq!(ch.ops()[0], CMatrix::identity(2));
        assert!(ch.ops()[1].frobenius_norm() == 0.0);
        // CNOT with system control, ancilla target: dephasing Kraus pair.
        let cnot = CMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let ch = kraus_from_stinespring(&cnot, 1, 1).unwrap();
        assert_eq!(ch.ops()[0], CMatrix::diag(&[ONE, ZERO]));
        assert_eq!(ch.ops()[1], CMatrix::diag(&[ZERO, ONE]));
    }

    #[test]
    fn dilation_completeness_over_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for i in 0..100 {
            let (n, m) = (1 + i % 2, 1 + (i / 2) % 2);
            let v = random_unitary(&mut rng, 1 << (n + m));
            let ch = kraus_from_stinespring(&v, n, m).unwrap();
            assert_eq!(ch.ops().len(), 1 << m);
            assert!(ch.completeness_deviation() < 1e-10);
        }
    }

    #[test]
    fn stinespring_equals_kraus_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = random_unitary(&mut rng, 8);
        let rho = random_density(&mut rng, 2);
        let a = stinespring_apply(&v, &rho, 1).unwrap();
        let b = apply_kraus(&kraus_from_stinespring(&v, 2, 1).unwrap(), &rho, &[0, 1]).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-10);
    }

    #[test]
    fn reset_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let keep = random_density(&mut rng, 1);
        let other = random_density(&mut rng, 1);
        let prod =
            DensityMatrix::new(RegisterShape::new(2).unwrap(), tensor(keep.matrix(), other.matrix()).unwrap()).unwrap();
        let out = reset_channel(&prod, &[1], 1.0).unwrap();
        let expect = tensor(keep.matrix(), zero_state(1).unwrap().matrix()).unwrap();
        assert!(out.matrix().max_abs_diff(&expect) < 1e-14);

        let one = DensityMatrix::new(RegisterShape::new(1).unwrap(), CMatrix::diag(&[ZERO, ONE])).unwrap();
        let half = reset_channel(&one, &[0], 0.5).unwrap();
        assert!(half.matrix().max_abs_diff(&CMatrix::diag(&[C64::new(0.5, 0.0); 2])) < 1e-15);
        assert!(reset_channel(&one, &[0], 0.0).is_err());
        assert!(reset_channel(&one, &[0], 1.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn reset_preserves_trace_and_full_reset_is_idempotent(
            seed in any::<u64>(),
            q in 0.01f64..=1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, 3);
            let out = reset_channel(&rho, &[0, 2], q).unwrap();
            prop_assert!((out.trace() - 1.0).abs() < 1e-12);
            let once = reset_channel(&rho, &[1], 1.0).unwrap();
            let twice = reset_channel(&once, &[1], 1.0).unwrap();
            prop_assert!(once.matrix().max_abs_diff(twice.matrix()) < 1e-14);
        }

        #[test]
        fn depolarizing_never_raises_purity(seed in any::<u64>(), p in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, 2);
            let out = inject_noise(&rho, &dp(p), &[0, 1], NoiseSite::DissipativeGate).unwrap();
            prop_assert!(out.purity() <= rho.purity() + 1e-12);
            prop_assert!(out.is_valid());
        }

        #[test]
        fn channel_outputs_are_density_matrices(seed in any::<u64>(), kind in 0usize..3, p in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kind = [NoiseKind::Depolarizing, NoiseKind::BitFlip, NoiseKind::AmplitudeDamping][kind];
            let spec = NoiseSpec::new(kind, p, NoiseLocation::FullyNoisy).unwrap();
            let rho = random_density(&mut rng, 2);
            let out = apply_kraus(&make_noise(&spec).unwrap(), &rho, &[1]).unwrap();
            prop_assert!(out.is_valid());
            let v = random_unitary(&mut rng, 8);
            let dil = stinespring_apply(&v, &rho, 1).unwrap();
            prop_assert!(dil.is_valid());
        }
    }
}
