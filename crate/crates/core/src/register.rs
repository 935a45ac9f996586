//! Star and double-layered-star spin registers, the entangler, and the
//! data-dependent encoding unitaries.
//!
//! Register layout: the central qubit C is index 0. In a star register the
//! ancillas A_1..A_n follow at indices 1..=n. In a double star, pair `k`
//! (0-based) occupies A_k = 1 + 2k and its outer partner B_k = 2 + 2k.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, qubit_mask, LinalgError, OperatorMatrix, C64};

pub const MAX_STAR_ANCILLAS: usize = 11;
pub const MAX_DOUBLE_STAR_PAIRS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegisterError {
    #[error("operation requires a {expected} register, got {found}")]
    WrongTopology {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid register: {0}")]
    InvalidRegister(String),
    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),
    #[error("classical input must have at least one coordinate")]
    EmptyInput,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, RegisterError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Star { n_ancillas: usize },
    DoubleStar { n_pairs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Central,
    Ancilla(usize),
    Outer(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegisterSpec {
    topology: Topology,
}

impl RegisterSpec {
    pub fn star(n_ancillas: usize) -> Result<Self> {
        if !(1..=MAX_STAR_ANCILLAS).contains(&n_ancillas) {
            return Err(RegisterError::InvalidRegister(format!(
                "star register needs 1..={MAX_STAR_ANCILLAS} ancillas, got {n_ancillas}"
            )));
        }
        Ok(Self {
            topology: Topology::Star { n_ancillas },
        })
    }

    pub fn double_star(n_pairs: usize) -> Result<Self> {
        if !(1..=MAX_DOUBLE_STAR_PAIRS).contains(&n_pairs) {
            return Err(RegisterError::InvalidRegister(format!(
                "double star needs 1..={MAX_DOUBLE_STAR_PAIRS} pairs, got {n_pairs}"
            )));
        }
        Ok(Self {
            topology: Topology::DoubleStar { n_pairs },
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn topology_name(&self) -> &'static str {
        match self.topology {
            Topology::Star { .. } => "star",
            Topology::DoubleStar { .. } => "double-star",
        }
    }

    pub fn total_qubits(&self) -> usize {
        match self.topology {
            Topology::Star { n_ancillas } => 1 + n_ancillas,
            Topology::DoubleStar { n_pairs } => 1 + 2 * n_pairs,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    pub fn role_of(&self, index: usize) -> Option<Role> {
        if index >= self.total_qubits() {
            return None;
        }
        if index == 0 {
            return Some(Role::Central);
        }
        Some(match self.topology {
            Topology::Star { .. } => Role::Ancilla(index - 1),
            Topology::DoubleStar { .. } if index % 2 == 1 => Role::Ancilla((index - 1) / 2),
            Topology::DoubleStar { .. } => Role::Outer((index - 2) / 2),
        })
    }

    /// Indices of the A qubits, in register order.
    pub fn ancillas(&self) -> Vec<usize> {
        match self.topology {
            Topology::Star { n_ancillas } => (1..=n_ancillas).collect(),
            Topology::DoubleStar { n_pairs } => (0..n_pairs).map(|k| 1 + 2 * k).collect(),
        }
    }

    /// `(A_k, B_k)` index pairs of a double star; empty for a star.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        match self.topology {
            Topology::Star { .. } => Vec::new(),
            Topology::DoubleStar { n_pairs } => (0..n_pairs).map(|k| (1 + 2 * k, 2 + 2 * k)).collect(),
        }
    }

    fn require_star(&self) -> Result<usize> {
        match self.topology {
            Topology::Star { n_ancillas } => Ok(n_ancillas),
            _ => Err(RegisterError::WrongTopology {
                expected: "star",
                found: self.topology_name(),
            }),
        }
    }

    fn require_double_star(&self) -> Result<usize> {
        match self.topology {
            Topology::DoubleStar { n_pairs } => Ok(n_pairs),
            _ => Err(RegisterError::WrongTopology {
                expected: "double-star",
                found: self.topology_name(),
            }),
        }
    }
}

/// Which fixed unitary spreads the central-spin observable over the ancillas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntanglerChoice {
    /// Hadamard on C, then CNOT from C to every ancilla. Maps `I_z^C` to
    /// `(1/2) X_C (x) prod_k X_{A_k}`.
    #[default]
    Fan,
    /// `Fan`, then `R_y(pi/4)` on C and a second CNOT fan.
    Layered,
    /// `Fan`, then a Hadamard on every ancilla. Maps `I_z^C` to
    /// `(1/2) X_C (x) prod_k Z_{A_k}`.
    FanZReadout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub register: RegisterSpec,
    pub entangler: EntanglerChoice,
    /// Radians per raw feature unit.
    pub input_scale: f64,
    /// Central-spin purity; only scales the raw signal, never the
    /// normalized kernel.
    pub purity: f64,
}

impl EncodingSpec {
    pub fn new(register: RegisterSpec, entangler: EntanglerChoice, input_scale: f64) -> Result<Self> {
        let spec = Self {
            register,
            entangler,
            input_scale,
            purity: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_purity(mut self, purity: f64) -> Result<Self> {
        self.purity = purity;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return Err(RegisterError::InvalidEncoding(format!(
                "input scale must be finite and positive, got {}",
                self.input_scale
            )));
        }
        if !(self.purity > 0.0 && self.purity <= 1.0) {
            return Err(RegisterError::InvalidEncoding(format!(
                "purity must lie in (0, 1], got {}",
                self.purity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Hadamard(usize),
    /// `exp(-i angle sigma_y / 2)`
    Ry { qubit: usize, angle: f64 },
    /// CNOT from `control` to each target (they commute).
    CnotFan { control: usize, targets: Vec<usize> },
    Diagonal(Vec<C64>),
    /// 4x4 unitary on `(q1, q2)`, `q1` the major factor.
    TwoQubit { q1: usize, q2: usize, matrix: OperatorMatrix },
}

fn hadamard_2x2() -> [C64; 4] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [h, h, h, -h]
}

fn ry_2x2(angle: f64) -> [C64; 4] {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    ]
}

fn cnot_fan_permutation(n_qubits: usize, control: usize, targets: &[usize]) -> Vec<usize> {
    let cmask = qubit_mask(control, n_qubits);
    let tmask = targets.iter().fold(0, |m, &t| m | qubit_mask(t, n_qubits));
    (0..1usize << n_qubits)
        .map(|i| if i & cmask != 0 { i ^ tmask } else { i })
        .collect()
}

/// A gate sequence; the first gate acts first.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    pub fn extend(&mut self, other: &Circuit) {
        assert_eq!(self.n_qubits, other.n_qubits, "register size mismatch");
        self.gates.extend(other.gates.iter().cloned());
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// The overall unitary, built by left-applying each gate to the identity.
    pub fn unitary(&self) -> OperatorMatrix {
        let mut m = OperatorMatrix::identity(1 << self.n_qubits);
        for gate in &self.gates {
            match gate {
                Gate::Hadamard(q) => linalg::apply_1q_left(&mut m, *q, &hadamard_2x2()),
                Gate::Ry { qubit, angle } => linalg::apply_1q_left(&mut m, *qubit, &ry_2x2(*angle)),
                Gate::CnotFan { control, targets } => {
                    let perm = cnot_fan_permutation(self.n_qubits, *control, targets);
                    linalg::apply_permutation_left(&mut m, &perm);
                }
                Gate::Diagonal(d) => linalg::apply_diagonal_left(&mut m, d),
                Gate::TwoQubit { q1, q2, matrix } => linalg::apply_2q_left(&mut m, *q1, *q2, matrix),
            }
        }
        // product of exactly unitary gates
        m.set_flags_unchecked(false, true);
        m
    }

    /// `W op W^dagger` with `W` the circuit unitary, gate by gate in O(dim^2) each.
    pub fn conjugate(&self, op: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(op.dim(), 1 << self.n_qubits, "operator dimension");
        let flags = (op.is_hermitian_flagged(), op.is_unitary_flagged());
        let mut m = op.clone();
        for gate in &self.gates {
            match gate {
                Gate::Hadamard(q) => linalg::conjugate_1q(&mut m, *q, &hadamard_2x2()),
                Gate::Ry { qubit, angle } => linalg::conjugate_1q(&mut m, *qubit, &ry_2x2(*angle)),
                Gate::CnotFan { control, targets } => {
                    let perm = cnot_fan_permutation(self.n_qubits, *control, targets);
                    linalg::conjugate_permutation(&mut m, &perm);
                }
                Gate::Diagonal(d) => linalg::conjugate_diagonal(&mut m, d),
                Gate::TwoQubit { q1, q2, matrix } => linalg::conjugate_2q(&mut m, *q1, *q2, matrix),
            }
        }
        m.set_flags_unchecked(flags.0, flags.1);
        m
    }
}

/// Diagonal of `sigma_z / 2` on qubit `q`.
fn half_z_diagonal(q: usize, n_qubits: usize) -> Vec<f64> {
    let mask = qubit_mask(q, n_qubits);
    (0..1usize << n_qubits)
        .map(|i| if i & mask == 0 { 0.5 } else { -0.5 })
        .collect()
}

/// `I_z^C`: `sigma_z / 2` on the central qubit.
pub fn central_iz(reg: &RegisterSpec) -> OperatorMatrix {
    OperatorMatrix::from_real_diagonal(&half_z_diagonal(0, reg.total_qubits()))
}

fn ancilla_iz_diagonal(reg: &RegisterSpec) -> Vec<f64> {
    let n = reg.total_qubits();
    let mut diag = vec![0.0; 1 << n];
    for a in reg.ancillas() {
        for (d, v) in diag.iter_mut().zip(half_z_diagonal(a, n)) {
            *d += v;
        }
    }
    diag
}

/// `I_z^A = sum_k sigma_z^{A_k} / 2` (star registers only).
pub fn collective_iz_ancilla(reg: &RegisterSpec) -> Result<OperatorMatrix> {
    reg.require_star()?;
    Ok(OperatorMatrix::from_real_diagonal(&ancilla_iz_diagonal(reg)))
}

/// Diagonal of `exp(-i angle I_z^A)`.
fn collective_rotation(reg: &RegisterSpec, angle: f64) -> Vec<C64> {
    ancilla_iz_diagonal(reg)
        .into_iter()
        .map(|m| C64::from_polar(1.0, -angle * m))
        .collect()
}

pub fn entangler_circuit(spec: &EncodingSpec) -> Circuit {
    let reg = &spec.register;
    let ancillas = reg.ancillas();
    let mut c = Circuit::new(reg.total_qubits());
    c.push(Gate::Hadamard(0));
    c.push(Gate::CnotFan {
        control: 0,
        targets: ancillas.clone(),
    });
    match spec.entangler {
        EntanglerChoice::Fan => {}
        EntanglerChoice::Layered => {
            c.push(Gate::Ry {
                qubit: 0,
                angle: std::f64::consts::FRAC_PI_4,
            });
            c.push(Gate::CnotFan {
                control: 0,
                targets: ancillas,
            });
        }
        EntanglerChoice::FanZReadout => {
            for a in ancillas {
                c.push(Gate::Hadamard(a));
            }
        }
    }
    c
}

/// The entangler `U_e` as a dense unitary.
pub fn entangler(spec: &EncodingSpec) -> OperatorMatrix {
    entangler_circuit(spec).unitary()
}

/// Circuit of `U(x) = prod_j exp(-i g x_j I_z^A) U_e exp(+i g x_j I_z^A)`,
/// with the `j = 1` factor leftmost (so applied last).
pub fn classical_circuit(spec: &EncodingSpec, x: &[f64]) -> Result<Circuit> {
    spec.register.require_star()?;
    if x.is_empty() {
        return Err(RegisterError::EmptyInput);
    }
    let reg = &spec.register;
    let ue = entangler_circuit(spec);
    let mut c = Circuit::new(reg.total_qubits());
    for &xj in x.iter().rev() {
        let angle = spec.input_scale * xj;
        c.push(Gate::Diagonal(collective_rotation(reg, -angle)));
        c.extend(&ue);
        c.push(Gate::Diagonal(collective_rotation(reg, angle)));
    }
    Ok(c)
}

pub fn encode_classical(spec: &EncodingSpec, x: &[f64]) -> Result<OperatorMatrix> {
    Ok(classical_circuit(spec, x)?.unitary())
}

fn check_pair_unitary(u_pair: &OperatorMatrix) -> Result<()> {
    if u_pair.dim() != 4 {
        return Err(LinalgError::DimMismatch {
            left: 4,
            right: u_pair.dim(),
        }
        .into());
    }
    u_pair.require_unitary()?;
    Ok(())
}

/// Circuit of `V = U~ U_e U~^dagger` with `U~` the input applied to every
/// `(A_k, B_k)` pair.
pub fn unitary_circuit(spec: &EncodingSpec, u_pair: &OperatorMatrix) -> Result<Circuit> {
    spec.register.require_double_star()?;
    check_pair_unitary(u_pair)?;
    let reg = &spec.register;
    let u_dag = u_pair.adjoint();
    let mut c = Circuit::new(reg.total_qubits());
    for &(a, b) in &reg.pairs() {
        c.push(Gate::TwoQubit {
            q1: a,
            q2: b,
            matrix: u_dag.clone(),
        });
    }
    c.extend(&entangler_circuit(spec));
    for &(a, b) in &reg.pairs() {
        c.push(Gate::TwoQubit {
            q1: a,
            q2: b,
            matrix: u_pair.clone(),
        });
    }
    Ok(c)
}

pub fn encode_unitary(spec: &EncodingSpec, u_pair: &OperatorMatrix) -> Result<OperatorMatrix> {
    Ok(unitary_circuit(spec, u_pair)?.unitary())
}

/// `A = W I_z^C W^dagger` for a dense encoder output `W`.
pub fn feature_operator(spec: &EncodingSpec, encoder_output: &OperatorMatrix) -> Result<OperatorMatrix> {
    let reg = &spec.register;
    if encoder_output.dim() != reg.dim() {
        return Err(LinalgError::DimMismatch {
            left: reg.dim(),
            right: encoder_output.dim(),
        }
        .into());
    }
    encoder_output.require_unitary()?;
    let mut a = encoder_output.conjugate(&central_iz(reg))?;
    a.set_flags_unchecked(true, false);
    Ok(a)
}

/// Feature operator via gate-by-gate conjugation of `I_z^C`.
pub fn feature_from_circuit(spec: &EncodingSpec, circuit: &Circuit) -> OperatorMatrix {
    circuit.conjugate(&central_iz(&spec.register))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues_hermitian, frobenius_inner, kron, matexp_hermitian};

    fn star_spec(n: usize) -> EncodingSpec {
        EncodingSpec::new(RegisterSpec::star(n).unwrap(), EntanglerChoice::Fan, 1.0).unwrap()
    }

    fn double_spec(n: usize) -> EncodingSpec {
        EncodingSpec::new(RegisterSpec::double_star(n).unwrap(), EntanglerChoice::Fan, 1.0).unwrap()
    }

    fn pauli(which: char) -> OperatorMatrix {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let data = match which {
            'I' => vec![one, z, z, one],
            'X' => vec![z, one, one, z],
            'Y' => vec![z, -i, i, z],
            'Z' => vec![one, z, z, -one],
            _ => unreachable!(),
        };
        OperatorMatrix::new(2, data).unwrap()
    }

    fn string(ops: &[OperatorMatrix]) -> OperatorMatrix {
        ops.iter().skip(1).fold(ops[0].clone(), |acc, o| kron(&acc, o))
    }

    #[test]
    fn register_roles_and_sizes() {
        let s = RegisterSpec::star(3).unwrap();
        assert_eq!(s.total_qubits(), 4);
        assert_eq!(s.role_of(0), Some(Role::Central));
        assert_eq!(s.role_of(3), Some(Role::Ancilla(2)));
        assert_eq!(s.role_of(4), None);
        let d = RegisterSpec::double_star(2).unwrap();
        assert_eq!(d.total_qubits(), 5);
        assert_eq!(d.role_of(1), Some(Role::Ancilla(0)));
        assert_eq!(d.role_of(2), Some(Role::Outer(0)));
        assert_eq!(d.role_of(4), Some(Role::Outer(1)));
        assert_eq!(d.pairs(), vec![(1, 2), (3, 4)]);
        assert!(RegisterSpec::star(0).is_err());
        assert!(RegisterSpec::double_star(5).is_err());
    }

    #[test]
    fn encoding_spec_validation() {
        let reg = RegisterSpec::star(1).unwrap();
        assert!(EncodingSpec::new(reg, EntanglerChoice::Fan, 0.0).is_err());
        assert!(EncodingSpec::new(reg, EntanglerChoice::Fan, f64::NAN).is_err());
        let spec = EncodingSpec::new(reg, EntanglerChoice::Fan, 1.0).unwrap();
        assert!(spec.with_purity(0.0).is_err());
        assert!(spec.with_purity(0.3).is_ok());
    }

    #[test]
    fn central_iz_single_ancilla() {
        let iz = central_iz(&RegisterSpec::star(1).unwrap());
        let expected = OperatorMatrix::from_real_diagonal(&[0.5, 0.5, -0.5, -0.5]);
        assert_eq!(iz, expected);
        let reg = RegisterSpec::star(3).unwrap();
        let iz = central_iz(&reg);
        assert_eq!(frobenius_inner(&iz, &iz).unwrap().re, 16.0 / 4.0);
        let ev = eigenvalues_hermitian(&iz).unwrap();
        assert_eq!(ev.iter().filter(|&&v| v == 0.5).count(), 8);
        assert_eq!(ev.iter().filter(|&&v| v == -0.5).count(), 8);
    }

    #[test]
    fn collective_iz_properties() {
        let reg = RegisterSpec::star(2).unwrap();
        let iza = collective_iz_ancilla(&reg).unwrap();
        let diag: Vec<f64> = (0..8).map(|i| iza.get(i, i).re).collect();
        assert_eq!(diag, vec![1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0]);
        let izc = central_iz(&reg);
        let comm = iza.matmul(&izc).unwrap().sub(&izc.matmul(&iza).unwrap()).unwrap();
        assert_eq!(comm.max_abs_diff(&OperatorMatrix::zeros(8)), 0.0);
        assert!(matches!(
            collective_iz_ancilla(&RegisterSpec::double_star(1).unwrap()),
            Err(RegisterError::WrongTopology { .. })
        ));
    }

    #[test]
    fn full_turn_of_collective_rotation_is_global_phase() {
        for n in 1..=3 {
            let reg = RegisterSpec::star(n).unwrap();
            let iza = collective_iz_ancilla(&reg).unwrap();
            let u = matexp_hermitian(&iza, -2.0 * std::f64::consts::PI).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let expected = OperatorMatrix::identity(reg.dim()).scale(C64::new(sign, 0.0));
            assert!(u.max_abs_diff(&expected) < 1e-12);
        }
    }

    #[test]
    fn entangler_maps_iz_to_full_coherence() {
        let spec = star_spec(1);
        let ue = entangler(&spec);
        assert!(ue.unitarity_deviation() < 1e-12);
        let a = ue.conjugate(&central_iz(&spec.register)).unwrap();
        let expected = string(&[pauli('X'), pauli('X')]).scale(C64::new(0.5, 0.0));
        assert!(a.max_abs_diff(&expected) < 1e-12);

        let spec = star_spec(2);
        let a = entangler(&spec).conjugate(&central_iz(&spec.register)).unwrap();
        for k in 1..=2 {
            let mut ops = vec![pauli('I'), pauli('I'), pauli('I')];
            ops[k] = pauli('Z');
            let z_k = string(&ops);
            let anti = a.matmul(&z_k).unwrap().add(&z_k.matmul(&a).unwrap()).unwrap();
            assert!(anti.max_abs_diff(&OperatorMatrix::zeros(8)) < 1e-12);
        }
    }

    #[test]
    fn z_readout_entangler_reference_operator() {
        let reg = RegisterSpec::double_star(1).unwrap();
        let spec = EncodingSpec::new(reg, EntanglerChoice::FanZReadout, 1.0).unwrap();
        let a = entangler(&spec).conjugate(&central_iz(&reg)).unwrap();
        let expected = string(&[pauli('X'), pauli('Z'), pauli('I')]).scale(C64::new(0.5, 0.0));
        assert!(a.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn classical_encoding_zero_angle_is_entangler() {
        let spec = star_spec(2);
        assert_eq!(encode_classical(&spec, &[0.0]).unwrap(), entangler(&spec));
        assert!(matches!(encode_classical(&spec, &[]), Err(RegisterError::EmptyInput)));
        assert!(matches!(
            encode_classical(&double_spec(1), &[0.1]),
            Err(RegisterError::WrongTopology { .. })
        ));
    }

    #[test]
    fn classical_encoding_is_unitary_and_periodic() {
        let spec = EncodingSpec::new(RegisterSpec::star(3).unwrap(), EntanglerChoice::Layered, 0.8).unwrap();
        let x = [0.37, -1.2];
        let u = encode_classical(&spec, &x).unwrap();
        assert!(u.unitarity_deviation() < 1e-10);
        let period = 2.0 * std::f64::consts::PI / spec.input_scale;
        let shifted = [x[0] + period, x[1] - period];
        let a = feature_operator(&spec, &u).unwrap();
        let b = feature_operator(&spec, &encode_classical(&spec, &shifted).unwrap()).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn analytic_feature_operator_for_fan() {
        for n in 1..=3 {
            let spec = star_spec(n);
            let x = 0.61;
            let a = feature_from_circuit(&spec, &classical_circuit(&spec, &[x]).unwrap());
            let p = pauli('X')
                .scale(C64::new(x.cos(), 0.0))
                .add(&pauli('Y').scale(C64::new(x.sin(), 0.0)))
                .unwrap();
            let mut ops = vec![pauli('X')];
            ops.extend(std::iter::repeat(p).take(n));
            let expected = string(&ops).scale(C64::new(0.5, 0.0));
            assert!(a.max_abs_diff(&expected) < 1e-10);
        }
    }

    #[test]
    fn multi_dimensional_encoding_is_product_of_factors() {
        let spec = star_spec(2);
        let x = 0.42;
        let one = encode_classical(&spec, &[x]).unwrap();
        let three = encode_classical(&spec, &[x, x, x]).unwrap();
        let cube = one.matmul(&one).unwrap().matmul(&one).unwrap();
        assert!(three.max_abs_diff(&cube) < 1e-12);
    }

    #[test]
    fn circuit_conjugation_matches_dense_feature() {
        let spec = EncodingSpec::new(RegisterSpec::star(2).unwrap(), EntanglerChoice::Layered, 1.3).unwrap();
        let c = classical_circuit(&spec, &[0.2, -0.9]).unwrap();
        let dense = feature_operator(&spec, &c.unitary()).unwrap();
        let fast = feature_from_circuit(&spec, &c);
        assert!(dense.max_abs_diff(&fast) < 1e-12);
    }

    #[test]
    fn unitary_encoding_identity_and_commuting_inputs() {
        let spec = double_spec(2);
        let i4 = OperatorMatrix::identity(4);
        let v = encode_unitary(&spec, &i4).unwrap();
        assert!(v.max_abs_diff(&entangler(&spec)) < 1e-15);

        // X on A commutes with every A-qubit factor of the fan entangler
        let w = matexp_hermitian(&pauli('Y').add(&pauli('Z')).unwrap().into_hermitian().unwrap(), 0.4).unwrap();
        let u = kron(&pauli('X'), &w).into_unitary().unwrap();
        let v = encode_unitary(&spec, &u).unwrap();
        assert!(v.max_abs_diff(&entangler(&spec)) < 1e-12);
    }

    #[test]
    fn unitary_encoding_rejects_bad_inputs() {
        let spec = double_spec(1);
        let not_unitary = OperatorMatrix::from_real_diagonal(&[1.0, 2.0, 1.0, 1.0]);
        assert!(matches!(
            encode_unitary(&spec, &not_unitary),
            Err(RegisterError::Linalg(LinalgError::NonUnitaryInput { .. }))
        ));
        assert!(matches!(
            encode_unitary(&star_spec(2), &OperatorMatrix::identity(4)),
            Err(RegisterError::WrongTopology { .. })
        ));
        assert!(encode_unitary(&spec, &OperatorMatrix::identity(2)).is_err());
    }

    #[test]
    fn feature_operator_of_identity_is_central_iz() {
        let spec = star_spec(2);
        let a = feature_operator(&spec, &OperatorMatrix::identity(8)).unwrap();
        assert_eq!(a, central_iz(&spec.register));
        assert!(feature_operator(&spec, &OperatorMatrix::identity(4)).is_err());
    }
}
