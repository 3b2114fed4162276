use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, ONE, ZERO};

/// The fixed gate set. Rotation gates carry their angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    Cx,
    Cz,
    Swap,
}

impl Gate {
    pub const NAMES: [&'static str; 14] = [
        "x", "y", "z", "h", "s", "sdg", "t", "tdg", "rx", "ry", "rz", "cx", "cz", "swap",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Gate::X => "x",
            Gate::Y => "y",
            Gate::Z => "z",
            Gate::H => "h",
            Gate::S => "s",
            Gate::Sdg => "sdg",
            Gate::T => "t",
            Gate::Tdg => "tdg",
            Gate::Rx(_) => "rx",
            Gate::Ry(_) => "ry",
            Gate::Rz(_) => "rz",
            Gate::Cx => "cx",
            Gate::Cz => "cz",
            Gate::Swap => "swap",
        }
    }

    /// Parses a gate name, requiring an angle exactly for rotations.
    pub fn parse(name: &str, angle: Option<f64>) -> Result<Self> {
        let needs_angle = matches!(name, "rx" | "ry" | "rz");
        match (needs_angle, angle) {
            (true, None) => {
                return Err(Error::InvalidCircuit(format!("gate `{name}` requires an angle")))
            }
            (false, Some(_)) if Self::NAMES.contains(&name) => {
                return Err(Error::InvalidCircuit(format!("gate `{name}` takes no angle")))
            }
            _ => {}
        }
        if let Some(a) = angle {
            if !a.is_finite() {
                return Err(Error::InvalidCircuit(format!("gate `{name}` has non-finite angle")));
            }
        }
        Ok(match name {
            "x" => Gate::X,
            "y" => Gate::Y,
            "z" => Gate::Z,
            "h" => Gate::H,
            "s" => Gate::S,
            "sdg" => Gate::Sdg,
            "t" => Gate::T,
            "tdg" => Gate::Tdg,
            "rx" => Gate::Rx(angle.unwrap_or_default()),
            "ry" => Gate::Ry(angle.unwrap_or_default()),
            "rz" => Gate::Rz(angle.unwrap_or_default()),
            "cx" => Gate::Cx,
            "cz" => Gate::Cz,
            "swap" => Gate::Swap,
            other => return Err(Error::UnsupportedGate(other.to_string())),
        })
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(a) | Gate::Ry(a) | Gate::Rz(a) => Some(a),
            _ => None,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::Cx | Gate::Cz | Gate::Swap => 2,
            _ => 1,
        }
    }

    /// Gate matrix in the local basis where `qubits[j]` is bit `j`.
    ///
    /// For `cx` the control is `qubits[0]` and the target `qubits[1]`.
    pub fn matrix(&self) -> ComplexMatrix {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let m2 = |a: Complex64, b: Complex64, d: Complex64, e: Complex64| {
            ComplexMatrix::from_vec(2, 2, vec![a, b, d, e]).expect("2x2 gate")
        };
        let h = FRAC_1_SQRT_2;
        match *self {
            Gate::X => m2(ZERO, ONE, ONE, ZERO),
            Gate::Y => m2(ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO),
            Gate::Z => m2(ONE, ZERO, ZERO, -ONE),
            Gate::H => m2(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)),
            Gate::S => m2(ONE, ZERO, ZERO, c(0.0, 1.0)),
            Gate::Sdg => m2(ONE, ZERO, ZERO, c(0.0, -1.0)),
            Gate::T => m2(ONE, ZERO, ZERO, c(h, h)),
            Gate::Tdg => m2(ONE, ZERO, ZERO, c(h, -h)),
            Gate::Rx(theta) => {
                let (s, co) = (theta / 2.0).sin_cos();
                m2(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
            }
            Gate::Ry(theta) => {
                let (s, co) = (theta / 2.0).sin_cos();
                m2(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
            }
            Gate::Rz(theta) => {
                let half = theta / 2.0;
                m2(Complex64::from_polar(1.0, -half), ZERO, ZERO, Complex64::from_polar(1.0, half))
            }
            Gate::Cx => ComplexMatrix::from_real(
                4,
                4,
                &[
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0, //
                    0.0, 0.0, 1.0, 0.0, //
                    0.0, 1.0, 0.0, 0.0,
                ],
            )
            .expect("4x4 gate"),
            Gate::Cz => ComplexMatrix::diag_real(&[1.0, 1.0, 1.0, -1.0]),
            Gate::Swap => ComplexMatrix::from_real(
                4,
                4,
                &[
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 1.0, 0.0, //
                    0.0, 1.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0,
                ],
            )
            .expect("4x4 gate"),
        }
    }
}

/// A gate applied to specific qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGateOp", into = "RawGateOp")]
pub struct GateOp {
    pub gate: Gate,
    pub qubits: Vec<usize>,
}

/// Wire form of a gate: `{"gate": "rx", "qubits": [0], "angle": 1.57}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGateOp {
    pub gate: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl TryFrom<RawGateOp> for GateOp {
    type Error = Error;

    fn try_from(raw: RawGateOp) -> Result<Self> {
        GateOp::new(Gate::parse(&raw.gate, raw.angle)?, raw.qubits)
    }
}

impl From<GateOp> for RawGateOp {
    fn from(op: GateOp) -> Self {
        RawGateOp {
            gate: op.gate.name().to_string(),
            angle: op.gate.angle(),
            qubits: op.qubits,
        }
    }
}

impl GateOp {
    pub fn new(gate: Gate, qubits: Vec<usize>) -> Result<Self> {
        if qubits.len() != gate.arity() {
            return Err(Error::InvalidCircuit(format!(
                "gate `{}` acts on {} qubit(s), got {}",
                gate.name(),
                gate.arity(),
                qubits.len()
            )));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::InvalidCircuit(format!(
                "gate `{}` needs distinct qubits, got {:?}",
                gate.name(),
                qubits
            )));
        }
        Ok(Self { gate, qubits })
    }

    fn single(gate: Gate, q: usize) -> Self {
        Self { gate, qubits: vec![q] }
    }

    pub fn x(q: usize) -> Self {
        Self::single(Gate::X, q)
    }
    pub fn y(q: usize) -> Self {
        Self::single(Gate::Y, q)
    }
    pub fn z(q: usize) -> Self {
        Self::single(Gate::Z, q)
    }
    pub fn h(q: usize) -> Self {
        Self::single(Gate::H, q)
    }
    pub fn s(q: usize) -> Self {
        Self::single(Gate::S, q)
    }
    pub fn sdg(q: usize) -> Self {
        Self::single(Gate::Sdg, q)
    }
    pub fn t(q: usize) -> Self {
        Self::single(Gate::T, q)
    }
    pub fn tdg(q: usize) -> Self {
        Self::single(Gate::Tdg, q)
    }
    pub fn rx(q: usize, theta: f64) -> Self {
        Self::single(Gate::Rx(theta), q)
    }
    pub fn ry(q: usize, theta: f64) -> Self {
        Self::single(Gate::Ry(theta), q)
    }
    pub fn rz(q: usize, theta: f64) -> Self {
        Self::single(Gate::Rz(theta), q)
    }
    /// Panics if `control == target`.
    pub fn cx(control: usize, target: usize) -> Self {
        Self::new(Gate::Cx, vec![control, target]).expect("cx needs distinct qubits")
    }
    /// Panics if `a == b`.
    pub fn cz(a: usize, b: usize) -> Self {
        Self::new(Gate::Cz, vec![a, b]).expect("cz needs distinct qubits")
    }
    /// Panics if `a == b`.
    pub fn swap(a: usize, b: usize) -> Self {
        Self::new(Gate::Swap, vec![a, b]).expect("swap needs distinct qubits")
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.gate.name())?;
        if let Some(a) = self.gate.angle() {
            write!(f, "({a})")?;
        }
        let qs: Vec<String> = self.qubits.iter().map(usize::to_string).collect();
        write!(f, " {}", qs.join(","))
    }
}

/// Ordered gate list on a fixed register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit", into = "RawCircuit")]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = Error;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        Circuit::from_ops(raw.n_qubits, raw.ops)
    }
}

impl From<Circuit> for RawCircuit {
    fn from(c: Circuit) -> Self {
        RawCircuit {
            n_qubits: c.n_qubits,
            ops: c.ops,
        }
    }
}

impl Circuit {
    /// Qubit count limit for dense simulation.
    pub const MAX_QUBITS: usize = 10;

    pub fn new(n_qubits: usize) -> Result<Self> {
        Self::from_ops(n_qubits, Vec::new())
    }

    pub fn from_ops(n_qubits: usize, ops: Vec<GateOp>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidCircuit("a circuit needs at least one qubit".into()));
        }
        if n_qubits > Self::MAX_QUBITS {
            return Err(Error::SizeLimit(format!(
                "{n_qubits} qubits exceeds the simulator limit of {}",
                Self::MAX_QUBITS
            )));
        }
        let mut c = Self {
            n_qubits,
            ops: Vec::with_capacity(ops.len()),
        };
        for op in ops {
            c.push(op)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        // Re-check arity and distinctness: `gate`/`qubits` are public fields.
        let op = GateOp::new(op.gate, op.qubits)?;
        if let Some(&q) = op.qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::Index {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        self.ops.push(op);
        Ok(())
    }

    /// Builder form of [`Circuit::push`].
    pub fn with(mut self, op: GateOp) -> Result<Self> {
        self.push(op)?;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Circuit) -> Result<Circuit> {
        if next.n_qubits != self.n_qubits {
            return Err(Error::Dimension(format!(
                "cannot compose a {}-qubit circuit with a {}-qubit circuit",
                self.n_qubits, next.n_qubits
            )));
        }
        let mut out = self.clone();
        out.ops.extend(next.ops.iter().cloned());
        Ok(out)
    }
}

/// Expands a local operator on `qubits` to the full `2^n` register.
///
/// Entry `(i, j)` is the local entry indexed by the target bits of `i` and `j`
/// when all other bits agree, and zero otherwise; this equals the Kronecker
/// product with identities after reordering qubits.
pub fn embed(op: &ComplexMatrix, qubits: &[usize], n_qubits: usize) -> ComplexMatrix {
    let dim = 1usize << n_qubits;
    let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
    let local = |i: usize| -> usize {
        qubits
            .iter()
            .enumerate()
            .map(|(j, &q)| (i >> q & 1) << j)
            .sum()
    };
    let mut out = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if i & !mask == j & !mask {
                out[(i, j)] = op[(local(i), local(j))];
            }
        }
    }
    out
}

/// Full-register unitary of a circuit; later gates multiply on the left.
pub fn circuit_to_unitary(c: &Circuit) -> ComplexMatrix {
    let mut u = ComplexMatrix::identity(c.dim());
    for op in c.ops() {
        let g = embed(&op.gate.matrix(), &op.qubits, c.n_qubits());
        u = &g * &u;
    }
    u
}

/// Local-operator application used by the simulator.
///
/// `left` computes `(U ⊗ I) M`, `right_adjoint` computes `M (U ⊗ I)^H`,
/// touching only the `2^k`-sized blocks the operator acts on.
pub(crate) mod local {
    use super::*;

    fn offsets(qubits: &[usize]) -> Vec<usize> {
        (0..1usize << qubits.len())
            .map(|l| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| l >> j & 1 == 1)
                    .map(|(_, &q)| 1usize << q)
                    .sum()
            })
            .collect()
    }

    fn bases(qubits: &[usize], n_qubits: usize) -> impl Iterator<Item = usize> {
        let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
        (0..1usize << n_qubits).filter(move |i| i & mask == 0)
    }

    pub fn left(m: &mut ComplexMatrix, op: &ComplexMatrix, qubits: &[usize], n_qubits: usize) {
        let offs = offsets(qubits);
        let k = offs.len();
        let cols = m.cols();
        let mut buf = vec![ZERO; k];
        for base in bases(qubits, n_qubits) {
            for col in 0..cols {
                for (l, &o) in offs.iter().enumerate() {
                    buf[l] = m[(base | o, col)];
                }
                for (r, &o) in offs.iter().enumerate() {
                    let row = op.row(r);
                    m[(base | o, col)] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    pub fn right_adjoint(m: &mut ComplexMatrix, op: &ComplexMatrix, qubits: &[usize], n_qubits: usize) {
        let offs = offsets(qubits);
        let k = offs.len();
        let rows = m.rows();
        let mut buf = vec![ZERO; k];
        for base in bases(qubits, n_qubits) {
            for row in 0..rows {
                for (l, &o) in offs.iter().enumerate() {
                    buf[l] = m[(row, base | o)];
                }
                for (c, &o) in offs.iter().enumerate() {
                    let op_row = op.row(c);
                    m[(row, base | o)] = op_row.iter().zip(&buf).map(|(a, b)| b * a.conj()).sum();
                }
            }
        }
    }

    /// `U M U^H` restricted to `qubits`.
    pub fn conjugate(m: &mut ComplexMatrix, op: &ComplexMatrix, qubits: &[usize], n_qubits: usize) {
        left(m, op, qubits, n_qubits);
        right_adjoint(m, op, qubits, n_qubits);
    }
}
