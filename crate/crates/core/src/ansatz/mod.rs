//! Parameterised circuit templates for the three agent families, their
//! observables, classical heads and parameter bookkeeping.
//!
//! A template is a flat list of operations. Each trainable rotation names the
//! parameter it reads and a cofactor taken from the environment input, so the
//! bound angle is `cofactor(input) · θ[param]`. Shift rules act on individual
//! operations and are chained through the cofactor.

mod checkpoint;
mod exec;
mod head;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, OptimizerSnapshot};
pub use exec::{estimate, estimate_shifted, ExecConfig, Estimates, ShotBatch, DEFAULT_TRAJECTORIES};
pub use head::{policy_probs, q_values, softmax, ActionEstimate, HeadKind};

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{QrlError, Result};
use crate::qsim::{Circuit, Gate, Observable, MAX_QUBITS};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    /// Hardware-efficient ansatz with a Q-value head.
    HweQ,
    /// Hardware-efficient ansatz with a softmax policy head.
    HwePg,
    /// Graph-equivariant ansatz for TSP with a Q-value head.
    Eqc,
}

impl AnsatzKind {
    pub fn code(self) -> u8 {
        match self {
            AnsatzKind::HweQ => 0,
            AnsatzKind::HwePg => 1,
            AnsatzKind::Eqc => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(AnsatzKind::HweQ),
            1 => Ok(AnsatzKind::HwePg),
            2 => Ok(AnsatzKind::Eqc),
            _ => Err(QrlError::Format(format!("unknown ansatz code {c}"))),
        }
    }

    pub fn default_layers(self) -> usize {
        match self {
            AnsatzKind::HweQ | AnsatzKind::HwePg => 5,
            AnsatzKind::Eqc => 1,
        }
    }
}

/// Learning-rate group of a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Rotation,
    InputScaling,
    Head,
}

impl ParamGroup {
    pub fn code(self) -> u8 {
        match self {
            ParamGroup::Rotation => 0,
            ParamGroup::InputScaling => 1,
            ParamGroup::Head => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(ParamGroup::Rotation),
            1 => Ok(ParamGroup::InputScaling),
            2 => Ok(ParamGroup::Head),
            _ => Err(QrlError::Format(format!("unknown parameter group {c}"))),
        }
    }
}

/// Named contiguous block of parameters. Head slots index the head vector,
/// all others index the circuit vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub group: ParamGroup,
    pub offset: usize,
    pub len: usize,
}

/// Input-dependent factor multiplying a parameter in a rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cofactor {
    One,
    /// Feature `i` of a real input vector.
    Input(usize),
    /// Availability flag `α_i` of a graph node.
    NodeFlag(usize),
    /// Edge weight `ε_ij` of a graph.
    EdgeWeight(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemplateOp {
    Fixed(Gate),
    /// `gate` with angle `cofactor · θ[param]`; the stored angle is ignored.
    Rotation {
        gate: Gate,
        param: usize,
        cofactor: Cofactor,
    },
}

/// Graph state fed to the equivariant ansatz.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub n: usize,
    /// Row-major `n × n` symmetric edge weights.
    pub weights: Vec<f64>,
    /// `π` for available nodes, `0` for nodes already in the tour.
    pub alpha: Vec<f64>,
    /// Last node of the partial tour.
    pub current: usize,
}

impl GraphInput {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn is_available(&self, i: usize) -> bool {
        self.alpha[i] != 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnsatzInput {
    Features(Vec<f64>),
    Graph(GraphInput),
}

impl AnsatzInput {
    fn cofactor(&self, c: Cofactor) -> f64 {
        match (c, self) {
            (Cofactor::One, _) => 1.0,
            (Cofactor::Input(i), AnsatzInput::Features(x)) => x[i],
            (Cofactor::NodeFlag(i), AnsatzInput::Graph(g)) => g.alpha[i],
            (Cofactor::EdgeWeight(i, j), AnsatzInput::Graph(g)) => g.weight(i, j),
            _ => unreachable!("input kind checked before binding"),
        }
    }
}

/// Trainable values: circuit parameters `θ` and classical head parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub theta: Vec<f64>,
    pub head: Vec<f64>,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.theta.len() + self.head.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A built template with its parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    kind: AnsatzKind,
    n_qubits: usize,
    n_layers: usize,
    ops: Vec<TemplateOp>,
    slots: Vec<Slot>,
    head_slots: Vec<Slot>,
    groups: Vec<ParamGroup>,
    param_ops: Vec<Vec<usize>>,
}

struct Builder {
    ops: Vec<TemplateOp>,
    slots: Vec<Slot>,
    groups: Vec<ParamGroup>,
}

impl Builder {
    fn slot(&mut self, name: String, group: ParamGroup, len: usize) -> usize {
        let offset = self.groups.len();
        self.slots.push(Slot {
            name,
            group,
            offset,
            len,
        });
        self.groups.extend(std::iter::repeat(group).take(len));
        offset
    }

    fn rot(&mut self, gate: Gate, param: usize, cofactor: Cofactor) {
        self.ops.push(TemplateOp::Rotation {
            gate,
            param,
            cofactor,
        });
    }

    fn rotation_layer(&mut self, n: usize, tag: &str, axes: &[&str]) {
        for &axis in axes {
            let off = self.slot(format!("{tag}.{axis}"), ParamGroup::Rotation, n);
            for q in 0..n {
                let gate = match axis {
                    "rx" => Gate::Rx { qubit: q, angle: 0.0 },
                    "ry" => Gate::Ry { qubit: q, angle: 0.0 },
                    _ => Gate::Rz { qubit: q, angle: 0.0 },
                };
                self.rot(gate, off + q, Cofactor::One);
            }
        }
    }

    fn encoding_layer(&mut self, n: usize, tag: &str) {
        let off = self.slot(format!("{tag}.lambda"), ParamGroup::InputScaling, n);
        for q in 0..n {
            self.rot(Gate::Rx { qubit: q, angle: 0.0 }, off + q, Cofactor::Input(q));
        }
    }

    fn cz_ring(&mut self, n: usize) {
        match n {
            1 => {}
            2 => self.ops.push(TemplateOp::Fixed(Gate::Cz { a: 0, b: 1 })),
            _ => {
                for q in 0..n {
                    self.ops.push(TemplateOp::Fixed(Gate::Cz { a: q, b: (q + 1) % n }));
                }
            }
        }
    }
}

/// Builds the template of `kind` on `n_qubits` qubits with `n_layers` repetitions.
pub fn build(kind: AnsatzKind, n_qubits: usize, n_layers: usize) -> Result<AnsatzSpec> {
    if n_layers == 0 {
        return Err(QrlError::InvalidArgument("an ansatz needs at least one layer".into()));
    }
    if n_qubits > MAX_QUBITS {
        return Err(QrlError::Resource(format!(
            "{n_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
        )));
    }
    let min_qubits = match kind {
        AnsatzKind::HweQ | AnsatzKind::Eqc => 2,
        AnsatzKind::HwePg => 1,
    };
    if n_qubits < min_qubits {
        return Err(QrlError::InvalidArgument(format!(
            "{kind:?} needs at least {min_qubits} qubits, got {n_qubits}"
        )));
    }
    let n = n_qubits;
    let mut b = Builder {
        ops: Vec::new(),
        slots: Vec::new(),
        groups: Vec::new(),
    };
    let head_slots;
    match kind {
        AnsatzKind::HweQ => {
            for l in 0..n_layers {
                let tag = format!("layer{l}");
                b.encoding_layer(n, &tag);
                b.rotation_layer(n, &tag, &["ry", "rz"]);
                b.cz_ring(n);
            }
            head_slots = vec![head_slot("head.w", 2)];
        }
        AnsatzKind::HwePg => {
            for l in 0..n_layers {
                let tag = format!("layer{l}");
                b.rotation_layer(n, &tag, &["rx", "ry", "rz"]);
                b.cz_ring(n);
                b.encoding_layer(n, &tag);
            }
            b.rotation_layer(n, "final", &["rx", "ry", "rz"]);
            head_slots = vec![head_slot("head.beta", 1)];
        }
        AnsatzKind::Eqc => {
            // RY(π/2) prepares |+⟩ on every node
            for q in 0..n {
                b.ops.push(TemplateOp::Fixed(Gate::Ry { qubit: q, angle: FRAC_PI_2 }));
            }
            for l in 0..n_layers {
                let beta = b.slot(format!("layer{l}.beta"), ParamGroup::Rotation, 1);
                let gamma = b.slot(format!("layer{l}.gamma"), ParamGroup::Rotation, 1);
                for i in 0..n {
                    for j in i + 1..n {
                        b.rot(Gate::Zz { a: i, b: j, angle: 0.0 }, gamma, Cofactor::EdgeWeight(i, j));
                    }
                }
                for q in 0..n {
                    b.rot(Gate::Rx { qubit: q, angle: 0.0 }, beta, Cofactor::NodeFlag(q));
                }
            }
            head_slots = vec![head_slot("head.w", 1)];
        }
    }
    let mut param_ops = vec![Vec::new(); b.groups.len()];
    for (k, op) in b.ops.iter().enumerate() {
        if let TemplateOp::Rotation { param, .. } = op {
            param_ops[*param].push(k);
        }
    }
    Ok(AnsatzSpec {
        kind,
        n_qubits,
        n_layers,
        ops: b.ops,
        slots: b.slots,
        head_slots,
        groups: b.groups,
        param_ops,
    })
}

fn head_slot(name: &str, len: usize) -> Slot {
    Slot {
        name: name.into(),
        group: ParamGroup::Head,
        offset: 0,
        len,
    }
}

impl AnsatzSpec {
    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// Number of circuit parameters `M`.
    pub fn n_params(&self) -> usize {
        self.groups.len()
    }

    pub fn n_head_params(&self) -> usize {
        self.head_slots.iter().map(|s| s.len).sum()
    }

    pub fn ops(&self) -> &[TemplateOp] {
        &self.ops
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn head_slots(&self) -> &[Slot] {
        &self.head_slots
    }

    /// Learning-rate group of every circuit parameter.
    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    /// Template operations reading parameter `param`.
    pub fn occurrences(&self, param: usize) -> &[usize] {
        &self.param_ops[param]
    }

    pub fn head_kind(&self) -> HeadKind {
        match self.kind {
            AnsatzKind::HweQ => HeadKind::QPerAction,
            AnsatzKind::HwePg => HeadKind::Policy,
            AnsatzKind::Eqc => HeadKind::QGlobal,
        }
    }

    /// Rotation parameters uniform in `[0, 2π)`, input scalings, output weights and `β` at 1.
    pub fn init_params(&self, rng: &mut RngStream) -> ParamVector {
        let theta = self
            .groups
            .iter()
            .map(|g| match g {
                ParamGroup::InputScaling => 1.0,
                _ => rng.uniform() * TAU,
            })
            .collect();
        ParamVector {
            theta,
            head: vec![1.0; self.n_head_params()],
        }
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        self.check_theta(&params.theta)?;
        if params.head.len() != self.n_head_params() {
            return Err(QrlError::DimensionMismatch {
                expected: self.n_head_params(),
                got: params.head.len(),
            });
        }
        Ok(())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(QrlError::DimensionMismatch {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub fn check_input(&self, input: &AnsatzInput) -> Result<()> {
        match (self.kind, input) {
            (AnsatzKind::HweQ | AnsatzKind::HwePg, AnsatzInput::Features(x)) => {
                if x.len() != self.n_qubits {
                    return Err(QrlError::DimensionMismatch {
                        expected: self.n_qubits,
                        got: x.len(),
                    });
                }
            }
            (AnsatzKind::Eqc, AnsatzInput::Graph(g)) => {
                if g.n != self.n_qubits || g.alpha.len() != g.n || g.weights.len() != g.n * g.n {
                    return Err(QrlError::DimensionMismatch {
                        expected: self.n_qubits,
                        got: g.n,
                    });
                }
                if g.current >= g.n {
                    return Err(QrlError::InvalidArgument(format!(
                        "current node {} outside graph of {} nodes",
                        g.current, g.n
                    )));
                }
            }
            _ => {
                return Err(QrlError::InvalidArgument(format!(
                    "{:?} cannot take this input kind",
                    self.kind
                )))
            }
        }
        Ok(())
    }

    /// Numeric circuit for `theta` and `input`.
    pub fn bind(&self, theta: &[f64], input: &AnsatzInput) -> Result<Circuit> {
        self.bind_shifted(theta, input, &[])
    }

    /// Like [`bind`](Self::bind) with extra angle offsets `(op index, delta)` added to single operations.
    pub fn bind_shifted(&self, theta: &[f64], input: &AnsatzInput, shifts: &[(usize, f64)]) -> Result<Circuit> {
        self.check_theta(theta)?;
        self.check_input(input)?;
        let mut c = Circuit::new(self.n_qubits)?;
        for (k, op) in self.ops.iter().enumerate() {
            let gate = match *op {
                TemplateOp::Fixed(g) => g,
                TemplateOp::Rotation {
                    gate,
                    param,
                    cofactor,
                } => {
                    let mut angle = input.cofactor(cofactor) * theta[param];
                    for &(op_k, d) in shifts {
                        if op_k == k {
                            angle += d;
                        }
                    }
                    gate.with_angle(angle)
                }
            };
            c.push(gate)?;
        }
        Ok(c)
    }

    /// Cofactor of operation `op` for `input`.
    pub fn cofactor(&self, op: usize, input: &AnsatzInput) -> f64 {
        match self.ops[op] {
            TemplateOp::Fixed(_) => 0.0,
            TemplateOp::Rotation { cofactor, .. } => input.cofactor(cofactor),
        }
    }

    /// Candidate actions for `input`, in increasing order.
    pub fn actions(&self, input: &AnsatzInput) -> Vec<usize> {
        match input {
            AnsatzInput::Features(_) => vec![0, 1],
            AnsatzInput::Graph(g) => (0..g.n).filter(|&i| g.is_available(i)).collect(),
        }
    }

    /// Observables measured to score `actions`.
    pub fn observables(&self, input: &AnsatzInput, actions: &[usize]) -> Vec<Observable> {
        let n = self.n_qubits;
        match (self.kind, input) {
            (AnsatzKind::HwePg, _) => vec![Observable::z_string(&(0..n).collect::<Vec<_>>())],
            (AnsatzKind::HweQ, _) => {
                let half = n / 2;
                actions
                    .iter()
                    .map(|&a| {
                        let qs: Vec<usize> = if a == 0 { (0..half).collect() } else { (half..n).collect() };
                        Observable::z_string(&qs)
                    })
                    .collect()
            }
            (AnsatzKind::Eqc, AnsatzInput::Graph(g)) => actions
                .iter()
                .map(|&a| Observable::z_string(&[g.current, a]))
                .collect(),
            (AnsatzKind::Eqc, AnsatzInput::Features(_)) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::Gate;

    fn graph(n: usize, alpha: f64) -> GraphInput {
        GraphInput {
            n,
            weights: vec![0.7; n * n],
            alpha: vec![alpha; n],
            current: 0,
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(build(AnsatzKind::HwePg, 4, 5).unwrap().n_params(), 92);
        assert_eq!(build(AnsatzKind::HweQ, 4, 5).unwrap().n_params(), 60);
        assert_eq!(build(AnsatzKind::Eqc, 5, 1).unwrap().n_params(), 2);
        assert!(build(AnsatzKind::HweQ, 4, 0).is_err());
        assert!(build(AnsatzKind::HweQ, 13, 1).is_err());
    }

    #[test]
    fn zero_features_make_encoding_identity() {
        let spec = build(AnsatzKind::HweQ, 4, 2).unwrap();
        let theta = vec![0.3; spec.n_params()];
        let c = spec.bind(&theta, &AnsatzInput::Features(vec![0.0; 4])).unwrap();
        let rx: Vec<_> = c.gates().filter(|g| matches!(g, Gate::Rx { .. })).collect();
        assert_eq!(rx.len(), 8);
        assert!(rx.iter().all(|g| g.angle() == Some(0.0)));
    }

    #[test]
    fn eqc_angles_are_products() {
        let spec = build(AnsatzKind::Eqc, 5, 1).unwrap();
        let theta = vec![0.9, 0.5];
        let c = spec.bind(&theta, &AnsatzInput::Graph(graph(5, 0.0))).unwrap();
        for g in c.gates() {
            match g {
                Gate::Rx { angle, .. } => assert_eq!(*angle, 0.0),
                Gate::Zz { angle, .. } => assert!((angle - 0.35).abs() < 1e-15),
                _ => {}
            }
        }
    }

    #[test]
    fn shifts_touch_one_operation() {
        let spec = build(AnsatzKind::Eqc, 3, 1).unwrap();
        let input = AnsatzInput::Graph(graph(3, std::f64::consts::PI));
        let op = spec.occurrences(1)[1];
        let base = spec.bind(&[0.2, 0.4], &input).unwrap();
        let shifted = spec.bind_shifted(&[0.2, 0.4], &input, &[(op, 1.0)]).unwrap();
        let diff: Vec<_> = base
            .gates()
            .zip(shifted.gates())
            .filter(|(a, b)| a != b)
            .collect();
        assert_eq!(diff.len(), 1);
    }

    #[test]
    fn input_checks() {
        let spec = build(AnsatzKind::HweQ, 4, 1).unwrap();
        let theta = vec![0.0; spec.n_params()];
        assert!(spec.bind(&theta, &AnsatzInput::Features(vec![0.0; 3])).is_err());
        assert!(spec.bind(&theta, &AnsatzInput::Graph(graph(4, 0.0))).is_err());
        assert!(spec.bind(&theta[1..], &AnsatzInput::Features(vec![0.0; 4])).is_err());
    }

    #[test]
    fn init_follows_groups() {
        let spec = build(AnsatzKind::HwePg, 4, 5).unwrap();
        let p = spec.init_params(&mut RngStream::new(1, 0));
        for (v, g) in p.theta.iter().zip(spec.groups()) {
            match g {
                ParamGroup::InputScaling => assert_eq!(*v, 1.0),
                _ => assert!((0.0..TAU).contains(v)),
            }
        }
        assert_eq!(p.head, vec![1.0]);
    }
}
