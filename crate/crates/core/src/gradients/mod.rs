//! Parameter-shift derivatives of template expectations and the Gaussian
//! coherent-noise analysis built on them.
//!
//! Shift rules act on single rotation operations. A parameter read by
//! several operations (shared parameters) or scaled by an input cofactor is
//! differentiated by the chain rule: `∂f/∂θ_i = Σ_k c_k ∂f/∂φ_k` over the
//! operations `k` reading `θ_i`, where `φ_k = c_k θ_i`.

mod analysis;

pub(crate) use analysis::mean_std;

pub use analysis::{
    gaussian_error_bound, gaussian_shift_prediction, hessian_trace_distribution, perturbation_sweep,
    sufficient_sigma, trh_variance_approx, write_distribution_csv, write_sweep_csv, ErrorBound,
    SweepRow, TraceDistribution,
};

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::ansatz::{estimate_shifted, AnsatzInput, AnsatzSpec, ExecConfig};
use crate::error::{QrlError, Result};
use crate::qsim::Observable;
use crate::rng::RngStream;

/// Default largest parameter count accepted by [`hessian`].
pub const HESSIAN_MAX_PARAMS: usize = 128;

type Shifts = Vec<(usize, f64)>;

/// `θ ↦ ⟨O⟩` for a fixed template, input, observable and execution setting.
#[derive(Debug, Clone)]
pub struct ScalarCircuitFunction<'a> {
    spec: &'a AnsatzSpec,
    input: AnsatzInput,
    observable: Vec<Observable>,
    exec: ExecConfig,
}

impl<'a> ScalarCircuitFunction<'a> {
    pub fn new(spec: &'a AnsatzSpec, input: AnsatzInput, observable: Observable, exec: ExecConfig) -> Result<Self> {
        spec.check_input(&input)?;
        if observable.min_qubits() > spec.n_qubits() {
            return Err(QrlError::InvalidQubit {
                index: observable.min_qubits() - 1,
                n_qubits: spec.n_qubits(),
            });
        }
        exec.validate()?;
        Ok(Self {
            spec,
            input,
            observable: vec![observable],
            exec,
        })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        self.spec
    }

    pub fn input(&self) -> &AnsatzInput {
        &self.input
    }

    pub fn observable(&self) -> &Observable {
        &self.observable[0]
    }

    pub fn exec(&self) -> &ExecConfig {
        &self.exec
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    pub fn eval(&self, theta: &[f64], rng: &mut RngStream) -> Result<f64> {
        self.eval_shifted(theta, &[], rng)
    }

    /// `f` with additional angle offsets on single operations.
    pub fn eval_shifted(&self, theta: &[f64], shifts: &[(usize, f64)], rng: &mut RngStream) -> Result<f64> {
        let e = estimate_shifted(self.spec, theta, &self.input, shifts, &self.observable, &self.exec, rng)?;
        Ok(e.values[0])
    }

    /// Independent evaluations of every shift set, reduced in input order.
    pub fn eval_batch(&self, theta: &[f64], shift_sets: &[Shifts], rng: &mut RngStream) -> Result<Vec<f64>> {
        let base = rng.fork();
        shift_sets
            .par_iter()
            .enumerate()
            .map(|(k, s)| self.eval_shifted(theta, s, &mut base.derive(k as u64)))
            .collect()
    }

    /// Number of rotation operations with a nonzero cofactor; a gradient costs twice this many evaluations.
    pub fn shift_terms(&self) -> usize {
        (0..self.n_params())
            .map(|i| self.angle_ops(i).map(|o| o.len()).unwrap_or(0))
            .sum()
    }

    /// `(operation, cofactor)` pairs through which parameter `i` enters, zero cofactors dropped.
    fn angle_ops(&self, i: usize) -> Result<Vec<(usize, f64)>> {
        if i >= self.n_params() {
            return Err(QrlError::InvalidArgument(format!(
                "parameter {i} is not a rotation parameter of a {}-parameter template",
                self.n_params()
            )));
        }
        Ok(self
            .spec
            .occurrences(i)
            .iter()
            .map(|&op| (op, self.spec.cofactor(op, &self.input)))
            .filter(|(_, c)| *c != 0.0)
            .collect())
    }
}

/// `∂f/∂θ_i` by the two-term shift rule, chained through cofactors.
pub fn param_shift_grad(f: &ScalarCircuitFunction, theta: &[f64], i: usize, rng: &mut RngStream) -> Result<f64> {
    let ops = f.angle_ops(i)?;
    let sets: Vec<Shifts> = ops
        .iter()
        .flat_map(|&(op, _)| [vec![(op, FRAC_PI_2)], vec![(op, -FRAC_PI_2)]])
        .collect();
    let v = f.eval_batch(theta, &sets, rng)?;
    Ok(ops
        .iter()
        .enumerate()
        .map(|(k, &(_, c))| c * 0.5 * (v[2 * k] - v[2 * k + 1]))
        .sum())
}

/// Full gradient; all shifted evaluations run as one parallel batch.
pub fn gradient(f: &ScalarCircuitFunction, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut plan = Vec::new();
    let mut sets = Vec::new();
    for i in 0..f.n_params() {
        for (op, c) in f.angle_ops(i)? {
            plan.push((i, c));
            sets.push(vec![(op, FRAC_PI_2)]);
            sets.push(vec![(op, -FRAC_PI_2)]);
        }
    }
    let v = f.eval_batch(theta, &sets, rng)?;
    let mut g = vec![0.0; f.n_params()];
    for (k, &(i, c)) in plan.iter().enumerate() {
        g[i] += c * 0.5 * (v[2 * k] - v[2 * k + 1]);
    }
    Ok(g)
}

fn pair_sets(a: usize, b: usize) -> [Shifts; 4] {
    let h = FRAC_PI_2;
    [
        vec![(a, h), (b, h)],
        vec![(a, h), (b, -h)],
        vec![(a, -h), (b, h)],
        vec![(a, -h), (b, -h)],
    ]
}

fn four_shift(v: &[f64]) -> f64 {
    0.25 * (v[0] - v[1] - v[2] + v[3])
}

/// Evaluation plan for a block of second derivatives in angle space.
struct SecondOrderPlan {
    sets: Vec<Shifts>,
    /// `(row, col, weight, first set index, is diagonal)`; diagonal terms use one set plus `f(θ)`.
    terms: Vec<(usize, usize, f64, usize, bool)>,
}

impl SecondOrderPlan {
    fn new() -> Self {
        Self {
            // set 0 is the unshifted point
            sets: vec![Vec::new()],
            terms: Vec::new(),
        }
    }

    fn add(&mut self, row: usize, col: usize, a: (usize, f64), b: (usize, f64)) {
        let w = a.1 * b.1;
        let start = self.sets.len();
        if a.0 == b.0 {
            self.sets.push(vec![(a.0, PI)]);
            self.terms.push((row, col, w, start, true));
        } else {
            self.sets.extend(pair_sets(a.0, b.0));
            self.terms.push((row, col, w, start, false));
        }
    }

    fn term_value(&self, v: &[f64], t: &(usize, usize, f64, usize, bool)) -> f64 {
        let (_, _, w, s, diag) = *t;
        if diag {
            w * 0.5 * (v[s] - v[0])
        } else {
            w * four_shift(&v[s..s + 4])
        }
    }
}

/// `∂²f/∂θ_i²`; for a single operation `½[f(φ+π) − f(φ)]` times the squared cofactor.
pub fn hessian_diag(f: &ScalarCircuitFunction, theta: &[f64], i: usize, rng: &mut RngStream) -> Result<f64> {
    let ops = f.angle_ops(i)?;
    let mut plan = SecondOrderPlan::new();
    for &a in &ops {
        for &b in &ops {
            plan.add(0, 0, a, b);
        }
    }
    let v = f.eval_batch(theta, &plan.sets, rng)?;
    Ok(plan.terms.iter().map(|t| plan.term_value(&v, t)).sum())
}

/// Hessian matrix with the number of circuit evaluations spent.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianResult {
    pub matrix: DMatrix<f64>,
    pub trace: f64,
    pub evaluations: usize,
}

/// Full Hessian: four-shift rule off the diagonal, `π` shift on it.
pub fn hessian(f: &ScalarCircuitFunction, theta: &[f64], rng: &mut RngStream) -> Result<HessianResult> {
    hessian_with_cap(f, theta, HESSIAN_MAX_PARAMS, rng)
}

pub fn hessian_with_cap(
    f: &ScalarCircuitFunction,
    theta: &[f64],
    cap: usize,
    rng: &mut RngStream,
) -> Result<HessianResult> {
    let m = f.n_params();
    if m > cap {
        return Err(QrlError::Resource(format!("Hessian of {m} parameters exceeds the cap of {cap}")));
    }
    let ops: Vec<Vec<(usize, f64)>> = (0..m).map(|i| f.angle_ops(i)).collect::<Result<_>>()?;
    let mut plan = SecondOrderPlan::new();
    for i in 0..m {
        for j in i..m {
            for &a in &ops[i] {
                for &b in &ops[j] {
                    plan.add(i, j, a, b);
                }
            }
        }
    }
    let v = f.eval_batch(theta, &plan.sets, rng)?;
    let mut h = DMatrix::zeros(m, m);
    for t in &plan.terms {
        h[(t.0, t.1)] += plan.term_value(&v, t);
    }
    for i in 0..m {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    Ok(HessianResult {
        trace: h.trace(),
        matrix: h,
        evaluations: plan.sets.len(),
    })
}

/// `Tr H`; `M + 1` evaluations when every parameter enters a single operation.
pub fn hessian_trace(f: &ScalarCircuitFunction, theta: &[f64], rng: &mut RngStream) -> Result<f64> {
    let mut plan = SecondOrderPlan::new();
    for i in 0..f.n_params() {
        let ops = f.angle_ops(i)?;
        for &a in &ops {
            for &b in &ops {
                plan.add(i, i, a, b);
            }
        }
    }
    let v = f.eval_batch(theta, &plan.sets, rng)?;
    Ok(plan.terms.iter().map(|t| plan.term_value(&v, t)).sum())
}
