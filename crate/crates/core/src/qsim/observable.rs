use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// One weighted Pauli string. An empty string is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    factors: Vec<(usize, Pauli)>,
    #[serde(skip)]
    x_mask: usize,
    #[serde(skip)]
    z_mask: usize,
    #[serde(skip)]
    n_y: u32,
}

impl PauliTerm {
    pub fn new(coeff: f64, factors: &[(usize, Pauli)]) -> Result<Self> {
        let mut f = factors.to_vec();
        f.sort_by_key(|(q, _)| *q);
        if f.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(QrlError::InvalidArgument(
                "Pauli string acts twice on one qubit".into(),
            ));
        }
        if !coeff.is_finite() {
            return Err(QrlError::InvalidArgument("non-finite coefficient".into()));
        }
        let mut t = Self {
            coeff,
            factors: f,
            x_mask: 0,
            z_mask: 0,
            n_y: 0,
        };
        t.rebuild_masks();
        Ok(t)
    }

    fn rebuild_masks(&mut self) {
        let (mut x, mut z, mut y) = (0usize, 0usize, 0u32);
        for &(q, p) in &self.factors {
            match p {
                Pauli::X => x |= 1 << q,
                Pauli::Z => z |= 1 << q,
                Pauli::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                    y += 1;
                }
            }
        }
        self.x_mask = x;
        self.z_mask = z;
        self.n_y = y;
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.x_mask == 0
    }

    pub(crate) fn x_mask(&self) -> usize {
        self.x_mask
    }

    pub(crate) fn z_mask(&self) -> usize {
        self.z_mask
    }

    pub(crate) fn n_y(&self) -> u32 {
        self.n_y
    }

    /// Bit mask of all qubits the string acts on.
    pub fn support_mask(&self) -> usize {
        self.x_mask | self.z_mask
    }
}

/// Real-weighted sum of Pauli strings with its operator norm ‖O‖∞.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observable {
    terms: Vec<PauliTerm>,
    infinity_norm: f64,
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            terms: Vec<PauliTerm>,
        }
        let raw = Raw::deserialize(d)?;
        let terms = raw
            .terms
            .into_iter()
            .map(|t| PauliTerm::new(t.coeff, &t.factors))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Observable::new(terms).map_err(serde::de::Error::custom)
    }
}

/// Largest register for which a non-commuting observable's norm is computed densely.
const DENSE_NORM_QUBITS: usize = 8;

impl Observable {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(QrlError::InvalidArgument("observable without terms".into()));
        }
        let infinity_norm = operator_norm(&terms)?;
        Ok(Self {
            terms,
            infinity_norm,
        })
    }

    /// `Z_q`.
    pub fn z(q: usize) -> Self {
        Self::z_string(&[q])
    }

    /// `Z_{q1} Z_{q2} …` with unit coefficient.
    pub fn z_string(qubits: &[usize]) -> Self {
        let f: Vec<_> = qubits.iter().map(|&q| (q, Pauli::Z)).collect();
        let t = PauliTerm::new(1.0, &f).expect("distinct qubits");
        Self {
            terms: vec![t],
            infinity_norm: 1.0,
        }
    }

    /// Single weighted Pauli string.
    pub fn pauli(coeff: f64, factors: &[(usize, Pauli)]) -> Result<Self> {
        Self::new(vec![PauliTerm::new(coeff, factors)?])
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn infinity_norm(&self) -> f64 {
        self.infinity_norm
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(PauliTerm::is_diagonal)
    }

    /// Highest qubit index referenced, plus one.
    pub fn min_qubits(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|(q, _)| q + 1))
            .max()
            .unwrap_or(0)
    }
}

/// Compact label such as `Z0Z1` or `0.5*X0Y1 + Z2`, used as a ledger key.
impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            if t.coeff != 1.0 {
                write!(f, "{}*", t.coeff)?;
            }
            if t.factors.is_empty() {
                f.write_str("I")?;
            }
            for (q, p) in &t.factors {
                let c = match p {
                    Pauli::X => 'X',
                    Pauli::Y => 'Y',
                    Pauli::Z => 'Z',
                };
                write!(f, "{c}{q}")?;
            }
        }
        Ok(())
    }
}

/// Per-qubit measurement basis shared by a set of terms, if one exists.
pub(crate) fn common_basis<'a>(
    terms: impl IntoIterator<Item = &'a PauliTerm>,
) -> Option<Vec<(usize, Pauli)>> {
    let mut basis: Vec<(usize, Pauli)> = Vec::new();
    for t in terms {
        for &(q, p) in &t.factors {
            match basis.iter().find(|(bq, _)| *bq == q) {
                Some(&(_, bp)) if bp != p => return None,
                Some(_) => {}
                None => basis.push((q, p)),
            }
        }
    }
    basis.sort_by_key(|(q, _)| *q);
    Some(basis)
}

/// Eigenvalue of `term` on computational basis state `b` after rotating every
/// factor to Z (valid when the term is diagonal in the rotated basis).
#[inline]
pub(crate) fn rotated_eigen_sign(term: &PauliTerm, b: usize) -> f64 {
    if (b & term.support_mask()).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn operator_norm(terms: &[PauliTerm]) -> Result<f64> {
    let n = terms
        .iter()
        .flat_map(|t| t.factors.iter().map(|(q, _)| q + 1))
        .max()
        .unwrap_or(0);
    if common_basis(terms.iter()).is_some() {
        // Qubit-wise commuting: simultaneously diagonal, enumerate the spectrum.
        if n > 24 {
            return Err(QrlError::Resource(format!("observable on {n} qubits")));
        }
        let mut best = 0.0f64;
        for b in 0..(1usize << n) {
            let v: f64 = terms.iter().map(|t| t.coeff * rotated_eigen_sign(t, b)).sum();
            best = best.max(v.abs());
        }
        return Ok(best);
    }
    if n > DENSE_NORM_QUBITS {
        return Err(QrlError::Resource(format!(
            "norm of a non-commuting observable on {n} qubits"
        )));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for t in terms {
        let phase = match t.n_y % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        for b in 0..dim {
            let sign = if (b & t.z_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(b ^ t.x_mask, b)] += phase * sign * t.coeff;
        }
    }
    let eig = m.symmetric_eigen();
    Ok(eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_term_norm_is_abs_coeff() {
        let o = Observable::pauli(-2.5, &[(0, Pauli::X), (2, Pauli::Y)]).unwrap();
        assert!((o.infinity_norm() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn identity_minus_z_string() {
        let o = Observable::new(vec![
            PauliTerm::new(1.0, &[]).unwrap(),
            PauliTerm::new(-1.0, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap(),
        ])
        .unwrap();
        assert!((o.infinity_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_commuting_norm_dense() {
        // X + Z has eigenvalues ±√2
        let o = Observable::new(vec![
            PauliTerm::new(1.0, &[(0, Pauli::X)]).unwrap(),
            PauliTerm::new(1.0, &[(0, Pauli::Z)]).unwrap(),
        ])
        .unwrap();
        assert!((o.infinity_norm() - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn repeated_qubit_rejected() {
        assert!(PauliTerm::new(1.0, &[(0, Pauli::X), (0, Pauli::Z)]).is_err());
    }

    #[test]
    fn serde_rebuilds_masks() {
        let o = Observable::pauli(0.5, &[(1, Pauli::Y)]).unwrap();
        let s = serde_json::to_string(&o).unwrap();
        let back: Observable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, o);
    }
}
