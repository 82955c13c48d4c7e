//! In-place amplitude kernels shared by the statevector and the
//! vectorised density-matrix oracle. Qubit `q` is bit `q` of the index.

use num_complex::Complex64 as C64;

use super::gate::{Gate, Mat2};

#[inline]
pub(crate) fn apply_1q(amps: &mut [C64], q: usize, m: &Mat2) {
    let mask = 1usize << q;
    let len = amps.len();
    let mut base = 0;
    while base < len {
        // iterate blocks of size 2·mask, lower half has bit q clear
        for i in base..base + mask {
            let j = i | mask;
            let a0 = amps[i];
            let a1 = amps[j];
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
        base += mask << 1;
    }
}

#[inline]
pub(crate) fn apply_x(amps: &mut [C64], q: usize) {
    let mask = 1usize << q;
    for i in 0..amps.len() {
        if i & mask == 0 {
            amps.swap(i, i | mask);
        }
    }
}

#[inline]
pub(crate) fn apply_z(amps: &mut [C64], q: usize) {
    let mask = 1usize << q;
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask != 0 {
            *a = -*a;
        }
    }
}

/// Pauli Y, or its complex conjugate `-Y` when `conj` is set.
#[inline]
pub(crate) fn apply_y(amps: &mut [C64], q: usize, conj: bool) {
    let mask = 1usize << q;
    let i_unit = if conj { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
    for i in 0..amps.len() {
        if i & mask == 0 {
            let j = i | mask;
            let a0 = amps[i];
            let a1 = amps[j];
            // Y|0> = i|1>, Y|1> = -i|0>
            amps[i] = -i_unit * a1;
            amps[j] = i_unit * a0;
        }
    }
}

#[inline]
pub(crate) fn apply_cz(amps: &mut [C64], a: usize, b: usize) {
    let mask = (1usize << a) | (1usize << b);
    for (i, amp) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *amp = -*amp;
        }
    }
}

#[inline]
pub(crate) fn apply_cnot(amps: &mut [C64], control: usize, target: usize) {
    let cm = 1usize << control;
    let tm = 1usize << target;
    for i in 0..amps.len() {
        if i & cm != 0 && i & tm == 0 {
            amps.swap(i, i | tm);
        }
    }
}

/// `exp(-i·angle·Z⊗Z/2)`: phase `e^{-i·angle/2}` on even parity, `e^{+i·angle/2}` on odd.
#[inline]
pub(crate) fn apply_zz(amps: &mut [C64], a: usize, b: usize, angle: f64) {
    let (s, c) = (angle / 2.0).sin_cos();
    let even = C64::new(c, -s);
    let odd = C64::new(c, s);
    for (i, amp) in amps.iter_mut().enumerate() {
        let parity = ((i >> a) ^ (i >> b)) & 1;
        *amp *= if parity == 0 { even } else { odd };
    }
}

fn conj_mat(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]]
}

/// Apply `gate` (or its elementwise complex conjugate) with every qubit index shifted by `offset`.
pub(crate) fn apply_gate(amps: &mut [C64], gate: &Gate, conj: bool, offset: usize) {
    match *gate {
        Gate::X { qubit } => apply_x(amps, qubit + offset),
        Gate::Y { qubit } => apply_y(amps, qubit + offset, conj),
        Gate::Z { qubit } => apply_z(amps, qubit + offset),
        Gate::Cz { a, b } => apply_cz(amps, a + offset, b + offset),
        Gate::Cnot { control, target } => apply_cnot(amps, control + offset, target + offset),
        Gate::Zz { a, b, angle } => {
            apply_zz(amps, a + offset, b + offset, if conj { -angle } else { angle })
        }
        Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } => {
            let m = gate.matrix_1q().expect("rotation has a 2x2 matrix");
            let m = if conj { conj_mat(&m) } else { m };
            apply_1q(amps, qubit + offset, &m);
        }
    }
}

/// Apply a general (not necessarily unitary) 2×2 operator.
pub(crate) fn apply_op_1q(amps: &mut [C64], q: usize, m: &Mat2, conj: bool) {
    if conj {
        apply_1q(amps, q, &conj_mat(m))
    } else {
        apply_1q(amps, q, m)
    }
}
