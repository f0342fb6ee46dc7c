use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Matrix8;
use crate::units::{BOHR_MAGNETON, HBAR, NUCLEAR_MAGNETON};
use crate::{Error, Result};

/// Ground-state constants. Defaults are standard ⁸⁷Rb values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperfineParams {
    /// Hyperfine splitting (rad/s).
    pub delta_hf: f64,
    /// Electron Landé factor.
    pub g_s: f64,
    /// Bohr magneton (J/T).
    pub mu_b: f64,
    /// Nuclear magnetic moment (J/T).
    pub mu_i: f64,
}

impl HyperfineParams {
    pub const NUCLEAR_SPIN: f64 = 1.5;

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_hf.is_finite() && self.delta_hf > 0.0) {
            return Err(Error::Config(format!(
                "delta_hf must be > 0, got {}",
                self.delta_hf
            )));
        }
        if !(self.g_s.is_finite() && self.mu_b.is_finite() && self.mu_i.is_finite()) {
            return Err(Error::Config("hyperfine constants must be finite".into()));
        }
        Ok(())
    }

    /// `A_g = 2ħΔ_hf/(2I + 1)` (J).
    pub fn a_g(&self) -> f64 {
        2.0 * HBAR * self.delta_hf / (2.0 * Self::NUCLEAR_SPIN + 1.0)
    }
}

impl Default for HyperfineParams {
    fn default() -> Self {
        HyperfineParams {
            delta_hf: 2.0 * std::f64::consts::PI * 6.834_682_610_904e9,
            g_s: 2.002_319_304_36,
            mu_b: BOHR_MAGNETON,
            mu_i: 2.751_818 * NUCLEAR_MAGNETON,
        }
    }
}

/// Electron and nuclear spin operators in the coupled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub s: [Matrix8; 3],
    pub i: [Matrix8; 3],
}

impl SpinOperators {
    /// `v · S`.
    pub fn s_dot(&self, v: &Vector3<f64>) -> Matrix8 {
        self.s[0] * c(v.x) + self.s[1] * c(v.y) + self.s[2] * c(v.z)
    }

    /// `v · I`.
    pub fn i_dot(&self, v: &Vector3<f64>) -> Matrix8 {
        self.i[0] * c(v.x) + self.i[1] * c(v.y) + self.i[2] * c(v.z)
    }

    /// `I · S`.
    pub fn i_dot_s(&self) -> Matrix8 {
        (0..3).map(|k| self.i[k] * self.s[k]).sum()
    }

    /// `F_z = S_z + I_z`.
    pub fn f_z(&self) -> Matrix8 {
        self.s[2] + self.i[2]
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `(J_x, J_y, J_z)` for spin `j`, basis `m = j, j−1, …, −j`.
fn spin_matrices(j: f64) -> [DMatrix<Complex64>; 3] {
    let n = (2.0 * j).round() as usize + 1;
    let m = |a: usize| j - a as f64;
    let mut jp = DMatrix::<Complex64>::zeros(n, n);
    for a in 1..n {
        // ⟨m+1|J₊|m⟩
        let mm = m(a);
        jp[(a - 1, a)] = c((j * (j + 1.0) - mm * (mm + 1.0)).sqrt());
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * c(0.5);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    let jz = DMatrix::from_fn(n, n, |r, col| if r == col { c(m(r)) } else { c(0.0) });
    [jx, jy, jz]
}

/// Product-to-coupled change of basis: column `b` holds coupled state `b`
/// in the product basis `|m_I⟩ ⊗ |m_S⟩` (both ordered high to low `m`).
fn coupling_matrix() -> Matrix8 {
    let i = HyperfineParams::NUCLEAR_SPIN;
    let two_i1 = 2.0 * i + 1.0;
    let product_index = |m_i: f64, up: bool| -> Option<usize> {
        if m_i.abs() > i + 1e-9 {
            return None;
        }
        let a = (i - m_i).round() as usize;
        Some(2 * a + usize::from(!up))
    };
    let mut u = Matrix8::zeros();
    let mut col = 0;
    for (f, ms) in [(1.0, -1..=1), (2.0, -2..=2)] {
        for m in ms {
            let m = m as f64;
            let (a_up, a_down) = if f == i + 0.5 {
                (
                    ((i + m + 0.5) / two_i1).sqrt(),
                    ((i - m + 0.5) / two_i1).sqrt(),
                )
            } else {
                (
                    -((i - m + 0.5) / two_i1).sqrt(),
                    ((i + m + 0.5) / two_i1).sqrt(),
                )
            };
            if let Some(r) = product_index(m - 0.5, true) {
                u[(r, col)] = c(a_up);
            }
            if let Some(r) = product_index(m + 0.5, false) {
                u[(r, col)] = c(a_down);
            }
            col += 1;
        }
    }
    u
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Matrix8 {
    let (br, bc) = b.shape();
    Matrix8::from_fn(|r, col| a[(r / br, col / bc)] * b[(r % br, col % bc)])
}

/// Builds `S` and `I` for `I = 3/2`, `S = 1/2` in the coupled basis.
pub fn build_operators() -> SpinOperators {
    let nuc = spin_matrices(HyperfineParams::NUCLEAR_SPIN);
    let ele = spin_matrices(0.5);
    let id2 = DMatrix::<Complex64>::identity(2, 2);
    let id4 = DMatrix::<Complex64>::identity(4, 4);
    let u = coupling_matrix();
    let to_coupled = |m: Matrix8| u.adjoint() * m * u;
    SpinOperators {
        s: [0, 1, 2].map(|k| to_coupled(kron(&id4, &ele[k]))),
        i: [0, 1, 2].map(|k| to_coupled(kron(&nuc[k], &id2))),
    }
}

/// `H_g = A_g I·S + g_s μ_B S·B − (μ_I/I) I·B` in joules.
pub fn ground_hamiltonian(p: &HyperfineParams, ops: &SpinOperators, b: &Vector3<f64>) -> Matrix8 {
    let hf = ops.i_dot_s() * c(p.a_g());
    hf + zeeman_hamiltonian(p, ops, b)
}

/// The field-dependent part of `H_g` (J).
pub(crate) fn zeeman_hamiltonian(
    p: &HyperfineParams,
    ops: &SpinOperators,
    b: &Vector3<f64>,
) -> Matrix8 {
    ops.s_dot(b) * c(p.g_s * p.mu_b) - ops.i_dot(b) * c(p.mu_i / HyperfineParams::NUCLEAR_SPIN)
}

/// Nuclear part `φ = ρ/4 + Σ_k S_k ρ S_k`.
pub fn nuclear_part(rho: &Matrix8, ops: &SpinOperators) -> Matrix8 {
    let mut phi = rho * c(0.25);
    for s in &ops.s {
        phi += s * rho * s;
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperfine::{basis_index, STRETCHED};
    use nalgebra::SymmetricEigen;

    fn ops() -> SpinOperators {
        build_operators()
    }

    fn comm(a: &Matrix8, b: &Matrix8) -> Matrix8 {
        a * b - b * a
    }

    #[test]
    fn angular_momentum_algebra() {
        let o = ops();
        let i = Complex64::i();
        for set in [&o.s, &o.i] {
            for (a, b, cc) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                let r = (comm(&set[a], &set[b]) - set[cc] * i).norm();
                assert!(r < 1e-12, "residual {r}");
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                assert!(comm(&o.s[a], &o.i[b]).norm() < 1e-12);
            }
        }
        let s2: Matrix8 = o.s.iter().map(|m| m * m).sum();
        assert!((s2 - Matrix8::identity() * c(0.75)).norm() < 1e-12);
        assert!(((o.s[2] * o.s[2]).trace() - c(2.0)).norm() < 1e-12);
    }

    #[test]
    fn coupled_basis_labels() {
        let o = ops();
        let f: [Matrix8; 3] = [0, 1, 2].map(|k| o.s[k] + o.i[k]);
        let f2: Matrix8 = f.iter().map(|m| m * m).sum();
        for (ff, ms) in [(1u8, -1i8..=1), (2, -2..=2)] {
            for m in ms {
                let idx = basis_index(ff, m);
                let fv = ff as f64;
                assert!((f2[(idx, idx)].re - fv * (fv + 1.0)).abs() < 1e-12);
                assert!((f[2][(idx, idx)].re - m as f64).abs() < 1e-12);
            }
        }
        assert!((f2 - Matrix8::from_diagonal(&f2.diagonal())).norm() < 1e-12);
        assert!((o.s[2][(STRETCHED, STRETCHED)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn i_dot_s_spectrum() {
        // F(F+1) = I(I+1) + S(S+1) + 2 I·S gives +3/4 on F = 2 and −5/4 on F = 1
        let eig = SymmetricEigen::new(ops().i_dot_s());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, v) in vals.iter().enumerate() {
            let expected = if k < 3 { -1.25 } else { 0.75 };
            assert!((v - expected).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn zero_field_splitting() {
        let p = HyperfineParams::default();
        let h = ground_hamiltonian(&p, &ops(), &Vector3::zeros());
        assert!((h - h.adjoint()).norm() <= 1e-14 * h.norm());
        let eig = SymmetricEigen::new(h);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let gap = vals[3] - vals[2];
        assert!(((gap - HBAR * p.delta_hf) / (HBAR * p.delta_hf)).abs() < 1e-12);
        assert!((vals[2] - vals[0]).abs() < 1e-12 * gap);
        assert!((vals[7] - vals[3]).abs() < 1e-12 * gap);
    }

    #[test]
    fn linear_zeeman_matches_first_order_theory() {
        let p = HyperfineParams::default();
        let o = ops();
        let bz = 1e-7;
        let h = ground_hamiltonian(&p, &o, &Vector3::new(0.0, 0.0, bz));
        let h0 = ground_hamiltonian(&p, &o, &Vector3::zeros());
        let (i, s) = (1.5f64, 0.5f64);
        for (ff, ms) in [(1u8, -1i8..=1), (2, -2..=2)] {
            let fv = ff as f64;
            let ff1 = fv * (fv + 1.0);
            let s_proj = (ff1 + s * (s + 1.0) - i * (i + 1.0)) / (2.0 * ff1);
            let i_proj = (ff1 + i * (i + 1.0) - s * (s + 1.0)) / (2.0 * ff1);
            let g_f_mu = p.g_s * p.mu_b * s_proj - p.mu_i / i * i_proj;
            for m in ms {
                let idx = basis_index(ff, m);
                // first-order shift is the diagonal element in the |F, m⟩ basis
                let shift = (h[(idx, idx)] - h0[(idx, idx)]).re;
                let expected = g_f_mu * m as f64 * bz;
                assert!(
                    (shift - expected).abs() <= 1e-9 * expected.abs().max(1e-40),
                    "{ff},{m}"
                );
            }
        }
        // full diagonalisation agrees to first order
        let eig = SymmetricEigen::new(h);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let top = vals[7] - h0[(STRETCHED, STRETCHED)].re;
        let lin = (p.g_s * p.mu_b * 0.5 - p.mu_i) * bz * 1.0;
        assert!(((top - lin) / lin).abs() < 1e-6, "{top} vs {lin}");
        // F = 2 and F = 1 split with opposite signs
        assert!(
            h[(basis_index(2, 2), basis_index(2, 2))].re
                > h[(basis_index(2, -2), basis_index(2, -2))].re
        );
        assert!(
            h[(basis_index(1, 1), basis_index(1, 1))].re
                < h[(basis_index(1, -1), basis_index(1, -1))].re
        );
    }

    #[test]
    fn nuclear_part_of_mixed_state() {
        let o = ops();
        let mixed = Matrix8::identity() * c(1.0 / 8.0);
        assert!((nuclear_part(&mixed, &o) - mixed).norm() < 1e-15);
    }

    #[test]
    fn nuclear_part_of_stretched_state() {
        // |2,2⟩ = |3/2⟩|↑⟩, so φ = ½|3/2⟩⟨3/2| ⊗ 𝕀: weight ½ on |2,2⟩ and
        // ½ on the |3/2⟩|↓⟩ component, which is √(1/4)|2,1⟩ + √(3/4)|1,1⟩.
        let o = ops();
        let mut rho = Matrix8::zeros();
        rho[(STRETCHED, STRETCHED)] = c(1.0);
        let phi = nuclear_part(&rho, &o);
        assert!((phi.trace() - c(1.0)).norm() < 1e-15);
        let e = |f, m| basis_index(f, m);
        assert!((phi[(e(2, 2), e(2, 2))].re - 0.5).abs() < 1e-12);
        assert!((phi[(e(2, 1), e(2, 1))].re - 0.125).abs() < 1e-12);
        assert!((phi[(e(1, 1), e(1, 1))].re - 0.375).abs() < 1e-12);
        assert!((phi[(e(2, 1), e(1, 1))].norm() - (3f64).sqrt() / 8.0).abs() < 1e-12);
        assert!(((phi * o.s[2]).trace()).norm() < 1e-15);
    }
}
