//! Two-qubit polarization states in the product basis `|HH>, |HV>, |VH>, |VV>`
//! (first factor is the undetected photon α, second the detected photon β).

use core::f64::consts::PI;

// Float supplies the libm-backed methods when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{kron, Ket, Mat2, Mat4, C64, I, ONE, ZERO};

/// Entrywise tolerance for Hermiticity and trace checks.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as non-negative.
pub const SPECTRAL_TOL: f64 = 1e-10;

pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

/// `(I_H, ℐ, φ)`: relative HH intensity, mutual coherence between the HH and
/// VV emissions, and their relative phase. `I_V = 1 - I_H` is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateFamilyParams {
    i_h: f64,
    coherence: f64,
    phase: f64,
}

fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::ParameterOutOfRange { name, value })
    }
}

impl StateFamilyParams {
    pub fn new(i_h: f64, coherence: f64, phase: f64) -> Result<Self> {
        if !phase.is_finite() {
            return Err(Error::ParameterOutOfRange { name: "phase", value: phase });
        }
        Ok(Self {
            i_h: check_unit("i_h", i_h)?,
            coherence: check_unit("coherence", coherence)?,
            phase,
        })
    }

    pub fn i_h(&self) -> f64 {
        self.i_h
    }

    pub fn i_v(&self) -> f64 {
        1.0 - self.i_h
    }

    pub fn coherence(&self) -> f64 {
        self.coherence
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Phase reduced to `[0, 2π)`.
    pub fn reduced_phase(&self) -> f64 {
        self.phase.rem_euclid(2.0 * PI)
    }

    pub fn with_coherence(&self, coherence: f64) -> Result<Self> {
        Self::new(self.i_h, coherence, self.phase)
    }

    /// Nearest family member of a general state: populations and coherence of
    /// the HH/VV sector, renormalized to that sector. Coherence is
    /// `|ρ_14| / sqrt(ρ_11 ρ_44)` clamped to `[0, 1]`, and zero when either
    /// population vanishes.
    pub fn from_density(rho: &DensityMatrix4) -> Self {
        let m = rho.matrix();
        let p_hh = m[(HH, HH)].re.max(0.0);
        let p_vv = m[(VV, VV)].re.max(0.0);
        let total = p_hh + p_vv;
        let i_h = if total > 0.0 { p_hh / total } else { 0.5 };
        let off = m[(HH, VV)];
        let denom = (p_hh * p_vv).sqrt();
        let coherence = if denom > 0.0 { (off.norm() / denom).min(1.0) } else { 0.0 };
        let phase = if off.norm() > 0.0 { -off.arg() } else { 0.0 };
        Self { i_h: i_h.clamp(0.0, 1.0), coherence, phase }
    }
}

/// Validated two-qubit density operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix4(Mat4);

/// Validated single-qubit density operator in `(|H>, |V>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2(Mat2);

macro_rules! density_common {
    ($ty:ident, $mat:ty, $n:expr) => {
        impl $ty {
            /// Accepts `m` if it is Hermitian and has unit trace to within
            /// [`ALGEBRAIC_TOL`] and no eigenvalue below `-SPECTRAL_TOL`.
            pub fn new(m: $mat) -> Result<Self> {
                if !m.is_finite() {
                    return Err(Error::NonPhysical("non-finite entries"));
                }
                if m.hermitian_deviation() > ALGEBRAIC_TOL {
                    return Err(Error::NonPhysical("not Hermitian"));
                }
                let tr = m.trace();
                if (tr.re - 1.0).abs() > ALGEBRAIC_TOL || tr.im.abs() > ALGEBRAIC_TOL {
                    return Err(Error::NonPhysical("trace differs from 1"));
                }
                if m.hermitian_eigen().values[0] < -SPECTRAL_TOL {
                    return Err(Error::NonPhysical("negative eigenvalue"));
                }
                Ok(Self(m))
            }

            /// Nearest physical state by eigenvalue flooring: take the
            /// Hermitian part, clamp negative eigenvalues to zero and
            /// renormalize the trace.
            pub fn project(m: &$mat) -> Result<Self> {
                if !m.is_finite() {
                    return Err(Error::NonPhysical("non-finite entries"));
                }
                let eig = m.hermitian_eigen();
                let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
                if !(total > 0.0) {
                    return Err(Error::NonPhysical("no positive spectral weight"));
                }
                let p = eig.map_values(|v| v.max(0.0) / total).hermitian_part();
                Ok(Self(p))
            }

            pub fn maximally_mixed() -> Self {
                Self(<$mat>::diag_real([1.0 / $n as f64; $n]))
            }

            pub fn pure(ket: &Ket<$n>) -> Result<Self> {
                let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
                if (norm - 1.0).abs() > ALGEBRAIC_TOL {
                    return Err(Error::NonPhysical("ket is not normalized"));
                }
                Ok(Self(<$mat>::outer(ket)))
            }

            pub fn matrix(&self) -> &$mat {
                &self.0
            }

            /// Eigenvalues, ascending.
            pub fn eigenvalues(&self) -> [f64; $n] {
                self.0.hermitian_eigen().values
            }

            pub fn purity(&self) -> f64 {
                self.0.trace_product(&self.0).re
            }

            /// `<v|ρ|v>`
            pub fn expectation(&self, v: &Ket<$n>) -> f64 {
                self.0.sandwich(v, v).re
            }
        }
    };
}

density_common!(DensityMatrix4, Mat4, 4);
density_common!(DensityMatrix2, Mat2, 2);

impl DensityMatrix4 {
    /// Born probability of the projector `P` (not checked to be a projector).
    pub fn probability(&self, projector: &Mat4) -> f64 {
        self.0.trace_product(projector).re
    }
}

pub fn ket_h() -> Ket<2> {
    [ONE, ZERO]
}

pub fn ket_v() -> Ket<2> {
    [ZERO, ONE]
}

fn bell(a: usize, b: usize, sign: f64) -> Ket<4> {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let mut k = [ZERO; 4];
    k[a] = C64::new(s, 0.0);
    k[b] = C64::new(sign * s, 0.0);
    k
}

/// `(|HH> + |VV>)/√2`
pub fn phi_plus() -> Ket<4> {
    bell(HH, VV, 1.0)
}

/// `(|HH> - |VV>)/√2`
pub fn phi_minus() -> Ket<4> {
    bell(HH, VV, -1.0)
}

/// `(|HV> + |VH>)/√2`
pub fn psi_plus() -> Ket<4> {
    bell(HV, VH, 1.0)
}

/// `(|HV> - |VH>)/√2`
pub fn psi_minus() -> Ket<4> {
    bell(HV, VH, -1.0)
}

fn two_level_state(params: &StateFamilyParams, a: usize, b: usize) -> DensityMatrix4 {
    let (p1, p2) = (params.i_h(), params.i_v());
    let mut m = Mat4::zeros();
    m[(a, a)] = C64::new(p1, 0.0);
    m[(b, b)] = C64::new(p2, 0.0);
    let off = C64::from_polar(params.coherence() * (p1 * p2).sqrt(), -params.phase());
    m[(a, b)] = off;
    m[(b, a)] = off.conj();
    // 2x2 block with |off|^2 <= p1 p2: positive semidefinite by construction.
    DensityMatrix4(m)
}

/// Decohered `sqrt(I_H)|HH> + e^{iφ} sqrt(I_V)|VV>`.
pub fn make_family_state(params: &StateFamilyParams) -> DensityMatrix4 {
    two_level_state(params, HH, VV)
}

/// Same structure on the `|HV>, |VH>` sector with `I_1 = i_h`, `I_2 = 1 - i_h`.
pub fn make_psi_family_state(params: &StateFamilyParams) -> DensityMatrix4 {
    two_level_state(params, HV, VH)
}

/// Closed-form concurrence of the family: `2 ℐ sqrt(I_H I_V)`.
pub fn family_concurrence(params: &StateFamilyParams) -> f64 {
    2.0 * params.coherence() * (params.i_h() * params.i_v()).sqrt()
}

/// `σ_y ⊗ σ_y`
fn spin_flip() -> Mat4 {
    let y = Mat2::from_rows([[ZERO, -I], [I, ZERO]]);
    kron(&y, &y)
}

/// Wootters concurrence `max(0, λ1 - λ2 - λ3 - λ4)`.
///
/// The `λ_i` are the square roots of the eigenvalues of `ρ ρ̃`, with
/// `ρ̃ = (σy⊗σy) ρ* (σy⊗σy)`. They are computed from the Hermitian matrix
/// `√ρ ρ̃ √ρ`, which has the same spectrum.
pub fn wootters_concurrence(rho: &DensityMatrix4) -> f64 {
    let yy = spin_flip();
    let tilde = yy * rho.matrix().conj() * yy;
    let root = rho.matrix().sqrt_psd();
    let r = root * tilde * root;
    let mut lambda = r.hermitian_eigen().values.map(|v| v.max(0.0).sqrt());
    lambda.sort_by(|a, b| b.total_cmp(a));
    (lambda[0] - lambda[1] - lambda[2] - lambda[3]).clamp(0.0, 1.0)
}

/// Partial trace over the α photon.
pub fn reduced_beta_state(rho: &DensityMatrix4) -> DensityMatrix2 {
    let m = rho.matrix();
    let mut r = Mat2::zeros();
    for b in 0..2 {
        for b2 in 0..2 {
            r[(b, b2)] = m[(b, b2)] + m[(2 + b, 2 + b2)];
        }
    }
    DensityMatrix2(r)
}

/// Partial trace over the β photon.
pub fn reduced_alpha_state(rho: &DensityMatrix4) -> DensityMatrix2 {
    let m = rho.matrix();
    let mut r = Mat2::zeros();
    for a in 0..2 {
        for a2 in 0..2 {
            r[(a, a2)] = m[(2 * a, 2 * a2)] + m[(2 * a + 1, 2 * a2 + 1)];
        }
    }
    DensityMatrix2(r)
}

/// Uhlmann fidelity in the squared convention,
/// `F(a, b) = (Tr sqrt(√a b √a))^2`, so that `F(|ψ><ψ|, ρ) = <ψ|ρ|ψ>`.
pub fn fidelity(a: &DensityMatrix4, b: &DensityMatrix4) -> f64 {
    let ra = a.matrix().sqrt_psd();
    let inner = ra * *b.matrix() * ra;
    let root_f: f64 = inner.hermitian_eigen().values.iter().map(|v| v.max(0.0).sqrt()).sum();
    (root_f * root_f).clamp(0.0, 1.0)
}

/// The five reconstructed tomography matrices, entries rounded to two
/// decimals as printed, row-major `(re, im)` pairs in the `HH, HV, VH, VV`
/// basis.
pub mod fixtures {
    use super::*;

    pub const NAMES: [&str; 5] = ["rho1", "rho2", "rho3", "rho4", "rho5"];

    pub type Printed = [[(f64, f64); 4]; 4];

    pub const PRINTED: [Printed; 5] = [
        [
            [(0.95, 0.0), (-0.07, 0.01), (0.04, 0.03), (-0.01, -0.01)],
            [(-0.07, -0.01), (0.02, 0.0), (0.00, 0.00), (0.00, 0.00)],
            [(0.04, -0.03), (0.00, 0.00), (0.03, 0.0), (0.00, 0.00)],
            [(-0.01, 0.01), (0.00, 0.00), (0.00, 0.00), (0.00, 0.0)],
        ],
        [
            [(0.48, 0.0), (0.00, 0.00), (0.04, -0.01), (0.01, -0.02)],
            [(0.00, 0.00), (0.02, 0.0), (0.00, 0.00), (-0.01, 0.01)],
            [(0.04, 0.01), (0.00, 0.00), (0.03, 0.0), (0.04, -0.04)],
            [(0.01, 0.02), (-0.01, -0.01), (0.04, 0.04), (0.47, 0.0)],
        ],
        [
            [(0.50, 0.0), (-0.03, 0.02), (0.00, -0.01), (0.14, 0.08)],
            [(-0.03, -0.02), (0.02, 0.0), (0.00, 0.00), (0.00, 0.00)],
            [(0.00, 0.01), (0.00, 0.00), (0.02, 0.0), (0.00, 0.03)],
            [(0.14, -0.08), (0.00, 0.00), (0.00, -0.03), (0.46, 0.0)],
        ],
        [
            [(0.62, 0.0), (0.02, -0.04), (0.06, 0.03), (-0.17, -0.01)],
            [(0.02, 0.04), (0.03, 0.0), (-0.01, 0.01), (-0.01, -0.01)],
            [(0.06, -0.03), (-0.01, -0.01), (0.03, 0.0), (-0.01, 0.03)],
            [(-0.17, 0.01), (-0.01, 0.01), (-0.01, -0.03), (0.32, 0.0)],
        ],
        [
            [(0.46, 0.0), (-0.04, 0.00), (0.02, -0.01), (0.40, 0.04)],
            [(-0.04, 0.00), (0.02, 0.0), (0.00, 0.00), (0.00, 0.00)],
            [(0.02, 0.01), (0.00, 0.00), (0.01, 0.0), (0.01, 0.01)],
            [(0.40, -0.04), (0.00, 0.00), (0.01, -0.01), (0.51, 0.0)],
        ],
    ];

    pub fn to_matrix(p: &Printed) -> Mat4 {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = C64::new(p[i][j].0, p[i][j].1);
            }
        }
        m
    }

    /// Printed matrix `k` (0-based) as-is, not validated.
    pub fn printed(k: usize) -> Mat4 {
        to_matrix(&PRINTED[k])
    }

    /// Physical-projected fixture `k` (0-based).
    pub fn fixture(k: usize) -> DensityMatrix4 {
        DensityMatrix4::project(&printed(k).hermitian_part())
            .expect("printed fixtures have positive trace")
    }

    pub fn all() -> [DensityMatrix4; 5] {
        [fixture(0), fixture(1), fixture(2), fixture(3), fixture(4)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(i_h: f64, c: f64, phi: f64) -> StateFamilyParams {
        StateFamilyParams::new(i_h, c, phi).unwrap()
    }

    fn close(a: &Mat4, b: &Mat4, tol: f64) -> bool {
        a.max_abs_diff(b) < tol
    }

    #[test]
    fn rejects_out_of_range_params() {
        assert!(matches!(
            StateFamilyParams::new(1.2, 0.5, 0.0),
            Err(Error::ParameterOutOfRange { name: "i_h", .. })
        ));
        assert!(StateFamilyParams::new(0.5, -0.1, 0.0).is_err());
        assert!(StateFamilyParams::new(0.5, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn family_limits() {
        let hh = make_family_state(&p(1.0, 1.0, 0.0));
        assert!(close(hh.matrix(), &Mat4::diag_real([1.0, 0.0, 0.0, 0.0]), 1e-15));

        let mixed = make_family_state(&p(0.5, 0.0, 0.0));
        assert!(close(mixed.matrix(), &Mat4::diag_real([0.5, 0.0, 0.0, 0.5]), 1e-15));

        let bell = make_family_state(&p(0.5, 1.0, PI));
        assert!(close(bell.matrix(), &Mat4::outer(&phi_minus()), 1e-15));
    }

    #[test]
    fn psi_family_limits() {
        let bell = make_psi_family_state(&p(0.5, 1.0, 0.0));
        assert!(close(bell.matrix(), &Mat4::outer(&psi_plus()), 1e-15));
        let hv = make_psi_family_state(&p(1.0, 1.0, 0.0));
        assert!(close(hv.matrix(), &Mat4::diag_real([0.0, 1.0, 0.0, 0.0]), 1e-15));
        let mixed = make_psi_family_state(&p(0.5, 0.0, 0.0));
        assert!(close(mixed.matrix(), &Mat4::diag_real([0.0, 0.5, 0.5, 0.0]), 1e-15));
    }

    #[test]
    fn family_states_validate() {
        for &(a, b, c) in &[(0.3, 0.7, 1.0), (0.0, 1.0, 2.0), (0.9, 0.0, -3.0)] {
            let rho = make_family_state(&p(a, b, c));
            assert!(DensityMatrix4::new(*rho.matrix()).is_ok());
        }
    }

    #[test]
    fn family_concurrence_examples() {
        assert!((family_concurrence(&p(0.5, 1.0, 1.234)) - 1.0).abs() < 1e-15);
        assert_eq!(family_concurrence(&p(0.5, 0.0, 0.0)), 0.0);
        // 2 * 0.94 * sqrt(0.47 * 0.53)
        assert!((family_concurrence(&p(0.47, 0.94, 0.0)) - 0.938_306_474_453).abs() < 1e-12);
    }

    #[test]
    fn wootters_examples() {
        let bell = DensityMatrix4::pure(&phi_plus()).unwrap();
        assert!((wootters_concurrence(&bell) - 1.0).abs() < 1e-10);
        assert!(wootters_concurrence(&DensityMatrix4::maximally_mixed()).abs() < 1e-10);
        for k in [psi_minus(), psi_plus(), phi_minus()] {
            let s = DensityMatrix4::pure(&k).unwrap();
            assert!((wootters_concurrence(&s) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn wootters_on_printed_fixtures() {
        // Frozen from an independent numpy evaluation (eigvals of ρρ̃ on the
        // symmetrized, eigen-floored, renormalized printed matrices).
        let expected = [0.0, 0.008_461_860_892, 0.286_770_715_432, 0.301_170_586_688, 0.791_651_940_504];
        for (k, want) in expected.iter().enumerate() {
            let c = wootters_concurrence(&fixtures::fixture(k));
            assert!((c - want).abs() < 1e-9, "rho{}: {c} vs {want}", k + 1);
        }
    }

    #[test]
    fn printed_fixtures_are_nearly_physical() {
        for k in 0..5 {
            let raw = fixtures::printed(k);
            assert_eq!(raw.hermitian_deviation(), 0.0);
            assert!(raw.hermitian_eigen().values[0] > -0.02);
            let f = fixtures::fixture(k);
            assert!(DensityMatrix4::new(*f.matrix()).is_ok());
        }
    }

    #[test]
    fn reduced_states() {
        let half = Mat2::diag_real([0.5, 0.5]);
        let r = reduced_beta_state(&make_family_state(&p(0.5, 1.0, 0.0)));
        assert!(r.matrix().max_abs_diff(&half) < 1e-12);
        let r = reduced_beta_state(&make_family_state(&p(0.5, 0.0, 0.0)));
        assert!(r.matrix().max_abs_diff(&half) < 1e-12);
        let r = reduced_beta_state(&make_family_state(&p(1.0, 1.0, 0.0)));
        assert!(r.matrix().max_abs_diff(&Mat2::diag_real([1.0, 0.0])) < 1e-12);
        assert!(DensityMatrix2::new(*r.matrix()).is_ok());
    }

    #[test]
    fn reduced_beta_of_product_state() {
        let a = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let b = [C64::new(0.0, 1.0), ZERO];
        let rho = DensityMatrix4::pure(&crate::linalg::kron_ket(&a, &b)).unwrap();
        let rb = reduced_beta_state(&rho);
        assert!(rb.matrix().max_abs_diff(&Mat2::outer(&b)) < 1e-14);
        let ra = reduced_alpha_state(&rho);
        assert!(ra.matrix().max_abs_diff(&Mat2::outer(&a)) < 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        let bell = DensityMatrix4::pure(&phi_plus()).unwrap();
        assert!((fidelity(&bell, &bell) - 1.0).abs() < 1e-10);
        let hh = make_family_state(&p(1.0, 0.0, 0.0));
        let vv = make_family_state(&p(0.0, 0.0, 0.0));
        assert!(fidelity(&hh, &vv).abs() < 1e-10);
        let mixed = DensityMatrix4::maximally_mixed();
        assert!((fidelity(&bell, &mixed) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn validation_rejects_nonphysical() {
        let mut m = Mat4::diag_real([0.5, 0.5, 0.0, 0.0]);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert_eq!(DensityMatrix4::new(m), Err(Error::NonPhysical("not Hermitian")));
        assert!(DensityMatrix4::new(Mat4::diag_real([0.5, 0.5, 0.5, 0.0])).is_err());
        assert!(DensityMatrix4::new(Mat4::diag_real([1.1, -0.1, 0.0, 0.0])).is_err());
        let projected = DensityMatrix4::project(&Mat4::diag_real([1.1, -0.1, 0.0, 0.0])).unwrap();
        assert!(close(projected.matrix(), &Mat4::diag_real([1.0, 0.0, 0.0, 0.0]), 1e-15));
    }

    #[test]
    fn from_density_inverts_family() {
        let q = p(0.3, 0.6, 1.1);
        let back = StateFamilyParams::from_density(&make_family_state(&q));
        assert!((back.i_h() - 0.3).abs() < 1e-14);
        assert!((back.coherence() - 0.6).abs() < 1e-14);
        assert!((back.phase() - 1.1).abs() < 1e-14);
    }

    fn arb_params() -> impl Strategy<Value = StateFamilyParams> {
        (0.0f64..=1.0, 0.0f64..=1.0, -10.0f64..10.0).prop_map(|(a, b, c)| p(a, b, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn wootters_matches_family_formula(q in arb_params()) {
            let want = family_concurrence(&q);
            prop_assert!((wootters_concurrence(&make_family_state(&q)) - want).abs() < 1e-10);
            prop_assert!((wootters_concurrence(&make_psi_family_state(&q)) - want).abs() < 1e-10);
        }

        #[test]
        fn spectrum_and_concurrence_ignore_phase(q in arb_params(), phi in -10.0f64..10.0) {
            let r = q.with_coherence(q.coherence()).unwrap();
            let shifted = StateFamilyParams::new(r.i_h(), r.coherence(), phi).unwrap();
            prop_assert_eq!(family_concurrence(&q), family_concurrence(&shifted));
            let e1 = make_family_state(&q).eigenvalues();
            let e2 = make_family_state(&shifted).eigenvalues();
            for k in 0..4 {
                prop_assert!((e1[k] - e2[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn balanced_family_is_locally_unpolarized(c in 0.0f64..=1.0, phi in -10.0f64..10.0) {
            let r = reduced_beta_state(&make_family_state(&p(0.5, c, phi)));
            prop_assert!(r.matrix().max_abs_diff(&Mat2::diag_real([0.5, 0.5])) < 1e-12);
        }

        #[test]
        fn entanglement_boundary(q in arb_params()) {
            let entangled = q.i_h() > 0.0 && q.i_h() < 1.0 && q.coherence() > 0.0;
            prop_assert_eq!(family_concurrence(&q) > 0.0, entangled);
        }

        #[test]
        fn fidelity_is_symmetric(a in arb_params(), b in arb_params()) {
            let ra = make_family_state(&a);
            let rb = make_psi_family_state(&b);
            let rc = make_family_state(&b);
            prop_assert!((fidelity(&ra, &rc) - fidelity(&rc, &ra)).abs() < 1e-8);
            prop_assert!(fidelity(&ra, &rb) <= 1.0);
            prop_assert!((fidelity(&ra, &ra) - 1.0).abs() < 1e-8);
        }
    }
}
