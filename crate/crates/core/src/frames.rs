//! Reference frames: the dq0 (Park) transform, rotations between machine
//! frames and phasor packing.
//!
//! Phasors follow the convention `V = V_q + j·V_d`: the real part is the
//! q-component. Several textbooks use `V_d + j·V_q` instead; every function
//! here uses the q-real convention.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// An angle in radians. Stored unwrapped: rotor angles integrate without
/// bound and are never reduced modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(pub f64);

impl Angle {
    pub fn radians(self) -> f64 {
        self.0
    }
}

impl std::ops::Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle(self.0 - rhs.0)
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle(self.0 + rhs.0)
    }
}

const TWO_THIRDS_PI: f64 = 2.0 * PI / 3.0;

/// Orthogonal dq0 transform `T_dq0(γ)` taking ABC quantities to rotor axes.
pub fn park(gamma: Angle) -> Matrix3<f64> {
    let g = gamma.0;
    let c = (2.0f64 / 3.0).sqrt();
    let z = 1.0 / 2.0f64.sqrt();
    Matrix3::new(
        g.cos(),
        (g - TWO_THIRDS_PI).cos(),
        (g + TWO_THIRDS_PI).cos(),
        g.sin(),
        (g - TWO_THIRDS_PI).sin(),
        (g + TWO_THIRDS_PI).sin(),
        z,
        z,
        z,
    ) * c
}

/// `T_dq0(γ_i)·T_dq0(γ_k)ᵀ` for `γ_ik = γ_i − γ_k`, maps machine-k dq0
/// coordinates into machine-i coordinates.
pub fn frame_rotation(gamma_ik: Angle) -> Matrix3<f64> {
    let (s, c) = gamma_ik.0.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// The dq block of [`frame_rotation`].
pub fn dq_rotation(gamma_ik: Angle) -> Matrix2<f64> {
    let (s, c) = gamma_ik.0.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Packs dq components as `V_q + j·V_d`.
pub fn phasor(v_d: f64, v_q: f64) -> Complex64 {
    Complex64::new(v_q, v_d)
}

/// Inverse of [`phasor`]: returns `(V_d, V_q)`.
pub fn unpack(v: Complex64) -> (f64, f64) {
    (v.im, v.re)
}

/// Re-expresses a machine-k phasor in machine-i coordinates: `e^{−jγ_ik}·V`.
pub fn rotate_phasor(v: Complex64, gamma_ik: Angle) -> Complex64 {
    Complex64::from_polar(1.0, -gamma_ik.0) * v
}

/// Applies [`dq_rotation`] to a `(V_d, V_q)` pair.
pub fn rotate_dq(v_d: f64, v_q: f64, gamma_ik: Angle) -> (f64, f64) {
    let r = dq_rotation(gamma_ik) * Vector2::new(v_d, v_q);
    (r[0], r[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn max_abs(m: Matrix3<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn park_row_zero_at_origin() {
        let t = park(Angle(0.0));
        let c = (2.0f64 / 3.0).sqrt();
        assert_relative_eq!(t[(0, 0)], c, epsilon = 1e-15);
        assert_relative_eq!(t[(0, 1)], -0.5 * c, epsilon = 1e-15);
        assert_relative_eq!(t[(0, 2)], -0.5 * c, epsilon = 1e-15);
    }

    #[test]
    fn balanced_signal_is_constant() {
        for k in 0..100 {
            let g = -7.0 + 0.1437 * k as f64;
            let abc = Vector3::new(g.cos(), (g - TWO_THIRDS_PI).cos(), (g + TWO_THIRDS_PI).cos());
            let dq0 = park(Angle(g)) * abc;
            assert!((dq0[0] - 1.5f64.sqrt()).abs() < 1e-12);
            assert!(dq0[1].abs() < 1e-12);
            assert!(dq0[2].abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_special_cases() {
        assert_eq!(frame_rotation(Angle(0.0)), Matrix3::identity());
        let q = dq_rotation(Angle(PI / 2.0));
        assert!((q - Matrix2::new(0.0, -1.0, 1.0, 0.0)).abs().max() < 1e-15);
    }

    #[test]
    fn phasor_packing() {
        assert_eq!(phasor(0.0, 1.0), Complex64::new(1.0, 0.0));
        assert_eq!(phasor(1.0, 0.0), Complex64::new(0.0, 1.0));
        assert_eq!(unpack(phasor(0.3, -2.0)), (0.3, -2.0));
    }

    proptest! {
        #[test]
        fn park_is_orthogonal(g in -1e3f64..1e3) {
            let t = park(Angle(g));
            prop_assert!(max_abs(t * t.transpose() - Matrix3::identity()) < 1e-12);
        }

        #[test]
        fn product_of_parks_is_rotation(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let p = park(Angle(a)) * park(Angle(b)).transpose();
            prop_assert!(max_abs(p - frame_rotation(Angle(a) - Angle(b))) < 1e-12);
        }

        #[test]
        fn rotations_compose(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let lhs = frame_rotation(Angle(a)) * frame_rotation(Angle(b));
            prop_assert!(max_abs(lhs - frame_rotation(Angle(a + b))) < 1e-12);
        }

        #[test]
        fn phasor_rotation_matches_dq_rotation(vd in -5.0f64..5.0, vq in -5.0f64..5.0, g in -10.0f64..10.0) {
            let (rd, rq) = unpack(rotate_phasor(phasor(vd, vq), Angle(g)));
            let (sd, sq) = rotate_dq(vd, vq, Angle(g));
            prop_assert!((rd - sd).abs() < 1e-12 && (rq - sq).abs() < 1e-12);
        }
    }
}
