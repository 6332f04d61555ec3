//! Closed-form compatibility criteria for qubit channel families.

use crate::channels::{standard_channel, Channel, LinearMapRep, StandardKind};
use crate::error::{Error, Result};
use crate::jordan::jordan_channel;
use crate::linalg::{max_abs, ptrace};

/// Negative determinants above `-DET_CLAMP` are treated as zero.
pub const DET_CLAMP: f64 = 1e-12;

/// Parameters of `Ξ_{p,q} = (1−p−q)·I + p·Δ + q·Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiParams {
    p: f64,
    q: f64,
}

impl XiParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ParameterOutOfRange(format!("{name} = {v} not in [0, 1]")));
            }
        }
        if p + q > 1.0 + 1e-12 {
            return Err(Error::ParameterOutOfRange(format!("p + q = {} > 1", p + q)));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn channel(&self) -> Channel {
        standard_channel(&StandardKind::Xi { p: self.p, q: self.q }, 2).expect("validated parameters")
    }
}

/// `Tr((Tr_X J)²) ≥ Tr(J²) − 4√det J` for a qubit channel's Choi matrix.
pub fn qubit_self_compatible(ch: &Channel) -> Result<bool> {
    if ch.d_in() != 2 || ch.d_out() != 2 {
        return Err(Error::DimensionMismatch("criterion needs a qubit channel".into()));
    }
    let j = ch.choi().matrix();
    let tx = ptrace(j, &[2, 2], &[0])?;
    let lhs = (&tx * &tx).trace().re;
    let tr_j2 = (j * j).trace().re;
    let (vals, _) = crate::linalg::eigh(j)?;
    let det: f64 = vals.iter().product();
    if det < -DET_CLAMP {
        return Err(Error::NotPsd { min_eigenvalue: vals[0] });
    }
    let rhs = tr_j2 - 4.0 * det.max(0.0).sqrt();
    Ok(lhs >= rhs - 1e-12)
}

/// Smallest `q` with `Ξ_{p,q}` self-compatible.
pub fn xi_self_threshold(p: f64) -> f64 {
    (2.0 - p - (1.0 + 2.0 * p * (1.0 - p)).sqrt()) / 3.0
}

pub fn xi_self_compatible(xp: XiParams) -> bool {
    xp.q >= xi_self_threshold(xp.p)
}

/// Smallest `q` with `Ξ_{p,q}` measure-and-prepare.
pub fn xi_measure_prepare_threshold(p: f64) -> f64 {
    2.0 * (1.0 - p) / 3.0
}

pub fn xi_measure_prepare(xp: XiParams) -> bool {
    xp.q >= xi_measure_prepare_threshold(xp.p)
}

/// `Ω_{q₀}` and `Ω_{q₁}` are compatible iff `q₀ + √(q₀q₁) + q₁ ≥ 1`.
pub fn depol_pair_compatible(q0: f64, q1: f64) -> Result<bool> {
    for (name, v) in [("q0", q0), ("q1", q1)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ParameterOutOfRange(format!("{name} = {v} not in [0, 1]")));
        }
    }
    Ok(q0 + (q0 * q1).sqrt() + q1 >= 1.0)
}

/// `Ξ⁻¹ = (I − p/(1−q)·Δ − q(1−p−q)/(1−q)·Ω) / (1−p−q)`.
pub fn xi_inverse(xp: XiParams) -> Result<LinearMapRep> {
    let (p, q) = (xp.p, xp.q);
    let r = 1.0 - p - q;
    if r <= 1e-12 || 1.0 - q <= 1e-12 {
        return Err(Error::SingularMap {
            smallest_singular_value: r.max(0.0),
        });
    }
    let id = standard_channel(&StandardKind::Identity, 2)?;
    let delta = standard_channel(&StandardKind::Dephasing, 2)?;
    let omega = standard_channel(&StandardKind::Depolarizing, 2)?;
    let m = id
        .rep()
        .combine(1.0 / r, delta.rep(), -p / ((1.0 - q) * r))?
        .combine(1.0, omega.rep(), -q / (1.0 - q))?;
    Ok(m)
}

/// Whether the standard Jordan product `f ⊙ g` is completely positive.
pub fn jordan_product_cp(f: &Channel, g: &Channel, tol: f64) -> Result<bool> {
    let j = jordan_channel(f.rep(), g.rep())?;
    Ok(j.choi().min_eigenvalue()? >= -tol)
}

/// Membership of `pt` in the convex polygon with counter-clockwise
/// `vertices`, boundary included up to `tol`.
pub fn in_convex_polygon(pt: (f64, f64), vertices: &[(f64, f64)], tol: f64) -> bool {
    let n = vertices.len();
    (0..n).all(|k| {
        let (a, b) = (vertices[k], vertices[(k + 1) % n]);
        (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0) >= -tol
    })
}

/// Convex hull of `(1/3,1/3), (1,0), (1,1), (0,1)` in counter-clockwise order.
pub const DEPOL_HULL: [(f64, f64); 4] = [(1.0 / 3.0, 1.0 / 3.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

/// Largest entry-wise deviation of `f ∘ g` from the identity on matrix units.
pub fn inverse_defect(f: &LinearMapRep, g: &LinearMapRep) -> Result<f64> {
    let comp = crate::channels::compose(f, g)?;
    let id = standard_channel(&StandardKind::Identity, g.d_in())?;
    Ok(max_abs(&(comp.choi().matrix() - id.choi().matrix())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega(q: f64) -> Channel {
        standard_channel(&StandardKind::PartialDepolarizing(q), 2).unwrap()
    }

    #[test]
    fn qubit_criterion_cases() {
        assert!(qubit_self_compatible(&omega(1.0 / 3.0)).unwrap());
        assert!(!qubit_self_compatible(&omega(0.0)).unwrap());
        assert!(!qubit_self_compatible(&omega(0.3)).unwrap());
        assert!(qubit_self_compatible(&omega(0.35)).unwrap());
    }

    #[test]
    fn xi_thresholds() {
        assert!((xi_self_threshold(0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(xi_self_threshold(1.0).abs() < 1e-15);
        assert!((xi_self_threshold(0.5) - (1.5 - 1.5f64.sqrt()) / 3.0).abs() < 1e-15);
        assert!((xi_measure_prepare_threshold(0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(xi_measure_prepare(XiParams::new(0.4, 0.4).unwrap()));
        assert!(xi_self_compatible(XiParams::new(1.0, 0.0).unwrap()));
        assert!(XiParams::new(0.6, 0.6).is_err());
    }

    #[test]
    fn depol_pair_cases() {
        assert!(depol_pair_compatible(1.0 / 3.0, 1.0 / 3.0).unwrap());
        assert!(depol_pair_compatible(0.0, 1.0).unwrap());
        assert!(!depol_pair_compatible(0.25, 0.25).unwrap());
        assert!(depol_pair_compatible(1.5, 0.0).is_err());
    }

    #[test]
    fn xi_inverse_round_trips() {
        for (p, q) in [(0.0, 0.0), (0.25, 0.25), (0.1, 0.6), (0.7, 0.2)] {
            let xp = XiParams::new(p, q).unwrap();
            let inv = xi_inverse(xp).unwrap();
            assert!(inverse_defect(&inv, xp.channel().rep()).unwrap() < 1e-12);
            assert!(inverse_defect(xp.channel().rep(), &inv).unwrap() < 1e-12);
        }
        assert!(xi_inverse(XiParams::new(0.5, 0.5).unwrap()).is_err());
    }

    #[test]
    fn polygon_membership() {
        assert!(in_convex_polygon((0.5, 0.5), &DEPOL_HULL, 0.0));
        assert!(in_convex_polygon((1.0 / 3.0, 1.0 / 3.0), &DEPOL_HULL, 1e-12));
        assert!(!in_convex_polygon((0.3, 0.3), &DEPOL_HULL, 0.0));
        assert!(!in_convex_polygon((0.1, 0.5), &DEPOL_HULL, 0.0));
    }
}
