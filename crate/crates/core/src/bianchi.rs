//! Group data, state vectors and the right-hand sides of the diagonal
//! Bianchi-A ODE systems, together with their built-in identities.
//!
//! The metric is `g = (abc)^2 dt^2 + a^2 s1^2 + b^2 s2^2 + c^2 s3^2` with
//! structure constants (p1, p2, p3). In the time variable t the coefficients
//! obey
//!
//! ```text
//! 2 a'/a = -p1 a^2 + p2 b^2 + p3 c^2
//! 2 b'/b =  p1 a^2 - p2 b^2 + p3 c^2
//! 2 c'/c =  p1 a^2 + p2 b^2 - p3 c^2 + 2 alpha
//! p3 (alpha^2)' = 2 c^2 (lambda (ab)^4 + p3^2 alpha^2)
//! ```
//!
//! For zero central curvature (lambda = 0, p3 != 0) the last equation reduces
//! to `alpha' = p3 c^2 alpha`. For SU(2) the constant of motion log(ab/alpha)
//! eliminates alpha = e^{-A} ab and leaves a three-dimensional system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which unimodular three-dimensional group acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupTag {
    /// nil3 quotient, (p1,p2,p3) = (0,0,1)
    Heisenberg,
    /// SU(2), (1,1,1)
    Su2,
    /// Euclidean plane motions, (1,0,1)
    E2,
    /// arbitrary structure constants, exploration only
    Custom,
}

impl std::fmt::Display for GroupTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GroupTag::Heisenberg => "heisenberg",
            GroupTag::Su2 => "su2",
            GroupTag::E2 => "e2",
            GroupTag::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Structure constants plus the two scalar parameters of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub tag: GroupTag,
    /// e^{-A}: the constant of motion ab/alpha for the SU(2) reduction.
    pub exp_neg_a: f64,
    /// central curvature target; integration requires 0
    pub lambda: f64,
}

impl GroupSpec {
    pub fn heisenberg() -> Self {
        GroupSpec {
            p1: 0.0,
            p2: 0.0,
            p3: 1.0,
            tag: GroupTag::Heisenberg,
            exp_neg_a: 1.0,
            lambda: 0.0,
        }
    }

    pub fn su2(exp_neg_a: f64) -> Self {
        GroupSpec {
            p1: 1.0,
            p2: 1.0,
            p3: 1.0,
            tag: GroupTag::Su2,
            exp_neg_a,
            lambda: 0.0,
        }
    }

    pub fn e2() -> Self {
        GroupSpec {
            p1: 1.0,
            p2: 0.0,
            p3: 1.0,
            tag: GroupTag::E2,
            exp_neg_a: 1.0,
            lambda: 0.0,
        }
    }

    pub fn custom(p1: f64, p2: f64, p3: f64, lambda: f64) -> Self {
        GroupSpec {
            p1,
            p2,
            p3,
            tag: GroupTag::Custom,
            exp_neg_a: 1.0,
            lambda,
        }
    }

    /// 1 + e^{-A}, the coefficient gamma of the biaxial SU(2) reduction.
    pub fn gamma(&self) -> f64 {
        1.0 + self.exp_neg_a
    }
}

/// One point of a solution: time plus the four dependent variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
}

impl State {
    pub fn new(t: f64, a: f64, b: f64, c: f64, alpha: f64) -> Self {
        State { t, a, b, c, alpha }
    }

    pub fn interior(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.c > 0.0
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.alpha]
    }

    pub fn from_array(t: f64, y: [f64; 4]) -> Self {
        State::new(t, y[0], y[1], y[2], y[3])
    }
}

/// Time derivatives matching the State fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub da: f64,
    pub db: f64,
    pub dc: f64,
    pub dalpha: f64,
}

impl Derivative {
    pub fn as_array(&self) -> [f64; 4] {
        [self.da, self.db, self.dc, self.dalpha]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }
}

/// The Dancer–Strachan product variables w1 = bc, w2 = ac, w3 = ab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WState {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

fn check_interior(s: &State) -> Result<()> {
    if s.interior() {
        Ok(())
    } else {
        Err(Error::NonpositiveState {
            a: s.a,
            b: s.b,
            c: s.c,
        })
    }
}

/// alpha as the dynamics sees it: the stored field for the four-dimensional
/// systems, e^{-A} ab for the reduced SU(2) system.
pub fn effective_alpha(group: &GroupSpec, s: &State) -> f64 {
    match group.tag {
        GroupTag::Su2 => group.exp_neg_a * s.a * s.b,
        _ => s.alpha,
    }
}

/// Right-hand side of the per-group system.
///
/// SU(2) uses the reduced form with alpha eliminated (the alpha slot is kept
/// in sync by integrating d(e^{-A} ab)/dt); the other groups integrate the
/// four-dimensional system with the lambda = 0 alpha equation.
pub fn rhs(group: &GroupSpec, s: &State) -> Result<Derivative> {
    check_interior(s)?;
    match group.tag {
        GroupTag::Su2 => {
            if group.lambda != 0.0 {
                return Err(Error::UnsupportedLambda(group.lambda));
            }
            let (a, b, c) = (s.a, s.b, s.c);
            let e = group.exp_neg_a;
            Ok(Derivative {
                da: 0.5 * a * (-a * a + b * b + c * c),
                db: 0.5 * b * (a * a - b * b + c * c),
                dc: 0.5 * c * (a * a + b * b + 2.0 * e * a * b - c * c),
                dalpha: e * a * b * c * c,
            })
        }
        _ => rhs_general(group, s),
    }
}

/// Four-dimensional form for every group, using the stored alpha.
///
/// Kept alongside `rhs` so SU(2) runs can be cross-checked against the
/// unreduced system. lambda != 0 is accepted only for Custom groups with
/// p3 != 0 and alpha > 0, where the full central equation determines alpha'.
pub fn rhs_general(group: &GroupSpec, s: &State) -> Result<Derivative> {
    check_interior(s)?;
    let (a, b, c, al) = (s.a, s.b, s.c, s.alpha);
    let (p1, p2, p3) = (group.p1, group.p2, group.p3);
    let dalpha = if group.lambda == 0.0 {
        p3 * c * c * al
    } else if group.tag == GroupTag::Custom && p3 != 0.0 && al > 0.0 {
        let ab4 = (a * b).powi(4);
        c * c * (group.lambda * ab4 + p3 * p3 * al * al) / (p3 * al)
    } else {
        return Err(Error::UnsupportedLambda(group.lambda));
    };
    Ok(Derivative {
        da: 0.5 * a * (-p1 * a * a + p2 * b * b + p3 * c * c),
        db: 0.5 * b * (p1 * a * a - p2 * b * b + p3 * c * c),
        dc: 0.5 * c * (p1 * a * a + p2 * b * b - p3 * c * c + 2.0 * al),
        dalpha,
    })
}

/// Second time derivatives, by differentiating the system once more.
/// Used for the analytic frame derivatives of the curvature module.
pub fn second_derivatives(group: &GroupSpec, s: &State, d: &Derivative) -> [f64; 4] {
    let (a, b, c, al) = (s.a, s.b, s.c, s.alpha);
    let (p1, p2, p3) = (group.p1, group.p2, group.p3);
    let (da, db, dc, dal) = (d.da, d.db, d.dc, d.dalpha);
    let fa = -p1 * a * a + p2 * b * b + p3 * c * c;
    let fb = p1 * a * a - p2 * b * b + p3 * c * c;
    let fc = p1 * a * a + p2 * b * b - p3 * c * c + 2.0 * effective_alpha(group, s);
    let dal_eff = match group.tag {
        GroupTag::Su2 => group.exp_neg_a * (da * b + a * db),
        _ => dal,
    };
    let dfa = -2.0 * p1 * a * da + 2.0 * p2 * b * db + 2.0 * p3 * c * dc;
    let dfb = 2.0 * p1 * a * da - 2.0 * p2 * b * db + 2.0 * p3 * c * dc;
    let dfc = 2.0 * p1 * a * da + 2.0 * p2 * b * db - 2.0 * p3 * c * dc + 2.0 * dal_eff;
    let dda = 0.5 * (da * fa + a * dfa);
    let ddb = 0.5 * (db * fb + b * dfb);
    let ddc = 0.5 * (dc * fc + c * dfc);
    // alpha'' from the lambda-aware alpha equation
    let ddalpha = if group.lambda == 0.0 {
        p3 * (2.0 * c * dc * al + c * c * dal)
    } else {
        let g = group.lambda * (a * b).powi(4) + p3 * p3 * al * al;
        let dg = 4.0 * group.lambda * (a * b).powi(3) * (da * b + a * db)
            + 2.0 * p3 * p3 * al * dal;
        2.0 * c * dc * g / (p3 * al) + c * c * (dg * al - g * dal) / (p3 * al * al)
    };
    [dda, ddb, ddc, ddalpha]
}

/// Componentwise products (bc, ac, ab).
pub fn to_w(s: &State) -> WState {
    WState {
        w1: s.b * s.c,
        w2: s.a * s.c,
        w3: s.a * s.b,
    }
}

/// Residuals of the product-variable system
///
/// ```text
/// w1' = p1 w2 w3 + alpha w1
/// w2' = p2 w1 w3 + alpha w2
/// w3' = p3 w1 w2
/// ```
///
/// evaluated on a (state, derivative) pair; identically zero when the
/// derivative comes from `rhs`.
pub fn w_residuals(group: &GroupSpec, s: &State, d: &Derivative) -> [f64; 3] {
    let w = to_w(s);
    let al = effective_alpha(group, s);
    let dw1 = d.db * s.c + s.b * d.dc;
    let dw2 = d.da * s.c + s.a * d.dc;
    let dw3 = d.da * s.b + s.a * d.db;
    [
        dw1 - group.p1 * w.w2 * w.w3 - al * w.w1,
        dw2 - group.p2 * w.w1 * w.w3 - al * w.w2,
        dw3 - group.p3 * w.w1 * w.w2,
    ]
}

/// E(2) scaling symmetry on states: (a,b,c,alpha) -> (ka, b, kc, k^2 alpha).
/// Solutions map to solutions once time is rescaled t -> t/k^2; callers pair
/// the state map with that reparametrization when comparing trajectories.
pub fn scale_symmetry(group: &GroupSpec, s: &State, k: f64) -> Result<State> {
    if group.tag != GroupTag::E2 {
        return Err(Error::UnsupportedGroup(group.tag.to_string()));
    }
    if !(k > 0.0) {
        return Err(Error::NonpositiveFactor(k));
    }
    Ok(State::new(s.t, k * s.a, s.b, k * s.c, k * k * s.alpha))
}

/// Constants of motion for the group, as (name, value) pairs.
pub fn first_integrals(group: &GroupSpec, s: &State) -> Result<Vec<(&'static str, f64)>> {
    check_interior(s)?;
    match group.tag {
        GroupTag::Su2 | GroupTag::E2 => {
            if s.alpha.abs() < f64::MIN_POSITIVE {
                return Err(Error::DivisionByZeroAlpha);
            }
            Ok(vec![("ab/alpha", s.a * s.b / s.alpha)])
        }
        GroupTag::Heisenberg => Ok(vec![
            ("a/b", s.a / s.b),
            // phi = a^2; alpha/phi is constant for lambda = 0
            ("alpha/phi", s.alpha / (s.a * s.a)),
        ]),
        GroupTag::Custom => Err(Error::UnsupportedGroup("custom".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn su2_rhs_at_ones() {
        let g = GroupSpec::su2(1.0);
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = rhs(&g, &s).unwrap();
        assert_relative_eq!(d.da, 0.5);
        assert_relative_eq!(d.db, 0.5);
        assert_relative_eq!(d.dc, 1.5);
    }

    #[test]
    fn su2_equilibrium_qq0() {
        let g = GroupSpec::su2(1.0);
        // boundary state c = 0 is rejected by rhs; check the algebraic limits
        // directly on the polynomial right-hand side instead
        let q = 1.0;
        let da = 0.5 * q * (-q * q + q * q + 0.0);
        let db = 0.5 * q * (q * q - q * q + 0.0);
        let dc = 0.0;
        assert_eq!((da, db, dc), (0.0, 0.0, 0.0));
        // just inside the orthant the derivative is O(c)
        let s = State::new(0.0, q, q, 1e-12, g.exp_neg_a * q * q);
        let d = rhs(&g, &s).unwrap();
        assert!(d.da.abs() < 1e-23 && d.db.abs() < 1e-23);
    }

    #[test]
    fn e2_rhs_at_ones() {
        let g = GroupSpec::e2();
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = rhs(&g, &s).unwrap();
        assert_eq!(
            (d.da, d.db, d.dc, d.dalpha),
            (0.0, 1.0, 1.0, 1.0),
            "hand substitution into the E(2) system"
        );
    }

    #[test]
    fn heisenberg_rhs_at_ones() {
        let g = GroupSpec::heisenberg();
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = rhs(&g, &s).unwrap();
        assert_eq!((d.da, d.db, d.dc, d.dalpha), (0.5, 0.5, 0.5, 1.0));
    }

    #[test]
    fn rhs_rejects_nonpositive() {
        let g = GroupSpec::su2(1.0);
        let s = State::new(0.0, 1.0, -1.0, 1.0, 1.0);
        assert!(matches!(
            rhs(&g, &s),
            Err(Error::NonpositiveState { .. })
        ));
    }

    #[test]
    fn rhs_rejects_lambda() {
        let mut g = GroupSpec::e2();
        g.lambda = 0.5;
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(rhs(&g, &s), Err(Error::UnsupportedLambda(_))));
        // Custom with p3 != 0 and alpha > 0 takes the full alpha equation
        let gc = GroupSpec::custom(1.0, 0.0, 1.0, 0.5);
        let d = rhs(&gc, &s).unwrap();
        // alpha' = c^2 (lambda (ab)^4 + alpha^2)/alpha = 1*(0.5+1)/1
        assert_relative_eq!(d.dalpha, 1.5);
    }

    #[test]
    fn to_w_values() {
        let s = State::new(0.0, 1.0, 2.0, 3.0, 0.0);
        let w = to_w(&s);
        assert_eq!((w.w1, w.w2, w.w3), (6.0, 3.0, 2.0));
        let s = State::new(0.0, 1.0, 1.0, 0.0, 0.0);
        let w = to_w(&s);
        assert_eq!((w.w1, w.w2, w.w3), (0.0, 0.0, 1.0));
        let s = State::new(0.0, 1.0, 1.0, 1.0, 0.0);
        let w = to_w(&s);
        assert_eq!((w.w1, w.w2, w.w3), (1.0, 1.0, 1.0));
    }

    #[test]
    fn w_residuals_hand_values() {
        let g = GroupSpec::e2();
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = Derivative {
            da: 0.0,
            db: 1.0,
            dc: 1.0,
            dalpha: 1.0,
        };
        let r = w_residuals(&g, &s, &d);
        assert_eq!(r[2], 0.0);
        // corrupted db
        let d_bad = Derivative {
            da: 0.0,
            db: 0.0,
            dc: 1.0,
            dalpha: 1.0,
        };
        let r = w_residuals(&g, &s, &d_bad);
        assert_eq!(r[2], -1.0);
    }

    #[test]
    fn scale_symmetry_values() {
        let g = GroupSpec::e2();
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let id = scale_symmetry(&g, &s, 1.0).unwrap();
        assert_eq!(id, s);
        let k2 = scale_symmetry(&g, &s, 2.0).unwrap();
        assert_eq!((k2.a, k2.b, k2.c, k2.alpha), (2.0, 1.0, 2.0, 4.0));
        assert!(matches!(
            scale_symmetry(&g, &s, 0.0),
            Err(Error::NonpositiveFactor(_))
        ));
        assert!(matches!(
            scale_symmetry(&GroupSpec::su2(1.0), &s, 2.0),
            Err(Error::UnsupportedGroup(_))
        ));
    }

    #[test]
    fn scale_symmetry_maps_equilibria() {
        let g = GroupSpec::e2();
        // (q,0,q,0)-type boundary point, scaled, still annihilates the
        // polynomial right-hand side
        let q = 0.7;
        for k in [0.5, 2.0] {
            let scaled = scale_symmetry(&g, &State::new(0.0, q, 0.0, q, 0.0), k).unwrap();
            assert_eq!(scaled.b, 0.0);
            assert_eq!(scaled.a, scaled.c);
            assert_eq!(scaled.alpha, 0.0);
        }
    }

    #[test]
    fn first_integral_values() {
        let su2 = GroupSpec::su2(1.0);
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let fi = first_integrals(&su2, &s).unwrap();
        assert_eq!(fi[0], ("ab/alpha", 1.0));
        let heis = GroupSpec::heisenberg();
        let s = State::new(0.0, 2.0, 2.0, 0.5, 3.0);
        let fi = first_integrals(&heis, &s).unwrap();
        assert_eq!(fi[0], ("a/b", 1.0));
        assert_relative_eq!(fi[1].1, 3.0 / 4.0);
        let s0 = State::new(0.0, 1.0, 1.0, 1.0, 0.0);
        assert!(matches!(
            first_integrals(&su2, &s0),
            Err(Error::DivisionByZeroAlpha)
        ));
    }

    #[test]
    fn su2_general_matches_reduced_when_consistent() {
        let g = GroupSpec::su2(0.7);
        let s = State::new(0.0, 1.3, 0.9, 0.4, 0.7 * 1.3 * 0.9);
        let d_red = rhs(&g, &s).unwrap();
        let d_gen = rhs_general(&g, &s).unwrap();
        for (x, y) in d_red.as_array().iter().zip(d_gen.as_array()) {
            assert_relative_eq!(x, &y, max_relative = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn w_residuals_vanish_on_rhs(
            a in 0.05f64..3.0, b in 0.05f64..3.0, c in 0.05f64..3.0,
            al in 0.01f64..3.0, tag in 0usize..3
        ) {
            let g = match tag {
                0 => GroupSpec::heisenberg(),
                1 => GroupSpec::su2(0.8),
                _ => GroupSpec::e2(),
            };
            let s = State::new(0.0, a, b, c, al);
            let d = rhs(&g, &s).unwrap();
            let r = w_residuals(&g, &s, &d);
            let scale = (a * b * c).powi(2).max(1.0);
            for ri in r {
                prop_assert!(ri.abs() <= 1e-12 * scale, "residual {} at scale {}", ri, scale);
            }
        }

        #[test]
        fn products_monotone_sign(
            a in 0.05f64..2.0, b in 0.05f64..2.0, c in 0.05f64..2.0, al in 0.0f64..2.0
        ) {
            // (ab)', (ac)', (bc)' >= 0 on interior states for all three groups
            for g in [GroupSpec::heisenberg(), GroupSpec::su2(0.5), GroupSpec::e2()] {
                let s = State::new(0.0, a, b, c, al);
                let d = rhs(&g, &s).unwrap();
                let dab = d.da * b + a * d.db;
                let dac = d.da * c + a * d.dc;
                let dbc = d.db * c + b * d.dc;
                prop_assert!(dab >= -1e-14);
                prop_assert!(dac >= -1e-14);
                prop_assert!(dbc >= -1e-14);
            }
        }
    }
}
