//! Equilibrium families of the SU(2) and E(2) systems, analytic
//! linearizations, eigen-data and perturbation seeds on unstable curves.

use nalgebra::{DMatrix, DVector};
use nalgebra::Complex;
type Complex64 = Complex<f64>;
use serde::{Deserialize, Serialize};

use crate::bianchi::{rhs, GroupSpec, GroupTag, State};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumFamily {
    /// SU(2) (q,q,0)
    Su2QQ0,
    /// SU(2) (0,q,q)
    Su20QQ,
    /// SU(2) (q,0,q)
    Su2Q0Q,
    /// SU(2) origin (the nut candidate)
    Su2Origin,
    /// E(2) (q,0,q,0)
    E2Q0Q0,
    /// E(2) (0,p,0,r)
    E20P0R,
}

impl std::fmt::Display for EquilibriumFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EquilibriumFamily::Su2QQ0 => "su2_qq0",
            EquilibriumFamily::Su20QQ => "su2_0qq",
            EquilibriumFamily::Su2Q0Q => "su2_q0q",
            EquilibriumFamily::Su2Origin => "su2_origin",
            EquilibriumFamily::E2Q0Q0 => "e2_q0q0",
            EquilibriumFamily::E20P0R => "e2_0p0r",
        };
        f.write_str(s)
    }
}

impl EquilibriumFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "qq0" | "su2_qq0" => Some(EquilibriumFamily::Su2QQ0),
            "0qq" | "su2_0qq" => Some(EquilibriumFamily::Su20QQ),
            "q0q" | "su2_q0q" => Some(EquilibriumFamily::Su2Q0Q),
            "origin" | "su2_origin" => Some(EquilibriumFamily::Su2Origin),
            "q0q0" | "e2_q0q0" => Some(EquilibriumFamily::E2Q0Q0),
            "0p0r" | "e2_0p0r" => Some(EquilibriumFamily::E20P0R),
            _ => None,
        }
    }
}

/// A fixed point of the flow, with its family tag and parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Equilibrium {
    pub family: EquilibriumFamily,
    /// q for the one-parameter families; p for (0,p,0,r)
    pub q: f64,
    /// r for (0,p,0,r), unused otherwise
    pub second: f64,
    pub point: State,
}

/// Builds the state for a family member; alpha is set consistently
/// (e^{-A} ab for SU(2), the r parameter for E(2) (0,p,0,r), 0 elsewhere).
pub fn equilibrium_point(group: &GroupSpec, family: EquilibriumFamily, q: f64, second: f64) -> Equilibrium {
    let point = match family {
        EquilibriumFamily::Su2QQ0 => State::new(0.0, q, q, 0.0, group.exp_neg_a * q * q),
        EquilibriumFamily::Su20QQ => State::new(0.0, 0.0, q, q, 0.0),
        EquilibriumFamily::Su2Q0Q => State::new(0.0, q, 0.0, q, 0.0),
        EquilibriumFamily::Su2Origin => State::new(0.0, 0.0, 0.0, 0.0, 0.0),
        EquilibriumFamily::E2Q0Q0 => State::new(0.0, q, 0.0, q, 0.0),
        EquilibriumFamily::E20P0R => State::new(0.0, 0.0, q, 0.0, second),
    };
    Equilibrium {
        family,
        q,
        second,
        point,
    }
}

/// The equilibrium families with states sampled at the given parameters.
pub fn list_equilibria(group: &GroupSpec, params: &[f64]) -> Result<Vec<Equilibrium>> {
    match group.tag {
        GroupTag::Su2 => {
            let mut out = vec![equilibrium_point(group, EquilibriumFamily::Su2Origin, 0.0, 0.0)];
            for &q in params {
                out.push(equilibrium_point(group, EquilibriumFamily::Su2QQ0, q, 0.0));
                out.push(equilibrium_point(group, EquilibriumFamily::Su20QQ, q, 0.0));
                out.push(equilibrium_point(group, EquilibriumFamily::Su2Q0Q, q, 0.0));
            }
            Ok(out)
        }
        GroupTag::E2 => {
            let mut out = Vec::new();
            for &q in params {
                out.push(equilibrium_point(group, EquilibriumFamily::E2Q0Q0, q, 0.0));
                out.push(equilibrium_point(group, EquilibriumFamily::E20P0R, q, q));
            }
            Ok(out)
        }
        _ => Err(Error::UnsupportedGroup(group.tag.to_string())),
    }
}

/// System dimension used for linear analysis: 3 for the reduced SU(2)
/// system, 4 for the others.
pub fn system_dim(group: &GroupSpec) -> usize {
    match group.tag {
        GroupTag::Su2 => 3,
        _ => 4,
    }
}

/// Analytic Jacobian of the per-group right-hand side at any state
/// (hand-differentiated polynomials).
pub fn jacobian(group: &GroupSpec, s: &State) -> DMatrix<f64> {
    let (a, b, c, al) = (s.a, s.b, s.c, s.alpha);
    match group.tag {
        GroupTag::Su2 => {
            let e = group.exp_neg_a;
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    0.5 * (-3.0 * a * a + b * b + c * c),
                    a * b,
                    a * c,
                    a * b,
                    0.5 * (a * a - 3.0 * b * b + c * c),
                    b * c,
                    c * (a + e * b),
                    c * (b + e * a),
                    0.5 * (a * a + b * b + 2.0 * e * a * b - 3.0 * c * c),
                ],
            )
        }
        _ => {
            let (p1, p2, p3) = (group.p1, group.p2, group.p3);
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.5 * (-3.0 * p1 * a * a + p2 * b * b + p3 * c * c),
                    p2 * a * b,
                    p3 * a * c,
                    0.0,
                    p1 * a * b,
                    0.5 * (p1 * a * a - 3.0 * p2 * b * b + p3 * c * c),
                    p3 * b * c,
                    0.0,
                    p1 * a * c,
                    p2 * b * c,
                    0.5 * (p1 * a * a + p2 * b * b - 3.0 * p3 * c * c + 2.0 * al),
                    c,
                    0.0,
                    0.0,
                    2.0 * p3 * c * al,
                    p3 * c * c,
                ],
            )
        }
    }
}

/// Linearization data at an equilibrium.
#[derive(Debug, Clone)]
pub struct LinearizationReport {
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// (eigenvalue, unit eigenvector) for each positive real eigenvalue;
    /// a repeated eigenvalue contributes its whole eigenspace basis.
    pub unstable: Vec<(f64, DVector<f64>)>,
    /// q = 0 requested: the spectrum degenerates to all zeros
    pub degenerate: bool,
}

/// Jacobian, spectrum and unstable directions at an equilibrium.
pub fn linearize(group: &GroupSpec, e: &Equilibrium) -> Result<LinearizationReport> {
    if !matches!(group.tag, GroupTag::Su2 | GroupTag::E2) {
        return Err(Error::UnsupportedGroup(group.tag.to_string()));
    }
    let j = jacobian(group, &e.point);
    let degenerate = e.q == 0.0 && e.second == 0.0;
    let eigenvalues: Vec<Complex64> = j.clone().complex_eigenvalues().iter().copied().collect();
    let n = j.nrows();
    let scale = j.amax().max(1.0);
    let mut unstable: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for ev in &eigenvalues {
        if ev.im.abs() > 1e-10 * scale || ev.re <= 1e-12 * scale {
            continue;
        }
        let lam = ev.re;
        if seen.iter().any(|&s| (s - lam).abs() <= 1e-9 * scale) {
            continue;
        }
        seen.push(lam);
        // eigenspace = nullspace of (J - lam I) via SVD
        let mut m = j.clone();
        for i in 0..n {
            m[(i, i)] -= lam;
        }
        let svd = m.svd(true, true);
        let smax = svd.singular_values.max();
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        for (i, &sv) in svd.singular_values.iter().enumerate() {
            if sv <= 1e-9 * smax.max(scale) {
                let v = v_t.row(i).transpose().normalize();
                unstable.push((lam, v));
            }
        }
    }
    // deterministic order: by eigenvalue, then by first significant component
    unstable.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then_with(|| x.1.iter().partial_cmp(y.1.iter()).unwrap())
    });
    Ok(LinearizationReport {
        jacobian: j,
        eigenvalues,
        unstable,
        degenerate,
    })
}

/// Point perturbed off the equilibrium along the unstable eigenspace.
///
/// `weights` combines the eigenspace basis (default: equal weights); the
/// result is the equilibrium plus `epsilon` times the unit combination,
/// signed so the coordinates that vanish at the equilibrium stay
/// nonnegative.
pub fn unstable_seed(
    group: &GroupSpec,
    e: &Equilibrium,
    report: &LinearizationReport,
    epsilon: f64,
    weights: Option<&[f64]>,
) -> Result<State> {
    if report.unstable.is_empty() {
        return Err(Error::NoUnstableDirection);
    }
    if !(epsilon > 0.0) {
        return Err(Error::DegenerateParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = report.unstable[0].1.len();
    let k = report.unstable.len();
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == k => w.to_vec(),
        Some(w) => {
            return Err(Error::DegenerateParameter(format!(
                "{} weights for {} unstable directions",
                w.len(),
                k
            )))
        }
        None => vec![1.0; k],
    };
    let mut dir = DVector::zeros(n);
    for (wi, (_, v)) in w.iter().zip(&report.unstable) {
        // orient each basis vector: largest-magnitude component positive
        let mut v = v.clone();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        dir += v * *wi;
    }
    let norm = dir.norm();
    if norm == 0.0 {
        return Err(Error::NoUnstableDirection);
    }
    dir /= norm;
    let p = e.point;
    let base = [p.a, p.b, p.c, p.alpha];
    let mut seed = [0.0f64; 4];
    for flip in [1.0, -1.0] {
        let mut ok = true;
        for i in 0..4 {
            let di = if i < n { dir[i] } else { 0.0 };
            seed[i] = base[i] + epsilon * flip * di;
            if seed[i] < 0.0 {
                ok = false;
                break;
            }
        }
        if ok {
            let mut s = State::new(0.0, seed[0], seed[1], seed[2], seed[3]);
            if group.tag == GroupTag::Su2 {
                s.alpha = group.exp_neg_a * s.a * s.b;
            }
            return Ok(s);
        }
    }
    Err(Error::SeedLeavesPositiveOrthant)
}

/// Distance from a state to the nearest equilibrium of the group, with the
/// projected point. Used by the integrator's capture detection.
pub fn nearest_equilibrium(
    group: &GroupSpec,
    y: &[f64; 4],
) -> Option<(f64, [f64; 4], Option<EquilibriumFamily>)> {
    let (a, b, c, al) = (y[0], y[1], y[2], y[3]);
    match group.tag {
        GroupTag::Su2 => {
            // alpha is slaved; measure in (a,b,c)
            let cands = [
                {
                    let q = 0.5 * (a + b);
                    (
                        ((a - q).powi(2) + (b - q).powi(2) + c * c).sqrt(),
                        [q, q, 0.0, group.exp_neg_a * q * q],
                        Some(EquilibriumFamily::Su2QQ0),
                    )
                },
                {
                    let q = 0.5 * (b + c);
                    (
                        (a * a + (b - q).powi(2) + (c - q).powi(2)).sqrt(),
                        [0.0, q, q, 0.0],
                        Some(EquilibriumFamily::Su20QQ),
                    )
                },
                {
                    let q = 0.5 * (a + c);
                    (
                        ((a - q).powi(2) + b * b + (c - q).powi(2)).sqrt(),
                        [q, 0.0, q, 0.0],
                        Some(EquilibriumFamily::Su2Q0Q),
                    )
                },
                (
                    (a * a + b * b + c * c).sqrt(),
                    [0.0, 0.0, 0.0, 0.0],
                    Some(EquilibriumFamily::Su2Origin),
                ),
            ];
            cands
                .into_iter()
                .min_by(|x, y| x.0.partial_cmp(&y.0).unwrap())
        }
        GroupTag::E2 => {
            let q = 0.5 * (a + c);
            let d1 = (
                ((a - q).powi(2) + b * b + (c - q).powi(2) + al * al).sqrt(),
                [q, 0.0, q, 0.0],
                Some(EquilibriumFamily::E2Q0Q0),
            );
            let d2 = (
                (a * a + c * c).sqrt(),
                [0.0, b, 0.0, al],
                Some(EquilibriumFamily::E20P0R),
            );
            Some(if d1.0 <= d2.0 { d1 } else { d2 })
        }
        GroupTag::Heisenberg => {
            // every point with c = 0 is an equilibrium
            Some((c.abs(), [a, b, 0.0, al], None))
        }
        GroupTag::Custom => None,
    }
}

/// Finite-difference check of the analytic Jacobian (guards transcription).
pub fn jacobian_fd_error(group: &GroupSpec, s: &State, step: f64) -> f64 {
    let n = system_dim(group);
    let j = jacobian(group, s);
    let mut worst: f64 = 0.0;
    let base = s.as_array();
    for col in 0..n {
        let mut hi = base;
        let mut lo = base;
        hi[col] += step;
        lo[col] -= step;
        let shi = State::from_array(s.t, hi);
        let slo = State::from_array(s.t, lo);
        let (Ok(dhi), Ok(dlo)) = (rhs(group, &shi), rhs(group, &slo)) else {
            continue;
        };
        let dh = dhi.as_array();
        let dl = dlo.as_array();
        for row in 0..n {
            let fd = (dh[row] - dl[row]) / (2.0 * step);
            worst = worst.max((fd - j[(row, col)]).abs());
        }
    }
    worst
}
