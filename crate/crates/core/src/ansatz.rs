//! Dictionary from the metric coefficients to the frame-bracket functions,
//! Ricci-form coefficients and two independent central-curvature
//! evaluators.
//!
//! In an orthonormal frame {k, t, x, y} adapted to the metric, the bracket
//! functions are
//!
//! ```text
//! A = -a'/(sqrt2 a^2 bc)   B = F = -b p2/(sqrt2 ac)   E = -A
//! D = -b'/(sqrt2 a b^2 c)  C = G =  a p1/(sqrt2 bc)   H = -D
//! L = -c'/(sqrt2 a b c^2)  N = -c p3/(sqrt2 ab)
//! ```
//!
//! and the central curvature is recoverable either from the Ricci-form
//! coefficients (r_alpha * r_beta for cohomogeneity-one input) or from the
//! reduced relation p3 (alpha^2)' = 2 c^2 (lambda (ab)^4 + p3^2 alpha^2).

use crate::bianchi::{
    effective_alpha, rhs_general, second_derivatives, Derivative, GroupSpec, GroupTag, State,
};
use crate::error::{Error, Result};
use crate::flow::{Chart, Trajectory};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// The ten frame-bracket functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzFrame {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub l: f64,
    pub n: f64,
}

impl AnsatzFrame {
    /// Residuals of the structural identities A-D = F+G, B+C = H-E,
    /// N = A+D, N = -(E+H); all vanish for frames built by `ansatz_map`.
    pub fn relation_residuals(&self) -> [f64; 4] {
        [
            (self.a - self.d) - (self.f + self.g),
            (self.b + self.c) - (self.h - self.e),
            self.n - (self.a + self.d),
            self.n + (self.e + self.h),
        ]
    }
}

/// Change-of-variables functions. `s` is undefined (None) when F+G = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedVars {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: Option<f64>,
    pub l: f64,
    pub n: f64,
}

/// Ricci-form coefficients in the frame basis, renamed r_* to keep them
/// apart from the solution variable alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciCoefficients {
    pub r_alpha: f64,
    pub r_beta: f64,
    pub r_gamma: f64,
    pub r_delta: f64,
    pub r_phi: f64,
    pub r_psi: f64,
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

/// Frame-bracket functions from a state and its time derivative.
pub fn ansatz_map(group: &GroupSpec, s: &State, d: &Derivative) -> Result<AnsatzFrame> {
    check_interior(s)?;
    let (a, b, c) = (s.a, s.b, s.c);
    let fa = -d.da / (SQRT2 * a * a * b * c);
    let fd = -d.db / (SQRT2 * a * b * b * c);
    let fl = -d.dc / (SQRT2 * a * b * c * c);
    let fn_ = -c * group.p3 / (SQRT2 * a * b);
    let fb = -b * group.p2 / (SQRT2 * a * c);
    let fc = a * group.p1 / (SQRT2 * b * c);
    Ok(AnsatzFrame {
        a: fa,
        b: fb,
        c: fc,
        d: fd,
        e: -fa,
        f: fb,
        g: fc,
        h: -fd,
        l: fl,
        n: fn_,
    })
}

/// P, Q, R, S directly from the metric coefficients.
///
/// R is reported nonnegative (the invariant form sqrt((B+C)^2 + (F+G)^2));
/// only R^2 enters the downstream equations, so the sign carried by the
/// bare expression (a^2 p1 - b^2 p2)/(abc) is immaterial.
pub fn reduced_vars(group: &GroupSpec, s: &State, d: &Derivative) -> Result<ReducedVars> {
    check_interior(s)?;
    let (a, b, c) = (s.a, s.b, s.c);
    let fg = a * a * group.p1 - b * b * group.p2;
    let frame = ansatz_map(group, s, d)?;
    Ok(ReducedVars {
        p: -SQRT2 * (a * a * group.p1 + b * b * group.p2) / (a * b * c),
        q: 0.0,
        r: fg.abs() / (a * b * c),
        s: if fg == 0.0 {
            None
        } else {
            Some(std::f64::consts::FRAC_PI_4)
        },
        l: frame.l,
        n: frame.n,
    })
}

/// P, Q, R, S through the frame functions (the other route through the
/// change of variables).
pub fn reduced_vars_from_frame(frame: &AnsatzFrame) -> ReducedVars {
    let p = (frame.b - frame.c) + (frame.f - frame.g);
    let q = (frame.b - frame.c) - (frame.f - frame.g);
    let bc = frame.b + frame.c;
    let fg = frame.f + frame.g;
    let r = (bc * bc + fg * fg).sqrt();
    let s = if fg == 0.0 {
        None
    } else {
        Some((bc / fg).atan())
    };
    ReducedVars {
        p,
        q,
        r,
        s,
        l: frame.l,
        n: frame.n,
    }
}

/// Ricci-form coefficients for cohomogeneity-one input.
///
/// `dl`, `dch`, `daf` are the directional derivatives of L, C-H and A-F
/// along k - t (that is, d_{k-t} f = 2 df/dtau). The off-block components
/// vanish because nothing depends on x or y.
pub fn ricci_coefficients(frame: &AnsatzFrame, dl: f64, dch: f64, daf: f64) -> RicciCoefficients {
    let bracket = 2.0 * frame.l + (frame.c - frame.h) + (frame.a - frame.f);
    RicciCoefficients {
        r_alpha: -frame.n * bracket,
        r_beta: -frame.l * bracket + dl + 0.5 * (dch + daf),
        r_gamma: 0.0,
        r_delta: 0.0,
        r_phi: 0.0,
        r_psi: 0.0,
    }
}

/// Analytic directional derivatives (d_{k-t} L, d_{k-t}(C-H), d_{k-t}(A-F))
/// along the flow, using second derivatives of the system. Honors the
/// group's lambda through the alpha equation.
pub fn frame_tau_derivatives(group: &GroupSpec, s: &State) -> Result<(f64, f64, f64)> {
    check_interior(s)?;
    let d = rhs_general(group, s)?;
    let dd = second_derivatives(group, s, &d);
    let (a, b, c) = (s.a, s.b, s.c);
    let (da, db, dc) = (d.da, d.db, d.dc);
    let (dda, ddb, ddc) = (dd[0], dd[1], dd[2]);

    // L = -c' u, u = 1/(sqrt2 a b c^2)
    let u = 1.0 / (SQRT2 * a * b * c * c);
    let du = -u * (da / a + db / b + 2.0 * dc / c);
    let l_t = -(ddc * u + dc * du);

    // C - H = C + D with C = p1 a/(sqrt2 bc), D = -b' v, v = 1/(sqrt2 a b^2 c)
    let cc = group.p1 * a / (SQRT2 * b * c);
    let c_t = cc * (da / a - db / b - dc / c);
    let v = 1.0 / (SQRT2 * a * b * b * c);
    let dv = -v * (da / a + 2.0 * db / b + dc / c);
    let d_t = -(ddb * v + db * dv);

    // A - F = A + p2 b/(sqrt2 ac) with A = -a' w, w = 1/(sqrt2 a^2 b c)
    let w = 1.0 / (SQRT2 * a * a * b * c);
    let dw = -w * (2.0 * da / a + db / b + dc / c);
    let a_t = -(dda * w + da * dw);
    let ff = group.p2 * b / (SQRT2 * a * c);
    let f_t = ff * (db / b - da / a - dc / c);

    // d_{k-t} X = 2 X_tau = sqrt2 X_t/(abc)
    let conv = SQRT2 / (a * b * c);
    Ok((conv * l_t, conv * (c_t + d_t), conv * (a_t + f_t)))
}

/// Central curvature assembled through the Ricci coefficients
/// (r_alpha r_beta - r_gamma r_psi + r_delta r_phi).
pub fn central_curvature_via_ricci(group: &GroupSpec, s: &State) -> Result<f64> {
    let d = rhs_general(group, s)?;
    let frame = ansatz_map(group, s, &d)?;
    let (dl, dch, daf) = frame_tau_derivatives(group, s)?;
    let rc = ricci_coefficients(&frame, dl, dch, daf);
    Ok(rc.r_alpha * rc.r_beta - rc.r_gamma * rc.r_psi + rc.r_delta * rc.r_phi)
}

/// Residual of the reduced central equation
/// p3 (alpha^2)' - 2 c^2 (lambda (ab)^4 + p3^2 alpha^2)
/// on a (state, derivative) pair; zero iff the pair satisfies it.
pub fn central_residual_reduced(group: &GroupSpec, s: &State, d: &Derivative) -> f64 {
    let al = effective_alpha(group, s);
    let dal = match group.tag {
        GroupTag::Su2 => group.exp_neg_a * (d.da * s.b + s.a * d.db),
        _ => d.dalpha,
    };
    let c2 = s.c * s.c;
    let ab4 = (s.a * s.b).powi(4);
    group.p3 * 2.0 * al * dal - 2.0 * c2 * (group.lambda * ab4 + group.p3 * group.p3 * al * al)
}

/// The lambda a (state, derivative) pair implies through the reduced
/// central equation; counterpart of `central_curvature_via_ricci` for
/// cross-validation.
pub fn lambda_implied(group: &GroupSpec, s: &State, d: &Derivative) -> f64 {
    let al = effective_alpha(group, s);
    let dal = match group.tag {
        GroupTag::Su2 => group.exp_neg_a * (d.da * s.b + s.a * d.db),
        _ => d.dalpha,
    };
    let c2 = s.c * s.c;
    let ab4 = (s.a * s.b).powi(4);
    (group.p3 * 2.0 * al * dal - 2.0 * c2 * group.p3 * group.p3 * al * al) / (2.0 * c2 * ab4)
}

fn lnp_at(group: &GroupSpec, s: &State) -> Result<(f64, f64, f64)> {
    let d = rhs_general(group, s)?;
    let rv = reduced_vars(group, s, &d)?;
    Ok((rv.l, rv.n, rv.p))
}

/// Nonuniform centered three-point first derivative at x0.
fn centered_diff(xm: f64, x0: f64, xp: f64, fm: f64, f0: f64, fp: f64) -> f64 {
    let hm = x0 - xm;
    let hp = xp - x0;
    (hm * hm * fp - hp * hp * fm + (hp * hp - hm * hm) * f0) / (hm * hp * (hm + hp))
}

/// Residual samples of the one-variable central equation
///
/// ```text
/// -N (2L+N-P/2) [ -L (2L+N-P/2) + (2L'+N'-P'/2) ] - lambda
/// ```
///
/// with primes d/dtau taken by centered finite differences on a tau-chart
/// window of at least three samples. One residual per interior sample.
pub fn central_residual_onevar(group: &GroupSpec, window: &Trajectory) -> Result<Vec<f64>> {
    if window.chart != Chart::Tau {
        return Err(Error::ChartMismatch(window.chart.to_string(), "tau".into()));
    }
    let n = window.samples.len();
    if n < 3 {
        return Err(Error::InsufficientSamples(n));
    }
    let mut lnp = Vec::with_capacity(n);
    for smp in &window.samples {
        lnp.push(lnp_at(group, &smp.state)?);
    }
    let combo: Vec<f64> = lnp
        .iter()
        .map(|(l, nn, p)| 2.0 * l + nn - 0.5 * p)
        .collect();
    let mut out = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let (xm, x0, xp) = (
            window.samples[i - 1].x,
            window.samples[i].x,
            window.samples[i + 1].x,
        );
        let dcombo = centered_diff(xm, x0, xp, combo[i - 1], combo[i], combo[i + 1]);
        let (l, nn, _) = lnp[i];
        let f = combo[i];
        out.push(-nn * f * (-l * f + dcombo) - group.lambda);
    }
    Ok(out)
}

/// Finite-difference residuals of the companion one-variable relations
/// N' = N^2 - LN, R' = R(P/2 + L), P' = LP + R^2 on a tau window.
/// (The fourth relation 0 = -R(2S' + Q) holds identically: S is constant
/// and Q = 0.)
pub fn onevar_system_residuals(group: &GroupSpec, window: &Trajectory) -> Result<Vec<[f64; 3]>> {
    if window.chart != Chart::Tau {
        return Err(Error::ChartMismatch(window.chart.to_string(), "tau".into()));
    }
    let n = window.samples.len();
    if n < 3 {
        return Err(Error::InsufficientSamples(n));
    }
    let mut vals = Vec::with_capacity(n);
    for smp in &window.samples {
        let d = rhs_general(group, &smp.state)?;
        let rv = reduced_vars(group, &smp.state, &d)?;
        vals.push((rv.l, rv.n, rv.p, rv.r));
    }
    let mut out = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let (xm, x0, xp) = (
            window.samples[i - 1].x,
            window.samples[i].x,
            window.samples[i + 1].x,
        );
        let dn = centered_diff(xm, x0, xp, vals[i - 1].1, vals[i].1, vals[i + 1].1);
        let dr = centered_diff(xm, x0, xp, vals[i - 1].3, vals[i].3, vals[i + 1].3);
        let dp = centered_diff(xm, x0, xp, vals[i - 1].2, vals[i].2, vals[i + 1].2);
        let (l, nn, p, r) = vals[i];
        out.push([
            dn - (nn * nn - l * nn),
            dr - r * (0.5 * p + l),
            dp - (l * p + r * r),
        ]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bianchi::rhs;
    use crate::equilibria::{equilibrium_point, linearize, unstable_seed, EquilibriumFamily};
    use crate::flow::{change_chart, integrate, resample, Direction, IntegratorOptions};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn frame_values_su2_ones() {
        let g = GroupSpec::su2(1.0);
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = rhs(&g, &s).unwrap();
        let fr = ansatz_map(&g, &s, &d).unwrap();
        assert_relative_eq!(fr.a, -0.5 / SQRT2, max_relative = 1e-14);
        assert_relative_eq!(fr.l, -1.5 / SQRT2, max_relative = 1e-14);
        assert_relative_eq!(fr.n, -1.0 / SQRT2, max_relative = 1e-14);
        for r in fr.relation_residuals() {
            assert!(r.abs() <= 1e-14);
        }
    }

    #[test]
    fn frame_zero_structure_constants() {
        let g = GroupSpec::heisenberg();
        let s = State::new(0.0, 0.7, 1.3, 0.4, 0.9);
        let d = rhs(&g, &s).unwrap();
        let fr = ansatz_map(&g, &s, &d).unwrap();
        assert_eq!((fr.b, fr.c, fr.f, fr.g), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn reduced_vars_values() {
        let su2 = GroupSpec::su2(1.0);
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = rhs(&su2, &s).unwrap();
        let rv = reduced_vars(&su2, &s, &d).unwrap();
        assert_relative_eq!(rv.p, -2.0 * SQRT2, max_relative = 1e-14);
        assert_eq!(rv.q, 0.0);
        assert_eq!(rv.r, 0.0);
        assert!(rv.s.is_none());

        let e2 = GroupSpec::e2();
        let s = State::new(0.0, 1.0, 2.0, 1.0, 1.0);
        let d = rhs(&e2, &s).unwrap();
        let rv = reduced_vars(&e2, &s, &d).unwrap();
        assert_relative_eq!(rv.p, -SQRT2 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(rv.r, 0.5, max_relative = 1e-14);
        assert_eq!(rv.s, Some(std::f64::consts::FRAC_PI_4));

        let heis = GroupSpec::heisenberg();
        let d = rhs(&heis, &s).unwrap();
        let rv = reduced_vars(&heis, &s, &d).unwrap();
        assert_eq!((rv.p, rv.r), (0.0, 0.0));
        assert!(rv.s.is_none());
    }

    #[test]
    fn ricci_alpha_su2_ones() {
        let g = GroupSpec::su2(1.0);
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = rhs(&g, &s).unwrap();
        let fr = ansatz_map(&g, &s, &d).unwrap();
        let rc = ricci_coefficients(&fr, 0.0, 0.0, 0.0);
        // 2L + C - H + A - F = -2 alpha/(sqrt2 abc) = -sqrt2 here
        assert_relative_eq!(rc.r_alpha, -1.0, max_relative = 1e-13);
        assert_eq!(
            (rc.r_gamma, rc.r_delta, rc.r_phi, rc.r_psi),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn ricci_alpha_zero_cases() {
        // alpha ~ 0 is the Ricci-flat direction: r_alpha ~ 0
        let g = GroupSpec::e2();
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1e-300);
        let d = rhs(&g, &s).unwrap();
        let fr = ansatz_map(&g, &s, &d).unwrap();
        let rc = ricci_coefficients(&fr, 0.0, 0.0, 0.0);
        assert!(rc.r_alpha.abs() < 1e-12);
        // p3 = 0 kills the N factor
        let gp = GroupSpec::custom(1.0, 1.0, 0.0, 0.0);
        let d = rhs(&gp, &s).unwrap();
        let fr = ansatz_map(&gp, &s, &d).unwrap();
        let rc = ricci_coefficients(&fr, 0.3, 0.1, 0.2);
        assert_eq!(rc.r_alpha, 0.0);
    }

    #[test]
    fn central_residual_reduced_values() {
        let g = GroupSpec::e2();
        let s = State::new(0.0, 1.0, 1.0, 1.0, 1.0);
        let d = rhs(&g, &s).unwrap();
        assert!(central_residual_reduced(&g, &s, &d).abs() <= 1e-14);
        let d0 = Derivative {
            da: 0.0,
            db: 1.0,
            dc: 1.0,
            dalpha: 0.0,
        };
        assert_relative_eq!(central_residual_reduced(&g, &s, &d0), -2.0);
    }

    #[test]
    fn ricci_route_matches_reduced_route() {
        // random admissible states and lambdas: the curvature assembled from
        // the Ricci coefficients equals the value implied by the reduced
        // relation, and both recover the lambda driving the dynamics
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rnd = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for i in 0..200 {
            let lambda = if i % 2 == 0 { 0.0 } else { 2.0 * rnd() - 1.0 };
            let (p1, p2) = match i % 3 {
                0 => (0.0, 0.0),
                1 => (1.0, 1.0),
                _ => (1.0, 0.0),
            };
            let g = GroupSpec::custom(p1, p2, 1.0, lambda);
            let s = State::new(0.0, 0.2 + rnd(), 0.2 + rnd(), 0.2 + rnd(), 0.2 + rnd());
            let d = rhs_general(&g, &s).unwrap();
            let via_ricci = central_curvature_via_ricci(&g, &s).unwrap();
            let implied = lambda_implied(&g, &s, &d);
            let scale = via_ricci.abs().max(1.0);
            assert!(
                (via_ricci - implied).abs() <= 1e-10 * scale,
                "i={i} ricci={via_ricci} implied={implied}"
            );
            assert!(
                (via_ricci - lambda).abs() <= 1e-10 * scale,
                "i={i} ricci={via_ricci} lambda={lambda}"
            );
        }
    }

    fn su2_tau_window() -> (GroupSpec, Trajectory) {
        let g = GroupSpec::su2(1.0);
        let e = equilibrium_point(&g, EquilibriumFamily::Su2QQ0, 1.0, 0.0);
        let rep = linearize(&g, &e).unwrap();
        let s = unstable_seed(&g, &e, &rep, 1e-6, None).unwrap();
        let mut opts = IntegratorOptions::default();
        opts.t_limit = 7.0;
        opts.capture = false;
        let tr = integrate(&g, &s, Direction::Forward, &opts).unwrap();
        (g, change_chart(&tr, Chart::Tau).unwrap())
    }

    #[test]
    fn onevar_residual_small_on_solutions() {
        // window away from the bolt, where the mesh resolves the tau-scale
        let (g, tau) = su2_tau_window();
        let (lo, hi) = tau.coord_range();
        let n = 400;
        let (wlo, whi) = (lo + 0.5 * (hi - lo), lo + 0.9 * (hi - lo));
        let mesh: Vec<f64> = (0..=n)
            .map(|i| wlo + (whi - wlo) * i as f64 / n as f64)
            .collect();
        let win = resample(&tau, &mesh).unwrap();
        let res = central_residual_onevar(&g, &win).unwrap();
        let h = mesh[1] - mesh[0];
        let bound = 100.0 * h * h;
        for r in &res {
            assert!(r.abs() <= bound, "residual {r} at h={h}");
        }
        let sys = onevar_system_residuals(&g, &win).unwrap();
        for row in &sys {
            for r in row {
                assert!(r.abs() <= bound * 10.0);
            }
        }
    }

    #[test]
    fn onevar_rejects_wrong_chart() {
        let g = GroupSpec::su2(1.0);
        let e = equilibrium_point(&g, EquilibriumFamily::Su2QQ0, 1.0, 0.0);
        let rep = linearize(&g, &e).unwrap();
        let s = unstable_seed(&g, &e, &rep, 1e-4, None).unwrap();
        let mut opts = IntegratorOptions::default();
        opts.t_limit = 1.0;
        opts.capture = false;
        let tr = integrate(&g, &s, Direction::Forward, &opts).unwrap();
        assert!(matches!(
            central_residual_onevar(&g, &tr),
            Err(Error::ChartMismatch(..))
        ));
    }

    #[test]
    fn onevar_detects_corruption() {
        let (g, tau) = su2_tau_window();
        let (lo, hi) = tau.coord_range();
        let n = 200;
        let (wlo, whi) = (lo + 0.5 * (hi - lo), lo + 0.9 * (hi - lo));
        let mesh: Vec<f64> = (0..=n)
            .map(|i| wlo + (whi - wlo) * i as f64 / n as f64)
            .collect();
        let mut win = resample(&tau, &mesh).unwrap();
        let h = mesh[1] - mesh[0];
        let clean = central_residual_onevar(&g, &win).unwrap();
        let clean_max = clean.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        // double alpha in every sample: an inconsistent window
        for smp in &mut win.samples {
            smp.state.alpha *= 2.0;
        }
        let bad = central_residual_onevar(&g, &win).unwrap();
        let bad_max = bad.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(
            bad_max > 10.0 * clean_max.max(10.0 * h * h),
            "corruption not detected: clean {clean_max}, bad {bad_max}"
        );
    }

    proptest! {
        #[test]
        fn frame_identities_hold(
            a in 0.1f64..2.5, b in 0.1f64..2.5, c in 0.1f64..2.5,
            al in 0.01f64..2.0, tag in 0usize..3
        ) {
            let g = match tag {
                0 => GroupSpec::heisenberg(),
                1 => GroupSpec::su2(0.6),
                _ => GroupSpec::e2(),
            };
            let s = State::new(0.0, a, b, c, al);
            let d = rhs(&g, &s).unwrap();
            let fr = ansatz_map(&g, &s, &d).unwrap();
            let scale = fr.n.abs().max(fr.l.abs()).max(1.0);
            for r in fr.relation_residuals() {
                prop_assert!(r.abs() <= 1e-12 * scale);
            }
            // the two routes to P,Q,R,S agree
            let direct = reduced_vars(&g, &s, &d).unwrap();
            let via = reduced_vars_from_frame(&fr);
            prop_assert!((direct.p - via.p).abs() <= 1e-12 * direct.p.abs().max(1.0));
            prop_assert!((direct.q - via.q).abs() <= 1e-12);
            prop_assert!((direct.r - via.r).abs() <= 1e-12 * direct.r.abs().max(1.0));
            match (direct.s, via.s) {
                (None, None) => {}
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
                other => prop_assert!(false, "S mismatch {:?}", other),
            }
        }

        #[test]
        fn reduced_residual_scales(
            a in 0.1f64..2.0, b in 0.1f64..2.0, c in 0.1f64..2.0, al in 0.01f64..2.0
        ) {
            for g in [GroupSpec::heisenberg(), GroupSpec::su2(0.9), GroupSpec::e2()] {
                let s = State::new(0.0, a, b, c, al);
                let d = rhs(&g, &s).unwrap();
                let res = central_residual_reduced(&g, &s, &d);
                let al_eff = effective_alpha(&g, &s);
                let scale = (g.p3 * g.p3 * al_eff * al_eff * c * c).max(1.0);
                prop_assert!(res.abs() <= 1e-10 * scale);
            }
        }
    }
}
