//! Adaptive integration of the systems, event detection (blowup, escape,
//! equilibrium capture) and the coordinate charts t, tau, r, q.
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with a
//! proportional-integral step controller and FSAL. Dense output between
//! accepted steps is cubic Hermite on the stored states and derivatives.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bianchi::{rhs, Derivative, GroupSpec, State};
use crate::equilibria::{nearest_equilibrium, EquilibriumFamily};
use crate::error::{Error, Result};

/// Transverse coordinate in which a trajectory is sampled.
///
/// `T` is solution time; `Tau` satisfies d tau = sqrt(2) abc dt; `R` is the
/// geodesic coordinate dr = abc dt; `Q` satisfies dq = a^2 dt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    T,
    Tau,
    R,
    Q,
}

impl std::fmt::Display for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Chart::T => "t",
            Chart::Tau => "tau",
            Chart::R => "r",
            Chart::Q => "q",
        };
        f.write_str(s)
    }
}

impl Chart {
    pub fn parse(s: &str) -> Option<Chart> {
        match s {
            "t" => Some(Chart::T),
            "tau" => Some(Chart::Tau),
            "r" => Some(Chart::R),
            "q" => Some(Chart::Q),
            _ => None,
        }
    }

    /// dx/dt of this chart's coordinate at a state.
    pub fn rate(&self, s: &State) -> f64 {
        match self {
            Chart::T => 1.0,
            Chart::Tau => 2f64.sqrt() * s.a * s.b * s.c,
            Chart::R => s.a * s.b * s.c,
            Chart::Q => s.a * s.a,
        }
    }

    /// d(dx/dt)/dt at a state with its derivative.
    fn rate_dot(&self, s: &State, d: &Derivative) -> f64 {
        match self {
            Chart::T => 0.0,
            Chart::Tau => {
                2f64.sqrt() * (d.da * s.b * s.c + s.a * d.db * s.c + s.a * s.b * d.dc)
            }
            Chart::R => d.da * s.b * s.c + s.a * d.db * s.c + s.a * s.b * d.dc,
            Chart::Q => 2.0 * s.a * d.da,
        }
    }
}

/// How an end of the sampled interval terminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    /// the underlying time interval extends to +-infinity
    Infinite,
    /// the solution leaves every compact set at a finite time
    FiniteBlowup,
    /// converged into an equilibrium within the capture radius
    EquilibriumCapture,
    /// stopped by a user limit (time horizon, sample budget, or seed end)
    UserLimit,
}

/// Endpoint record. `value` is always the t-coordinate of the endpoint
/// (extrapolated for blowups), independent of the trajectory's chart.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Endpoint {
    pub value: f64,
    pub kind: EndKind,
}

/// One stored sample: chart coordinate, state, and the time derivative of
/// the state (always d/dt, regardless of chart).
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub x: f64,
    pub state: State,
    pub deriv: Derivative,
}

/// Capture metadata recorded when a trajectory ends at an equilibrium.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CaptureInfo {
    pub family: Option<EquilibriumFamily>,
    pub point: [f64; 4],
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub group: GroupSpec,
    pub chart: Chart,
    pub samples: Vec<Sample>,
    pub left: Endpoint,
    pub right: Endpoint,
    pub capture: Option<CaptureInfo>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// sup-norm bound that declares finite-time blowup
    pub blowup_threshold: f64,
    /// base capture radius; scaled by (1 + |equilibrium|) internally
    pub capture_radius: f64,
    pub max_samples: usize,
    /// horizon |t - t0|
    pub t_limit: f64,
    /// enable equilibrium capture detection
    pub capture: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            // small enough that cumulative chart quadrature and Hermite
            // dense output stay near 1e-8 relative
            max_step: 0.05,
            blowup_threshold: 1e8,
            capture_radius: 1e-9,
            max_samples: 2_000_000,
            t_limit: 1e3,
            capture: true,
        }
    }
}

impl IntegratorOptions {
    fn validate(&self) -> Result<()> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("blowup_threshold", self.blowup_threshold),
            ("capture_radius", self.capture_radius),
            ("t_limit", self.t_limit),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidOptions(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_samples == 0 {
            return Err(Error::InvalidOptions("max_samples must be nonzero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

// Dormand-Prince 5(4) tableau; the last row doubles as the 5th-order weights.
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// y5 - y4 error weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn axpy(y: &[f64; 4], h: f64, ks: &[[f64; 4]], coefs: &[f64]) -> [f64; 4] {
    let mut out = *y;
    for (k, &c) in ks.iter().zip(coefs) {
        if c != 0.0 {
            for i in 0..4 {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

struct StepResult {
    y_new: [f64; 4],
    k_new: [f64; 4],
    err: f64,
}

/// One trial step of the embedded pair. `f` evaluates the (possibly
/// time-reversed) vector field.
fn dp5_step<F>(f: &F, y: &[f64; 4], k1: &[f64; 4], h: f64, tol: (f64, f64)) -> Option<StepResult>
where
    F: Fn(&[f64; 4]) -> Option<[f64; 4]>,
{
    let mut ks = [[0.0f64; 4]; 7];
    ks[0] = *k1;
    for stage in 1..6 {
        let ytmp = axpy(y, h, &ks[..stage], &A[stage][..stage]);
        ks[stage] = f(&ytmp)?;
    }
    let y_new = axpy(y, h, &ks[..6], &A[6][..6]);
    // FSAL stage evaluated at y_new
    ks[6] = f(&y_new)?;
    let k_new = ks[6];
    let (rel, abs) = tol;
    let mut err_sq = 0.0;
    for i in 0..4 {
        let mut e = 0.0;
        for (k, &c) in ks.iter().zip(&E) {
            e += c * k[i];
        }
        e *= h;
        let sc = abs + rel * y[i].abs().max(y_new[i].abs());
        err_sq += (e / sc) * (e / sc);
    }
    Some(StepResult {
        y_new,
        k_new,
        err: (err_sq / 4.0).sqrt(),
    })
}

fn rms_scaled(v: &[f64; 4], sc: &[f64; 4]) -> f64 {
    let s: f64 = v
        .iter()
        .zip(sc)
        .map(|(a, s)| (a / s) * (a / s))
        .sum::<f64>();
    (s / 4.0).sqrt()
}

fn initial_step<F>(f: &F, y: &[f64; 4], k1: &[f64; 4], opts: &IntegratorOptions) -> f64
where
    F: Fn(&[f64; 4]) -> Option<[f64; 4]>,
{
    let mut sc = [0.0f64; 4];
    for i in 0..4 {
        sc[i] = opts.abs_tol + opts.rel_tol * y[i].abs();
    }
    let d0 = rms_scaled(y, &sc);
    let d1 = rms_scaled(k1, &sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = axpy(y, h0, &[*k1], &[1.0]);
    let h = match f(&y1) {
        Some(k2) => {
            let diff = [k2[0] - k1[0], k2[1] - k1[1], k2[2] - k1[2], k2[3] - k1[3]];
            let d2 = rms_scaled(&diff, &sc) / h0;
            let dmax = d1.max(d2);
            if dmax <= 1e-15 {
                (h0 * 1e3).max(1e-6)
            } else {
                (0.01 / dmax).powf(0.2)
            }
        }
        None => h0,
    };
    h.min(100.0 * h0).min(opts.max_step)
}

/// Extrapolates a blowup coordinate from the last three accepted steps,
/// assuming a power law |y| ~ C (s_b - s)^(-p). Falls back to one more
/// step width when bracketing fails.
fn extrapolate_blowup(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    let (t3, n3) = pts[n - 1];
    if n < 3 {
        return t3;
    }
    let (t1, n1) = pts[n - 3];
    let (t2, n2) = pts[n - 2];
    if !(n1 < n2 && n2 < n3) || t2 <= t1 || t3 <= t2 {
        return t3 + (t3 - t2).abs().max(f64::MIN_POSITIVE);
    }
    let l12 = (n2 / n1).ln();
    let l23 = (n3 / n2).ln();
    let g = |eta: f64| l12 * ((eta - t2) / (eta - t3)).ln() - l23 * ((eta - t1) / (eta - t2)).ln();
    // keep the bracket representable: the lower end must clear the ulp of t3
    let ulp = (t3.abs().max(1.0)) * f64::EPSILON;
    let mut lo = t3 + ((t3 - t2) * 1e-3).max(4.0 * ulp);
    let mut hi = t3 + (t3 - t1) * 1e6;
    let (glo, ghi) = (g(lo), g(hi));
    if !(glo.is_finite() && ghi.is_finite()) || glo.signum() == ghi.signum() {
        return t3 + (t3 - t2);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if !gm.is_finite() {
            break;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= ulp {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Integrates the group's system from `s0`.
///
/// Terminates at blowup (norm threshold, or step underflow while the norm
/// is already large), equilibrium capture, the time horizon, or the sample
/// budget. Backward integration reverses the vector field; samples always
/// come out ordered by increasing t with true d/dt derivatives.
pub fn integrate(
    group: &GroupSpec,
    s0: &State,
    direction: Direction,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    if group.lambda != 0.0 {
        return Err(Error::UnsupportedLambda(group.lambda));
    }
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let t0 = s0.t;
    let f = |y: &[f64; 4]| -> Option<[f64; 4]> {
        let st = State::from_array(0.0, *y);
        match rhs(group, &st) {
            Ok(d) => {
                let arr = d.as_array();
                Some([sign * arr[0], sign * arr[1], sign * arr[2], sign * arr[3]])
            }
            Err(_) => None,
        }
    };

    let mut y = s0.as_array();
    let mut k1 = f(&y).ok_or(Error::NonpositiveState {
        a: s0.a,
        b: s0.b,
        c: s0.c,
    })?;
    let mut s = 0.0f64;
    let mut h = initial_step(&f, &y, &k1, opts);
    let mut err_old: f64 = 1e-4;
    let mut steps: Vec<(f64, [f64; 4], [f64; 4])> = vec![(s, y, k1)];
    let mut warnings: Vec<String> = Vec::new();

    let radius_of = |pt: &[f64; 4]| {
        let norm = pt.iter().map(|x| x * x).sum::<f64>().sqrt();
        opts.capture_radius * (1.0 + norm)
    };
    let near0 = nearest_equilibrium(group, &y);
    let capture_armed = opts.capture
        && match &near0 {
            Some((d, pt, _)) => *d > radius_of(pt),
            None => false,
        };
    let dist0 = near0.as_ref().map(|(d, _, _)| *d).unwrap_or(f64::INFINITY);
    let mut best_dist = dist0;
    let mut best_idx = 0usize;

    let end_kind: EndKind;
    let end_s: f64;
    let mut capture: Option<CaptureInfo> = None;

    let max_norm = |y: &[f64; 4]| y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last_norms = |steps: &Vec<(f64, [f64; 4], [f64; 4])>| -> Vec<(f64, f64)> {
        let n = steps.len();
        steps[n.saturating_sub(3)..]
            .iter()
            .map(|(si, yi, _)| (*si, max_norm(yi)))
            .collect()
    };

    'outer: loop {
        if s >= opts.t_limit {
            end_kind = EndKind::UserLimit;
            end_s = s;
            break;
        }
        if steps.len() >= opts.max_samples {
            warnings.push("sample budget exhausted".into());
            end_kind = EndKind::UserLimit;
            end_s = s;
            break;
        }
        h = h.min(opts.max_step).min(opts.t_limit - s);
        if h < 1e-14 * s.abs().max(1.0) {
            if max_norm(&y) > 0.01 * opts.blowup_threshold {
                end_kind = EndKind::FiniteBlowup;
                end_s = extrapolate_blowup(&last_norms(&steps));
            } else {
                warnings.push(format!("step underflow at s={s} without blowup"));
                end_kind = EndKind::UserLimit;
                end_s = s;
            }
            break;
        }
        let mut rejected = 0usize;
        let step = loop {
            match dp5_step(&f, &y, &k1, h, (opts.rel_tol, opts.abs_tol)) {
                Some(st) if st.err <= 1.0 => break st,
                Some(st) => {
                    h *= (0.9 * st.err.powf(-0.2)).clamp(0.2, 1.0);
                }
                None => {
                    // stage left the positive orthant; retry shorter
                    h *= 0.25;
                }
            }
            rejected += 1;
            if h < 1e-14 * s.abs().max(1.0) || rejected > 200 {
                if max_norm(&y) > 0.01 * opts.blowup_threshold {
                    end_kind = EndKind::FiniteBlowup;
                    end_s = extrapolate_blowup(&last_norms(&steps));
                } else {
                    warnings.push(format!("step underflow at s={s} without blowup"));
                    end_kind = EndKind::UserLimit;
                    end_s = s;
                }
                break 'outer;
            }
        };
        s += h;
        y = step.y_new;
        k1 = step.k_new;
        steps.push((s, y, k1));
        let err = step.err.max(1e-10);
        h *= (0.9 * err.powf(-0.17) * err_old.powf(0.04)).clamp(0.2, 5.0);
        err_old = err;

        if max_norm(&y) > opts.blowup_threshold {
            end_kind = EndKind::FiniteBlowup;
            end_s = extrapolate_blowup(&last_norms(&steps));
            break;
        }
        if capture_armed {
            if let Some((d, pt, fam)) = nearest_equilibrium(group, &y) {
                if d < best_dist {
                    best_dist = d;
                    best_idx = steps.len() - 1;
                }
                if d < radius_of(&pt) {
                    let fv = f(&y).unwrap_or([0.0; 4]);
                    let fnorm = fv.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if fnorm < 1e-3 {
                        end_kind = EndKind::EquilibriumCapture;
                        end_s = s;
                        capture = Some(CaptureInfo {
                            family: fam,
                            point: pt,
                            distance: d,
                        });
                        break;
                    }
                }
                // closest-approach fallback: distance grows again after
                // having dropped below 1% of the initial distance
                if best_dist < 1e-2 * dist0 && d > 4.0 * best_dist {
                    steps.truncate(best_idx + 1);
                    let (sb, yb, _) = steps[best_idx];
                    let (db, ptb, famb) =
                        nearest_equilibrium(group, &yb).expect("group with equilibria");
                    warnings.push(format!(
                        "capture at closest approach (distance {db:.3e} above radius)"
                    ));
                    end_kind = EndKind::EquilibriumCapture;
                    end_s = sb;
                    capture = Some(CaptureInfo {
                        family: famb,
                        point: ptb,
                        distance: db,
                    });
                    break;
                }
            }
        }
    }

    let mut samples: Vec<Sample> = steps
        .iter()
        .map(|(si, yi, ki)| {
            let t = t0 + sign * si;
            Sample {
                x: t,
                state: State::from_array(t, *yi),
                deriv: Derivative {
                    da: sign * ki[0],
                    db: sign * ki[1],
                    dc: sign * ki[2],
                    dalpha: sign * ki[3],
                },
            }
        })
        .collect();
    let end_t = t0 + sign * end_s;
    let (left, right) = match direction {
        Direction::Forward => (
            Endpoint {
                value: t0,
                kind: EndKind::UserLimit,
            },
            Endpoint {
                value: end_t,
                kind: end_kind,
            },
        ),
        Direction::Backward => {
            samples.reverse();
            (
                Endpoint {
                    value: end_t,
                    kind: end_kind,
                },
                Endpoint {
                    value: t0,
                    kind: EndKind::UserLimit,
                },
            )
        }
    };
    Ok(Trajectory {
        group: *group,
        chart: Chart::T,
        samples,
        left,
        right,
        capture,
        warnings,
    })
}

/// Concatenates a backward and a forward run from the same seed into one
/// trajectory (the duplicated seed sample is dropped from the forward leg).
pub fn stitch(back: Trajectory, fwd: &Trajectory) -> Result<Trajectory> {
    if back.chart != Chart::T || fwd.chart != Chart::T {
        return Err(Error::ChartMismatch(back.chart.to_string(), "t".into()));
    }
    let mut out = back;
    let seed_t = out.samples.last().map(|s| s.x);
    let skip = usize::from(seed_t == fwd.samples.first().map(|s| s.x));
    out.samples.extend(fwd.samples.iter().skip(skip).copied());
    out.right = fwd.right;
    out.capture = out.capture.or(fwd.capture);
    out.warnings.extend(fwd.warnings.iter().cloned());
    Ok(out)
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        self.samples.first().expect("nonempty trajectory")
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("nonempty trajectory")
    }

    pub fn coord_range(&self) -> (f64, f64) {
        (self.first().x, self.last().x)
    }

    /// d(state)/dx at sample i (chart-converted from the stored d/dt).
    fn slope(&self, i: usize) -> [f64; 4] {
        let s = &self.samples[i];
        let rate = self.chart.rate(&s.state);
        let d = s.deriv.as_array();
        [d[0] / rate, d[1] / rate, d[2] / rate, d[3] / rate]
    }

    /// Cubic Hermite evaluation at a chart coordinate inside the sampled
    /// range: the interpolated state and d(state)/dx.
    pub fn eval(&self, x: f64) -> Result<(State, [f64; 4])> {
        let (lo, hi) = self.coord_range();
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfRange(x, lo, hi));
        }
        let idx = match self
            .samples
            .binary_search_by(|s| s.x.partial_cmp(&x).unwrap())
        {
            Ok(i) => return Ok((self.samples[i].state, self.slope(i))),
            Err(i) => i - 1,
        };
        let s0 = &self.samples[idx];
        let s1 = &self.samples[idx + 1];
        let h = s1.x - s0.x;
        let th = (x - s0.x) / h;
        let m0 = self.slope(idx);
        let m1 = self.slope(idx + 1);
        let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
        let h10 = th * (1.0 - th) * (1.0 - th);
        let h01 = th * th * (3.0 - 2.0 * th);
        let h11 = th * th * (th - 1.0);
        let dh00 = 6.0 * th * (th - 1.0) / h;
        let dh10 = (3.0 * th - 1.0) * (th - 1.0);
        let dh01 = -6.0 * th * (th - 1.0) / h;
        let dh11 = th * (3.0 * th - 2.0);
        let y0 = [s0.state.a, s0.state.b, s0.state.c, s0.state.alpha, s0.state.t];
        let y1 = [s1.state.a, s1.state.b, s1.state.c, s1.state.alpha, s1.state.t];
        let mt0 = 1.0 / self.chart.rate(&s0.state);
        let mt1 = 1.0 / self.chart.rate(&s1.state);
        let mut v = [0.0f64; 5];
        let mut dv = [0.0f64; 4];
        for i in 0..5 {
            let (mi0, mi1) = if i < 4 { (m0[i], m1[i]) } else { (mt0, mt1) };
            v[i] = h00 * y0[i] + h * h10 * mi0 + h01 * y1[i] + h * h11 * mi1;
            if i < 4 {
                dv[i] = dh00 * y0[i] + dh10 * mi0 + dh01 * y1[i] + dh11 * mi1;
            }
        }
        let t = if self.chart == Chart::T { x } else { v[4] };
        Ok((State::new(t, v[0], v[1], v[2], v[3]), dv))
    }

    /// Max relative drift of each named first integral over the run.
    pub fn first_integral_drift(&self) -> Result<Vec<(&'static str, f64)>> {
        let fi0 = crate::bianchi::first_integrals(&self.group, &self.first().state)?;
        let mut drift = vec![0.0f64; fi0.len()];
        for s in &self.samples {
            let fi = crate::bianchi::first_integrals(&self.group, &s.state)?;
            for (i, ((_, v0), (_, v))) in fi0.iter().zip(&fi).enumerate() {
                drift[i] = drift[i].max(((v - v0) / v0).abs());
            }
        }
        Ok(fi0
            .iter()
            .zip(drift)
            .map(|((name, _), d)| (*name, d))
            .collect())
    }
}

/// Rewrites the trajectory in another chart. The new coordinate is the
/// cumulative integral of the chart rate over t (corrected trapezoid, using
/// the stored derivatives), anchored so the left end sits at 0 — at the
/// singular orbit itself when the left end is an equilibrium capture, in
/// which case the first sample carries the estimated tail integral.
pub fn change_chart(traj: &Trajectory, target: Chart) -> Result<Trajectory> {
    if traj.chart == target {
        return Ok(traj.clone());
    }
    if traj.chart != Chart::T && target != Chart::T {
        let base = change_chart(traj, Chart::T)?;
        return change_chart(&base, target);
    }
    if target == Chart::T {
        let mut out = traj.clone();
        for s in &mut out.samples {
            s.x = s.state.t;
        }
        out.chart = Chart::T;
        return Ok(out);
    }
    let n = traj.samples.len();
    let mut g = Vec::with_capacity(n);
    let mut gdot = Vec::with_capacity(n);
    for s in &traj.samples {
        let gi = target.rate(&s.state);
        if !(gi > 0.0) {
            return Err(Error::NonmonotoneChart);
        }
        g.push(gi);
        gdot.push(target.rate_dot(&s.state, &s.deriv));
    }
    let anchor = if traj.left.kind == EndKind::EquilibriumCapture && n >= 2 {
        // the rate decays like g1 e^{rate (t - t1)} toward the orbit
        let dt = traj.samples[1].state.t - traj.samples[0].state.t;
        let rate = (g[1] / g[0]).ln() / dt;
        if rate > 0.0 {
            g[0] / rate
        } else {
            0.0
        }
    } else {
        0.0
    };
    let mut xs = Vec::with_capacity(n);
    let mut acc = anchor;
    xs.push(acc);
    for i in 1..n {
        let h = traj.samples[i].state.t - traj.samples[i - 1].state.t;
        acc += 0.5 * h * (g[i - 1] + g[i]) + h * h / 12.0 * (gdot[i - 1] - gdot[i]);
        xs.push(acc);
    }
    let mut out = traj.clone();
    out.chart = target;
    for (s, x) in out.samples.iter_mut().zip(xs) {
        s.x = x;
    }
    Ok(out)
}

/// Resamples onto a mesh of chart coordinates using dense output.
/// Derivatives are re-derived from the system at the interpolated states.
pub fn resample(traj: &Trajectory, mesh: &[f64]) -> Result<Trajectory> {
    let mut samples = Vec::with_capacity(mesh.len());
    for &x in mesh {
        let (state, dv) = traj.eval(x)?;
        let deriv = match rhs(&traj.group, &state) {
            Ok(d) => d,
            Err(_) => {
                // boundary sample: keep the interpolant slope
                let rate = traj.chart.rate(&state);
                Derivative {
                    da: dv[0] * rate,
                    db: dv[1] * rate,
                    dc: dv[2] * rate,
                    dalpha: dv[3] * rate,
                }
            }
        };
        samples.push(Sample { x, state, deriv });
    }
    let mut out = traj.clone();
    out.samples = samples;
    Ok(out)
}

/// Writes the sample table as CSV: header `chart,coord,a,b,c,alpha`, full
/// 17-significant-digit decimals for byte-reproducibility.
pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    writeln!(w, "chart,coord,a,b,c,alpha")?;
    for s in &traj.samples {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            traj.chart, s.x, s.state.a, s.state.b, s.state.c, s.state.alpha
        )?;
    }
    Ok(())
}

/// Endpoint and provenance metadata for the JSON sidecar next to a CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub group: GroupSpec,
    pub chart: Chart,
    pub samples: usize,
    pub left: Endpoint,
    pub right: Endpoint,
    pub capture: Option<CaptureInfo>,
    pub warnings: Vec<String>,
}

impl TrajectoryMeta {
    pub fn of(traj: &Trajectory) -> Self {
        TrajectoryMeta {
            group: traj.group,
            chart: traj.chart,
            samples: traj.samples.len(),
            left: traj.left,
            right: traj.right,
            capture: traj.capture,
            warnings: traj.warnings.clone(),
        }
    }
}
