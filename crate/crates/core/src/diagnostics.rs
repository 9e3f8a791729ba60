//! Completeness classification: distance integrals with tail analysis,
//! asymptotic-exponent fits at blowup ends, invariant-region and
//! first-integral audits, and the per-trajectory verdict.

use serde::{Deserialize, Serialize};

use crate::ansatz::central_residual_reduced;
use crate::bianchi::{GroupSpec, GroupTag, State};
use crate::closed_form::{
    central_scale, heis_bolt_series, heis_escape_sums, heis_trajectory, heis_verify,
    HeisenbergSolution,
};
use crate::equilibria::{
    equilibrium_point, linearize, unstable_seed, Equilibrium, EquilibriumFamily,
};
use crate::error::{Error, Result};
use crate::flow::{
    integrate, stitch, Chart, Direction, EndKind, IntegratorOptions, Trajectory,
};
use crate::series::{
    series_solve, vz_kahler_check, vz_metric_check, OrbitKind, SeriesOptions, SmoothnessReport,
};

/// Which end of the sampled interval to analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Left,
    Right,
}

/// A fitted asymptotic exponent with its quality and reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// coordinate distances from the endpoint spanned by the fit window
    pub window: (f64, f64),
    pub r2: f64,
    pub reference: Option<f64>,
    /// "power" for |x - x_end|^p fits, "exponential" for e^{p x} fits
    pub form: String,
}

impl ExponentFit {
    pub fn within(&self, rel: f64) -> bool {
        match self.reference {
            Some(want) => (self.exponent - want).abs() <= rel * want.abs().max(1e-12),
            None => true,
        }
    }
}

/// Outcome of a one-sided distance integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceResult {
    Finite {
        value: f64,
        /// largest dyadic tail-window ratio (< 0.9 certifies convergence)
        tail_ratio: f64,
    },
    Divergent { fit: ExponentFit },
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

/// Transverse distance integrand in the trajectory's chart: abc dt = g dx.
fn distance_integrand(traj: &Trajectory, i: usize) -> f64 {
    let s = &traj.samples[i].state;
    s.a * s.b * s.c / traj.chart.rate(s)
}

/// Cumulative transverse distance over the samples (trapezoid).
fn cumulative_distance(traj: &Trajectory) -> Vec<f64> {
    let n = traj.samples.len();
    let mut acc = vec![0.0; n];
    for i in 1..n {
        let h = traj.samples[i].x - traj.samples[i - 1].x;
        acc[i] = acc[i - 1] + 0.5 * h * (distance_integrand(traj, i - 1) + distance_integrand(traj, i));
    }
    acc
}

/// Dyadic window sums of the distance integrand toward one end. Returns
/// sums ordered from the farthest window to the one nearest the end.
fn dyadic_window_sums(traj: &Trajectory, end: End, windows: usize) -> Vec<f64> {
    let acc = cumulative_distance(traj);
    let xs: Vec<f64> = traj.samples.iter().map(|s| s.x).collect();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let span = hi - lo;
    let at = |x: f64| -> f64 {
        match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => acc[i],
            Err(0) => acc[0],
            Err(i) if i >= xs.len() => acc[acc.len() - 1],
            Err(i) => {
                let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                acc[i - 1] * (1.0 - w) + acc[i] * w
            }
        }
    };
    let mut out = Vec::with_capacity(windows);
    for j in 0..windows {
        let (wlo, whi) = match end {
            End::Right => (hi - span / 2f64.powi(j as i32), hi - span / 2f64.powi(j as i32 + 1)),
            End::Left => (lo + span / 2f64.powi(j as i32 + 1), lo + span / 2f64.powi(j as i32)),
        };
        out.push((at(whi) - at(wlo)).abs());
    }
    out
}

/// Fit window against a finite endpoint: a decade pair above both the
/// closest approach and the floating-point resolution of the coordinate.
fn fit_window(d_min: f64, x_end: f64) -> (f64, f64) {
    let resolution_floor = 1e-11 * x_end.abs().max(1.0);
    let dlo = (10.0 * d_min).max(resolution_floor).max(1e-300);
    (dlo, 100.0 * dlo)
}

/// Log-log exponent of the distance integrand against the distance to a
/// finite endpoint coordinate (in the trajectory's chart when chart = T).
fn integrand_exponent(traj: &Trajectory, end: End, x_end: f64) -> Result<ExponentFit> {
    let n = traj.samples.len();
    let idx: Vec<usize> = (0..n).collect();
    let d = |i: usize| (x_end - traj.samples[i].x).abs();
    let d_min = match end {
        End::Right => d(n - 1),
        End::Left => d(0),
    };
    let (dlo, dhi) = fit_window(d_min, x_end);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &i in &idx {
        let di = d(i);
        if di >= dlo && di <= dhi {
            let g = distance_integrand(traj, i);
            if g > 0.0 {
                xs.push(di.ln());
                ys.push(g.ln());
            }
        }
    }
    if xs.len() < 8 {
        return Err(Error::InsufficientSamples(xs.len()));
    }
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(ExponentFit {
        exponent: slope,
        window: (dlo, dhi),
        r2,
        reference: None,
        form: "power".into(),
    })
}

/// One-sided transverse distance with tail analysis.
///
/// Finite ends (equilibrium capture, and infinite coordinate ends with a
/// decaying integrand) report the distance value with the geometric tail
/// ratio; finite-time blowups are decided by the fitted integrand
/// exponent, with the improper tail extension added when it converges.
pub fn distance_integral(traj: &Trajectory, end: End) -> Result<DistanceResult> {
    let acc = cumulative_distance(traj);
    let total = acc[acc.len() - 1];
    let kind = match end {
        End::Left => traj.left.kind,
        End::Right => traj.right.kind,
    };
    match kind {
        EndKind::UserLimit => Err(Error::UnresolvedEndpoint(format!(
            "{end:?} end stopped at a user limit"
        ))),
        EndKind::EquilibriumCapture | EndKind::Infinite => {
            let sums = dyadic_window_sums(traj, end, 6);
            let mut ratio_max: f64 = 0.0;
            let mut grows = false;
            for w in sums.windows(2) {
                if w[0] > 0.0 {
                    let r = w[1] / w[0];
                    ratio_max = ratio_max.max(r);
                    if r > 1.05 {
                        grows = true;
                    }
                }
            }
            if grows {
                // integrand grows toward an end at infinite time: report the
                // exponential rate in the chart coordinate
                let n = traj.samples.len();
                let take = (n / 3).max(8).min(n);
                let slice: Vec<usize> = match end {
                    End::Right => ((n - take)..n).collect(),
                    End::Left => (0..take).collect(),
                };
                let xs: Vec<f64> = slice.iter().map(|&i| traj.samples[i].x).collect();
                let ys: Vec<f64> = slice
                    .iter()
                    .map(|&i| distance_integrand(traj, i).max(1e-300).ln())
                    .collect();
                let (slope, _, r2) = linear_fit(&xs, &ys);
                return Ok(DistanceResult::Divergent {
                    fit: ExponentFit {
                        exponent: slope,
                        window: (xs[0], xs[xs.len() - 1]),
                        r2,
                        reference: None,
                        form: "exponential".into(),
                    },
                });
            }
            // geometric tail: remaining mass ~ S_last * rho/(1 - rho)
            let last = *sums.last().unwrap_or(&0.0);
            let rho = ratio_max.min(0.95);
            let tail = if rho < 1.0 { last * rho / (1.0 - rho) } else { 0.0 };
            Ok(DistanceResult::Finite {
                value: total + tail,
                tail_ratio: ratio_max,
            })
        }
        EndKind::FiniteBlowup => {
            if traj.chart != Chart::T {
                return Err(Error::ChartMismatch(traj.chart.to_string(), "t".into()));
            }
            let x_end = match end {
                End::Left => traj.left.value,
                End::Right => traj.right.value,
            };
            let fit = integrand_exponent(traj, end, x_end)?;
            if fit.exponent <= -1.0 {
                Ok(DistanceResult::Divergent { fit })
            } else {
                // integrable power tail: extend by C d^{p+1}/(p+1)
                let d_min = match end {
                    End::Right => (x_end - traj.last().x).abs(),
                    End::Left => (x_end - traj.first().x).abs(),
                };
                let g_last = match end {
                    End::Right => distance_integrand(traj, traj.samples.len() - 1),
                    End::Left => distance_integrand(traj, 0),
                };
                let tail = g_last * d_min / (fit.exponent + 1.0);
                let sums = dyadic_window_sums(traj, end, 6);
                let mut ratio_max: f64 = 0.0;
                for w in sums.windows(2) {
                    if w[0] > 0.0 {
                        ratio_max = ratio_max.max(w[1] / w[0]);
                    }
                }
                Ok(DistanceResult::Finite {
                    value: total + tail,
                    tail_ratio: ratio_max,
                })
            }
        }
    }
}

/// Per-variable asymptotic exponents at a finite-time blowup end:
/// log-log least squares over the last resolved decade.
pub fn asymptotic_blowup_fit(
    traj: &Trajectory,
    end: End,
    references: [Option<f64>; 4],
) -> Result<Vec<ExponentFit>> {
    if traj.chart != Chart::T {
        return Err(Error::ChartMismatch(traj.chart.to_string(), "t".into()));
    }
    let (x_end, kind) = match end {
        End::Left => (traj.left.value, traj.left.kind),
        End::Right => (traj.right.value, traj.right.kind),
    };
    if kind != EndKind::FiniteBlowup {
        return Err(Error::UnresolvedEndpoint(format!(
            "{end:?} end is {kind:?}, not a finite blowup"
        )));
    }
    let n = traj.samples.len();
    let d = |i: usize| (x_end - traj.samples[i].x).abs();
    let d_min = match end {
        End::Right => d(n - 1),
        End::Left => d(0),
    };
    let (dlo, dhi) = fit_window(d_min, x_end);
    let mut out = Vec::with_capacity(4);
    for v in 0..4 {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let di = d(i);
            if di >= dlo && di <= dhi {
                let val = traj.samples[i].state.as_array()[v];
                if val > 0.0 {
                    xs.push(di.ln());
                    ys.push(val.ln());
                }
            }
        }
        if xs.len() < 8 {
            return Err(Error::InsufficientSamples(xs.len()));
        }
        let (slope, _, r2) = linear_fit(&xs, &ys);
        out.push(ExponentFit {
            exponent: slope,
            window: (dlo, dhi),
            r2,
            reference: references[v],
            form: "power".into(),
        });
    }
    Ok(out)
}

/// Per-sample audit of the monotone products, the group's invariant
/// region, and the central-flatness residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    /// violations of (ab)', (ac)', (bc)' >= 0 beyond the slack
    pub monotone_violations: usize,
    /// SU(2): samples where b decreases
    pub b_monotone_violations: usize,
    /// E(2): samples outside 0 <= c^2 - a^2 <= 2 alpha (slack 1e-10)
    pub case3_violations: Option<usize>,
    pub case3: Option<bool>,
    /// max scaled residual of the reduced central equation over the run
    pub central_residual_max: f64,
}

pub fn invariant_region_audit(group: &GroupSpec, traj: &Trajectory) -> AuditReport {
    let slack = 1e-10;
    let mut monotone = 0usize;
    let mut b_mono = 0usize;
    let mut case3_viol = 0usize;
    let mut central_max: f64 = 0.0;
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    for smp in &traj.samples {
        let s = &smp.state;
        let scale = (s.a * s.b).max(s.a * s.c).max(s.b * s.c).max(1.0);
        if let Some((ab, ac, bc, b)) = prev {
            if s.a * s.b < ab - slack * scale
                || s.a * s.c < ac - slack * scale
                || s.b * s.c < bc - slack * scale
            {
                monotone += 1;
            }
            if group.tag == GroupTag::Su2 && s.b < b - slack * s.b.max(1.0) {
                b_mono += 1;
            }
        }
        prev = Some((s.a * s.b, s.a * s.c, s.b * s.c, s.b));
        if group.tag == GroupTag::E2 {
            let gap = s.c * s.c - s.a * s.a;
            let reg_scale = (s.c * s.c).max(s.a * s.a).max(s.alpha).max(1.0);
            if gap < -slack * reg_scale || gap > 2.0 * s.alpha + slack * reg_scale {
                case3_viol += 1;
            }
        }
        let res = central_residual_reduced(group, s, &smp.deriv);
        let cs = central_scale(group, s, &smp.deriv);
        central_max = central_max.max(res.abs() / cs);
    }
    AuditReport {
        monotone_violations: monotone,
        b_monotone_violations: b_mono,
        case3_violations: (group.tag == GroupTag::E2).then_some(case3_viol),
        case3: (group.tag == GroupTag::E2).then_some(case3_viol == 0),
        central_residual_max: central_max,
    }
}

/// Report of the E(2) eta-side analysis in the variable r = 2 sqrt(ab).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WChartReport {
    /// constant of motion alpha/(ab) measured on the run
    pub k_measured: f64,
    /// k fitted through the integrated form of the W equation
    pub k_fit: f64,
    /// k from the three-term tail fit on W - V/2
    pub k_tail_fit: f64,
    pub p_tail_fit: f64,
    /// V = a/b at the far end (decreasing toward its limit L)
    pub l_estimate: f64,
    pub l_decreasing: bool,
    /// quality of the integrated-form fit of W(r)
    pub r2: f64,
    /// fitted constant L/2 + k of the three-term form
    pub c0: f64,
    pub window: (f64, f64),
    /// dyadic sums of int W^{-1/2} dr toward r_max (ratios near 2 mean
    /// linear growth, hence divergence)
    pub growth_sums: Vec<f64>,
    pub divergent: bool,
}

/// Fits the W-equation along an E(2) trajectory and decides divergence of
/// the transverse distance at the eta end.
pub fn e2_distance_via_w(traj: &Trajectory) -> Result<WChartReport> {
    if traj.group.tag != GroupTag::E2 {
        return Err(Error::UnsupportedGroup(traj.group.tag.to_string()));
    }
    let audit = invariant_region_audit(&traj.group, traj);
    if audit.case3 != Some(true) {
        return Err(Error::NotCase3(format!(
            "{} violations",
            audit.case3_violations.unwrap_or(0)
        )));
    }
    let n = traj.samples.len();
    let mut r = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for smp in &traj.samples {
        let s = &smp.state;
        r.push(2.0 * (s.a * s.b).sqrt());
        w.push(s.c * s.c / (s.a * s.b));
        v.push(s.a / s.b);
    }
    let r_max = *r.last().unwrap();
    let i0 = r.iter().position(|&x| x >= r_max / 1000.0).unwrap_or(0);
    if n - i0 < 32 {
        return Err(Error::InsufficientSamples(n - i0));
    }
    let (rw, ww, vw) = (&r[i0..], &w[i0..], &v[i0..]);
    let s_last = traj.last().state;
    let k_measured = s_last.alpha / (s_last.a * s_last.b);

    // integrated form: r^4 W(r) = r0^4 W0 + int (2V + 4k) s^3 ds
    let r0 = rw[0];
    let mut iv = vec![0.0; rw.len()];
    for i in 1..rw.len() {
        let h = rw[i] - rw[i - 1];
        iv[i] = iv[i - 1]
            + 0.5 * h * (2.0 * vw[i - 1] * rw[i - 1].powi(3) + 2.0 * vw[i] * rw[i].powi(3));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..rw.len() {
        let base = (r0.powi(4) * ww[0] + iv[i]) / rw[i].powi(4);
        let slope = (rw[i].powi(4) - r0.powi(4)) / rw[i].powi(4);
        num += slope * (ww[i] - base);
        den += slope * slope;
    }
    let k_fit = num / den;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let w_mean = ww.iter().sum::<f64>() / rw.len() as f64;
    for i in 0..rw.len() {
        let base = (r0.powi(4) * ww[0] + iv[i]) / rw[i].powi(4);
        let slope = (rw[i].powi(4) - r0.powi(4)) / rw[i].powi(4);
        let pred = base + k_fit * slope;
        ss_res += (ww[i] - pred) * (ww[i] - pred);
        ss_tot += (ww[i] - w_mean) * (ww[i] - w_mean);
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };

    // three-term tail fit on y = W - V/2 against {1, r^-4}
    let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..rw.len() {
        let x = rw[i].powi(-4);
        let y = ww[i] - 0.5 * vw[i];
        s1 += 1.0;
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    let det = s1 * sxx - sx * sx;
    let k_tail_fit = (sy * sxx - sx * sxy) / det;
    let p_tail_fit = (s1 * sxy - sx * sy) / det;

    let l_estimate = *vw.last().unwrap();
    let l_decreasing = vw[vw.len() - 1] < vw[0];

    // divergence: dyadic sums of int W^{-1/2} dr toward r_max
    let mut iwm = vec![0.0; rw.len()];
    for i in 1..rw.len() {
        let h = rw[i] - rw[i - 1];
        iwm[i] = iwm[i - 1] + 0.5 * h * (ww[i - 1].powf(-0.5) + ww[i].powf(-0.5));
    }
    let at = |x: f64| -> f64 {
        match rw.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => iwm[i],
            Err(0) => iwm[0],
            Err(i) if i >= rw.len() => iwm[iwm.len() - 1],
            Err(i) => {
                let t = (x - rw[i - 1]) / (rw[i] - rw[i - 1]);
                iwm[i - 1] * (1.0 - t) + iwm[i] * t
            }
        }
    };
    let mut growth_sums = Vec::new();
    for j in (0..4).rev() {
        let lo = r_max / 2f64.powi(j + 1);
        let hi = r_max / 2f64.powi(j);
        growth_sums.push(at(hi) - at(lo));
    }
    let divergent = growth_sums.windows(2).all(|p| p[1] > 1.5 * p[0]);

    Ok(WChartReport {
        k_measured,
        k_fit,
        k_tail_fit,
        p_tail_fit,
        l_estimate,
        l_decreasing,
        r2,
        c0: l_estimate / 2.0 + k_fit,
        window: (rw[0], r_max),
        growth_sums,
        divergent,
    })
}

/// How a classification run is seeded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedSpec {
    /// an unstable-curve seed off an equilibrium family
    Family {
        family: EquilibriumFamily,
        q: f64,
        epsilon: f64,
        weights: Option<Vec<f64>>,
    },
    /// an explicit initial state
    Explicit { a: f64, b: f64, c: f64, alpha: f64 },
    /// the Heisenberg closed form
    HeisenbergClosedForm { c1: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub integrator: IntegratorOptions,
    pub series_order: usize,
    /// forward horizon for runs that must reach the blowup regime
    pub forward_t_limit: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            integrator: IntegratorOptions::default(),
            series_order: 8,
            forward_t_limit: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftVerdict {
    FiniteDistanceBolt,
    FiniteDistanceNutFail,
    FiniteDistanceSmoothFail,
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightVerdict {
    InfiniteDistance,
    FiniteDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CompleteWithBolt,
    Incomplete,
    Excluded,
    Unknown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeftReport {
    pub verdict: LeftVerdict,
    pub distance: Option<f64>,
    pub tail_ratio: Option<f64>,
    pub captured_family: Option<EquilibriumFamily>,
    pub captured_q: Option<f64>,
    pub smoothness_metric: Option<SmoothnessReport>,
    pub smoothness_kahler: Option<SmoothnessReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RightReport {
    pub verdict: RightVerdict,
    pub distance: Option<f64>,
    pub fit: Option<ExponentFit>,
    pub w_chart: Option<WChartReport>,
}

/// The complete per-run verdict, serialized as the JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub group: GroupTag,
    pub exp_neg_a: f64,
    pub lambda: f64,
    pub seed: SeedSpec,
    pub ricci_flat: bool,
    pub left: Option<LeftReport>,
    pub right: Option<RightReport>,
    pub first_integral_drift: Vec<(String, f64)>,
    pub audit: Option<AuditReport>,
    pub blowup_exponents: Option<Vec<ExponentFit>>,
    pub overall: Verdict,
    pub reasons: Vec<String>,
}

fn capture_radius_for(epsilon: f64) -> f64 {
    (3.0 * epsilon.powf(4.0 / 3.0)).max(1e-9)
}

fn bolt_reports(
    group: &GroupSpec,
    eq: &Equilibrium,
    order: usize,
) -> Result<(SmoothnessReport, SmoothnessReport)> {
    let ser = series_solve(group, eq, order, &SeriesOptions::default())?;
    let orbit = crate::series::orbit_kind(eq.family);
    Ok((
        vz_metric_check(&ser, group, orbit)?,
        vz_kahler_check(&ser, group, orbit)?,
    ))
}

/// Runs the full pipeline for a seed and assembles the verdict.
pub fn classify(group: &GroupSpec, seed: &SeedSpec, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    if group.lambda != 0.0 {
        return Err(Error::UnsupportedLambda(group.lambda));
    }
    if group.tag == GroupTag::Custom {
        return Err(Error::UnsupportedGroup("custom".into()));
    }
    match (group.tag, seed) {
        (GroupTag::Heisenberg, SeedSpec::HeisenbergClosedForm { c1 }) => {
            classify_heisenberg(group, *c1, opts, seed)
        }
        (_, SeedSpec::HeisenbergClosedForm { .. }) => {
            Err(Error::UnsupportedGroup(group.tag.to_string()))
        }
        (GroupTag::Heisenberg, _) => Err(Error::UnsupportedGroup(
            "heisenberg runs classify through the closed form".into(),
        )),
        (_, SeedSpec::Family {
            family,
            q,
            epsilon,
            weights,
        }) => classify_family(group, *family, *q, *epsilon, weights.as_deref(), opts, seed),
        (_, SeedSpec::Explicit { a, b, c, alpha }) => {
            let st = State::new(0.0, *a, *b, *c, *alpha);
            classify_state(group, &st, opts, seed, None)
        }
    }
}

fn classify_heisenberg(
    group: &GroupSpec,
    c1: f64,
    opts: &ClassifyOptions,
    seed: &SeedSpec,
) -> Result<ClassificationReport> {
    let sol = HeisenbergSolution::new(c1)?;
    let verify = heis_verify(&sol, 1000, 10.0);
    let traj = heis_trajectory(&sol, -12.0, 12.0, 4001);
    let mut reasons = Vec::new();

    // measure each side from the reference orbit q = 0 outward
    let mid = traj.samples.iter().position(|s| s.x >= 0.0).unwrap_or(0);
    let mut left_leg = traj.clone();
    left_leg.samples.truncate(mid + 1);
    left_leg.right = crate::flow::Endpoint {
        value: left_leg.last().state.t,
        kind: EndKind::UserLimit,
    };
    let mut right_leg = traj.clone();
    right_leg.samples.drain(..mid);
    right_leg.left = crate::flow::Endpoint {
        value: right_leg.first().state.t,
        kind: EndKind::UserLimit,
    };
    // left end (bolt side): distance converges geometrically
    let left_dist = distance_integral(&left_leg, End::Left)?;
    // right end: escaping toward q = +infinity diverges
    let right_dist = distance_integral(&right_leg, End::Right)?;
    let escape = heis_escape_sums(&sol, 1.0, 5);
    let escape_grows = escape.windows(2).all(|w| w[1] > 1.2 * w[0]);

    let ser = heis_bolt_series(&sol, opts.series_order.max(8))?;
    let metric = vz_metric_check(&ser, group, OrbitKind::Bolt)?;
    let kahler = vz_kahler_check(&ser, group, OrbitKind::Bolt)?;

    let (left_value, left_ratio, left_ok) = match left_dist {
        DistanceResult::Finite { value, tail_ratio } => (Some(value), Some(tail_ratio), tail_ratio < 0.9),
        DistanceResult::Divergent { .. } => (None, None, false),
    };
    let (right_fit, right_divergent) = match right_dist {
        DistanceResult::Divergent { fit } => (Some(fit), true),
        DistanceResult::Finite { .. } => (None, false),
    };
    if verify.max_combined > 1e-10 || verify.max_central > 1e-9 {
        reasons.push("closed-form residuals above threshold".into());
    }
    let smooth_ok = metric.pass && kahler.pass;
    if !smooth_ok {
        reasons.push("smooth extension fails at the bolt".into());
    }
    if !escape_grows {
        reasons.push("escape-length sums do not grow".into());
    }
    let overall = if left_ok && right_divergent && smooth_ok && escape_grows && reasons.is_empty() {
        Verdict::CompleteWithBolt
    } else {
        Verdict::Incomplete
    };
    let drift = traj
        .first_integral_drift()?
        .into_iter()
        .map(|(n, d)| (n.to_string(), d))
        .collect();
    Ok(ClassificationReport {
        group: group.tag,
        exp_neg_a: group.exp_neg_a,
        lambda: group.lambda,
        seed: seed.clone(),
        ricci_flat: false,
        left: Some(LeftReport {
            verdict: if smooth_ok {
                LeftVerdict::FiniteDistanceBolt
            } else {
                LeftVerdict::FiniteDistanceSmoothFail
            },
            distance: left_value,
            tail_ratio: left_ratio,
            captured_family: None,
            captured_q: Some(c1.sqrt()),
            smoothness_metric: Some(metric),
            smoothness_kahler: Some(kahler),
        }),
        right: Some(RightReport {
            verdict: if right_divergent {
                RightVerdict::InfiniteDistance
            } else {
                RightVerdict::FiniteDistance
            },
            distance: None,
            fit: right_fit,
            w_chart: None,
        }),
        first_integral_drift: drift,
        audit: Some(invariant_region_audit(group, &traj)),
        blowup_exponents: None,
        overall,
        reasons,
    })
}

fn classify_family(
    group: &GroupSpec,
    family: EquilibriumFamily,
    q: f64,
    epsilon: f64,
    weights: Option<&[f64]>,
    opts: &ClassifyOptions,
    seed: &SeedSpec,
) -> Result<ClassificationReport> {
    // families the source analysis leaves open
    if family == EquilibriumFamily::E20P0R
        || (family == EquilibriumFamily::E2Q0Q0 && q == 0.0)
    {
        return Ok(ClassificationReport {
            group: group.tag,
            exp_neg_a: group.exp_neg_a,
            lambda: group.lambda,
            seed: seed.clone(),
            ricci_flat: false,
            left: None,
            right: None,
            first_integral_drift: Vec::new(),
            audit: None,
            blowup_exponents: None,
            overall: Verdict::Excluded,
            reasons: vec!["equilibrium family left open by the classification".into()],
        });
    }
    if family == EquilibriumFamily::Su2Origin {
        return classify_su2_origin(group, opts, seed);
    }
    let eq = equilibrium_point(group, family, q, 0.0);
    let rep = linearize(group, &eq)?;
    let state = unstable_seed(group, &eq, &rep, epsilon, weights)?;
    classify_state(group, &state, opts, seed, Some(epsilon))
}

fn classify_su2_origin(
    group: &GroupSpec,
    opts: &ClassifyOptions,
    seed: &SeedSpec,
) -> Result<ClassificationReport> {
    // seed from the nut expansion, then run the standard pipeline; the
    // smooth-extension obstruction at the origin decides the left side
    let eq = equilibrium_point(group, EquilibriumFamily::Su2Origin, 0.0, 0.0);
    let ser = series_solve(group, &eq, opts.series_order.min(7), &SeriesOptions::default())?;
    let metric = vz_metric_check(&ser, group, OrbitKind::Nut)?;
    let kahler = vz_kahler_check(&ser, group, OrbitKind::Nut)?;
    let r0 = 0.3;
    let mut st = ser.eval(r0);
    st.alpha = group.exp_neg_a * st.a * st.b;

    let mut iopts = opts.integrator;
    iopts.capture = false;
    let mut back = integrate(group, &st, Direction::Backward, &iopts)?;
    // the approach to the point orbit is a power law in t, so no capture
    // radius triggers; the monotone decay toward the origin identifies the
    // end as t -> -infinity
    if back.left.kind == EndKind::UserLimit {
        let first = back.first().state;
        let norm0 = st.a.hypot(st.b).hypot(st.c);
        let norm1 = first.a.hypot(first.b).hypot(first.c);
        if norm1 < 0.5 * norm0 {
            back.left.kind = EndKind::Infinite;
            back.left.value = f64::NEG_INFINITY;
            back.warnings
                .push("left end marked infinite: monotone power-law decay to the origin".into());
        }
    }
    let mut fopts = opts.integrator;
    fopts.t_limit = opts.forward_t_limit;
    fopts.capture = false;
    let fwd = integrate(group, &st, Direction::Forward, &fopts)?;
    let back_leg = back.clone();
    let full = stitch(back, &fwd)?;

    let left_dist = distance_integral(&back_leg, End::Left).ok();
    let right_dist = distance_integral(&full, End::Right)?;
    let (right_fit, right_divergent) = match right_dist {
        DistanceResult::Divergent { fit } => (Some(fit), true),
        DistanceResult::Finite { .. } => (None, false),
    };
    let (lv, lr) = match left_dist {
        Some(DistanceResult::Finite { value, tail_ratio }) => (Some(value), Some(tail_ratio)),
        _ => (None, None),
    };
    let audit = invariant_region_audit(group, &full);
    let drift = full
        .first_integral_drift()
        .unwrap_or_default()
        .into_iter()
        .map(|(n, d)| (n.to_string(), d))
        .collect();
    Ok(ClassificationReport {
        group: group.tag,
        exp_neg_a: group.exp_neg_a,
        lambda: group.lambda,
        seed: seed.clone(),
        ricci_flat: group.exp_neg_a == 0.0,
        left: Some(LeftReport {
            verdict: LeftVerdict::FiniteDistanceNutFail,
            distance: lv,
            tail_ratio: lr,
            captured_family: Some(EquilibriumFamily::Su2Origin),
            captured_q: Some(0.0),
            smoothness_metric: Some(metric),
            smoothness_kahler: Some(kahler),
        }),
        right: Some(RightReport {
            verdict: if right_divergent {
                RightVerdict::InfiniteDistance
            } else {
                RightVerdict::FiniteDistance
            },
            distance: None,
            fit: right_fit,
            w_chart: None,
        }),
        first_integral_drift: drift,
        audit: Some(audit),
        blowup_exponents: None,
        overall: Verdict::Incomplete,
        reasons: vec!["the point orbit admits no smooth extension (both unit slopes required)".into()],
    })
}

fn classify_state(
    group: &GroupSpec,
    state: &State,
    opts: &ClassifyOptions,
    seed: &SeedSpec,
    epsilon: Option<f64>,
) -> Result<ClassificationReport> {
    let ricci_flat = match group.tag {
        GroupTag::Su2 => group.exp_neg_a == 0.0,
        _ => state.alpha == 0.0,
    };
    let mut reasons = Vec::new();

    let mut bopts = opts.integrator;
    if let Some(eps) = epsilon {
        bopts.capture_radius = bopts.capture_radius.max(capture_radius_for(eps));
    }
    let back = integrate(group, state, Direction::Backward, &bopts)?;
    let mut fopts = opts.integrator;
    fopts.t_limit = opts.forward_t_limit;
    fopts.capture = false;
    let fwd = integrate(group, state, Direction::Forward, &fopts)?;
    let left_kind = back.left.kind;
    let capture = back.capture;
    // distances are measured per leg, from the seed orbit outward
    let back_leg = back.clone();
    let full = stitch(back, &fwd)?;

    // audits over the full run
    let audit = invariant_region_audit(group, &full);
    let drift: Vec<(String, f64)> = if ricci_flat {
        Vec::new()
    } else {
        full.first_integral_drift()
            .unwrap_or_default()
            .into_iter()
            .map(|(n, d)| (n.to_string(), d))
            .collect()
    };

    // left side
    let mut left = None;
    let mut blowup_exponents = None;
    let mut left_bolt_ok = false;
    match left_kind {
        EndKind::EquilibriumCapture => {
            let cap = capture.expect("capture info on captured end");
            let fam = cap.family.expect("family for captured equilibrium");
            let qhat = match fam {
                EquilibriumFamily::Su2QQ0 => 0.5 * (cap.point[0] + cap.point[1]),
                EquilibriumFamily::Su20QQ => 0.5 * (cap.point[1] + cap.point[2]),
                EquilibriumFamily::Su2Q0Q | EquilibriumFamily::E2Q0Q0 => {
                    0.5 * (cap.point[0] + cap.point[2])
                }
                _ => 0.0,
            };
            let dist = distance_integral(&back_leg, End::Left)?;
            let (dv, dr, finite) = match dist {
                DistanceResult::Finite { value, tail_ratio } => {
                    (Some(value), Some(tail_ratio), tail_ratio < 0.9)
                }
                DistanceResult::Divergent { .. } => (None, None, false),
            };
            let eqc = equilibrium_point(group, fam, qhat, 0.0);
            let (metric, kahler) = bolt_reports(group, &eqc, opts.series_order)?;
            let smooth_ok = metric.pass && kahler.pass;
            left_bolt_ok = finite && smooth_ok;
            if !smooth_ok {
                reasons.push("smooth extension fails at the singular orbit".into());
            }
            left = Some(LeftReport {
                verdict: if smooth_ok {
                    LeftVerdict::FiniteDistanceBolt
                } else {
                    LeftVerdict::FiniteDistanceSmoothFail
                },
                distance: dv,
                tail_ratio: dr,
                captured_family: Some(fam),
                captured_q: Some(qhat),
                smoothness_metric: Some(metric),
                smoothness_kahler: Some(kahler),
            });
        }
        EndKind::FiniteBlowup => {
            // finite xi: incomplete, with the asymptotic triple recorded
            let refs: [Option<f64>; 4] = match group.tag {
                GroupTag::E2 => {
                    // backward Case 1 or Case 2 by the region of the seed
                    let gap = state.c * state.c - state.a * state.a;
                    if gap < 0.0 {
                        [Some(-0.5), Some(0.5), Some(0.5), None]
                    } else {
                        [Some(0.5), Some(0.5), Some(-0.5), None]
                    }
                }
                _ => [None, None, None, None],
            };
            blowup_exponents = Some(asymptotic_blowup_fit(&back_leg, End::Left, refs)?);
            let dist = distance_integral(&back_leg, End::Left)?;
            let (dv, dr) = match dist {
                DistanceResult::Finite { value, tail_ratio } => (Some(value), Some(tail_ratio)),
                DistanceResult::Divergent { .. } => (None, None),
            };
            reasons.push("maximal interval has a finite left endpoint".into());
            left = Some(LeftReport {
                verdict: LeftVerdict::Incomplete,
                distance: dv,
                tail_ratio: dr,
                captured_family: None,
                captured_q: None,
                smoothness_metric: None,
                smoothness_kahler: None,
            });
        }
        _ => {
            reasons.push("left end unresolved within the horizon".into());
        }
    }

    // right side
    let right = match group.tag {
        GroupTag::E2 if audit.case3 == Some(true) => {
            let wrep = e2_distance_via_w(&full)?;
            let divergent = wrep.divergent;
            if !divergent {
                reasons.push("transverse distance does not grow at the far end".into());
            }
            Some(RightReport {
                verdict: if divergent {
                    RightVerdict::InfiniteDistance
                } else {
                    RightVerdict::FiniteDistance
                },
                distance: None,
                fit: None,
                w_chart: Some(wrep),
            })
        }
        _ => {
            let dist = distance_integral(&full, End::Right)?;
            match dist {
                DistanceResult::Divergent { fit } => Some(RightReport {
                    verdict: RightVerdict::InfiniteDistance,
                    distance: None,
                    fit: Some(fit),
                    w_chart: None,
                }),
                DistanceResult::Finite { value, .. } => {
                    reasons.push("finite distance to the right endpoint".into());
                    Some(RightReport {
                        verdict: RightVerdict::FiniteDistance,
                        distance: Some(value),
                        fit: None,
                        w_chart: None,
                    })
                }
            }
        }
    };

    let right_infinite = matches!(
        right,
        Some(RightReport {
            verdict: RightVerdict::InfiniteDistance,
            ..
        })
    );
    let overall = if left_bolt_ok && right_infinite {
        Verdict::CompleteWithBolt
    } else if left.is_none() {
        Verdict::Unknown
    } else {
        Verdict::Incomplete
    };
    Ok(ClassificationReport {
        group: group.tag,
        exp_neg_a: group.exp_neg_a,
        lambda: group.lambda,
        seed: seed.clone(),
        ricci_flat,
        left,
        right,
        first_integral_drift: drift,
        audit: Some(audit),
        blowup_exponents,
        overall,
        reasons,
    })
}
