//! Checks of constructed solutions against the original equation: the
//! torus residual and direct time integration.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, Mode};
use crate::model::{eval_poly, Problem};
use crate::solver::SeriesSolution;

/// Cap on the number of sampling points of the residual grid.
pub const MAX_GRID_POINTS: usize = 1 << 20;
/// Terminal distance below which a perturbed trajectory counts as attracted.
pub const ATTRACT_TOL: f64 = 1e-6;
/// Largest offset the attractivity criterion covers.
pub const MAX_OFFSET: f64 = 0.1;
/// Default integration horizon.
pub const DEFAULT_T_END: f64 = 100.0;
/// Observed sup residual of E1 at `K = 8`, `ε = 0.05`, frozen as a
/// regression bound. It equals `|D u^{(9)}|` up to higher orders.
pub const E1_K8_RESIDUAL: f64 = 7.95e-9;
const MAX_RECORDED: usize = 20_000;
const BLOWUP: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Points per torus axis.
    pub grid_size: usize,
    /// Sup over the grid of the residual evaluated in physical space.
    pub sup_residual: f64,
    /// Sup over the same grid of the Fourier-side residual.
    pub fourier_sup: f64,
    /// Largest pointwise gap between the two evaluations.
    pub consistency: f64,
    /// `Σ|R_ν|`, an upper bound on the residual everywhere on the torus.
    pub l1_bound: f64,
    #[serde(skip)]
    pub per_mode_residual: FourierSeries,
}

/// `R = ε(ω·∂)²u + (ω·∂)u + ε g(c₀+u) − εf` as a Fourier series.
pub fn residual_series(problem: &Problem, solution: &SeriesSolution) -> Result<FourierSeries> {
    let eps = problem.epsilon;
    let u = solution.total();
    let d1 = u.directional_derivative(&problem.omega, 1)?;
    let d2 = u.directional_derivative(&problem.omega, 2)?;
    let g = FourierSeries::compose_polynomial(&problem.nonlinearity.taylor, &u);
    let mut r = d2.scale_real(eps);
    r.add_assign(&d1)?;
    r.add_assign(&g.scale_real(eps))?;
    r.add_assign(&problem.forcing.scale_real(-eps))?;
    r.prune();
    Ok(r)
}

fn grid_points(dim: usize, bandwidth: u64) -> usize {
    let wanted = (2 * bandwidth as usize + 2).max(16);
    let cap = (MAX_GRID_POINTS as f64).powf(1.0 / dim as f64).floor() as usize;
    wanted.min(cap.max(2))
}

fn for_each_grid_point(dim: usize, m: usize, mut visit: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; dim];
    let mut psi = vec![0.0; dim];
    loop {
        for (p, &i) in psi.iter_mut().zip(&idx) {
            *p = 2.0 * PI * i as f64 / m as f64;
        }
        visit(&psi);
        let mut axis = 0;
        loop {
            if axis == dim {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Fourier-side residual plus an independent sampled evaluation in physical
/// space using `g` as supplied.
pub fn residual(problem: &Problem, solution: &SeriesSolution) -> Result<ResidualReport> {
    let r = residual_series(problem, solution)?;
    let eps = problem.epsilon;
    let c0 = problem.nonlinearity.c0;
    let u = solution.total();
    let d1 = u.directional_derivative(&problem.omega, 1)?;
    let d2 = u.directional_derivative(&problem.omega, 2)?;
    let m = grid_points(problem.dim(), r.max_l1());
    let (mut sup, mut fsup, mut gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut err = None;
    for_each_grid_point(problem.dim(), m, |psi| {
        let eval = |s: &FourierSeries| s.evaluate(psi).map(|z| z.re);
        match (eval(&u), eval(&d1), eval(&d2), eval(&problem.forcing), r.evaluate(psi)) {
            (Ok(x), Ok(v), Ok(a), Ok(f), Ok(rf)) => {
                let phys = eps * a + v + eps * eval_poly(&problem.nonlinearity.poly, c0 + x) - eps * f;
                sup = sup.max(phys.abs());
                fsup = fsup.max(rf.norm());
                gap = gap.max((phys - rf.re).abs());
            }
            (Err(e), ..) | (_, Err(e), ..) | (_, _, Err(e), ..) | (_, _, _, Err(e), _) | (.., Err(e)) => {
                err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ResidualReport {
        grid_size: m,
        sup_residual: sup,
        fourier_sup: fsup,
        consistency: gap,
        l1_bound: r.l1_norm(),
        per_mode_residual: r,
    })
}

/// `min(2π/(20 max|ω·ν|), ε/5)` over the forcing support.
pub fn default_dt(problem: &Problem) -> f64 {
    let smax = problem
        .forcing
        .modes()
        .map(|m| problem.omega.dot(m).abs())
        .fold(0.0, f64::max);
    let forcing_dt = if smax > 0.0 { 2.0 * PI / (20.0 * smax) } else { f64::INFINITY };
    forcing_dt.min(problem.epsilon / 5.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `(x, ẋ)`.
    pub states: Vec<(f64, f64)>,
    /// `|x(t) − x_sol(t)|`; empty when no reference solution was given.
    pub distance_to_solution: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> (f64, f64) {
        *self.states.last().expect("at least the initial state")
    }

    pub fn final_distance(&self) -> Option<f64> {
        self.distance_to_solution.last().copied()
    }

    /// `t,x,v,distance` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,v,distance\n");
        for (i, (t, (x, v))) in self.times.iter().zip(&self.states).enumerate() {
            let d = self.distance_to_solution.get(i).map_or(String::new(), |d| format!("{d:.16e}"));
            out.push_str(&format!("{t:.16e},{x:.16e},{v:.16e},{d}\n"));
        }
        out
    }
}

/// Reference trajectory `x_sol(t) = c₀ + u(ωt)`.
struct Reference {
    omega: crate::frequency::FrequencyVector,
    c0: f64,
    u: FourierSeries,
}

impl Reference {
    fn new(solution: &SeriesSolution) -> Self {
        Reference {
            omega: solution.omega.clone(),
            c0: solution.c0,
            u: solution.total(),
        }
    }

    fn x(&self, t: f64) -> f64 {
        self.c0 + self.u.evaluate(&self.omega.phase_at(t)).expect("same dimension").re
    }
}

/// Exponential midpoint integrator for `ẋ = v`, `v̇ = −v/ε + f(ωt) − g(x)`.
///
/// The linear part `L = [[0, 1], [0, −1/ε]]` is propagated exactly; the
/// forcing and nonlinearity enter through `τφ₁(Lτ)` evaluated at the
/// explicit midpoint, which makes the scheme second order.
pub struct Integrator<'a> {
    problem: &'a Problem,
    dt: f64,
    // e^{Lτ} and τφ₁(Lτ) entries for τ = dt and dt/2
    full: StepCoefficients,
    half: StepCoefficients,
}

#[derive(Debug, Clone, Copy)]
struct StepCoefficients {
    /// `ε(1 − e^{−τ/ε})`
    e12: f64,
    /// `e^{−τ/ε}`
    e22: f64,
    /// first component of `τφ₁(Lτ)(0, 1)`
    p1: f64,
    /// second component of `τφ₁(Lτ)(0, 1)`
    p2: f64,
}

impl StepCoefficients {
    fn new(eps: f64, tau: f64) -> Self {
        let one_minus = -(-tau / eps).exp_m1();
        StepCoefficients {
            e12: eps * one_minus,
            e22: 1.0 - one_minus,
            p1: eps * (tau - eps * one_minus),
            p2: eps * one_minus,
        }
    }

    fn apply(&self, x: f64, v: f64, q: f64) -> (f64, f64) {
        (x + self.e12 * v + self.p1 * q, self.e22 * v + self.p2 * q)
    }
}

impl<'a> Integrator<'a> {
    pub fn new(problem: &'a Problem, dt: f64) -> Result<Self> {
        let eps = problem.epsilon;
        if !(eps > 0.0) {
            return Err(Error::InvalidInput("time integration needs ε > 0".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
        }
        let smax = problem
            .forcing
            .modes()
            .map(|m| problem.omega.dot(m).abs())
            .fold(0.0, f64::max);
        if dt * smax > PI {
            return Err(Error::StepTooLarge(format!(
                "dt = {dt} under-resolves the forcing frequency {smax}"
            )));
        }
        Ok(Integrator {
            problem,
            dt,
            full: StepCoefficients::new(eps, dt),
            half: StepCoefficients::new(eps, dt / 2.0),
        })
    }

    fn source(&self, t: f64, x: f64) -> f64 {
        let p = self.problem;
        p.forcing.evaluate(&p.omega.phase_at(t)).expect("same dimension").re - eval_poly(&p.nonlinearity.poly, x)
    }

    /// One step from `(t, x, v)`.
    pub fn step(&self, t: f64, x: f64, v: f64) -> (f64, f64) {
        let (xm, _) = self.half.apply(x, v, self.source(t, x));
        let q = self.source(t + self.dt / 2.0, xm);
        self.full.apply(x, v, q)
    }

    /// Integrates to `t_end`, recording at most ~20000 evenly spaced samples.
    pub fn run(&self, x0: f64, v0: f64, t_end: f64, reference: Option<&SeriesSolution>) -> Result<TrajectoryRecord> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidInput(format!("t_end = {t_end}")));
        }
        let steps = (t_end / self.dt).ceil() as usize;
        let stride = steps.div_ceil(MAX_RECORDED).max(1);
        let reference = reference.map(Reference::new);
        let mut rec = TrajectoryRecord {
            times: Vec::new(),
            states: Vec::new(),
            distance_to_solution: Vec::new(),
        };
        let push = |rec: &mut TrajectoryRecord, t: f64, x: f64, v: f64| {
            rec.times.push(t);
            rec.states.push((x, v));
            if let Some(r) = &reference {
                rec.distance_to_solution.push((x - r.x(t)).abs());
            }
        };
        let (mut x, mut v) = (x0, v0);
        push(&mut rec, 0.0, x, v);
        for n in 0..steps {
            let t = n as f64 * self.dt;
            // the last step lands exactly on t_end
            let h = if n + 1 == steps { t_end - t } else { self.dt };
            (x, v) = if h == self.dt {
                self.step(t, x, v)
            } else {
                Integrator::new(self.problem, h)?.step(t, x, v)
            };
            if !(x.is_finite() && v.is_finite()) {
                return Err(Error::NonfiniteState(t + h));
            }
            if x.abs().max(v.abs()) > BLOWUP {
                return Err(Error::StepTooLarge(format!("state left |x|,|v| ≤ {BLOWUP:e} at t = {}", t + h)));
            }
            if (n + 1) % stride == 0 || n + 1 == steps {
                push(&mut rec, t + h, x, v);
            }
        }
        Ok(rec)
    }
}

pub fn integrate(
    problem: &Problem,
    x0: f64,
    v0: f64,
    t_end: f64,
    dt: f64,
    reference: Option<&SeriesSolution>,
) -> Result<TrajectoryRecord> {
    Integrator::new(problem, dt)?.run(x0, v0, t_end, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorEntry {
    pub offset: f64,
    pub terminal_distance: f64,
    /// `λ` in `distance ≈ C e^{−λt}`, least squares over the recorded tail.
    pub decay_rate: Option<f64>,
    pub pass: bool,
    #[serde(skip)]
    pub trajectory: TrajectoryRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorReport {
    pub t_end: f64,
    pub dt: f64,
    /// Outside the hypotheses `𝔫 = 1, a > 0` of the attractivity theorem.
    pub exploratory: bool,
    /// Distance reached when starting on the constructed solution.
    pub shadowing_distance: f64,
    pub entries: Vec<AttractorEntry>,
    pub pass: bool,
}

/// Least-squares slope of `ln d` against `t` over samples with `t ≥ t_min`
/// and `d` above `floor`.
pub fn fit_decay_rate(times: &[f64], distances: &[f64], t_min: f64, floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(distances)
        .filter(|(&t, &d)| t >= t_min && d > floor)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
    (den > 0.0).then(|| -num / den)
}

/// Starts at `x_sol(0) + offset` with `ẋ_sol(0)` for each offset and tracks
/// the distance to the constructed solution.
pub fn attractor_test(
    problem: &Problem,
    solution: &SeriesSolution,
    offsets: &[f64],
    t_end: f64,
    dt: Option<f64>,
) -> Result<AttractorReport> {
    let dt = dt.unwrap_or_else(|| default_dt(problem));
    let integrator = Integrator::new(problem, dt)?;
    let (xs, vs) = solution.state_at(0.0);
    let on = integrator.run(xs, vs, t_end, Some(solution))?;
    let shadowing_distance = on.distance_to_solution.iter().copied().fold(0.0, f64::max);
    let mut entries = Vec::with_capacity(offsets.len());
    for &offset in offsets {
        let traj = integrator.run(xs + offset, vs, t_end, Some(solution))?;
        let terminal_distance = traj.final_distance().expect("reference given");
        // skip the fast transient of duration ~ε and the shadowing floor
        let floor = 100.0 * shadowing_distance.max(1e-14);
        let decay_rate = fit_decay_rate(&traj.times, &traj.distance_to_solution, 20.0 * problem.epsilon, floor);
        entries.push(AttractorEntry {
            offset,
            terminal_distance,
            decay_rate,
            pass: terminal_distance <= ATTRACT_TOL,
            trajectory: traj,
        });
    }
    let nl = &problem.nonlinearity;
    Ok(AttractorReport {
        t_end,
        dt,
        exploratory: !(nl.order == 1 && nl.a > 0.0),
        shadowing_distance,
        pass: entries.iter().all(|e| e.pass),
        entries,
    })
}

/// Sup residual for each `(ε, K)` pair, solved through `solve`.
pub fn residual_sweep(
    problem: &Problem,
    eps_list: &[f64],
    orders: &[usize],
    solve: impl Fn(&Problem, usize) -> Result<SeriesSolution>,
) -> Result<Vec<(f64, usize, f64)>> {
    let mut out = Vec::new();
    for &eps in eps_list {
        let p = problem.with_epsilon(eps);
        for &k in orders {
            let sol = solve(&p, k)?;
            out.push((eps, k, residual(&p, &sol)?.sup_residual));
        }
    }
    Ok(out)
}

/// `epsilon,K,sup_residual` rows.
pub fn sweep_csv(rows: &[(f64, usize, f64)]) -> String {
    let mut out = String::from("epsilon,K,sup_residual\n");
    for (eps, k, r) in rows {
        out.push_str(&format!("{eps:.16e},{k},{r:.16e}\n"));
    }
    out
}

/// Zero mode helper used when only the average of a residual matters.
pub fn average_residual(r: &FourierSeries) -> Complex64 {
    r.get(&Mode::zero(r.dim()))
}
