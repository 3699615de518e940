//! Quick invariant checks runnable from the command line, plus the
//! finite-difference and evaluator-agreement helpers they share with the
//! test suites.

use crate::distributions::{make_task, TaskMode};
use crate::experiments::{public_step, seed_datasets, SeparationConfig};
use crate::landscape::{interpolation_plane, local_minima_1d, slice_1d, Range};
use crate::loss::{
    composite_loss, population_loss_closed_form, population_loss_mc, q_gate, BasinLossParams, BasinLossSpec,
    BlockLoss, DataPoint, ParamPoint, QuadraticLossSpec,
};
use crate::optim::{account_epsilon, run_dpsgd, NoiseSchedule, Projection};
use crate::rng::{gaussian_vector, RngStream};
use crate::vector::{norm, project_ball, Annulus, RealVector};
use crate::{stream, Result};

/// Largest per-block relative error between the analytic gradient and
/// central differences with steps `h1`, `h2` for the two blocks.
pub fn gradient_fd_error<L: BlockLoss + ?Sized>(
    loss: &L,
    theta: &ParamPoint,
    d: &DataPoint,
    h1: f64,
    h2: f64,
) -> Result<f64> {
    let g = loss.grad(theta, d)?;
    let mut t1 = theta.theta1.as_slice().to_vec();
    let mut t2 = theta.theta2.as_slice().to_vec();
    let (d1, d2) = (d.d1.as_slice(), d.d2.as_slice());
    let mut fd1 = vec![0.0; t1.len()];
    for i in 0..t1.len() {
        let x = t1[i];
        t1[i] = x + h1;
        let up = loss.value_slices(&t1, &t2, d1, d2);
        t1[i] = x - h1;
        let down = loss.value_slices(&t1, &t2, d1, d2);
        t1[i] = x;
        fd1[i] = (up - down) / (2.0 * h1);
    }
    let mut fd2 = vec![0.0; t2.len()];
    for i in 0..t2.len() {
        let x = t2[i];
        t2[i] = x + h2;
        let up = loss.value_slices(&t1, &t2, d1, d2);
        t2[i] = x - h2;
        let down = loss.value_slices(&t1, &t2, d1, d2);
        t2[i] = x;
        fd2[i] = (up - down) / (2.0 * h2);
    }
    let rel = |a: &[f64], b: &[f64]| {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        diff / norm(a).max(norm(b)).max(1e-8)
    };
    Ok(rel(g.theta1.as_slice(), &fd1).max(rel(g.theta2.as_slice(), &fd2)))
}

/// A random `(theta, d)` for the basin loss at least `gap` away (in the
/// relevant norm) from every kink: the clamp boundaries and the gate's
/// four breakpoints. Data is drawn from the supports.
pub fn smooth_basin_point(spec: &BasinLossSpec, stream: &mut RngStream, gap: f64) -> (ParamPoint, DataPoint) {
    let (a, b) = (spec.dim1(), spec.dim2());
    let r = spec.radius2();
    let s = spec.annulus();
    let kinks = [
        s.inner() - spec.gate_ramp(),
        s.inner(),
        s.outer(),
        s.outer() + spec.gate_ramp(),
    ];
    loop {
        let d1 = random_in_ball(stream, a, 1.0);
        let d2 = random_in_ball(stream, b, r);
        // theta1 norm spread over [0, 1.2] to visit every gate piece
        let dir = unit(stream, a);
        let n1 = 1.2 * stream.uniform();
        let t1 = dir.iter().map(|x| x * n1).collect::<Vec<_>>();
        let t2 = d2
            .iter()
            .zip(unit(stream, b))
            .map(|(x, u)| x + u * 4.0 * r * stream.uniform())
            .collect::<Vec<_>>();
        let n2 = t2
            .iter()
            .zip(&d2)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let dd1 = t1
            .iter()
            .zip(&d1)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let near_gate = kinks.iter().any(|k| (n1 - k).abs() < gap);
        if near_gate || (n2 - 3.0 * r).abs() < gap * r || (dd1 - 3.0).abs() < gap || n1 < gap {
            continue;
        }
        let v = |x: Vec<f64>| RealVector::new(x).expect("finite");
        return (ParamPoint::new(v(t1), v(t2)), DataPoint::new(v(d1), v(d2)));
    }
}

fn unit(stream: &mut RngStream, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| stream.standard_normal()).collect();
        let n = norm(&g);
        if n > 1e-12 {
            return g.iter().map(|x| x / n).collect();
        }
    }
}

fn random_in_ball(stream: &mut RngStream, dim: usize, radius: f64) -> Vec<f64> {
    let u = unit(stream, dim);
    let rad = radius * stream.uniform().powf(1.0 / dim as f64);
    u.iter().map(|x| x * rad).collect()
}

/// `|closed form - Monte Carlo| / stderr` at a point where the closed form
/// is valid.
pub fn closed_form_z_score(
    spec: &BasinLossSpec,
    theta: &ParamPoint,
    n_mc: usize,
    stream: &mut RngStream,
) -> Result<f64> {
    let task = make_task(spec, TaskMode::Id, 0.5, &mut stream.child("task"))?;
    let (cf, valid) = population_loss_closed_form(spec, &task, theta)?;
    if !valid {
        return Err(crate::Error::param("theta", "outside the closed-form regime"));
    }
    let (mc, se) = population_loss_mc(spec, &task, theta, n_mc, &mut stream.child("mc"))?;
    Ok(if se == 0.0 {
        (cf - mc).abs() / 1e-300
    } else {
        (cf - mc).abs() / se
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("projection_ball", check_ball),
    ("projection_annulus", check_annulus),
    ("toy_constants", check_toy),
    ("toy_slice_two_minima", check_toy_slice),
    ("gradient_composite", check_grad_composite),
    ("gradient_quadratic", check_grad_quadratic),
    ("closed_form_vs_monte_carlo", check_closed_form),
    ("public_step_exact", check_public_step),
    ("ood_public_block_two_zero", check_ood),
    ("clipping_bound", check_clipping),
    ("projection_feasible", check_projection),
    ("schedule_budget", check_schedule),
    ("accountant_monotone", check_accountant),
    ("plane_corners", check_plane),
    ("stream_determinism", check_streams),
];

/// Runs every check; errors count as failures.
pub fn run_selftest() -> SelftestReport {
    let checks = CHECKS
        .iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect();
    SelftestReport { checks }
}

fn check_ball() -> Result<(bool, String)> {
    let p = project_ball(&RealVector::new(vec![3.0, 4.0])?, 1.0)?;
    Ok((
        (p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15,
        format!("{:?}", p.as_slice()),
    ))
}

fn check_annulus() -> Result<(bool, String)> {
    let a = Annulus::new(0.5, 0.1)?;
    let inner = a.project(&RealVector::new(vec![0.3])?)[0];
    let origin = a.project(&RealVector::zeros(2));
    let ok = (inner - 0.4).abs() < 1e-15 && origin.as_slice() == [0.4, 0.0];
    Ok((ok, format!("0.3 -> {inner}, origin -> {:?}", origin.as_slice())))
}

fn check_toy() -> Result<(bool, String)> {
    let spec = BasinLossSpec::toy();
    let v = |x: f64| RealVector::new(vec![x]);
    let q0 = q_gate(&spec, &v(0.0)?)?;
    let q5 = q_gate(&spec, &v(0.5)?)?;
    let l = composite_loss(
        &spec,
        &ParamPoint::new(v(0.5)?, v(0.005)?),
        &DataPoint::new(v(0.5)?, v(0.005)?),
    )?;
    Ok((
        q0 == 0.0 && q5 == 1.0 && (l + 4.5).abs() < 1e-12,
        format!("q(0)={q0} q(0.5)={q5} loss={l}"),
    ))
}

fn check_toy_slice() -> Result<(bool, String)> {
    let spec = BasinLossSpec::toy();
    let d = DataPoint::new(RealVector::new(vec![0.5])?, RealVector::new(vec![0.005])?);
    let g = slice_1d(
        &spec,
        &d,
        &[RealVector::new(vec![0.005])?],
        0,
        Range::new(-1.0, 1.0, 401)?,
    )?;
    let mins = local_minima_1d(g.row(0));
    let at: Vec<f64> = mins.iter().map(|&i| g.x.values[i]).collect();
    Ok((mins.len() == 2, format!("minima at {at:?}")))
}

fn check_grad_composite() -> Result<(bool, String)> {
    let mut s = stream!(0, "selftest", "grad");
    let mut worst = 0.0f64;
    for spec in [
        BasinLossSpec::toy(),
        BasinLossSpec::new(BasinLossParams {
            dim1: 16,
            ..BasinLossParams::desk()
        })?,
    ] {
        for _ in 0..20 {
            let (th, d) = smooth_basin_point(&spec, &mut s, 1e-3);
            worst = worst.max(gradient_fd_error(&spec, &th, &d, 1e-6, 1e-6 * spec.radius2())?);
        }
    }
    Ok((worst <= 1e-5, format!("max relative error {worst:e}")))
}

fn check_grad_quadratic() -> Result<(bool, String)> {
    let q = QuadraticLossSpec::new(4, 16, 4, 1e-3)?;
    let mut s = stream!(0, "selftest", "grad_q");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let th = ParamPoint::new(
            gaussian_vector(&mut s, 16, 0.3)?,
            gaussian_vector(&mut s, 4, 1e-3)?,
        );
        let d = DataPoint::new(
            gaussian_vector(&mut s, 16, 0.3)?,
            gaussian_vector(&mut s, 4, 1e-3)?,
        );
        worst = worst.max(gradient_fd_error(&q, &th, &d, 1e-6, 1e-9)?);
    }
    Ok((worst <= 1e-5, format!("max relative error {worst:e}")))
}

fn check_closed_form() -> Result<(bool, String)> {
    let spec = BasinLossSpec::new(BasinLossParams {
        dim1: 16,
        ..BasinLossParams::desk()
    })?;
    let mut s = stream!(0, "selftest", "cf");
    let mut worst = 0.0f64;
    for k in 0..5usize {
        let (th, _) = smooth_basin_point(&spec, &mut s, 1e-3);
        let t2 = RealVector::new(
            th.theta2
                .iter()
                .map(|x| x.clamp(-spec.radius2(), spec.radius2()))
                .collect(),
        )?;
        let th = ParamPoint::new(th.theta1, t2);
        worst = worst.max(closed_form_z_score(&spec, &th, 20_000, &mut s.child(k))?);
    }
    Ok((worst <= 4.0, format!("max |z| {worst:.3}")))
}

fn small_config() -> Result<SeparationConfig> {
    let mut c = SeparationConfig::desk_for(2)?;
    c.seeds = 2;
    c.dp.steps = Some(500);
    Ok(c)
}

fn check_public_step() -> Result<(bool, String)> {
    let c = small_config()?;
    let (_, public, _) = seed_datasets(&c, "separation", 0, 0)?;
    let th = public_step(&c.spec, &public, None)?;
    let err = th.theta1.distance(&public.mean_d1()?)?;
    let ok = err <= 1e-15 && th.theta2.iter().all(|&x| x == 0.0);
    Ok((ok, format!("|theta1 - mean| = {err:e}")))
}

fn check_ood() -> Result<(bool, String)> {
    let mut c = small_config()?;
    c.mode = TaskMode::Ood;
    let (_, public, _) = seed_datasets(&c, "separation", 0, 1)?;
    let ok = public.points().iter().all(|d| d.d2.iter().all(|&x| x == 0.0));
    Ok((ok, format!("{} public points", public.len())))
}

fn check_clipping() -> Result<(bool, String)> {
    let c = small_config()?;
    let (_, _, private) = seed_datasets(&c, "separation", 0, 0)?;
    let dp = c.dp_config()?.with_steps(500);
    let clip = dp.clip_norm;
    let start = ParamPoint::new(
        RealVector::basis(c.spec.dim1(), 0, 0.5),
        RealVector::zeros(c.spec.dim2()),
    );
    let tr = run_dpsgd(
        &c.spec,
        private.points(),
        &dp,
        &start,
        &mut stream!(0, "selftest", "clip"),
    )?;
    Ok((
        tr.max_clipped_grad_norm <= clip,
        format!("max {} <= L = {clip}", tr.max_clipped_grad_norm),
    ))
}

fn check_projection() -> Result<(bool, String)> {
    let c = small_config()?;
    let (_, _, private) = seed_datasets(&c, "separation", 0, 0)?;
    let q = QuadraticLossSpec::matching(&c.spec);
    let mut dp = c
        .dp_config()?
        .with_steps(500)
        .with_projection(Projection::balls(1.0, c.spec.radius2()));
    dp.record_every = Some(1);
    let tr = run_dpsgd(
        &q,
        private.points(),
        &dp,
        &ParamPoint::origin(c.spec.dim1(), c.spec.dim2()),
        &mut stream!(0, "selftest", "proj"),
    )?;
    Ok((
        tr.constraint_violations == 0,
        format!("{} violations", tr.constraint_violations),
    ))
}

fn check_schedule() -> Result<(bool, String)> {
    let f = NoiseSchedule::front_loaded(10_000, 100, 0.6f64.sqrt())?;
    let b = NoiseSchedule::back_loaded(10_000, 100, 0.6f64.sqrt())?;
    let u = NoiseSchedule::uniform(10_000);
    let ok = f.same_budget(&u) && b.same_budget(&u);
    Ok((
        ok,
        format!(
            "costs {} {} {}",
            f.privacy_cost(),
            b.privacy_cost(),
            u.privacy_cost()
        ),
    ))
}

fn check_accountant() -> Result<(bool, String)> {
    let mut prev = 0.0;
    let mut ok = account_epsilon(2.0, 0, 100, 1e-5)? == 0.0;
    for t in [1, 10, 100, 1000, 10_000] {
        let e = account_epsilon(2.0, t, 100, 1e-5)?;
        ok &= e >= prev;
        prev = e;
    }
    Ok((ok, format!("eps(T=1e4) = {prev}")))
}

fn check_plane() -> Result<(bool, String)> {
    let spec = BasinLossSpec::toy();
    let d = DataPoint::new(RealVector::new(vec![0.5])?, RealVector::new(vec![0.005])?);
    let p = |a: f64, b: f64| -> Result<ParamPoint> {
        Ok(ParamPoint::new(
            RealVector::new(vec![a])?,
            RealVector::new(vec![b])?,
        ))
    };
    let (a, b, c) = (p(0.5, 0.005)?, p(0.13, 0.001)?, p(-0.41, -0.007)?);
    let f = |t: &ParamPoint| composite_loss(&spec, t, &d);
    let g = interpolation_plane(f, &a, &b, &c, (5, 5), 1)?;
    let ok = g.get(1, 1) == f(&a)? && g.get(5, 1) == f(&b)? && g.get(1, 5) == f(&c)?;
    Ok((ok, "corner identities".into()))
}

fn check_streams() -> Result<(bool, String)> {
    let mut a = stream!(42, "x", 1usize);
    let mut b = stream!(42, "x", 1usize);
    let ok = (0..100).all(|_| a.standard_normal() == b.standard_normal());
    Ok((ok, "same path, same draws".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let r = run_selftest();
        for c in &r.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(r.failed(), 0);
    }

    #[test]
    fn fd_checker_detects_wrong_gradients() {
        struct Wrong;
        impl BlockLoss for Wrong {
            fn dims(&self) -> (usize, usize) {
                (2, 1)
            }
            fn value_slices(&self, t1: &[f64], t2: &[f64], _: &[f64], _: &[f64]) -> f64 {
                t1[0] * t1[0] + t1[1] + t2[0]
            }
            fn grad_slices(
                &self,
                t1: &[f64],
                _: &[f64],
                _: &[f64],
                _: &[f64],
                g1: &mut [f64],
                g2: &mut [f64],
            ) {
                g1[0] = t1[0]; // should be 2 t1[0]
                g1[1] = 1.0;
                g2[0] = 1.0;
            }
        }
        let th = ParamPoint::new(RealVector::new(vec![1.0, 0.0]).unwrap(), RealVector::zeros(1));
        let d = DataPoint::new(RealVector::zeros(2), RealVector::zeros(1));
        assert!(gradient_fd_error(&Wrong, &th, &d, 1e-6, 1e-6).unwrap() > 0.1);
    }
}
