//! Fluctuations of `f`-integrated transforms of the lattice solution against
//! the Gaussian covariance kernel.
//!
//! For each noise replica and observable `k` the statistic is
//! `beta_eps^-1 int f(x) F(u(t, x)) dx` on the macroscopic scale, computed on
//! a microscopic lattice (mollifier width 1, `x = y / sqrt T`). Observables
//! sharing `(beta_hat, u0)` read the same run; all runs of a replica share the
//! noise. Centering uses the cross-replica sample mean.

use serde::{Deserialize, Serialize};

use crate::experiments::report::{Provenance, Row, StatReport, Table};
use crate::experiments::{
    check_beta, check_count, check_delta, check_ladder, check_positive, check_stability, config_hash, default_delta,
    ObservableConfig, Resources,
};
use crate::limitfield::{i_of_ubar, CovKernel, ObservableSpec, StatisticSamples, TestFunction};
use crate::mathkernel::{InitialCondition, ScaleParams, TransformF};
use crate::rng::derive;
use crate::spde::{integrate_she, IntegratorConfig};
use crate::stats::{trend, Direction};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EwConfig {
    pub observables: Vec<ObservableConfig>,
    pub t_values: Vec<f64>,
    pub replicas: usize,
    /// Lattice nodes per mollifier width.
    pub per_eps: f64,
    /// Macroscopic margin around the support of `f` in units of `sqrt(t)`.
    pub spread: f64,
    /// Lattice time step; `None` takes the largest stable one.
    pub dt: Option<f64>,
    /// Cap on `replicas x runs x node-steps` per `T`.
    pub work_budget: f64,
    pub delta: f64,
    /// Tolerance between the kernel and its independent closed form.
    pub quad_tol: f64,
    pub rel_tol: f64,
    pub slack: f64,
}

impl Default for EwConfig {
    fn default() -> Self {
        Self {
            observables: vec![ObservableConfig::standard(0.5)],
            t_values: vec![1e3, 1e4],
            replicas: 200,
            per_eps: 2.0,
            spread: 3.0,
            dt: None,
            work_budget: 2e11,
            delta: default_delta(),
            quad_tol: 1e-5,
            rel_tol: 0.2,
            slack: 2.0,
        }
    }
}

/// Closed form of the kernel for flat data and single Gaussian test
/// functions with a common centre, `None` outside that case.
pub fn flat_gaussian_covariance(a: &ObservableSpec, b: &ObservableSpec) -> Option<f64> {
    let (ma, ca, sa) = match a.f {
        TestFunction::Gaussian { mass, center, sd } => (mass, center, sd),
        _ => return None,
    };
    let (mb, cb, sb) = match b.f {
        TestFunction::Gaussian { mass, center, sd } => (mass, center, sd),
        _ => return None,
    };
    let (ua, ub) = match (&a.u0, &b.u0) {
        (InitialCondition::Flat { value: x }, InitialCondition::Flat { value: y }) => (*x, *y),
        _ => return None,
    };
    if ca != cb {
        return None;
    }
    let i = |f: &TransformF, u: f64, bh: f64| -> Option<f64> {
        match f {
            TransformF::Identity => Some(1.0),
            TransformF::Log => Some(1.0 / u),
            TransformF::Power(p) => Some(crate::limitfield::i_power_closed_form(*p, u, bh)),
            TransformF::Custom { .. } => None,
        }
    };
    let ia = i(&a.transform, ua, a.beta_hat)?;
    let ib = i(&b.transform, ub, b.beta_hat)?;
    let tau = a.t.min(b.t);
    let s = sa * sa + sb * sb;
    let pref = 1.0 / (1.0 - a.beta_hat * b.beta_hat);
    Some(pref * ma * mb * ua * ub * ia * ib * ((s + 2.0 * tau) / s).ln() / (4.0 * std::f64::consts::PI))
}

struct Group {
    beta_hat: f64,
    u0: InitialCondition,
    members: Vec<usize>,
}

impl EwConfig {
    pub fn specs(&self) -> Result<Vec<ObservableSpec>> {
        self.observables.iter().map(ObservableConfig::to_spec).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.observables.is_empty() {
            return Err(Error::config("observables", "at least one observable is required"));
        }
        for (i, o) in self.observables.iter().enumerate() {
            let key = format!("observables[{i}]");
            check_beta(&format!("{key}.beta_hat"), o.beta_hat)?;
            if o.beta_hat == 0.0 {
                return Err(Error::config(
                    format!("{key}.beta_hat"),
                    "the statistic divides by beta_eps and needs beta_hat > 0",
                ));
            }
            check_positive(&format!("{key}.t"), o.t)?;
            o.to_spec().map_err(|e| Error::config(key.clone(), e.to_string()))?;
        }
        check_ladder("t_values", &self.t_values, 3.0)?;
        check_count("replicas", self.replicas, 2)?;
        if !(self.per_eps >= 2.0) {
            return Err(Error::config(
                "per_eps",
                "the mollifier needs at least two nodes per width",
            ));
        }
        check_positive("spread", self.spread)?;
        check_stability("dt", self.dt, 1.0 / self.per_eps)?;
        check_positive("work_budget", self.work_budget)?;
        check_positive("quad_tol", self.quad_tol)?;
        check_positive("rel_tol", self.rel_tol)?;
        check_delta(self.delta)?;
        let min_sd = self
            .observables
            .iter()
            .map(|o| o.f.min_sd())
            .fold(f64::INFINITY, f64::min);
        let dx = 1.0 / self.per_eps;
        for &t in &self.t_values {
            if min_sd * t.sqrt() < 2.0 * dx {
                return Err(Error::config(
                    "t_values",
                    format!("f with sd {min_sd} is under-resolved at T = {t} by lattice spacing {dx}"),
                ));
            }
        }
        Ok(())
    }

    fn t_max(&self) -> f64 {
        self.observables.iter().map(|o| o.t).fold(0.0, f64::max)
    }

    fn groups(&self) -> Vec<Group> {
        let mut out: Vec<Group> = Vec::new();
        for (k, o) in self.observables.iter().enumerate() {
            match out.iter_mut().find(|g| g.beta_hat == o.beta_hat && g.u0 == o.u0) {
                Some(g) => g.members.push(k),
                None => out.push(Group {
                    beta_hat: o.beta_hat,
                    u0: o.u0.clone(),
                    members: vec![k],
                }),
            }
        }
        out
    }

    /// Microscopic lattice for horizon `T`.
    pub fn lattice(&self, t_micro: f64) -> IntegratorConfig {
        let s = t_micro.sqrt();
        let horizon = self.t_max() * t_micro;
        let reach = self
            .observables
            .iter()
            .flat_map(|o| o.f.components())
            .map(|c| c.center[0].abs().max(c.center[1].abs()) + 5.0 * c.sd)
            .fold(0.0, f64::max);
        let half = reach + self.spread * self.t_max().sqrt();
        let mut c = IntegratorConfig::for_horizon(1.0, self.per_eps, horizon, 0.0, 2.0 * half * s);
        c.x_scale = 1.0 / s;
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        let mut snaps: Vec<f64> = self.observables.iter().map(|o| o.t * t_micro).collect();
        snaps.sort_by(|a, b| a.total_cmp(b));
        snaps.dedup();
        c.snapshots = snaps;
        c.work_budget = f64::INFINITY;
        c
    }

    /// Node-steps of the whole Monte Carlo stage at `T`.
    pub fn mc_work(&self, t_micro: f64) -> f64 {
        let lat = self.lattice(t_micro);
        self.replicas as f64 * self.groups().len() as f64 * lat.work(self.t_max() * t_micro)
    }

    pub fn resources(&self) -> Resources {
        let mut secs = 5.0 * self.observables.len().pow(2) as f64;
        let mut bytes: f64 = 0.0;
        for &t in &self.t_values {
            let work = self.mc_work(t);
            if work <= self.work_budget {
                secs += work * 8e-8;
            }
            let n = self.lattice(t).nodes_per_axis() as f64;
            bytes = bytes.max(n * n * 40.0);
        }
        Resources::seconds(bytes, secs)
    }

    /// Statistic draws at horizon `T`, one row per replica.
    pub fn simulate(&self, t_micro: f64, seed: u64) -> Result<StatisticSamples> {
        let lat = self.lattice(t_micro);
        let horizon = self.t_max() * t_micro;
        let s = t_micro.sqrt();
        let area = lat.dx * lat.dx / t_micro;
        let specs = self.specs()?;
        let groups = self.groups();
        let mut rows = Vec::with_capacity(self.replicas);
        for r in 0..self.replicas as u64 {
            let mut row = vec![0.0; specs.len()];
            for g in &groups {
                let params = ScaleParams::from_horizon(t_micro, g.beta_hat, self.delta)?;
                let traj = integrate_she(&g.u0, horizon, &params, &lat, seed, r)?;
                for &k in &g.members {
                    let spec = &specs[k];
                    let idx = lat
                        .snapshots
                        .iter()
                        .position(|&x| x == spec.t * t_micro)
                        .expect("snapshot scheduled");
                    let field = &traj.snapshots[idx];
                    let mut acc = 0.0;
                    for iy in 0..field.ny {
                        for ix in 0..field.nx {
                            let p = field.node(ix, iy);
                            let w = spec.f.eval([p[0] / s, p[1] / s]);
                            if w != 0.0 {
                                acc += w * spec.transform.eval(0, field.at(ix, iy))?;
                            }
                        }
                    }
                    row[k] = acc * area / params.beta_eps;
                }
            }
            rows.push(row);
        }
        Ok(StatisticSamples { dim: specs.len(), rows })
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        let mut rep = StatReport::new("ew-fluct", config_hash(self), seed);
        let specs = self.specs()?;
        let kernel = CovKernel::build(&specs)?;
        let n = specs.len();
        rep.notes.push(format!(
            "microscopic lattice dx = 1/{}; statistics centred by the cross-replica mean; kernel error bound {:.2e}",
            self.per_eps,
            kernel.max_error()
        ));
        // matrix layout with a header row of spec hashes
        let mut kt = Table {
            columns: kernel.hashes.clone(),
            rows: Vec::new(),
        };
        for i in 0..n {
            kt.push_floats(&(0..n).map(|j| kernel.get(i, j)).collect::<Vec<_>>());
        }
        rep.tables.push(("kernel".into(), kt));

        for i in 0..n {
            for j in i..n {
                let Some(exact) = flat_gaussian_covariance(&specs[i], &specs[j]) else {
                    continue;
                };
                let k = kernel.get(i, j);
                let ok = (k - exact).abs() <= self.quad_tol;
                rep.push(
                    Row::new("kernel_quadrature", k, kernel.errors[i * n + j], 0)
                        .at(f64::NAN, specs[i].beta_hat)
                        .param("pair", (i * n + j) as f64)
                        .reference(exact, 0.0, Provenance::Formula)
                        .judged(self.quad_tol, ok),
                );
                rep.check(
                    format!("kernel_closed_form@{i},{j}"),
                    ok,
                    format!("quadrature {k:.12}, closed form {exact:.12}"),
                );
            }
        }
        for (i, s) in specs.iter().enumerate() {
            if let InitialCondition::Flat { value } = s.u0 {
                rep.push(
                    Row::new(
                        "i_coefficient",
                        i_of_ubar(value, &s.transform, s.beta_hat)?,
                        f64::NAN,
                        0,
                    )
                    .at(f64::NAN, s.beta_hat)
                    .param("observable", i as f64),
                );
            }
        }

        let mut ladder = Vec::new();
        for (ti, &t) in self.t_values.iter().enumerate() {
            let work = self.mc_work(t);
            if work > self.work_budget {
                let msg = format!(
                    "T = {t}: Monte Carlo stage needs {work:.3e} node-steps, budget is {:.3e}",
                    self.work_budget
                );
                rep.check(format!("mc@T={t}"), false, msg.clone());
                rep.blocked.push(msg);
                continue;
            }
            let samples = self.simulate(t, derive(&[seed, 0xE3, ti as u64]))?;
            let cov = samples.covariance();
            let se = samples.covariance_stderr();
            let mut all = true;
            for i in 0..n {
                for j in i..n {
                    let k = kernel.get(i, j);
                    let scale = (kernel.get(i, i) * kernel.get(j, j)).sqrt();
                    let ok = (cov[(i, j)] - k).abs() <= self.rel_tol * scale;
                    all &= ok;
                    rep.push(
                        Row::new("statistic_covariance", cov[(i, j)], se[(i, j)], samples.len() as u64)
                            .at(t, specs[i].beta_hat)
                            .param("pair", (i * n + j) as f64)
                            .reference(k, kernel.errors[i * n + j], Provenance::Quadrature)
                            .judged(self.rel_tol, ok),
                    );
                }
            }
            let rel = (cov[(0, 0)] / kernel.get(0, 0) - 1.0).abs();
            ladder.push((rel, se[(0, 0)] / kernel.get(0, 0)));
            rep.check(
                format!("mc@T={t}"),
                all,
                format!(
                    "variance {:.6} +- {:.6}, kernel {:.6}",
                    cov[(0, 0)],
                    se[(0, 0)],
                    kernel.get(0, 0)
                ),
            );
        }
        if self.t_values.len() > 1 {
            if ladder.len() == self.t_values.len() {
                let tr = trend(&ladder, Direction::Decreasing, self.slack);
                rep.check(
                    "trend_toward_kernel",
                    tr.monotone,
                    format!("relative errors {:?}", ladder),
                );
                rep.trends.push(("relative_error".into(), tr));
            } else {
                rep.check(
                    "trend_toward_kernel",
                    false,
                    "ladder incomplete: Monte Carlo stage blocked",
                );
            }
        }
        Ok(rep)
    }
}
