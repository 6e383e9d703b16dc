//! Factorisation of the point-to-point partition function.
//!
//! With `L = T`, the error `E[(P - Z_ell(0) Zrev_{L,ell}(x))^2]` is assembled
//! from three replica moments: `E[P^2]` (computed once per `x`), the cross
//! moment and `E[Z_ell^2]`. The cross moment is at least one, which gives the
//! far-regime bound `E[P^2] + E[Z_ell^2]^2 - 2`.

use serde::{Deserialize, Serialize};

use crate::experiments::report::{Provenance, Row, StatReport};
use crate::experiments::{check_beta, check_count, check_delta, check_positive, config_hash, default_delta, Resources};
use crate::mathkernel::{Mollifier, ScaleParams};
use crate::polymer::{llt_b_term, llt_cross_moment, p2p_second_moment, second_moment_at, ReplicaOpts};
use crate::rng::derive;
use crate::stats::{trend, Direction};
use crate::{Error, Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LltConfig {
    pub beta_hat: f64,
    /// Point-to-point horizon, also the `T` of the disorder scaling.
    pub big_l: f64,
    pub ells: Vec<f64>,
    /// Windows probed at `|x| = sqrt(L log L)`.
    pub far_ells: Vec<f64>,
    pub pairs: usize,
    pub delta: f64,
    pub slack: f64,
}

impl Default for LltConfig {
    fn default() -> Self {
        Self {
            beta_hat: 0.5,
            big_l: 1e4,
            ells: vec![10.0, 100.0, 1000.0],
            far_ells: vec![10.0, 100.0],
            pairs: 30_000,
            delta: default_delta(),
            slack: 2.0,
        }
    }
}

struct Assembled {
    error: f64,
    stderr: f64,
    cross: f64,
    z2: f64,
}

impl LltConfig {
    pub fn validate(&self) -> Result<()> {
        check_beta("beta_hat", self.beta_hat)?;
        check_positive("big_l", self.big_l)?;
        if self.big_l <= 2.0 {
            return Err(Error::config("big_l", "must exceed 2"));
        }
        for (key, ls) in [("ells", &self.ells), ("far_ells", &self.far_ells)] {
            for &l in ls.iter() {
                if !(l >= 1.0 && 2.0 * l < self.big_l) {
                    return Err(Error::config(
                        key,
                        format!("window {l} violates 1 <= ell < L / 2 = {}", self.big_l / 2.0),
                    ));
                }
            }
            if ls.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(key, "windows must be strictly increasing"));
            }
        }
        check_count("pairs", self.pairs, 2)?;
        check_delta(self.delta)
    }

    pub fn resources(&self) -> Resources {
        let n = (self.ells.len() + self.far_ells.len()) as f64;
        let secs = self.pairs as f64 * 1e-4 * self.big_l.log10() * (2.0 + 2.0 * n);
        Resources::seconds(self.pairs as f64 * 8.0, secs)
    }

    pub fn far_point(&self) -> Point {
        [(self.big_l * self.big_l.ln()).sqrt(), 0.0]
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        let mut rep = StatReport::new("llt", config_hash(self), seed);
        rep.notes.push(format!("L = T = {}; microscopic units", self.big_l));
        let m = Mollifier::bump();
        let params = ScaleParams::from_horizon(self.big_l, self.beta_hat, self.delta)?;
        let beta = params.beta_eps;
        let opts = |tag: u64| ReplicaOpts::new(&m, derive(&[seed, tag]));
        let p2 = p2p_second_moment(self.big_l, beta, &opts(1), self.pairs)?;
        rep.push(
            Row::new("p2p_second_moment", p2.mean, p2.stderr, p2.n_samples)
                .at(self.big_l, self.beta_hat)
                .param("ell", self.big_l),
        );
        let assemble = |ell: f64, x: Point, tag: u64| -> Result<Assembled> {
            let cross = llt_cross_moment(self.big_l, ell, x, beta, &opts(tag), self.pairs)?;
            let z2 = second_moment_at(beta * beta, [0.0, 0.0], ell, &opts(tag + 1), self.pairs)?;
            Ok(Assembled {
                error: p2.mean - 2.0 * cross.mean + z2.mean * z2.mean,
                stderr: (p2.stderr.powi(2) + 4.0 * cross.stderr.powi(2) + (2.0 * z2.mean * z2.stderr).powi(2)).sqrt(),
                cross: cross.mean,
                z2: z2.mean,
            })
        };

        let mut near = Vec::new();
        for (k, &ell) in self.ells.iter().enumerate() {
            let a = assemble(ell, [0.0, 0.0], 100 + 2 * k as u64)?;
            // the shared E[P^2] cancels in ladder differences
            let diff_se = (a.stderr.powi(2) - p2.stderr.powi(2)).max(0.0).sqrt();
            near.push((a.error, diff_se));
            rep.push(
                Row::new("llt_error", a.error, a.stderr, p2.n_samples)
                    .at(self.big_l, self.beta_hat)
                    .param("ell", ell),
            );
            rep.push(
                Row::new("llt_cross_moment", a.cross, f64::NAN, p2.n_samples)
                    .at(self.big_l, self.beta_hat)
                    .param("ell", ell),
            );
            rep.push(
                Row::new("z_ell_second_moment", a.z2, f64::NAN, p2.n_samples)
                    .at(self.big_l, self.beta_hat)
                    .param("ell", ell),
            );
            let b = llt_b_term(self.big_l, ell, [0.0, 0.0], beta, &opts(200 + k as u64), self.pairs)?;
            let ok = b.mean == 0.0;
            rep.push(
                Row::new("b_term_origin", b.mean, b.stderr, b.n_samples)
                    .at(self.big_l, self.beta_hat)
                    .param("ell", ell)
                    .reference(0.0, 0.0, Provenance::Trivial)
                    .judged(0.0, ok),
            );
            rep.check(format!("b_term_zero@ell={ell}"), ok, format!("{}", b.mean));
        }
        if near.len() > 1 {
            let tr = trend(&near, Direction::Decreasing, self.slack);
            rep.check(
                "error_decreasing",
                tr.monotone,
                format!("errors {:?}", near.iter().map(|v| v.0).collect::<Vec<_>>()),
            );
            rep.trends.push(("llt_error".into(), tr));
        }

        // E[P^2] does not depend on the endpoint: the difference of two
        // bridges to x is a bridge to 0.
        let far = self.far_point();
        for (k, &ell) in self.far_ells.iter().enumerate() {
            let a = assemble(ell, far, 300 + 2 * k as u64)?;
            let bound = p2.mean + a.z2 * a.z2 - 2.0;
            let ok = a.error <= bound + self.slack * a.stderr;
            rep.push(
                Row::new("llt_error_far", a.error, a.stderr, p2.n_samples)
                    .at(self.big_l, self.beta_hat)
                    .param("ell", ell)
                    .reference(bound, a.stderr, Provenance::ReplicaOracle)
                    .judged(self.slack, ok),
            );
            rep.check(
                format!("far_bounded@ell={ell}"),
                ok,
                format!(
                    "|x| = {:.2}: {:.4} +- {:.4} vs bound {bound:.4}",
                    far[0], a.error, a.stderr
                ),
            );
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_are_validated() {
        let c = LltConfig {
            ells: vec![10.0, 6000.0],
            ..LltConfig::default()
        };
        match c.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "ells"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_run_has_exact_b_terms() {
        let c = LltConfig {
            big_l: 200.0,
            ells: vec![2.0, 20.0],
            far_ells: vec![2.0],
            pairs: 2000,
            ..LltConfig::default()
        };
        let r = c.run(7).unwrap();
        assert!(r.find_check("b_term_zero@ell=2").unwrap().passed);
        assert!(r.rows.iter().any(|r| r.quantity == "llt_error_far"));
    }
}
