//! Adaptive simulation of collision functionals `int_0^t V(a_s - b_s + h_j(s)) ds`.
//!
//! Two Brownian legs `a`, `b` (free or pinned, each with its own diffusivity)
//! are advanced with exact Gaussian transitions. The step is fine while the
//! separation is near the support of `V` and grows quadratically with the
//! gap elsewhere, so long horizons cost roughly `O(log t)` coarse steps.
//! Several deterministic affine shifts `h_j(s) = offset_j + drift_j s` share
//! the same legs, which gives common random numbers across shifts.

use rand::Rng;

use crate::mathkernel::Mollifier;
use crate::polymer::path::step;
use crate::{Error, Point, Result};

/// One Brownian leg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Motion {
    Free {
        start: Point,
    },
    /// Pinned at `end` at time `duration` (the leg is frozen afterwards).
    Bridge {
        start: Point,
        end: Point,
        duration: f64,
    },
}

impl Motion {
    fn start(&self) -> Point {
        match *self {
            Motion::Free { start } | Motion::Bridge { start, .. } => start,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg {
    pub motion: Motion,
    /// Covariance per unit time of each coordinate.
    pub diffusivity: f64,
}

impl Leg {
    pub fn free(start: Point, diffusivity: f64) -> Self {
        Self {
            motion: Motion::Free { start },
            diffusivity,
        }
    }

    pub fn bridge(start: Point, end: Point, duration: f64, diffusivity: f64) -> Self {
        Self {
            motion: Motion::Bridge { start, end, duration },
            diffusivity,
        }
    }

    /// A leg that never moves.
    pub fn fixed(at: Point) -> Self {
        Self::free(at, 0.0)
    }

    fn pin(&self, s: f64) -> Option<(Point, f64)> {
        match self.motion {
            Motion::Bridge { end, duration, .. } => Some((end, (duration - s).max(0.0))),
            Motion::Free { .. } => None,
        }
    }

    fn advance<R: Rng>(&self, rng: &mut R, pos: Point, s: f64, h: f64) -> Point {
        match self.pin(s) {
            Some((end, rem)) if rem <= 0.0 => end,
            pin if self.diffusivity == 0.0 => match pin {
                Some((end, rem)) => {
                    let a = (h / rem).min(1.0);
                    [pos[0] + a * (end[0] - pos[0]), pos[1] + a * (end[1] - pos[1])]
                }
                None => pos,
            },
            pin => step(rng, pos, h, pin, self.diffusivity),
        }
    }

    /// Speed bound of the bridge drift from `pos` at time `s`.
    fn drift(&self, pos: Point, s: f64) -> f64 {
        match self.pin(s) {
            Some((end, rem)) if rem > 0.0 => (end[0] - pos[0]).hypot(end[1] - pos[1]) / rem,
            _ => 0.0,
        }
    }
}

/// Deterministic affine shift of the separation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Shift {
    pub offset: Point,
    pub drift: Point,
}

impl Shift {
    pub fn constant(offset: Point) -> Self {
        Self {
            offset,
            drift: [0.0, 0.0],
        }
    }

    #[inline]
    fn at(&self, s: f64) -> Point {
        [self.offset[0] + self.drift[0] * s, self.offset[1] + self.drift[1] * s]
    }
}

/// Step-size policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRule {
    /// Step used near the support of `V`.
    pub fine: f64,
    /// Distance outside the support below which the fine step is used.
    pub margin: f64,
    /// Coarse steps satisfy `h <= gap^2 / (kappa (c_a + c_b))`.
    pub kappa: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            fine: 0.02,
            margin: 1.0,
            kappa: 40.0,
        }
    }
}

/// Outcome of one walk.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkResult {
    /// `int_0^t V(a - b + h_j)` for each shift.
    pub integrals: Vec<f64>,
    pub a: Point,
    pub b: Point,
    pub steps: usize,
}

/// Collision walk over `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct CollisionWalk<'m> {
    pub v: &'m Mollifier,
    pub a: Leg,
    pub b: Leg,
    pub horizon: f64,
    pub shifts: Vec<Shift>,
    pub rule: StepRule,
}

impl<'m> CollisionWalk<'m> {
    pub fn new(v: &'m Mollifier, a: Leg, b: Leg, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::domain(format!(
                "walk horizon must be finite and non-negative, got {horizon}"
            )));
        }
        for leg in [a, b] {
            if !(leg.diffusivity >= 0.0) {
                return Err(Error::domain("leg diffusivity must be non-negative"));
            }
            if let Motion::Bridge { duration, .. } = leg.motion {
                if !(duration > 0.0) {
                    return Err(Error::domain("bridge duration must be positive"));
                }
            }
        }
        Ok(Self {
            v,
            a,
            b,
            horizon,
            shifts: vec![Shift::default()],
            rule: StepRule::default(),
        })
    }

    pub fn with_shifts(mut self, shifts: Vec<Shift>) -> Self {
        assert!(!shifts.is_empty(), "at least one shift is required");
        self.shifts = shifts;
        self
    }

    pub fn with_rule(mut self, rule: StepRule) -> Self {
        self.rule = rule;
        self
    }

    #[inline]
    fn sep(a: Point, b: Point, h: Point) -> Point {
        [a[0] - b[0] + h[0], a[1] - b[1] + h[1]]
    }

    /// Run one realisation.
    pub fn run<R: Rng>(&self, rng: &mut R) -> WalkResult {
        let rv = self.v.v_support_radius();
        let c = self.a.diffusivity + self.b.diffusivity;
        let mut a = self.a.motion.start();
        let mut b = self.b.motion.start();
        let mut s = 0.0;
        let n = self.shifts.len();
        let mut acc = vec![0.0; n];
        let mut prev: Vec<f64> = self
            .shifts
            .iter()
            .map(|h| self.v.v(Self::sep(a, b, h.at(0.0))))
            .collect();
        let max_drift = self
            .shifts
            .iter()
            .map(|h| h.drift[0].hypot(h.drift[1]))
            .fold(0.0, f64::max);
        let mut steps = 0;
        while s < self.horizon {
            let rem = self.horizon - s;
            let gap = self
                .shifts
                .iter()
                .map(|h| {
                    let d = Self::sep(a, b, h.at(s));
                    d[0].hypot(d[1])
                })
                .fold(f64::INFINITY, f64::min)
                - rv;
            let mut h = self.rule.fine;
            if gap > self.rule.margin {
                if c > 0.0 {
                    h = h.max(gap * gap / (self.rule.kappa * c));
                } else {
                    h = rem;
                }
                let speed = self.a.drift(a, s) + self.b.drift(b, s) + max_drift;
                if speed > 0.0 {
                    h = h.min((0.25 * gap / speed).max(self.rule.fine));
                }
                // Stop at bridge end points so they are hit exactly.
                for leg in [self.a, self.b] {
                    if let Motion::Bridge { duration, .. } = leg.motion {
                        if duration > s {
                            h = h.min((duration - s).max(self.rule.fine));
                        }
                    }
                }
            }
            let h = h.min(rem);
            a = self.a.advance(rng, a, s, h);
            b = self.b.advance(rng, b, s, h);
            s += h;
            if rem - h <= 0.0 {
                s = self.horizon;
            }
            for (j, sh) in self.shifts.iter().enumerate() {
                let v = self.v.v(Self::sep(a, b, sh.at(s)));
                acc[j] += 0.5 * h * (prev[j] + v);
                prev[j] = v;
            }
            steps += 1;
        }
        WalkResult {
            integrals: acc,
            a,
            b,
            steps,
        }
    }
}
