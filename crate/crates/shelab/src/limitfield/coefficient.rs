use crate::mathkernel::quadrature::gauss_hermite_64;
use crate::mathkernel::{sigma2, InitialCondition, TransformF};
use crate::{Error, Point, Result};

/// Largest tolerated gap between the tilted and untilted forms.
pub const FORM_TOLERANCE: f64 = 1e-4;

/// Both forms of `I` for a given `u_bar` value.
///
/// Tilted: `E[F'(e^{X + sigma^2} u)]`; untilted: `E[F'(e^X u) e^X]`.
pub fn i_forms(u: f64, f: &TransformF, beta_hat: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&beta_hat) {
        return Err(Error::Subcritical(beta_hat));
    }
    if !(u > 0.0) {
        return Err(Error::domain(format!("u_bar must be positive, got {u}")));
    }
    let s2 = sigma2(beta_hat);
    if s2 == 0.0 {
        let v = f.eval(1, u)?;
        return Ok((v, v));
    }
    let s = s2.sqrt();
    let gh = gauss_hermite_64();
    let mut tilted = 0.0;
    let mut plain = 0.0;
    for (&z, &w) in gh.nodes.iter().zip(&gh.weights) {
        let x = s * z - 0.5 * s2;
        tilted += w * f.eval(1, (x + s2).exp() * u)?;
        plain += w * f.eval(1, x.exp() * u)? * x.exp();
    }
    Ok((tilted, plain))
}

/// `I(x) = E[F'(e^{X} u_bar(t, x)) e^{X}]`, by 64-node Gauss-Hermite in the
/// tilted form and cross-checked against the untilted form.
pub fn i_coefficient(t: f64, x: Point, f: &TransformF, beta_hat: f64, u0: &InitialCondition) -> Result<f64> {
    let u = u0.u_bar(t, x)?;
    i_of_ubar(u, f, beta_hat)
}

pub fn i_of_ubar(u: f64, f: &TransformF, beta_hat: f64) -> Result<f64> {
    let (a, b) = i_forms(u, f, beta_hat)?;
    let gap = (a - b).abs();
    if gap > FORM_TOLERANCE * a.abs().max(1.0) {
        return Err(Error::numeric(
            format!("tilted and untilted I disagree: {a} vs {b}"),
            gap,
        ));
    }
    Ok(a)
}

/// `p u^{p-1} (1 - beta_hat^2)^{p (1 - p) / 2}`.
pub fn i_power_closed_form(p: f64, u: f64, beta_hat: f64) -> f64 {
    p * u.powf(p - 1.0) * (1.0 - beta_hat * beta_hat).powf(0.5 * p * (1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_one() {
        let i = i_coefficient(1.0, [0.0, 0.0], &TransformF::Identity, 0.7, &InitialCondition::flat()).unwrap();
        assert!((i - 1.0).abs() < 1e-8);
    }

    #[test]
    fn log_is_inverse_ubar() {
        let u0 = InitialCondition::sine(0.5);
        let x = [0.3, 0.0];
        let i = i_coefficient(1.0, x, &TransformF::Log, 0.5, &u0).unwrap();
        assert!((i - 1.0 / u0.u_bar(1.0, x).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn sqrt_closed_form() {
        let i = i_coefficient(
            1.0,
            [0.0, 0.0],
            &TransformF::power(0.5).unwrap(),
            0.5,
            &InitialCondition::flat(),
        )
        .unwrap();
        // 0.5 * 0.75^(1/8) by independent evaluation
        assert!((i - 0.482_339_314_980_154_7).abs() < 1e-9, "{i}");
        assert!((i - i_power_closed_form(0.5, 1.0, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn forms_agree_over_beta() {
        for f in [
            TransformF::Identity,
            TransformF::Log,
            TransformF::power(0.5).unwrap(),
            TransformF::power(0.1).unwrap(),
        ] {
            for k in 1..10 {
                let (a, b) = i_forms(1.7, &f, k as f64 / 10.0).unwrap();
                assert!((a - b).abs() < 1e-6, "{f:?} {k} {a} {b}");
            }
        }
    }
}
