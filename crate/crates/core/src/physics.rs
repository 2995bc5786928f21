//! Equation of state, potential function and scaling to dimensionless units.
//!
//! The CNGA compressibility model gives `rho = (b1 p + b2 p^2) / a^2` with
//! `a = sqrt(R_g T)`. Integrating the steady momentum balance along a pipe
//! yields a potential `pi(p) = b1/2 p^2 + b2/3 p^3` whose drop across the pipe
//! balances friction. Everything downstream works with the dimensionless
//! forms produced by a [`NondimContext`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Arc, ArcKind, GasConstants, Network};

const PSI_IN_PA: f64 = 6894.75729;
const CNGA_A1: f64 = 344_400.0;
const CNGA_A2: f64 = 1.785;
const CNGA_A3: f64 = 3.825;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("CNGA coefficient overflow; check G/T units")]
    CoefficientOverflow,
    #[error("invalid gas data: {0}")]
    InvalidInput(String),
    #[error("nominal values must be positive and finite")]
    BadNominals,
}

/// Which equation of state to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eos {
    #[default]
    Cnga,
    /// `b1 = 1`, `b2 = 0`.
    Ideal,
}

/// CNGA coefficients `(b1, b2)`; `b2` in 1/Pa. Satisfies `b1 = 1 + p_atm * b2`.
pub fn cnga_coefficients(
    temperature: f64,
    specific_gravity: f64,
    p_atm: f64,
) -> Result<(f64, f64), PhysicsError> {
    if !(temperature > 0.0 && specific_gravity > 0.0 && p_atm > 0.0) {
        return Err(PhysicsError::InvalidInput(
            "temperature, specific gravity and atmospheric pressure must be positive".into(),
        ));
    }
    let k = CNGA_A1 * 10f64.powf(CNGA_A2 * specific_gravity) / (1.8 * temperature).powf(CNGA_A3);
    let b1 = 1.0 + (p_atm / PSI_IN_PA) * k;
    let b2 = k / PSI_IN_PA;
    if !(b1.is_finite() && b2.is_finite()) {
        return Err(PhysicsError::CoefficientOverflow);
    }
    Ok((b1, b2))
}

pub fn eos_coefficients(gas: &GasConstants, eos: Eos) -> Result<(f64, f64), PhysicsError> {
    match eos {
        Eos::Ideal => Ok((1.0, 0.0)),
        Eos::Cnga => cnga_coefficients(gas.temperature, gas.specific_gravity, gas.p_atm),
    }
}

/// Friction factor from wall roughness (Nikuradse): `(2 log10(D/k) + 1.138)^-2`.
pub fn nikuradse(diameter: f64, roughness: f64) -> f64 {
    let t = 2.0 * (diameter / roughness).log10() + 1.138;
    1.0 / (t * t)
}

/// Nominal scales for length, pressure, velocity, area and, optionally, density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nominals {
    /// m
    pub l0: f64,
    /// Pa
    pub p0: f64,
    /// m/s
    pub v0: f64,
    /// m^2
    pub a0: f64,
    /// kg/m^3; `None` selects `p0 / a^2` so that the Euler-like constant is 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
}

impl Default for Nominals {
    fn default() -> Self {
        Self {
            l0: 1000.0,
            p0: 5.0e6,
            v0: 1.0,
            a0: 1.0,
            rho0: None,
        }
    }
}

/// Scales and derived constants tying SI data to the dimensionless model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondimContext {
    pub l0: f64,
    pub p0: f64,
    pub rho0: f64,
    pub v0: f64,
    pub a0: f64,
    pub f0: f64,
    pub pi0: f64,
    /// isothermal sound speed, m/s
    pub sound_speed: f64,
    /// `v0 / a`
    pub mach: f64,
    /// `p0 / (rho0 a^2)`
    pub euler: f64,
    pub b1: f64,
    pub b2: f64,
    pub b1_bar: f64,
    pub b2_bar: f64,
    pub eos: Eos,
}

impl NondimContext {
    pub fn new(gas: &GasConstants, nominals: Nominals, eos: Eos) -> Result<Self, PhysicsError> {
        let Nominals {
            l0,
            p0,
            v0,
            a0,
            rho0,
        } = nominals;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(l0) && positive(p0) && positive(v0) && positive(a0)) {
            return Err(PhysicsError::BadNominals);
        }
        if !(gas.r_gas > 0.0 && gas.temperature > 0.0) {
            return Err(PhysicsError::InvalidInput(
                "R_g and T must be positive".into(),
            ));
        }
        let a = gas.sound_speed();
        let rho0 = rho0.unwrap_or(p0 / (a * a));
        if !positive(rho0) {
            return Err(PhysicsError::BadNominals);
        }
        let (b1, b2) = eos_coefficients(gas, eos)?;
        let euler = p0 / (rho0 * a * a);
        Ok(Self {
            l0,
            p0,
            rho0,
            v0,
            a0,
            f0: rho0 * v0 * a0,
            pi0: rho0 * p0 * a * a,
            sound_speed: a,
            mach: v0 / a,
            euler,
            b1,
            b2,
            b1_bar: euler * b1,
            b2_bar: euler * p0 * b2,
            eos,
        })
    }

    /// Same scales with the ideal equation of state.
    pub fn ideal(&self) -> Self {
        Self {
            b1: 1.0,
            b2: 0.0,
            b1_bar: self.euler,
            b2_bar: 0.0,
            eos: Eos::Ideal,
            ..*self
        }
    }

    /// `(b1_bar/2) p^2 + (b2_bar/3) p^3`
    pub fn potential(&self, p: f64) -> f64 {
        p * p * (0.5 * self.b1_bar + self.b2_bar * p / 3.0)
    }

    pub fn potential_derivative(&self, p: f64) -> f64 {
        p * (self.b1_bar + self.b2_bar * p)
    }

    /// `b1_bar p + b2_bar p^2`
    pub fn density(&self, p: f64) -> f64 {
        p * (self.b1_bar + self.b2_bar * p)
    }

    /// Dimensionless pressure with the given potential, by safeguarded Newton
    /// on `[0, p_hi]`; `p_hi` is grown until it brackets the root.
    pub fn pressure_from_potential(&self, pi: f64) -> Option<f64> {
        if !(pi >= 0.0) {
            return None;
        }
        if pi == 0.0 {
            return Some(0.0);
        }
        let mut hi = (2.0 * pi / self.b1_bar).sqrt().max(1.0);
        while self.potential(hi) < pi {
            hi *= 2.0;
            if !hi.is_finite() {
                return None;
            }
        }
        safeguarded_newton(
            |p| self.potential(p) - pi,
            |p| self.potential_derivative(p),
            0.0,
            hi,
        )
    }

    pub fn pressure(&self, p_pa: f64) -> f64 {
        p_pa / self.p0
    }
    pub fn pressure_si(&self, p: f64) -> f64 {
        p * self.p0
    }
    pub fn flow(&self, f_kg_s: f64) -> f64 {
        f_kg_s / self.f0
    }
    pub fn flow_si(&self, f: f64) -> f64 {
        f * self.f0
    }
    pub fn length(&self, l_m: f64) -> f64 {
        l_m / self.l0
    }
    pub fn length_si(&self, l: f64) -> f64 {
        l * self.l0
    }
    pub fn area(&self, a_m2: f64) -> f64 {
        a_m2 / self.a0
    }
    pub fn potential_scale(&self, pi_si: f64) -> f64 {
        pi_si / self.pi0
    }
    pub fn potential_si(&self, pi: f64) -> f64 {
        pi * self.pi0
    }

    /// `M^2 / E`
    pub fn friction_scale(&self) -> f64 {
        self.mach * self.mach / self.euler
    }
}

/// Context from the network's gas data and the given nominal scales.
pub fn build_context(
    network: &Network,
    nominals: Nominals,
    eos: Eos,
) -> Result<NondimContext, PhysicsError> {
    NondimContext::new(network.gas(), nominals, eos)
}

/// Pipe resistance `beta = (M^2/E) lambda L / (2 D A^2)` in scaled units.
/// Returns `None` for non-pipe arcs.
pub fn pipe_resistance(arc: &Arc, ctx: &NondimContext) -> Option<f64> {
    match arc.kind {
        ArcKind::Pipe {
            length,
            diameter,
            area,
            friction_factor,
        } => {
            let l = ctx.length(length);
            let d = ctx.length(diameter);
            let a = ctx.area(area);
            Some(ctx.friction_scale() * friction_factor * l / (2.0 * d * a * a))
        }
        _ => None,
    }
}

/// Resistor coefficient `(zeta / (2 A^2)) (M^2/E)`. `None` for non-resistors.
pub fn resistor_coefficient(arc: &Arc, ctx: &NondimContext) -> Option<f64> {
    match arc.kind {
        ArcKind::Resistor { drag, area } => {
            let a = ctx.area(area);
            Some(drag / (2.0 * a * a) * ctx.friction_scale())
        }
        _ => None,
    }
}

/// Friction coefficient multiplying `f|f|` for pipes and resistors.
pub fn friction_coefficient(arc: &Arc, ctx: &NondimContext) -> Option<f64> {
    pipe_resistance(arc, ctx).or_else(|| resistor_coefficient(arc, ctx))
}

/// Root of `f` in `[lo, hi]` by Newton steps that fall back to bisection
/// whenever a step leaves the current bracket. Requires a sign change.
pub fn safeguarded_newton(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let increasing = fb > 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if (fx > 0.0) == increasing {
            b = x;
        } else {
            a = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let scale = 1.0f64.max(next.abs());
        if (next - x).abs() <= 4.0 * f64::EPSILON * scale || (b - a) <= 4.0 * f64::EPSILON * scale {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Arc, GasConstants};

    fn ctx_with(b1_bar: f64, b2_bar: f64) -> NondimContext {
        let gas = GasConstants::default();
        let mut c = NondimContext::new(&gas, Nominals::default(), Eos::Ideal).unwrap();
        c.b1_bar = b1_bar;
        c.b2_bar = b2_bar;
        c
    }

    #[test]
    fn cnga_regression_fixture() {
        // 50-digit evaluation of the closed form
        let (b1, b2) = cnga_coefficients(288.706, 0.6, 101_350.0).unwrap();
        assert!((b1 - 1.002441783243904748).abs() < 1e-15);
        assert!((b2 / 2.409258257429450911e-8 - 1.0).abs() < 1e-13);
        assert!(((b1 - 101_350.0 * b2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn temperature_passed_as_gravity_overflows_cleanly() {
        // G = 288.706 makes 10^(a2 G) overflow
        assert_eq!(
            cnga_coefficients(288.706, 288.706, 101_350.0),
            Err(PhysicsError::CoefficientOverflow)
        );
    }

    #[test]
    fn ideal_override() {
        let gas = GasConstants::default();
        assert_eq!(eos_coefficients(&gas, Eos::Ideal).unwrap(), (1.0, 0.0));
        let c = NondimContext::new(&gas, Nominals::default(), Eos::Ideal).unwrap();
        assert_eq!(c.b1_bar, 1.0);
        assert_eq!(c.b2_bar, 0.0);
        assert_eq!(c.potential(2.0), 2.0);
        assert_eq!(c.density(1.5), 1.5);
    }

    #[test]
    fn explicit_density_scale() {
        let gas = GasConstants::default();
        let a = gas.sound_speed();
        let nominals = Nominals {
            rho0: Some(2.0 * 5.0e6 / (a * a)),
            ..Default::default()
        };
        let c = NondimContext::new(&gas, nominals, Eos::Cnga).unwrap();
        assert!((c.euler - 0.5).abs() < 1e-15);
        assert!((c.f0 - c.rho0 * c.v0 * c.a0).abs() < 1e-12);
        assert!((c.pi0 / (c.rho0 * c.p0 * a * a) - 1.0).abs() < 1e-15);
        assert!((c.b1_bar - 0.5 * c.b1).abs() < 1e-15);
    }

    #[test]
    fn potential_and_density_values() {
        let c = ctx_with(1.0, 0.3);
        assert_eq!(c.potential(0.0), 0.0);
        assert!((c.potential(1.0) - 0.6).abs() < 1e-15);
        assert_eq!(c.density(0.0), 0.0);
        assert!((c.density(2.0) - 3.2).abs() < 1e-15);
    }

    #[test]
    fn round_trips() {
        let gas = GasConstants::default();
        let c = NondimContext::new(&gas, Nominals::default(), Eos::Cnga).unwrap();
        for x in [1.0e5, 3.3e6, 7.123456789e6] {
            assert!((c.pressure_si(c.pressure(x)) / x - 1.0).abs() < 1e-12);
            assert!((c.flow_si(c.flow(x)) / x - 1.0).abs() < 1e-12);
            assert!((c.length_si(c.length(x)) / x - 1.0).abs() < 1e-12);
            assert!((c.potential_si(c.potential_scale(x)) / x - 1.0).abs() < 1e-12);
        }
        for p in [0.2, 1.0, 1.7] {
            let back = c.pressure_from_potential(c.potential(p)).unwrap();
            assert!((back - p).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_arithmetic() {
        let mut c = ctx_with(1.0, 0.0);
        c.mach = 1.0;
        c.euler = 1.0;
        c.l0 = 1.0;
        let mut pipe = Arc::pipe("p", "a", "b", 2.0, 1.0, 0.01, (0.0, 1.0));
        if let ArcKind::Pipe { area, .. } = &mut pipe.kind {
            *area = 1.0;
        }
        assert!((pipe_resistance(&pipe, &c).unwrap() - 0.01).abs() < 1e-15);
        let mut longer = pipe.clone();
        if let ArcKind::Pipe { length, .. } = &mut longer.kind {
            *length = 4.0;
        }
        assert!((pipe_resistance(&longer, &c).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn beta_gaslib_style_pipe() {
        // independent 50-digit evaluation: L = 10 km, D = 0.8 m, k = 0.012 mm
        let gas = GasConstants::default();
        assert!((gas.r_gas - 478.4250379484913).abs() < 1e-9);
        let c = NondimContext::new(&gas, Nominals::default(), Eos::Cnga).unwrap();
        let lambda = nikuradse(0.8, 1.2e-5);
        assert!((lambda - 0.0085959497150912263).abs() < 1e-15);
        let pipe = Arc::pipe("p", "a", "b", 10_000.0, 0.8, lambda, (0.0, 1.0));
        let beta = pipe_resistance(&pipe, &c).unwrap();
        assert!((beta / 0.0015394460133257578978 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newton_finds_cubic_root() {
        let r = safeguarded_newton(|x| x * x * x - 2.0, |x| 3.0 * x * x, 0.0, 2.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
        assert!(safeguarded_newton(|x| x * x + 1.0, |x| 2.0 * x, -1.0, 1.0).is_none());
    }
}
