//! Closed-form AdS3 and BTZ energetics used as the comparison theory.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdSParams {
    pub ell: f64,
    pub mass: f64,
    pub newton_g: f64,
    /// Boundary circumference.
    pub circumference: f64,
    /// Boundary velocity.
    pub velocity: f64,
}

impl AdSParams {
    pub fn new(ell: f64, mass: f64, newton_g: f64, circumference: f64, velocity: f64) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(Error::Parameter(format!("AdS radius must be positive, got {ell}")));
        }
        if !(mass >= 0.0) {
            return Err(Error::Parameter(format!("mass must be non-negative, got {mass}")));
        }
        if !(circumference > 0.0) {
            return Err(Error::Parameter(format!("circumference must be positive, got {circumference}")));
        }
        Ok(Self {
            ell,
            mass,
            newton_g,
            circumference,
            velocity,
        })
    }

    /// `ℓ = 1/ln 2`, `v = 1`, `L = 2π`.
    pub fn lattice_units(mass: f64, newton_g: f64) -> Self {
        Self {
            ell: 1.0 / LN_2,
            mass,
            newton_g,
            circumference: 2.0 * PI,
            velocity: 1.0,
        }
    }

    /// Bulk speed of light `c = 2πℓv/L`.
    pub fn c(&self) -> f64 {
        unit_conversion(self)
    }
}

pub fn unit_conversion(p: &AdSParams) -> f64 {
    2.0 * PI * p.ell * p.velocity / p.circumference
}

pub fn one_particle_energy(p: &AdSParams, rho: f64, p_rho: f64, p_theta: f64) -> Result<f64> {
    let x = rho / p.ell;
    let c = p.c();
    let centrifugal = if p_theta == 0.0 {
        0.0
    } else {
        let sh = x.sinh();
        if sh == 0.0 {
            return Err(Error::SingularCentrifugal);
        }
        (p_theta * c / (p.ell * sh)).powi(2)
    };
    let mc2 = p.mass * c * c;
    Ok(x.cosh() * (mc2 * mc2 + (p_rho * c).powi(2) + centrifugal).sqrt())
}

/// Probe energy in the static BTZ background sourced by a particle of mass `m` at the origin.
pub fn btz_energy(p: &AdSParams, rho: f64, p_rho: f64, p_theta: f64) -> Result<f64> {
    let x = rho / p.ell;
    let c = p.c();
    let ch2 = x.cosh().powi(2);
    let lapse = ch2 - 8.0 * p.newton_g * p.mass / (c * c);
    if lapse < 0.0 {
        return Err(Error::Parameter(format!("radius {rho} lies inside the horizon")));
    }
    let centrifugal = if p_theta == 0.0 {
        0.0
    } else {
        let sh = x.sinh();
        if sh == 0.0 {
            return Err(Error::SingularCentrifugal);
        }
        (p_theta * c / (p.ell * sh)).powi(2)
    };
    let mc2 = p.mass * c * c;
    Ok(lapse.sqrt() * (mc2 * mc2 + lapse / ch2 * (p_rho * c).powi(2) + centrifugal).sqrt())
}

/// Super-AdS expansion of the momentum-free BTZ energy: `mc² cosh - 4Gm²/cosh`.
pub fn btz_energy_expansion(p: &AdSParams, rho: f64) -> f64 {
    let ch = (rho / p.ell).cosh();
    let c = p.c();
    p.mass * c * c * ch - 4.0 * p.newton_g * p.mass * p.mass / ch
}

pub fn boost_factor(p: &AdSParams, rho1: f64, rho2: f64) -> f64 {
    (rho1 / p.ell).cosh() / ((rho1 - rho2) / p.ell).cosh()
}

pub fn boost_factor_asymptotic(p: &AdSParams, rho1: f64, rho2: f64) -> f64 {
    (rho1.min(rho2) / p.ell).exp()
}

pub fn radial_gravity_potential(p: &AdSParams, rho1: f64, rho2: f64) -> f64 {
    let gm2 = p.newton_g * p.mass * p.mass;
    -boost_factor(p, rho1, rho2) * 4.0 * gm2 / ((rho1 - rho2) / p.ell).cosh()
}

pub fn radial_gravity_potential_asymptotic(p: &AdSParams, rho1: f64, rho2: f64) -> f64 {
    let gm2 = p.newton_g * p.mass * p.mass;
    -boost_factor_asymptotic(p, rho1, rho2) * 8.0 * gm2 * (-(rho1 - rho2).abs() / p.ell).exp()
}

/// Bracket of the angular potential as a function of `r = |s|/ℓ`.
pub fn angular_bracket(r: f64) -> f64 {
    0.5 * r * r * (1.0 + 1.0 / (1.0 + 0.25 * r * r).sqrt()) - 1.0
}

pub fn angular_gravity_potential(p: &AdSParams, rho: f64, arclength: f64) -> f64 {
    let gm2 = p.newton_g * p.mass * p.mass;
    (rho / p.ell).cosh() * 4.0 * gm2 * angular_bracket(arclength / p.ell)
}

/// Root of the angular bracket, where the angular force changes sign.
pub fn angular_zero_crossing() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if angular_bracket(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> AdSParams {
        AdSParams::new(1.3, 0.7, 0.05, 2.0 * PI, 1.0).unwrap()
    }

    #[test]
    fn rest_energy_at_origin() {
        let p = params();
        let c = p.c();
        assert!((one_particle_energy(&p, 0.0, 0.0, 0.0).unwrap() - p.mass * c * c).abs() < 1e-14);
        assert_eq!(one_particle_energy(&p, 0.0, 0.0, 0.3), Err(Error::SingularCentrifugal));
    }

    #[test]
    fn circular_orbit_energy() {
        let p = params();
        let c = p.c();
        let rho = 2.1;
        let x = rho / p.ell;
        let p_theta = p.mass * c * p.ell * x.sinh().powi(2);
        let e = one_particle_energy(&p, rho, 0.0, p_theta).unwrap();
        let want = p.mass * c * c * x.cosh().powi(2);
        assert!((e - want).abs() < 1e-12 * want);
    }

    #[test]
    fn boost_factor_limits() {
        let p = params();
        assert!((boost_factor(&p, 2.0, 2.0) - (2.0 / p.ell).cosh()).abs() < 1e-14);
        assert!((boost_factor(&p, 2.0, 0.0) - 1.0).abs() < 1e-14);
        let (r2, r1) = (3.5 * p.ell, 7.0 * p.ell);
        let ratio = boost_factor(&p, r1, r2) / boost_factor_asymptotic(&p, r1, r2);
        assert!((ratio - 1.0).abs() < 0.02);
    }

    #[test]
    fn radial_potential_forms() {
        let p = params();
        for (r1, r2) in [(1.0, 2.0), (5.0, 3.0), (0.0, 0.0), (9.0, 4.0)] {
            assert!(radial_gravity_potential(&p, r1, r2) < 0.0);
            assert!(radial_gravity_potential_asymptotic(&p, r1, r2) < 0.0);
        }
        let (r2, r1) = (6.0 * p.ell, 12.0 * p.ell);
        let ratio = radial_gravity_potential(&p, r1, r2) / radial_gravity_potential_asymptotic(&p, r1, r2);
        assert!((ratio - 1.0).abs() < 0.01);
        let collapsed = radial_gravity_potential_asymptotic(&p, r1, r2) / boost_factor_asymptotic(&p, r1, r2);
        let want = -8.0 * p.newton_g * p.mass * p.mass * (-(r1 - r2) / p.ell).exp();
        assert!((collapsed - want).abs() < 1e-15);
    }

    #[test]
    fn angular_potential_forms() {
        let p = params();
        let gm2 = p.newton_g * p.mass * p.mass;
        let rho = 2.0;
        let at_zero = angular_gravity_potential(&p, rho, 0.0);
        assert!((at_zero + 4.0 * gm2 * (rho / p.ell).cosh()).abs() < 1e-14);
        let r = angular_zero_crossing();
        assert!(angular_bracket(r).abs() < 1e-12);
        assert!((r - 1.028899003915194).abs() < 1e-12, "{r}");
        let rho = 4.0 * p.ell;
        let ratio = angular_gravity_potential(&p, rho + p.ell * LN_2, 0.5) / angular_gravity_potential(&p, rho, 0.5);
        assert!((ratio - 2.0).abs() < 0.02);
    }

    #[test]
    fn btz_reduces_to_vacuum() {
        let mut p = params();
        p.newton_g = 0.0;
        for (rho, pr, pt) in [(0.5, 0.0, 0.0), (1.7, 0.3, 0.2), (3.0, -0.4, 1.1)] {
            let a = btz_energy(&p, rho, pr, pt).unwrap();
            let b = one_particle_energy(&p, rho, pr, pt).unwrap();
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn btz_super_ads_expansion() {
        let p = params();
        let rho = 6.0 * p.ell;
        let exact = btz_energy(&p, rho, 0.0, 0.0).unwrap();
        let approx = btz_energy_expansion(&p, rho);
        assert!(((exact - approx) / exact).abs() < 1e-3);
    }

    #[test]
    fn speed_of_light_conversion() {
        let p = AdSParams::new(1.0, 1.0, 0.0, 2.0 * PI, 3.0).unwrap();
        assert!((p.c() - 3.0).abs() < 1e-15);
        let q = AdSParams::lattice_units(1.0, 0.0);
        assert!((q.c() - 1.0 / LN_2).abs() < 1e-15);
        let mut r = q;
        r.circumference *= 2.0;
        assert!((r.c() - q.c() / 2.0).abs() < 1e-15);
        assert!(AdSParams::new(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }
}
