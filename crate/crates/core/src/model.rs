//! Physical parameters, their dimensionless groups, the chamber geometry and
//! the oxygen consumption cut-off function.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{MacGrid, ScalarField, VectorField};

/// Raw physical constants of the chamber experiment. All strictly positive,
/// with the bacteria denser than the fluid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// fluid viscosity [Pa s]
    pub eta: f64,
    /// bacterial diffusivity [m^2/s]
    pub d_n: f64,
    /// oxygen diffusivity [m^2/s]
    pub d_c: f64,
    /// fluid density [kg/m^3]
    pub rho: f64,
    /// bacterial density [kg/m^3]
    pub rho_b: f64,
    /// bacterial volume [m^3]
    pub v_b: f64,
    /// characteristic cell density [1/m^3]
    pub n_r: f64,
    /// characteristic length [m]
    pub l: f64,
    /// chemotactic sensitivity
    pub chi_bar: f64,
    /// ambient oxygen concentration
    pub c_air: f64,
    /// oxygen consumption rate
    pub k: f64,
    /// gravitational acceleration [m/s^2]
    pub g: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 12] = [
            ("eta", self.eta),
            ("d_n", self.d_n),
            ("d_c", self.d_c),
            ("rho", self.rho),
            ("rho_b", self.rho_b),
            ("v_b", self.v_b),
            ("n_r", self.n_r),
            ("l", self.l),
            ("chi_bar", self.chi_bar),
            ("c_air", self.c_air),
            ("k", self.k),
            ("g", self.g),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        if self.rho_b <= self.rho {
            return Err(Error::InvalidParameter {
                name: "rho_b",
                value: self.rho_b,
                reason: "bacterial density must exceed fluid density",
            });
        }
        Ok(())
    }
}

/// The five dimensionless groups of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionlessGroups {
    /// Schmidt number `eta / (D_n rho)`
    pub s_c: f64,
    /// buoyancy number `V_b n_r (rho_b - rho) L^3 / (eta D_n)`
    pub gamma: f64,
    /// chemotaxis strength `chi_bar c_air / D_n`
    pub chi: f64,
    /// diffusivity ratio `D_c / D_n`
    pub delta: f64,
    /// consumption strength `k n_r L^2 / (c_air D_n)`
    pub beta: f64,
}

impl DimensionlessGroups {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 5] = [
            ("s_c", self.s_c),
            ("gamma", self.gamma),
            ("chi", self.chi),
            ("delta", self.delta),
            ("beta", self.beta),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        Ok(())
    }
}

/// Evaluates the defining ratios of the dimensionless groups.
pub fn dimensionless_from_physical(p: &PhysicalParams) -> Result<DimensionlessGroups> {
    p.validate()?;
    Ok(DimensionlessGroups {
        s_c: p.eta / (p.d_n * p.rho),
        gamma: p.v_b * p.n_r * (p.rho_b - p.rho) * p.l.powi(3) / (p.eta * p.d_n),
        chi: p.chi_bar * p.c_air / p.d_n,
        delta: p.d_c / p.d_n,
        beta: p.k * p.n_r * p.l * p.l / (p.c_air * p.d_n),
    })
}

/// Rectangular chamber `[0,L1] x [0,L2] x [0,L3]`. The bottom face `x3 = 0`
/// is the lower boundary; the five remaining faces form the upper boundary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChamberDomain {
    pub edges: [f64; 3],
}

impl ChamberDomain {
    pub fn new(edges: [f64; 3]) -> Result<ChamberDomain> {
        for (d, &e) in edges.iter().enumerate() {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidParameter {
                    name: ["L1", "L2", "L3"][d],
                    value: e,
                    reason: "edge lengths must be strictly positive",
                });
            }
        }
        let max = edges.iter().cloned().fold(f64::MIN, f64::max);
        let min = edges.iter().cloned().fold(f64::MAX, f64::min);
        if max / min > 1e6 {
            return Err(Error::DegenerateBox { ratio: max / min });
        }
        Ok(ChamberDomain { edges })
    }

    pub fn measure(&self) -> f64 {
        self.edges[0] * self.edges[1] * self.edges[2]
    }

    pub fn max_edge(&self) -> f64 {
        self.edges.iter().cloned().fold(f64::MIN, f64::max)
    }
}

/// Oxygen consumption cut-off `r` together with its certified norms.
///
/// The hypotheses only require `r` bounded, integrable and Lipschitz; the
/// default profile below makes all three norms exact in closed form. Custom
/// profiles carry caller-declared norms, which `validate_by_sampling`
/// checks but never adjusts.
pub struct ConsumptionFunction {
    evaluator: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// exact derivative, when the profile has one in closed form (used by
    /// the manufactured-solution sources)
    derivative: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// `||r||_{L^inf(R)}`
    pub norm_inf: f64,
    /// `||r||_{L^1(R)}`
    pub norm_l1: f64,
    /// `||r||_{Lip(R)}`
    pub norm_lip: f64,
    /// interval outside which r vanishes
    pub support: (f64, f64),
}

impl std::fmt::Debug for ConsumptionFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConsumptionFunction")
            .field("norm_inf", &self.norm_inf)
            .field("norm_l1", &self.norm_l1)
            .field("norm_lip", &self.norm_lip)
            .field("support", &self.support)
            .finish()
    }
}

fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

impl ConsumptionFunction {
    /// C1 compactly supported bump: 0 on `(-inf, 0]`, smooth rise on
    /// `[0, width]`, 1 on `[width, c_star]`, smooth fall on
    /// `[c_star, c_star + width]`, 0 beyond. Exact norms:
    /// `||r||_inf = 1`, `||r||_1 = c_star`, `||r||_Lip = 1.5 / width`.
    pub fn bump(c_star: f64, width: f64) -> Result<ConsumptionFunction> {
        if !(c_star > 0.0) {
            return Err(Error::InvalidParameter {
                name: "c_star",
                value: c_star,
                reason: "must be strictly positive",
            });
        }
        if !(width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "width",
                value: width,
                reason: "must be strictly positive",
            });
        }
        if width > c_star {
            return Err(Error::InvalidParameter {
                name: "width",
                value: width,
                reason: "ramp width must not exceed c_star (empty plateau)",
            });
        }
        let w = width;
        let cs = c_star;
        let eval = move |s: f64| -> f64 {
            if s <= 0.0 || s >= cs + w {
                0.0
            } else if s < w {
                smoothstep(s / w)
            } else if s <= cs {
                1.0
            } else {
                smoothstep((cs + w - s) / w)
            }
        };
        let deriv = move |s: f64| -> f64 {
            let ramp = |t: f64| 6.0 * t * (1.0 - t);
            if s <= 0.0 || s >= cs + w {
                0.0
            } else if s < w {
                ramp(s / w) / w
            } else if s <= cs {
                0.0
            } else {
                -ramp((cs + w - s) / w) / w
            }
        };
        // Each ramp integrates to width/2, the plateau to c_star - width.
        Ok(ConsumptionFunction {
            evaluator: Box::new(eval),
            derivative: Some(Box::new(deriv)),
            norm_inf: 1.0,
            norm_l1: c_star,
            norm_lip: 1.5 / width,
            support: (0.0, c_star + width),
        })
    }

    /// Wraps a custom profile with caller-declared norms.
    pub fn custom(
        evaluator: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        norm_inf: f64,
        norm_l1: f64,
        norm_lip: f64,
        support: (f64, f64),
    ) -> Result<ConsumptionFunction> {
        for (name, v) in [
            ("norm_inf", norm_inf),
            ("norm_l1", norm_l1),
            ("norm_lip", norm_lip),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "declared norm must be finite and nonnegative",
                });
            }
        }
        if support.1 <= support.0 {
            return Err(Error::InvalidParameter {
                name: "support",
                value: support.1 - support.0,
                reason: "support interval must have positive length",
            });
        }
        Ok(ConsumptionFunction {
            evaluator,
            derivative: None,
            norm_inf,
            norm_l1,
            norm_lip,
            support,
        })
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.evaluator)(s)
    }

    /// Exact derivative, when available.
    pub fn eval_deriv(&self, s: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(s))
    }

    /// Checks the declared norms against `samples` pseudo-random points:
    /// bound by `norm_inf`, vanishing outside the support, Lipschitz on
    /// consecutive pairs, and `integral(|r|) <= norm_l1 * (1 + 1e-8)` by
    /// adaptive quadrature.
    pub fn validate_by_sampling(&self, samples: usize, seed: u64) -> Result<()> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = self.support;
        let pad = (b - a).max(1.0);
        let lo = a - pad;
        let hi = b + pad;
        let mut prev: Option<(f64, f64)> = None;
        let mut pts: Vec<f64> = (0..samples).map(|_| rng.gen_range(lo..hi)).collect();
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for s in pts {
            let v = self.eval(s);
            if !(v >= 0.0) || v > self.norm_inf * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter {
                    name: "norm_inf",
                    value: v,
                    reason: "sampled value escapes [0, norm_inf]",
                });
            }
            if (s < a || s > b) && v != 0.0 {
                return Err(Error::InvalidParameter {
                    name: "support",
                    value: s,
                    reason: "sampled value nonzero outside the declared support",
                });
            }
            if let Some((sp, vp)) = prev {
                if (v - vp).abs() > self.norm_lip * (s - sp).abs() * (1.0 + 1e-9) + 1e-14 {
                    return Err(Error::InvalidParameter {
                        name: "norm_lip",
                        value: (v - vp).abs() / (s - sp).abs(),
                        reason: "sampled slope exceeds declared Lipschitz norm",
                    });
                }
            }
            prev = Some((s, v));
        }
        let integral = adaptive_simpson(&|s| self.eval(s).abs(), a, b, 1e-12, 40);
        if integral > self.norm_l1 * (1.0 + 1e-8) {
            return Err(Error::InvalidParameter {
                name: "norm_l1",
                value: integral,
                reason: "quadrature of |r| exceeds declared L1 norm",
            });
        }
        Ok(())
    }
}

/// Adaptive Simpson quadrature with a simple Richardson error control.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, 0.5 * tol, depth - 1) + rec(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    // Split at quarters first so piecewise profiles get resolved.
    let mut total = 0.0;
    let k = 8;
    for i in 0..k {
        let x0 = a + (b - a) * i as f64 / k as f64;
        let x1 = a + (b - a) * (i + 1) as f64 / k as f64;
        total += rec(f, x0, x1, simpson(f, x0, x1), tol / k as f64, depth);
    }
    total
}

/// Problem data: sources, external force and the prescribed totals.
#[derive(Debug, Clone)]
pub struct SourceData {
    pub f_n: ScalarField,
    pub f_c: ScalarField,
    pub force: VectorField,
    /// prescribed total bacteria mass, in [0, 1]
    pub alpha1: f64,
    /// prescribed total oxygen mass, in [0, 1]
    pub alpha2: f64,
}

impl SourceData {
    /// Builds and validates the data. `f_n` must have (near-)zero discrete
    /// mean: integrating the bacteria equation over the box with its no-flux
    /// boundary conditions forces a compatible source. `project_f_n`
    /// subtracts the mean instead of rejecting.
    ///
    /// Totals of exactly zero select the trivial unshifted branch; positive
    /// totals must not exceed one, matching the shifted problem statement.
    pub fn new(
        f_n: ScalarField,
        f_c: ScalarField,
        force: VectorField,
        alpha1: f64,
        alpha2: f64,
        project_f_n: bool,
    ) -> Result<SourceData> {
        f_n.grid.same_grid(&f_c.grid)?;
        f_n.grid.same_grid(&force.grid)?;
        for (name, v) in [("alpha1", alpha1), ("alpha2", alpha2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "totals must lie in [0, 1]",
                });
            }
        }
        let mut f_n = f_n;
        let mean = f_n.mean();
        let scale = f_n.max_abs().max(1.0);
        if project_f_n {
            f_n.project_zero_mean();
        } else if mean.abs() > 1e-8 * scale {
            return Err(Error::InvalidParameter {
                name: "f_n",
                value: mean,
                reason: "discrete mean must vanish (use --project-fn to subtract it)",
            });
        }
        Ok(SourceData {
            f_n,
            f_c,
            force,
            alpha1,
            alpha2,
        })
    }

    /// Bypasses the mean check; used by the manufactured-solution cases
    /// whose sampled sources carry an O(h^2) quadrature mean.
    pub fn new_unchecked(
        f_n: ScalarField,
        f_c: ScalarField,
        force: VectorField,
        alpha1: f64,
        alpha2: f64,
    ) -> SourceData {
        SourceData {
            f_n,
            f_c,
            force,
            alpha1,
            alpha2,
        }
    }

    pub fn zero(grid: &Arc<MacGrid>, alpha1: f64, alpha2: f64) -> SourceData {
        SourceData {
            f_n: ScalarField::zeros(grid),
            f_c: ScalarField::zeros(grid),
            force: VectorField::zeros(grid),
            alpha1,
            alpha2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params() -> PhysicalParams {
        PhysicalParams {
            eta: 1.0,
            d_n: 1.0,
            d_c: 1.0,
            rho: 1.0,
            rho_b: 2.0,
            v_b: 1.0,
            n_r: 1.0,
            l: 1.0,
            chi_bar: 1.0,
            c_air: 1.0,
            k: 1.0,
            g: 9.81,
        }
    }

    #[test]
    fn unit_ratios_give_unit_schmidt() {
        let g = dimensionless_from_physical(&base_params()).unwrap();
        assert_eq!(g.s_c, 1.0);
    }

    #[test]
    fn delta_is_direct_ratio() {
        let mut p = base_params();
        p.d_c = 2.0;
        p.d_n = 4.0;
        let g = dimensionless_from_physical(&p).unwrap();
        assert_eq!(g.delta, 0.5);
    }

    #[test]
    fn water_like_schmidt() {
        let mut p = base_params();
        p.eta = 2e-3;
        p.d_n = 1e-9;
        p.rho = 1e3;
        p.rho_b = 1.1e3;
        // hand arithmetic: 2e-3 / (1e-9 * 1e3) = 2e3
        let g = dimensionless_from_physical(&p).unwrap();
        assert!((g.s_c - 2e3).abs() / 2e3 < 1e-14);
    }

    #[test]
    fn nonpositive_field_is_named() {
        let mut p = base_params();
        p.d_c = 0.0;
        match dimensionless_from_physical(&p) {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "d_c"),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn buoyancy_sign_enforced() {
        let mut p = base_params();
        p.rho_b = 0.5;
        assert!(dimensionless_from_physical(&p).is_err());
    }

    #[test]
    fn bump_plateau_and_support() {
        let r = ConsumptionFunction::bump(1.0, 0.25).unwrap();
        assert_eq!(r.eval(0.625), 1.0); // midpoint of plateau
        assert_eq!(r.eval(-0.5), 0.0);
        assert_eq!(r.eval(1.3), 0.0); // outside support
        assert_eq!(r.norm_inf, 1.0);
        assert_eq!(r.norm_l1, 1.0);
        assert_eq!(r.norm_lip, 6.0);
    }

    #[test]
    fn bump_l1_matches_quadrature() {
        let r = ConsumptionFunction::bump(0.7, 0.2).unwrap();
        let q = adaptive_simpson(&|s| r.eval(s).abs(), r.support.0, r.support.1, 1e-13, 48);
        assert!(
            (q - r.norm_l1).abs() < 1e-10,
            "quadrature {q} vs closed form {}",
            r.norm_l1
        );
    }

    #[test]
    fn bump_norms_dominate_samples() {
        let r = ConsumptionFunction::bump(0.9, 0.3).unwrap();
        r.validate_by_sampling(10_000, 42).unwrap();
    }

    #[test]
    fn custom_with_lying_l1_rejected() {
        let r = ConsumptionFunction::custom(
            Box::new(|s: f64| if (0.0..1.0).contains(&s) { 1.0 } else { 0.0 }),
            1.0,
            0.5, // claims half the true integral
            1e12,
            (0.0, 1.0),
        )
        .unwrap();
        assert!(r.validate_by_sampling(1000, 3).is_err());
    }

    #[test]
    fn empty_plateau_rejected() {
        assert!(ConsumptionFunction::bump(0.1, 0.2).is_err());
    }

    #[test]
    fn zero_mean_source_required() {
        let g = MacGrid::cube(1.0, 4);
        let f_n = ScalarField::constant(&g, 1.0);
        let f_c = ScalarField::zeros(&g);
        let force = VectorField::zeros(&g);
        assert!(SourceData::new(f_n.clone(), f_c.clone(), force.clone(), 0.5, 0.5, false).is_err());
        let s = SourceData::new(f_n, f_c, force, 0.5, 0.5, true).unwrap();
        assert_eq!(s.f_n.mean(), 0.0);
    }

    #[test]
    fn alpha_range_enforced() {
        let g = MacGrid::cube(1.0, 4);
        let mk = |a1: f64| {
            SourceData::new(
                ScalarField::zeros(&g),
                ScalarField::zeros(&g),
                VectorField::zeros(&g),
                a1,
                0.5,
                false,
            )
        };
        assert!(mk(1.5).is_err());
        assert!(mk(-0.1).is_err());
        assert!(mk(0.0).is_ok());
        assert!(mk(1.0).is_ok());
    }
}
