//! Equilibrium chemistry of the H₂SO₄ / NaOH system.
//!
//! The tank contents are described by two reaction invariants: `alpha`, the
//! total sulfate concentration, and `beta`, the sodium concentration. Because
//! the acid-base equilibria are fast, these two numbers fix the hydrogen-ion
//! concentration through the electroneutrality condition, which reduces to a
//! monic quartic in `[H⁺]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Search interval for `[H⁺]`, in log₁₀(mol/L).
pub const LOG_H_MIN: f64 = -16.0;
pub const LOG_H_MAX: f64 = 2.0;

/// Relative tolerance on the returned hydrogen-ion concentration.
pub const ROOT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemistryError {
    #[error("no sign change of the charge balance for [H+] in [1e-16, 1e2] (alpha={alpha}, beta={beta})")]
    NoRoot { alpha: f64, beta: f64 },
    #[error("invalid {name}: {value} (must be {requirement})")]
    InvalidInput { name: &'static str, value: f64, requirement: &'static str },
}

fn require(name: &'static str, value: f64, ok: bool, requirement: &'static str) -> Result<(), ChemistryError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ChemistryError::InvalidInput { name, value, requirement })
    }
}

/// Dissociation constants of sulfuric acid and the ionic product of water,
/// at 25 °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConstants {
    pub k1: f64,
    pub k2: f64,
    pub kw: f64,
}

impl EquilibriumConstants {
    pub const DEFAULT: Self = Self { k1: 1.0e3, k2: 1.2e-2, kw: 1.0e-14 };

    pub fn new(k1: f64, k2: f64, kw: f64) -> Result<Self, ChemistryError> {
        let k = Self { k1, k2, kw };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), ChemistryError> {
        require("k1", self.k1, self.k1 > 0.0, "> 0")?;
        require("k2", self.k2, self.k2 > 0.0, "> 0")?;
        require("kw", self.kw, self.kw > 0.0, "> 0")
    }
}

impl Default for EquilibriumConstants {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Reaction invariants of the mixture, mol/L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonInvariants {
    pub alpha: f64,
    pub beta: f64,
}

impl IonInvariants {
    /// Negative or non-finite invariants are rejected rather than clamped.
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ChemistryError> {
        let inv = Self { alpha, beta };
        inv.validate()?;
        Ok(inv)
    }

    pub fn validate(&self) -> Result<(), ChemistryError> {
        require("alpha", self.alpha, self.alpha >= 0.0, ">= 0")?;
        require("beta", self.beta, self.beta >= 0.0, ">= 0")
    }

    pub const PURE_WATER: Self = Self { alpha: 0.0, beta: 0.0 };
}

/// Coefficients of `h⁴ + a1·h³ + a2·h² + a3·h + a4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl QuarticCoeffs {
    /// Horner evaluation.
    pub fn eval(&self, h: f64) -> f64 {
        (((h + self.a1) * h + self.a2) * h + self.a3) * h + self.a4
    }
}

/// Species concentrations at equilibrium, mol/L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speciation {
    pub h2so4: f64,
    pub hso4: f64,
    pub so4: f64,
    pub na: f64,
    pub h: f64,
    pub oh: f64,
}

impl Speciation {
    pub fn total_sulfate(&self) -> f64 {
        self.h2so4 + self.hso4 + self.so4
    }
}

pub fn quartic_coeffs(inv: IonInvariants, k: EquilibriumConstants) -> QuarticCoeffs {
    let IonInvariants { alpha, beta } = inv;
    let EquilibriumConstants { k1, k2, kw } = k;
    // Grouped so that the near-cancelling acid and base terms are subtracted
    // before scaling by k1; algebraically identical to the expanded form.
    QuarticCoeffs {
        a1: k1 + beta,
        a2: k1 * (beta - alpha + k2) - kw,
        a3: k1 * (k2 * (beta - 2.0 * alpha) - kw),
        a4: -k1 * k2 * kw,
    }
}

/// Bisection in log₁₀ space for a function that is negative below its root
/// and positive above it on `[LOG_H_MIN, LOG_H_MAX]`.
fn bisect_log_h(mut f: impl FnMut(f64) -> f64) -> Option<f64> {
    let (mut lo, mut hi) = (LOG_H_MIN, LOG_H_MAX);
    if f(10f64.powf(lo)) >= 0.0 || f(10f64.powf(hi)) <= 0.0 {
        return None;
    }
    // Width in log10 corresponding to ROOT_REL_TOL relative error in h.
    let width = ROOT_REL_TOL / std::f64::consts::LN_10;
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f(10f64.powf(mid));
        if v > 0.0 {
            hi = mid;
        } else if v < 0.0 {
            lo = mid;
        } else {
            return Some(10f64.powf(mid));
        }
    }
    Some(10f64.powf(0.5 * (lo + hi)))
}

/// Positive real root of the electroneutrality quartic, mol/L.
pub fn hydrogen_ion(inv: IonInvariants, k: EquilibriumConstants) -> Result<f64, ChemistryError> {
    let q = quartic_coeffs(inv, k);
    bisect_log_h(|h| q.eval(h)).ok_or(ChemistryError::NoRoot { alpha: inv.alpha, beta: inv.beta })
}

pub fn ph_of(inv: IonInvariants, k: EquilibriumConstants) -> Result<f64, ChemistryError> {
    Ok(-hydrogen_ion(inv, k)?.log10())
}

pub fn speciation(inv: IonInvariants, k: EquilibriumConstants, h: f64) -> Speciation {
    debug_assert!(h > 0.0);
    let EquilibriumConstants { k1, k2, kw } = k;
    let hso4 = inv.alpha * k1 * h / (h * h + k1 * h + k1 * k2);
    Speciation { h2so4: hso4 * h / k1, hso4, so4: hso4 * k2 / h, na: inv.beta, h, oh: kw / h }
}

/// Positive minus negative charge at a trial `[H⁺]`. Strictly increasing in
/// `h`, zero at the equilibrium concentration.
pub fn charge_balance_residual(inv: IonInvariants, k: EquilibriumConstants, h: f64) -> f64 {
    let s = speciation(inv, k, h);
    (s.na + s.h) - (s.oh + s.hso4 + 2.0 * s.so4)
}

/// pH at each `beta` for a fixed sulfate invariant.
pub fn titration_curve(alpha: f64, betas: &[f64], k: EquilibriumConstants) -> Result<Vec<(f64, f64)>, ChemistryError> {
    if betas.is_empty() {
        return Err(ChemistryError::InvalidInput { name: "beta range length", value: 0.0, requirement: "non-empty" });
    }
    let mut prev = f64::NEG_INFINITY;
    for &b in betas {
        require("beta", b, b >= 0.0 && b >= prev, "non-negative and ascending")?;
        prev = b;
    }
    betas.iter().map(|&beta| Ok((beta, ph_of(IonInvariants::new(alpha, beta)?, k)?))).collect()
}

/// `n` evenly spaced values covering `[0, beta_max]`.
pub fn beta_grid(beta_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| beta_max * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Number of sign changes of the quartic over `samples` log-spaced points in
/// `[1e-16, 1e2]`. Exactly one for any physically meaningful chemistry;
/// anything else flags constants for which the root choice is ambiguous.
pub fn quartic_sign_changes(q: &QuarticCoeffs, samples: usize) -> usize {
    let n = samples.max(2);
    let mut changes = 0;
    let mut prev = q.eval(10f64.powf(LOG_H_MIN)).signum();
    for i in 1..n {
        let lg = LOG_H_MIN + (LOG_H_MAX - LOG_H_MIN) * i as f64 / (n - 1) as f64;
        let s = q.eval(10f64.powf(lg)).signum();
        if s != 0.0 && s != prev {
            if prev != 0.0 {
                changes += 1;
            }
            prev = s;
        }
    }
    changes
}

/// Split fraction `r` (share of the total flow taken by the base stream)
/// whose feed mixture has the requested pH. The feed composition is
/// `alpha = c1·(1 − r)`, `beta = c2·r`.
pub fn split_for_ph(target_ph: f64, c1: f64, c2: f64, k: EquilibriumConstants) -> Result<f64, ChemistryError> {
    let ph_at = |r: f64| -> Result<f64, ChemistryError> { ph_of(IonInvariants::new(c1 * (1.0 - r), c2 * r)?, k) };
    let (lo_ph, hi_ph) = (ph_at(0.0)?, ph_at(1.0)?);
    if !(lo_ph..=hi_ph).contains(&target_ph) {
        return Err(ChemistryError::InvalidInput {
            name: "target pH",
            value: target_ph,
            requirement: "reachable by mixing the two feeds",
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if ph_at(mid)? < target_ph {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// pH range reachable by mixing the two feeds.
pub fn reachable_ph(c1: f64, c2: f64, k: EquilibriumConstants) -> Result<(f64, f64), ChemistryError> {
    Ok((ph_of(IonInvariants::new(c1, 0.0)?, k)?, ph_of(IonInvariants::new(0.0, c2)?, k)?))
}
