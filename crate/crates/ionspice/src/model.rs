//! Two-region compact model of the iontronic bipolar diode.
//!
//! The device is a series access resistance `r_e` feeding a parallel RC pair.
//! Both the junction resistance and the junction capacitance are
//! piecewise-constant in the internal junction voltage `vc` (the voltage
//! across the RC pair): one value set for `vc >= 0` (forward) and one for
//! `vc < 0` (reverse). The state variable carried by the transient solver is
//! the stored charge `q`, not `vc`, so the capacitance switch at `vc = 0`
//! conserves charge: `q(vc)` is continuous and `q(0) = 0` on both branches.
//!
//! A constant-phase-element descriptor is included for frequency-domain
//! evaluation only; no fractional time stepping is performed anywhere.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Errors from model evaluation and parameter handling.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid diode parameters: {0}")]
    InvalidParams(String),
    #[error("cpe requires omega > 0, got {0}")]
    NonPositiveOmega(f64),
    #[error("cpe parameters require y0 > 0 and 0 < alpha <= 1")]
    InvalidCpe,
    #[error("step-response trajectory would cross vc = 0; use numeric integration")]
    RegionCrossing,
    #[error("malformed parameter document at line {line}: {message}")]
    BadDocument { line: usize, message: String },
}

/// Operating region of the junction, selected by the sign of `vc`.
///
/// The tie `vc = 0` belongs to the forward region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Forward,
    Reverse,
}

/// The five calibrated constants of the compact model.
///
/// Defaults are the published calibration of the fabricated device:
/// access resistance 5.5e5 Ω, junction resistance 2.9e5 Ω forward /
/// 4.84e7 Ω reverse, junction capacitance 3.74e-4 F forward /
/// 9.93e-7 F reverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeParams {
    /// Series access resistance (Ω), dominated by the microchannels.
    pub r_e: f64,
    /// Junction resistance in the forward region (Ω).
    pub r_p_fwd: f64,
    /// Junction resistance in the reverse region (Ω).
    pub r_p_rev: f64,
    /// Junction capacitance in the forward region (F).
    pub c_p_fwd: f64,
    /// Junction capacitance in the reverse region (F).
    pub c_p_rev: f64,
}

impl Default for DiodeParams {
    fn default() -> Self {
        Self {
            r_e: 5.5e5,
            r_p_fwd: 2.9e5,
            r_p_rev: 4.84e7,
            c_p_fwd: 3.74e-4,
            c_p_rev: 9.93e-7,
        }
    }
}

impl DiodeParams {
    /// Checks that all five values are strictly positive and finite and that
    /// the reverse junction resistance exceeds the forward one (the device
    /// rectifies). Sampled parameter sets may relax the ordering check; see
    /// [`DiodeParams::validate_relaxed`].
    pub fn validate(&self) -> Result<(), ModelError> {
        self.validate_relaxed()?;
        if self.r_p_rev <= self.r_p_fwd {
            return Err(ModelError::InvalidParams(format!(
                "r_p_rev ({}) must exceed r_p_fwd ({})",
                self.r_p_rev, self.r_p_fwd
            )));
        }
        Ok(())
    }

    /// Positivity/finiteness only, without the `r_p_rev > r_p_fwd` ordering.
    /// Monte Carlo draws may invert the ordering; such instances are legal
    /// inputs to the solver and are reported as warnings by validation.
    pub fn validate_relaxed(&self) -> Result<(), ModelError> {
        for (name, v) in self.fields() {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Junction resistance for the given region.
    pub fn r_p(&self, region: Region) -> f64 {
        match region {
            Region::Forward => self.r_p_fwd,
            Region::Reverse => self.r_p_rev,
        }
    }

    /// Junction capacitance for the given region.
    pub fn c_p(&self, region: Region) -> f64 {
        match region {
            Region::Forward => self.c_p_fwd,
            Region::Reverse => self.c_p_rev,
        }
    }

    /// Total steady-state resistance `r_e + r_p` for the given region.
    pub fn r_total(&self, region: Region) -> f64 {
        self.r_e + self.r_p(region)
    }

    fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("r_e", self.r_e),
            ("r_p_fwd", self.r_p_fwd),
            ("r_p_rev", self.r_p_rev),
            ("c_p_fwd", self.c_p_fwd),
            ("c_p_rev", self.c_p_rev),
        ]
    }

    /// Serializes the parameters as a flat `key = value` document
    /// (SI units, one key per line).
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.fields() {
            out.push_str(&format!("{name} = {}\n", crate::netlist::format_number(v)));
        }
        out
    }

    /// Parses a flat key-value document produced by [`DiodeParams::to_document`].
    /// Unknown keys are rejected; missing keys keep their default value.
    pub fn from_document(text: &str) -> Result<Self, ModelError> {
        let mut params = Self::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ModelError::BadDocument {
                line: idx + 1,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| ModelError::BadDocument {
                line: idx + 1,
                message: format!("bad number `{}`", value.trim()),
            })?;
            if seen.insert(key.to_string(), idx + 1).is_some() {
                return Err(ModelError::BadDocument {
                    line: idx + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
            match key {
                "r_e" => params.r_e = value,
                "r_p_fwd" => params.r_p_fwd = value,
                "r_p_rev" => params.r_p_rev = value,
                "c_p_fwd" => params.c_p_fwd = value,
                "c_p_rev" => params.c_p_rev = value,
                other => {
                    return Err(ModelError::BadDocument {
                        line: idx + 1,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        params.validate_relaxed()?;
        Ok(params)
    }
}

/// Constant-phase-element descriptor, `Z = 1 / (y0 (jw)^alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpeParams {
    /// CPE constant (S·s^alpha).
    pub y0: f64,
    /// Dispersion coefficient; `alpha = 1` is an ideal capacitor.
    pub alpha: f64,
}

impl CpeParams {
    pub fn new(y0: f64, alpha: f64) -> Result<Self, ModelError> {
        if !(y0 > 0.0 && y0.is_finite() && alpha > 0.0 && alpha <= 1.0) {
            return Err(ModelError::InvalidCpe);
        }
        Ok(Self { y0, alpha })
    }
}

/// Internal state of one diode at an accepted solver time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeState {
    /// Voltage across the parallel RC pair (V).
    pub vc: f64,
    /// Stored junction charge (C); always equals `charge(params, vc)`.
    pub q: f64,
}

/// Region selection: forward for `vc >= 0`, reverse for `vc < 0`.
pub fn region(vc: f64) -> Result<Region, ModelError> {
    if !vc.is_finite() {
        return Err(ModelError::NonFinite("vc"));
    }
    Ok(if vc >= 0.0 {
        Region::Forward
    } else {
        Region::Reverse
    })
}

/// Current through the junction resistance at internal voltage `vc`.
/// Piecewise linear, continuous at zero.
pub fn branch_current(p: &DiodeParams, vc: f64) -> f64 {
    if vc >= 0.0 {
        vc / p.r_p_fwd
    } else {
        vc / p.r_p_rev
    }
}

/// Stored junction charge at internal voltage `vc`.
///
/// `q(vc) = c_p(region(vc)) * vc`; continuous and strictly increasing,
/// with `q(0) = 0`, so region crossings conserve charge.
pub fn charge(p: &DiodeParams, vc: f64) -> f64 {
    if vc >= 0.0 {
        p.c_p_fwd * vc
    } else {
        p.c_p_rev * vc
    }
}

/// Inverse of [`charge`]: internal voltage holding charge `q`.
pub fn voltage_from_charge(p: &DiodeParams, q: f64) -> f64 {
    if q >= 0.0 {
        q / p.c_p_fwd
    } else {
        q / p.c_p_rev
    }
}

/// Linearization point for companion models: `(1/r_p, c_p)` in the region
/// of `vc` (the tie at zero takes the forward values).
pub fn small_signal(p: &DiodeParams, vc: f64) -> (f64, f64) {
    if vc >= 0.0 {
        (1.0 / p.r_p_fwd, p.c_p_fwd)
    } else {
        (1.0 / p.r_p_rev, p.c_p_rev)
    }
}

/// Single-region relaxation time `tau = c_p r_p r_e / (r_p + r_e)`.
pub fn time_constant(p: &DiodeParams, region: Region) -> f64 {
    let r_p = p.r_p(region);
    p.c_p(region) * r_p * p.r_e / (r_p + p.r_e)
}

/// Ratio of reverse to forward steady-state total resistance.
pub fn rectification_ratio(p: &DiodeParams) -> f64 {
    (p.r_e + p.r_p_rev) / (p.r_e + p.r_p_fwd)
}

/// Closed-form diode current for a voltage step, valid while the trajectory
/// stays inside a single region.
///
/// For a device driven by a constant `v_in` from initial charge `q0`, the
/// current is `v_in/(r_e+r_p) - (A/(c_p r_e)) exp(-t/tau)` with
/// `A = q0 - v_in c_p r_p/(r_e+r_p)` and `tau` from [`time_constant`].
/// Returns an error when the implied trajectory would cross `vc = 0`, in
/// which case callers fall back to numeric integration.
pub fn analytic_step_response(
    p: &DiodeParams,
    v_in: f64,
    q0: f64,
    t: f64,
) -> Result<f64, ModelError> {
    if !v_in.is_finite() || !q0.is_finite() || !t.is_finite() || t < 0.0 {
        return Err(ModelError::NonFinite("v_in/q0/t"));
    }
    // The region is set by the final state; v_in = 0 decays inside the
    // region of the initial charge.
    let reg = if v_in != 0.0 {
        region(v_in)?
    } else {
        region(q0)?
    };
    let r_p = p.r_p(reg);
    let c = p.c_p(reg);
    let vc0 = q0 / c;
    let vc_inf = v_in * r_p / (p.r_e + r_p);
    // Single-exponential evolution from vc0 to vc_inf: monotone, so it stays
    // in one region iff the endpoints do not straddle zero.
    if vc0 * vc_inf < 0.0 {
        return Err(ModelError::RegionCrossing);
    }
    if region(vc0)? != reg && vc0 != 0.0 {
        return Err(ModelError::RegionCrossing);
    }
    let tau = time_constant(p, reg);
    let a = q0 - v_in * c * r_p / (p.r_e + r_p);
    Ok(v_in / (p.r_e + r_p) - a / (c * p.r_e) * (-t / tau).exp())
}

/// Impedance of a constant phase element at angular frequency `omega`,
/// principal branch: `1/(y0 omega^alpha) * exp(-j alpha pi/2)`.
pub fn cpe_impedance(c: &CpeParams, omega: f64) -> Result<Complex64, ModelError> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(ModelError::NonPositiveOmega(omega));
    }
    let magnitude = 1.0 / (c.y0 * omega.powf(c.alpha));
    Ok(Complex64::from_polar(magnitude, -c.alpha * FRAC_PI_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_relative_eq, assert_ulps_eq};
    use proptest::prelude::*;

    #[test]
    fn region_tie_breaks_forward() {
        assert_eq!(region(0.0).unwrap(), Region::Forward);
        assert_eq!(region(0.3).unwrap(), Region::Forward);
        assert_eq!(region(-1e-12).unwrap(), Region::Reverse);
        assert!(region(f64::NAN).is_err());
    }

    #[test]
    fn branch_current_matches_region_resistances() {
        let p = DiodeParams::default();
        assert_eq!(branch_current(&p, 0.0), 0.0);
        assert_relative_eq!(branch_current(&p, 0.29), 1.0e-6, max_relative = 1e-12);
        assert_relative_eq!(branch_current(&p, -0.484), -1.0e-8, max_relative = 1e-12);
    }

    #[test]
    fn charge_is_piecewise_linear_through_zero() {
        let p = DiodeParams::default();
        assert_eq!(charge(&p, 0.0), 0.0);
        assert_relative_eq!(charge(&p, 1.0), 3.74e-4, max_relative = 1e-12);
        assert_relative_eq!(charge(&p, -1.0), -9.93e-7, max_relative = 1e-12);
    }

    #[test]
    fn small_signal_uses_region_constants() {
        let p = DiodeParams::default();
        assert_eq!(small_signal(&p, 0.5), (1.0 / 2.9e5, 3.74e-4));
        assert_eq!(small_signal(&p, -0.5), (1.0 / 4.84e7, 9.93e-7));
        assert_eq!(small_signal(&p, 0.0), small_signal(&p, 0.5));
    }

    #[test]
    fn step_response_peak_and_steady_state() {
        let p = DiodeParams::default();
        let i0 = analytic_step_response(&p, 1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(i0, 1.0 / 5.5e5, max_relative = 1e-12);
        let i_inf = analytic_step_response(&p, 1.0, 0.0, 1e9).unwrap();
        assert_relative_eq!(i_inf, 1.0 / 8.4e5, max_relative = 1e-9);
    }

    #[test]
    fn time_constants_match_published_values() {
        let p = DiodeParams::default();
        let tau_fwd = time_constant(&p, Region::Forward);
        let tau_rev = time_constant(&p, Region::Reverse);
        assert_relative_eq!(tau_fwd, 71.0, max_relative = 0.02);
        assert_relative_eq!(tau_rev, 0.54, max_relative = 0.02);
    }

    #[test]
    fn step_response_flags_region_crossings() {
        let p = DiodeParams::default();
        // Positive stored charge driven to a negative steady state crosses zero.
        let err = analytic_step_response(&p, -1.0, 1e-5, 1.0).unwrap_err();
        assert!(matches!(err, ModelError::RegionCrossing));
        // Decay to zero from rest within one region is fine.
        assert_eq!(analytic_step_response(&p, 0.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn cpe_impedance_examples() {
        let ideal = CpeParams::new(1.0, 1.0).unwrap();
        let z = cpe_impedance(&ideal, 1.0).unwrap();
        assert_ulps_eq!(z.im, -1.0, max_ulps = 4);
        assert!(z.re.abs() < 1e-16);

        let half = CpeParams::new(1.0, 0.5).unwrap();
        let z = cpe_impedance(&half, 1.0).unwrap();
        assert_relative_eq!(z.norm(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(z.arg().to_degrees(), -45.0, max_relative = 1e-12);

        let c2 = CpeParams::new(2.0, 1.0).unwrap();
        let z = cpe_impedance(&c2, 10.0).unwrap();
        assert_relative_eq!(z.norm(), 0.05, max_relative = 1e-12);

        assert!(cpe_impedance(&ideal, 0.0).is_err());
    }

    #[test]
    fn cpe_alpha_one_is_ideal_capacitor() {
        let c = 4.7e-6;
        let cpe = CpeParams::new(c, 1.0).unwrap();
        for omega in [0.1, 1.0, 37.0, 1e6] {
            let z = cpe_impedance(&cpe, omega).unwrap();
            let ideal = Complex64::new(0.0, -1.0 / (omega * c));
            assert_relative_eq!(z.im, ideal.im, max_relative = 1e-12);
            assert!(z.re.abs() <= 1e-12 * z.im.abs());
        }
    }

    #[test]
    fn rectification_ratio_examples() {
        let p = DiodeParams::default();
        assert_relative_eq!(rectification_ratio(&p), 4.895e7 / 8.4e5, max_relative = 1e-12);
        let flat = DiodeParams {
            r_p_rev: p.r_p_fwd,
            ..p
        };
        assert_eq!(rectification_ratio(&flat), 1.0);
        let bare = DiodeParams {
            r_e: f64::MIN_POSITIVE,
            r_p_rev: 100.0,
            r_p_fwd: 1.0,
            ..p
        };
        assert_relative_eq!(rectification_ratio(&bare), 100.0, max_relative = 1e-9);
    }

    #[test]
    fn parameter_document_round_trips() {
        let p = DiodeParams::default();
        let doc = p.to_document();
        let back = DiodeParams::from_document(&doc).unwrap();
        assert_eq!(p, back);
        assert!(DiodeParams::from_document("r_e = -3").is_err());
        assert!(DiodeParams::from_document("bogus = 1").is_err());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = DiodeParams::default();
        p.r_p_rev = p.r_p_fwd / 2.0;
        assert!(p.validate().is_err());
        assert!(p.validate_relaxed().is_ok());
        p.c_p_fwd = 0.0;
        assert!(p.validate_relaxed().is_err());
    }

    proptest! {
        #[test]
        fn charge_is_continuous_and_increasing(
            vc in -2.0f64..2.0,
            dv in 1e-9f64..1e-3,
        ) {
            let p = DiodeParams::default();
            prop_assert!(charge(&p, vc + dv) > charge(&p, vc));
            // Continuity at the region boundary.
            let eps = 1e-15;
            prop_assert!((charge(&p, eps) - charge(&p, -eps)).abs() < 1e-18);
        }

        #[test]
        fn branch_current_is_nondecreasing_and_zero_at_origin(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let p = DiodeParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(branch_current(&p, lo) <= branch_current(&p, hi));
            prop_assert_eq!(branch_current(&p, 0.0), 0.0);
        }

        #[test]
        fn charge_round_trips_through_voltage(q in -1e-3f64..1e-3) {
            let p = DiodeParams::default();
            let vc = voltage_from_charge(&p, q);
            prop_assert!((charge(&p, vc) - q).abs() <= 1e-12 * q.abs().max(1e-30));
        }
    }
}
