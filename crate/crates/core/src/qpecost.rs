//! Phase-estimation cost and guiding-state gate counts with all asymptotic
//! constants set to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DISCLAIMER: &str = "asymptotic scaling only: all O() constants set to 1, logarithmic factors dropped unless named";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpeMode {
    Standard,
    Amplified,
    SingleAncilla,
    HighOverlap,
}

impl std::str::FromStr for QpeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(QpeMode::Standard),
            "amplified" => Ok(QpeMode::Amplified),
            "single-ancilla" => Ok(QpeMode::SingleAncilla),
            "high-overlap" => Ok(QpeMode::HighOverlap),
            other => Err(Error::InvalidInput(format!("unknown QPE mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub mode: QpeMode,
    pub eta: f64,
    pub eps: f64,
    pub repetitions: f64,
    /// In units of inverse energy.
    pub max_evolution_time: f64,
    pub total_evolution_time: f64,
    /// `1 - eta^2`, high-overlap mode only.
    pub delta: Option<f64>,
    pub assumptions: String,
}

/// | mode | repetitions | max time | total time |
/// |---|---|---|---|
/// | standard | `eta^-2` | `eps^-1` | `eps^-1 eta^-2` |
/// | amplified | `eta^-1` | `eps^-1 eta^-1` | `eps^-1 eta^-1` |
/// | single-ancilla | `eta^-4` | `eps^-1` | `eps^-1 eta^-4` |
/// | high-overlap | `eps^-1` | `delta eps^-1` | `delta eps^-2` |
pub fn qpe_cost(eta: f64, eps: f64, mode: QpeMode) -> Result<CostReport> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("overlap eta = {eta} outside (0, 1]")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("precision eps = {eps} must be positive")));
    }
    let (repetitions, max_t, total, delta) = match mode {
        QpeMode::Standard => (eta.powi(-2), 1.0 / eps, 1.0 / (eps * eta * eta), None),
        QpeMode::Amplified => (1.0 / eta, 1.0 / (eps * eta), 1.0 / (eps * eta), None),
        QpeMode::SingleAncilla => (eta.powi(-4), 1.0 / eps, eta.powi(-4) / eps, None),
        QpeMode::HighOverlap => {
            let delta = 1.0 - eta * eta;
            if delta >= 0.5 {
                return Err(Error::InvalidInput(format!(
                    "high-overlap mode needs eta^2 > 1/2, got eta = {eta}"
                )));
            }
            (1.0 / eps, delta / eps, delta / (eps * eps), Some(delta))
        }
    };
    Ok(CostReport {
        mode,
        eta,
        eps,
        repetitions,
        max_evolution_time: max_t,
        total_evolution_time: total,
        delta,
        assumptions: DISCLAIMER.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuidingKind {
    Givens,
    SumOfSlater,
    BoundedExcitation,
    Mps,
}

impl std::str::FromStr for GuidingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "givens" => Ok(GuidingKind::Givens),
            "sum-of-slater" | "sos" => Ok(GuidingKind::SumOfSlater),
            "bounded-excitation" => Ok(GuidingKind::BoundedExcitation),
            "mps" => Ok(GuidingKind::Mps),
            other => Err(Error::InvalidInput(format!("unknown guiding-state kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GateParams {
    pub n_modes: Option<usize>,
    pub n_electrons: Option<usize>,
    /// Number of determinants.
    pub l: Option<usize>,
    pub k_exc: Option<usize>,
    pub bond_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCounts {
    pub kind: GuidingKind,
    pub two_qubit: f64,
    pub toffoli: Option<f64>,
    pub disclaimer: String,
}

fn need(v: Option<usize>, name: &str, kind: GuidingKind) -> Result<f64> {
    v.map(|x| x as f64)
        .ok_or_else(|| Error::InvalidInput(format!("{kind:?} gate count needs '{name}'")))
}

/// Givens: `n (N - n)`; sum-of-Slater: `N L` two-qubit and `L log2 L`
/// Toffoli; bounded excitation: `L k`; MPS: `N D^2`.
pub fn guiding_gate_counts(kind: GuidingKind, p: &GateParams) -> Result<GateCounts> {
    let (two_qubit, toffoli) = match kind {
        GuidingKind::Givens => {
            let n = need(p.n_modes, "n_modes", kind)?;
            let e = need(p.n_electrons, "n_electrons", kind)?;
            if e > n {
                return Err(Error::InvalidInput(format!("{e} electrons in {n} modes")));
            }
            (e * (n - e), None)
        }
        GuidingKind::SumOfSlater => {
            let n = need(p.n_modes, "n_modes", kind)?;
            let l = need(p.l, "l", kind)?;
            if l < 1.0 {
                return Err(Error::InvalidInput("sum-of-Slater needs L >= 1".into()));
            }
            (n * l, Some(l * l.log2()))
        }
        GuidingKind::BoundedExcitation => (need(p.l, "l", kind)? * need(p.k_exc, "k_exc", kind)?, None),
        GuidingKind::Mps => {
            let n = need(p.n_modes, "n_modes", kind)?;
            let d = need(p.bond_dim, "bond_dim", kind)?;
            (n * d * d, None)
        }
    };
    Ok(GateCounts {
        kind,
        two_qubit,
        toffoli,
        disclaimer: DISCLAIMER.to_string(),
    })
}
