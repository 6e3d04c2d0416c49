use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::{validate_assumption_b, AssumptionBReport, DisorderSpec, EtaLaw, JumpLaw};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, Face};
use crate::rate_functions::face_minimizer;

/// Law of `eta` as given in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaConfig {
    /// `{r, -r}` with equal weights; `r` is centred and scaled. Defaults to `+1` on `+e_i`, `-1` on `-e_i`.
    TwoPoint {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<Vec<f64>>,
    },
    /// Uniform over the listed support vectors.
    Uniform { support: Vec<Vec<f64>> },
    /// Explicit support and weights.
    Weighted { support: Vec<Vec<f64>>, weights: Vec<f64> },
    /// JSON file holding `{"support": [...], "weights": [...]}`.
    File { path: PathBuf },
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig::TwoPoint { r: None }
    }
}

/// Run configuration. Every field has a default; a config file overrides
/// the defaults and command-line flags override the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    /// Face signs; defaults to all `+1`.
    pub face: Option<Vec<i8>>,
    /// Mean kernel in direction order `+e_1, -e_1, +e_2, ...`; defaults to uniform.
    pub alpha: Option<Vec<f64>>,
    pub eta: EtaConfig,
    pub eps: f64,
    pub kappa: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    pub n: usize,
    pub n_list: Vec<usize>,
    /// Tilt in `R^{d-1}`; defaults to zero.
    pub theta: Option<Vec<f64>>,
    /// Boundary point weights; defaults to the face minimizer.
    pub delta: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
    pub max_assignments: u64,
    pub green_truncation: usize,
    pub fourier_radius: f64,
    pub fourier_grid: usize,
    pub tau: Option<f64>,
    pub eps_prime: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 4,
            face: None,
            alpha: None,
            eta: EtaConfig::default(),
            eps: 0.1,
            kappa: None,
            eps_grid: None,
            n: 6,
            n_list: vec![2, 4, 8],
            theta: None,
            delta: None,
            samples: 1000,
            seed: 0,
            max_assignments: 1 << 16,
            green_truncation: 1000,
            fourier_radius: 1.0,
            fourier_grid: 48,
            tau: None,
            eps_prime: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn face(&self) -> Result<Face> {
        match &self.face {
            Some(s) => {
                let f = Face::new(s.clone())?;
                if f.dim() != self.d {
                    return Err(Error::invalid(format!("face has {} signs, d = {}", f.dim(), self.d)));
                }
                Ok(f)
            }
            None => Face::positive(self.d),
        }
    }

    pub fn jump_law(&self) -> Result<JumpLaw<f64>> {
        let law = match &self.alpha {
            Some(a) => JumpLaw::new(a.clone())?,
            None => JumpLaw::uniform(self.d)?,
        };
        if law.dim() != self.d {
            return Err(Error::invalid(format!("alpha has {} entries, expected {}", 2 * law.dim(), 2 * self.d)));
        }
        Ok(law)
    }

    pub fn eta_law(&self, alpha: &JumpLaw<f64>) -> Result<EtaLaw<f64>> {
        match &self.eta {
            EtaConfig::TwoPoint { r: None } => EtaLaw::default_two_point(alpha),
            EtaConfig::TwoPoint { r: Some(r) } => EtaLaw::two_point(alpha, r),
            EtaConfig::Uniform { support } => EtaLaw::uniform(alpha, support.clone()),
            EtaConfig::Weighted { support, weights } => Ok(EtaLaw::new(support.clone(), weights.clone())),
            EtaConfig::File { path } => {
                let text = std::fs::read_to_string(path)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    /// Assumption-B report without rejecting the law.
    pub fn assumption_b(&self) -> Result<AssumptionBReport> {
        let alpha = self.jump_law()?;
        let eta = self.eta_law(&alpha)?;
        Ok(validate_assumption_b(&eta, &alpha))
    }

    /// Fully validated disorder law at `eps`.
    pub fn spec(&self) -> Result<DisorderSpec<f64>> {
        let alpha = self.jump_law()?;
        let eta = self.eta_law(&alpha)?;
        let spec = DisorderSpec {
            alpha,
            eta,
            eps: self.eps,
            kappa: self.kappa,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn theta(&self) -> Result<Vec<f64>> {
        match &self.theta {
            Some(t) if t.len() + 1 == self.d => Ok(t.clone()),
            Some(t) => Err(Error::invalid(format!("theta has {} entries, expected {}", t.len(), self.d - 1))),
            None => Ok(vec![0.0; self.d - 1]),
        }
    }

    pub fn point(&self) -> Result<BoundaryPoint<f64>> {
        let face = self.face()?;
        match &self.delta {
            Some(delta) => BoundaryPoint::new(face, delta.clone()),
            None => Ok(face_minimizer(&self.jump_law()?, &face)?.minimizer),
        }
    }

    pub fn eps_grid(&self) -> Vec<f64> {
        self.eps_grid.clone().unwrap_or_else(crate::phase_scan::default_eps_grid)
    }
}
