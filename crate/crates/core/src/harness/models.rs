//! Models shipped with the workbench, addressable by name.

use crate::error::{Error, Result};
use crate::model::{
    build_impurity_model, hubbard, random_model, EpsilonSpec, Hybridization, ImpurityModel, ImpuritySpec,
    MolecularIntegrals,
};

pub const BUILTIN_NAMES: [&str; 5] = ["impurity8", "impurity8_neargapless", "random6", "hubbard8", "dimer4"];

#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub name: String,
    pub integrals: MolecularIntegrals,
    pub n_electrons: usize,
    pub impurity: Option<ImpurityModel>,
}

/// - `impurity8`: 8 modes, 2 impurity modes, 4 electrons, gap 0.2.
/// - `impurity8_neargapless`: 8 modes with free energies down to 0.002.
/// - `random6`: dense random 6-mode model, 3 electrons.
/// - `hubbard8`: open 4-site Hubbard chain, `t = 1`, `U = 2`, half filling.
/// - `dimer4`: Hubbard dimer, `t = 1`, `U = 2`, 2 electrons.
pub fn builtin(name: &str) -> Result<LoadedModel> {
    let (integrals, n_electrons, impurity) = match name {
        "impurity8" => {
            let m = build_impurity_model(
                8,
                2,
                &EpsilonSpec::Gapped {
                    gap: 0.2,
                    n_negative: Some(4),
                },
                &ImpuritySpec::Random { magnitude: 0.5 },
                Hybridization::RandomOrthogonal,
                7,
            )?;
            (m.integrals.clone(), 4, Some(m))
        }
        "impurity8_neargapless" => {
            let m = build_impurity_model(
                8,
                2,
                &EpsilonSpec::Explicit {
                    values: vec![-0.9, -0.6, -0.3, -0.002, 0.003, 0.35, 0.7, 0.95],
                },
                &ImpuritySpec::Random { magnitude: 0.5 },
                Hybridization::RandomOrthogonal,
                5,
            )?;
            (m.integrals.clone(), 4, Some(m))
        }
        "random6" => (random_model(6, 11)?, 3, None),
        "hubbard8" => (hubbard(4, 1.0, 2.0, false)?, 4, None),
        "dimer4" => (hubbard(2, 1.0, 2.0, false)?, 2, None),
        other => {
            return Err(Error::Config(format!(
                "unknown builtin model '{other}' (known: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(LoadedModel {
        name: name.to_string(),
        integrals,
        n_electrons,
        impurity,
    })
}
