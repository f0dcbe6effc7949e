//! Hyperparameter sweeps over a fixed request set: the growing-spheres
//! sparsity weight and the prototype L1 weight.

use serde::{Deserialize, Serialize};

use crate::bench::config::BenchConfig;
use crate::bench::runner::{self, representative_candidate, PreparedDataset};
use crate::bench::seeds::seed_for;
use crate::cf::{Algorithm, CfRequest, Generator, GrowingSpheres, PrototypeCf};
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Growing-spheres L0 weight.
    Gamma,
    /// Prototype L1 weight.
    Beta,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "beta" => Ok(SweepParam::Beta),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub coverage: f64,
    pub mean_spa: Option<f64>,
    pub mean_l1: Option<f64>,
    pub mean_l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub algorithm: Algorithm,
    pub param: String,
    pub dataset: String,
    pub model: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,coverage,mean_spa,mean_l1,mean_l2\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.value,
                r.coverage,
                r.mean_spa.map_or("-".into(), |v| format!("{v}")),
                r.mean_l1.map_or("-".into(), |v| format!("{v}")),
                r.mean_l2.map_or("-".into(), |v| format!("{v}")),
            ));
        }
        out
    }
}

/// Runs the generator over the config's first dataset and first model kind,
/// once per parameter value, against a fixed seeded request set.
pub fn sweep_hyperparameter(
    config: &BenchConfig,
    algorithm: Algorithm,
    param: SweepParam,
    values: &[f64],
) -> Result<SweepTable> {
    match (algorithm, param) {
        (Algorithm::GrowingSpheres, SweepParam::Gamma) => {}
        (Algorithm::Prototype, SweepParam::Beta) => {}
        _ => {
            return Err(Error::InvalidConfig(format!(
                "parameter is not tunable for algorithm '{algorithm}'"
            )))
        }
    }
    config.validate()?;
    let datasets = runner::prepare(config)?;
    let prepared = &datasets[0];
    let kind = config.models.kinds[0];
    let seed = seed_for(config.seed, &["train", &prepared.name, &kind.to_string()]);
    let predictor = runner::train_model(config, &prepared.data, kind, seed)?;

    let mut table = SweepTable {
        algorithm,
        param: match param {
            SweepParam::Gamma => "gamma".into(),
            SweepParam::Beta => "beta".into(),
        },
        dataset: prepared.name.clone(),
        model: kind.to_string(),
        rows: Vec::new(),
    };
    for &value in values {
        let generator: Box<dyn Generator> = match param {
            SweepParam::Gamma => {
                let s = config.algorithms.growing_spheres;
                Box::new(GrowingSpheres {
                    gamma: value,
                    eta0: s.eta0,
                    samples_per_shell: s.samples_per_shell,
                    ..GrowingSpheres::default()
                })
            }
            SweepParam::Beta => {
                let s = config.algorithms.prototype;
                let mut proto = PrototypeCf::new(&prepared.data);
                proto.c = s.c;
                proto.theta = s.theta;
                proto.k_neighbors = s.k_neighbors;
                proto.beta = value;
                Box::new(proto)
            }
        };
        table
            .rows
            .push(run_one_value(config, prepared, &predictor, &*generator, value)?);
    }
    Ok(table)
}

fn run_one_value(
    config: &BenchConfig,
    prepared: &PreparedDataset,
    predictor: &Predictor,
    generator: &dyn Generator,
    value: f64,
) -> Result<SweepRow> {
    let data = &prepared.data;
    let mad_weights = data.mad_weights();
    let mut n_total = 0usize;
    let mut n_found = 0usize;
    let mut spa_sum = 0.0;
    let mut l1_sum = 0.0;
    let mut l2_sum = 0.0;
    for (ordinal, &row) in prepared.instances.iter().enumerate() {
        let x = data.row(row).to_vec();
        for run in 0..config.n_runs {
            // seeds deliberately exclude the parameter value: every sweep
            // point sees the same requests and random streams, so comparing
            // rows isolates the parameter's effect
            let seed = seed_for(
                config.seed,
                &[
                    "sweep",
                    &prepared.name,
                    &generator.algorithm().to_string(),
                    &ordinal.to_string(),
                    &run.to_string(),
                ],
            );
            let request =
                CfRequest::for_instance(data, predictor, x.clone(), seed, config.budget)?;
            let outcome = generator.generate(&request, predictor)?;
            n_total += 1;
            if !outcome.found {
                continue;
            }
            n_found += 1;
            let candidate = representative_candidate(&outcome, &x, &mad_weights)
                .ok_or_else(|| Error::InvalidConfig("found outcome without candidates".into()))?;
            spa_sum +=
                metrics::sparsity(&x, candidate, data.layout(), metrics::CHANGE_TOL)? as f64;
            l1_sum += metrics::l1_norm(&x, candidate)?;
            l2_sum += metrics::l2_norm(&x, candidate)?;
        }
    }
    Ok(SweepRow {
        value,
        coverage: n_found as f64 / n_total.max(1) as f64,
        mean_spa: (n_found > 0).then(|| spa_sum / n_found as f64),
        mean_l1: (n_found > 0).then(|| l1_sum / n_found as f64),
        mean_l2: (n_found > 0).then(|| l2_sum / n_found as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_parameter_pairing_is_rejected() {
        let err = "beta".parse::<SweepParam>().unwrap();
        assert_eq!(err, SweepParam::Beta);
        assert!("epsilon".parse::<SweepParam>().is_err());
    }
}
