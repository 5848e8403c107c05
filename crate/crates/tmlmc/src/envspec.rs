//! Parsing of `--env` strings.

use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use tmlmc_core::envs::{self, GarnetOptions};
use tmlmc_core::TabularMDP;

/// `garnet:S,A,seed[,stochastic] | robot:alpha,beta | lake:slip | gambler:p,goal`
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Garnet {
        states: usize,
        actions: usize,
        seed: u64,
        stochastic_rewards: bool,
    },
    Robot {
        alpha: f64,
        beta: f64,
    },
    Lake {
        slip: f64,
    },
    Gambler {
        p_head: f64,
        goal: usize,
    },
}

fn parse<T: FromStr>(field: &str, what: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    field.trim().parse().with_context(|| format!("invalid {what} `{field}`"))
}

impl FromStr for EnvSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| anyhow!("expected `kind:params`, got `{s}`"))?;
        let fields: Vec<&str> = rest.split(',').collect();
        let arity = |n: &[usize]| -> Result<()> {
            if n.contains(&fields.len()) {
                Ok(())
            } else {
                bail!("`{kind}` takes {n:?} parameters, got {}", fields.len())
            }
        };
        match kind.trim() {
            "garnet" => {
                arity(&[3, 4])?;
                let stochastic_rewards = match fields.get(3).map(|f| f.trim()) {
                    None => false,
                    Some("stochastic") => true,
                    Some("fixed") => false,
                    Some(other) => bail!("unknown garnet reward mode `{other}`"),
                };
                Ok(EnvSpec::Garnet {
                    states: parse(fields[0], "state count")?,
                    actions: parse(fields[1], "action count")?,
                    seed: parse(fields[2], "seed")?,
                    stochastic_rewards,
                })
            }
            "robot" => {
                arity(&[2])?;
                Ok(EnvSpec::Robot {
                    alpha: parse(fields[0], "alpha")?,
                    beta: parse(fields[1], "beta")?,
                })
            }
            "lake" => {
                arity(&[1])?;
                Ok(EnvSpec::Lake {
                    slip: parse(fields[0], "slip")?,
                })
            }
            "gambler" => {
                arity(&[2])?;
                Ok(EnvSpec::Gambler {
                    p_head: parse(fields[0], "head probability")?,
                    goal: parse(fields[1], "goal")?,
                })
            }
            other => bail!("unknown environment `{other}`"),
        }
    }
}

impl EnvSpec {
    pub fn build(&self) -> Result<TabularMDP> {
        let mdp = match *self {
            EnvSpec::Garnet {
                states,
                actions,
                seed,
                stochastic_rewards,
            } => envs::garnet_with(
                states,
                actions,
                seed,
                &GarnetOptions {
                    stochastic_rewards,
                    ..GarnetOptions::default()
                },
            )?,
            EnvSpec::Robot { alpha, beta } => envs::recycling_robot(alpha, beta)?,
            EnvSpec::Lake { slip } => envs::frozen_lake_4x4(slip)?,
            EnvSpec::Gambler { p_head, goal } => envs::gambler(p_head, goal)?,
        };
        Ok(mdp)
    }
}
