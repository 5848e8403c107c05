//! JSON file formats.
//!
//! A model file is an object with keys `num_states`, `num_actions`,
//! `gamma`, `r_max`, `transition` (`[s][a][s']`), `reward_support` and
//! `reward_dist` (`[s][a][k]`). A baseline file holds the converged table
//! and its greedy policy; any JSON object with a `q` key (`[s][a]`) can be
//! used where a Q-table is read.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tmlmc_core::{QTable, TabularMDP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub r_max: f64,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward_support: Vec<f64>,
    pub reward_dist: Vec<Vec<Vec<f64>>>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &TabularMDP) -> Self {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let cube = |row: &dyn Fn(usize, usize) -> Vec<f64>| -> Vec<Vec<Vec<f64>>> {
            (0..ns).map(|s| (0..na).map(|a| row(s, a)).collect()).collect()
        };
        MdpFile {
            num_states: ns,
            num_actions: na,
            gamma: mdp.gamma(),
            r_max: mdp.r_max(),
            transition: cube(&|s, a| mdp.transition_row(s, a).to_vec()),
            reward_support: mdp.reward_support().to_vec(),
            reward_dist: cube(&|s, a| mdp.reward_row(s, a).to_vec()),
        }
    }

    pub fn to_mdp(&self) -> Result<TabularMDP> {
        let flatten = |name: &str, cube: &[Vec<Vec<f64>>], width: usize| -> Result<Vec<f64>> {
            if cube.len() != self.num_states || cube.iter().any(|rows| rows.len() != self.num_actions) {
                bail!("`{name}` must have shape [{}][{}][..]", self.num_states, self.num_actions);
            }
            let flat: Vec<f64> = cube.iter().flatten().flatten().copied().collect();
            if flat.len() != self.num_states * self.num_actions * width {
                bail!("every `{name}` row must have {width} entries");
            }
            Ok(flat)
        };
        let transition = flatten("transition", &self.transition, self.num_states)?;
        let reward_dist = flatten("reward_dist", &self.reward_dist, self.reward_support.len())?;
        Ok(TabularMDP::new(
            self.num_states,
            self.num_actions,
            transition,
            self.reward_support.clone(),
            reward_dist,
            self.gamma,
            self.r_max,
        )?)
    }
}

pub fn read_mdp(path: &Path) -> Result<TabularMDP> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: MdpFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.to_mdp()
}

pub fn write_mdp(path: &Path, mdp: &TabularMDP) -> Result<()> {
    write_json(path, &MdpFile::from_mdp(mdp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFile {
    pub divergence: String,
    pub sigma: f64,
    pub gamma: f64,
    pub tol: f64,
    pub iterations: usize,
    pub residual: f64,
    pub q: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub policy: Vec<usize>,
}

#[derive(Deserialize)]
struct QOnly {
    q: Vec<Vec<f64>>,
}

/// Reads the `q` table from a baseline file or any object with a `q` key.
pub fn read_q(path: &Path) -> Result<QTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: QOnly = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(QTable::from_rows(&file.q)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
