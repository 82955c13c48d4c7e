//! Travelling-salesperson tour construction on Euclidean instances.
//!
//! An episode starts with city 0 in the tour. Each step appends one
//! available city and earns the negative length increase; the step that
//! completes the tour also pays for the closing edge back to city 0.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{EnvKind, Environment, StepOutcome, Transition};
use crate::ansatz::{AnsatzInput, GraphInput};
use crate::error::{QrlError, Result};
use crate::rng::RngStream;

pub const TSP_MIN_CITIES: usize = 4;
pub const TSP_MAX_CITIES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
    optimal_length: f64,
}

impl TspInstance {
    /// Instance over `coords` with the optimum computed exhaustively.
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Result<Self> {
        let n = coords.len();
        if !(2..=TSP_MAX_CITIES).contains(&n) {
            return Err(QrlError::InvalidArgument(format!(
                "TSP instances need 2..={TSP_MAX_CITIES} cities, got {n}"
            )));
        }
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (dx, dy) = (coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]);
                weights[i * n + j] = dx.hypot(dy);
            }
        }
        let mut inst = Self {
            coords,
            weights,
            optimal_length: 0.0,
        };
        inst.optimal_length = tsp_optimal_tour(&inst)?.1;
        if !(inst.optimal_length > 0.0) {
            return Err(QrlError::InvalidArgument("degenerate instance with zero tour length".into()));
        }
        Ok(inst)
    }

    pub fn n_cities(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_cities() + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn optimal_length(&self) -> f64 {
        self.optimal_length
    }

    /// Closed length of `tour`.
    pub fn tour_length(&self, tour: &[usize]) -> f64 {
        let n = tour.len();
        (0..n).map(|k| self.weight(tour[k], tour[(k + 1) % n])).sum()
    }
}

/// Uniform coordinates in the unit square.
pub fn tsp_generate_instance(n_cities: usize, rng: &mut RngStream) -> Result<TspInstance> {
    if !(TSP_MIN_CITIES..=TSP_MAX_CITIES).contains(&n_cities) {
        return Err(QrlError::InvalidArgument(format!(
            "generated instances have {TSP_MIN_CITIES}..={TSP_MAX_CITIES} cities, got {n_cities}"
        )));
    }
    let coords = (0..n_cities).map(|_| [rng.uniform(), rng.uniform()]).collect();
    TspInstance::from_coords(coords)
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exhaustive optimum over tours starting at city 0, one direction per cycle.
pub fn tsp_optimal_tour(instance: &TspInstance) -> Result<(Vec<usize>, f64)> {
    let n = instance.n_cities();
    if n > TSP_MAX_CITIES {
        return Err(QrlError::Resource(format!("exhaustive search is capped at {TSP_MAX_CITIES} cities")));
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = (Vec::new(), f64::INFINITY);
    let mut tour = vec![0; n];
    loop {
        // reversed tours repeat, keep the one whose first step is the smaller city
        if rest.len() < 2 || rest[0] < rest[rest.len() - 1] {
            tour[1..].copy_from_slice(&rest);
            let len = instance.tour_length(&tour);
            if len < best.1 {
                best = (tour.clone(), len);
            }
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    Ok(best)
}

/// `c(T)/c(T*)`.
pub fn approximation_ratio(tour_length: f64, optimal_length: f64) -> Result<f64> {
    if !(optimal_length > 0.0) {
        return Err(QrlError::InvalidArgument("optimal length must be positive".into()));
    }
    Ok(tour_length / optimal_length)
}

/// Partial tour on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TspEpisodeState {
    instance: Arc<TspInstance>,
    tour: Vec<usize>,
    alpha: Vec<f64>,
    length: f64,
    done: bool,
}

impl TspEpisodeState {
    pub fn new(instance: Arc<TspInstance>) -> Self {
        let n = instance.n_cities();
        let mut alpha = vec![PI; n];
        alpha[0] = 0.0;
        Self {
            instance,
            tour: vec![0],
            alpha,
            length: 0.0,
            done: false,
        }
    }

    pub fn instance(&self) -> &TspInstance {
        &self.instance
    }

    pub fn tour(&self) -> &[usize] {
        &self.tour
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Length of the edges added so far, closing edge included once done.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_available(&self, city: usize) -> bool {
        city < self.alpha.len() && self.alpha[city] != 0.0
    }

    pub fn graph_input(&self) -> GraphInput {
        GraphInput {
            n: self.instance.n_cities(),
            weights: self.instance.weights().to_vec(),
            alpha: self.alpha.clone(),
            current: *self.tour.last().expect("tour starts non-empty"),
        }
    }
}

/// Appends `city`; reward is the negative length increase.
pub fn tsp_step(ep: &TspEpisodeState, city: usize) -> Result<Transition<TspEpisodeState>> {
    if ep.done {
        return Err(QrlError::Environment("step after episode end".into()));
    }
    if !ep.is_available(city) {
        return Err(QrlError::Environment(format!("city {city} is not available")));
    }
    let mut next = ep.clone();
    let last = *ep.tour.last().expect("tour starts non-empty");
    let mut added = ep.instance.weight(last, city);
    next.tour.push(city);
    next.alpha[city] = 0.0;
    if next.tour.len() == ep.instance.n_cities() {
        added += ep.instance.weight(city, ep.tour[0]);
        next.done = true;
    }
    next.length += added;
    Ok(Transition {
        state: ep.clone(),
        action: city,
        reward: -added,
        done: next.done,
        next_state: next,
    })
}

/// Writes `n`, one `x y` line per city and the optimal length.
pub fn write_instance(instance: &TspInstance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", instance.n_cities());
    for c in instance.coords() {
        let _ = writeln!(s, "{} {}", c[0], c[1]);
    }
    let _ = writeln!(s, "{}", instance.optimal_length());
    s
}

/// Parses the text form; a stored optimal length must agree with the exhaustive one.
pub fn read_instance(text: &str) -> Result<TspInstance> {
    let bad = |m: &str| QrlError::Format(format!("TSP instance: {m}"));
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let n: usize = lines
        .next()
        .ok_or_else(|| bad("empty file"))?
        .parse()
        .map_err(|_| bad("first line must be the city count"))?;
    let mut coords = Vec::with_capacity(n);
    for k in 0..n {
        let line = lines.next().ok_or_else(|| bad(&format!("missing coordinates for city {k}")))?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(&format!("bad coordinates `{line}`")))?;
        if v.len() != 2 {
            return Err(bad(&format!("expected two coordinates, got `{line}`")));
        }
        coords.push([v[0], v[1]]);
    }
    let stored: Option<f64> = match lines.next() {
        Some(l) => Some(l.parse().map_err(|_| bad(&format!("bad optimal length `{l}`")))?),
        None => None,
    };
    if lines.next().is_some() {
        return Err(bad("trailing content"));
    }
    let inst = TspInstance::from_coords(coords)?;
    if let Some(opt) = stored {
        if (opt - inst.optimal_length()).abs() > 1e-9 {
            return Err(bad(&format!(
                "stored optimum {opt} differs from computed {}",
                inst.optimal_length()
            )));
        }
    }
    Ok(inst)
}

/// Named collection of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct TspDataset {
    pub instances: Vec<Arc<TspInstance>>,
}

impl TspDataset {
    /// Reads every `*.txt` file of `dir` in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "txt"));
        paths.sort();
        if paths.is_empty() {
            return Err(QrlError::Config(format!("no instance files in {}", dir.display())));
        }
        let instances = paths
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p)?;
                read_instance(&text)
                    .map(Arc::new)
                    .map_err(|e| QrlError::Format(format!("{}: {e}", p.display())))
            })
            .collect::<Result<_>>()?;
        Ok(Self { instances })
    }

    /// Writes instance `k` to `dir/NNN.txt`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, inst) in self.instances.iter().enumerate() {
            std::fs::write(dir.join(format!("{k:03}.txt")), write_instance(inst))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Instance `k` is generated from `RngStream::new(seed, k)`.
pub fn generate_dataset(n_cities: usize, count: usize, seed: u64) -> Result<TspDataset> {
    let instances = (0..count)
        .map(|k| tsp_generate_instance(n_cities, &mut RngStream::new(seed, k as u64)).map(Arc::new))
        .collect::<Result<_>>()?;
    Ok(TspDataset { instances })
}

/// Directory of the frozen five-city split (`train` or `eval`) shipped with the crate.
pub fn frozen_dataset_dir(split: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("tsp5").join(split)
}

pub fn frozen_dataset(split: &str) -> Result<TspDataset> {
    if split != "train" && split != "eval" {
        return Err(QrlError::Config(format!("unknown dataset split `{split}`")));
    }
    TspDataset::load_dir(&frozen_dataset_dir(split))
}

/// How an environment picks the instance of each episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TspSampling {
    /// Uniformly at random from the reset stream.
    Random,
    /// Instances in order, wrapping around.
    Cycle,
}

#[derive(Debug, Clone)]
pub struct TspEnv {
    dataset: TspDataset,
    sampling: TspSampling,
    next: usize,
    episode: Option<TspEpisodeState>,
}

impl TspEnv {
    pub fn new(dataset: TspDataset, sampling: TspSampling) -> Result<Self> {
        if dataset.is_empty() {
            return Err(QrlError::Config("TSP environment needs at least one instance".into()));
        }
        Ok(Self {
            dataset,
            sampling,
            next: 0,
            episode: None,
        })
    }

    pub fn episode(&self) -> Option<&TspEpisodeState> {
        self.episode.as_ref()
    }

    pub fn n_cities(&self) -> usize {
        self.dataset.instances[0].n_cities()
    }
}

impl Environment for TspEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Tsp
    }

    fn reset(&mut self, rng: &mut RngStream) -> Result<AnsatzInput> {
        let k = match self.sampling {
            TspSampling::Random => rng.below(self.dataset.len()),
            TspSampling::Cycle => {
                let k = self.next;
                self.next = (self.next + 1) % self.dataset.len();
                k
            }
        };
        let ep = TspEpisodeState::new(self.dataset.instances[k].clone());
        let obs = AnsatzInput::Graph(ep.graph_input());
        self.episode = Some(ep);
        Ok(obs)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let ep = self
            .episode
            .as_ref()
            .ok_or_else(|| QrlError::Environment("step before reset".into()))?;
        let t = tsp_step(ep, action)?;
        let obs = AnsatzInput::Graph(t.next_state.graph_input());
        let (reward, done) = (t.reward, t.done);
        self.episode = Some(t.next_state);
        Ok(StepOutcome {
            observation: obs,
            reward,
            done,
        })
    }

    fn episode_metric(&self) -> Option<f64> {
        let ep = self.episode.as_ref().filter(|e| e.done)?;
        approximation_ratio(ep.length, ep.instance.optimal_length()).ok()
    }
}
